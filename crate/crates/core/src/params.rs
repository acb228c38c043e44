//! Simulation parameters and classical drives, in units of the decay rate γ.

use crate::error::{Error, Result};
use crate::linalg::Truncation;

const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub delta_t: f64,
    pub t_max: f64,
    /// Local extent of each emitter.
    pub d_sys: Vec<usize>,
    /// Local extent of each field channel in a time bin, ordered (right, left).
    pub d_t: Vec<usize>,
    /// Per-emitter decay rate into the left channel.
    pub gamma_l: Vec<f64>,
    /// Per-emitter decay rate into the right channel.
    pub gamma_r: Vec<f64>,
    pub tau: f64,
    pub phi: f64,
    pub bond_max: usize,
    pub cutoff: f64,
    pub detuning: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            delta_t: 0.05,
            t_max: 8.0,
            d_sys: vec![2],
            d_t: vec![2, 2],
            gamma_l: vec![0.5],
            gamma_r: vec![0.5],
            tau: 0.0,
            phi: 0.0,
            bond_max: 4,
            cutoff: 1e-12,
            detuning: 0.0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(self.delta_t > 0.0) || !self.delta_t.is_finite() {
            return bad(format!("delta_t must be positive, got {}", self.delta_t));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if self.d_sys.is_empty() || self.d_sys.iter().any(|&d| d < 2) {
            return bad(format!(
                "emitter extents must be at least 2, got {:?}",
                self.d_sys
            ));
        }
        if self.d_t.is_empty() || self.d_t.len() > 2 || self.d_t.iter().any(|&d| d < 2) {
            return bad(format!(
                "bins need one or two channels of extent ≥ 2, got {:?}",
                self.d_t
            ));
        }
        let n = self.d_sys.len();
        if self.gamma_l.len() != n || self.gamma_r.len() != n {
            return bad(format!(
                "need one left and one right rate per emitter ({n}), got {} and {}",
                self.gamma_l.len(),
                self.gamma_r.len()
            ));
        }
        if self
            .gamma_l
            .iter()
            .chain(&self.gamma_r)
            .any(|g| !(*g >= 0.0) || !g.is_finite())
        {
            return bad("decay rates must be finite and nonnegative".into());
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return bad(format!("tau must be nonnegative, got {}", self.tau));
        }
        self.delay_steps()?;
        self.n_steps()?;
        if self.bond_max == 0 {
            return bad("bond_max must be at least 1".into());
        }
        if !(self.cutoff >= 0.0) {
            return bad(format!("cutoff must be nonnegative, got {}", self.cutoff));
        }
        if !self.phi.is_finite() || !self.detuning.is_finite() {
            return bad("phi and detuning must be finite".into());
        }
        Ok(())
    }

    /// Number of time steps covering (0, t_max].
    pub fn n_steps(&self) -> Result<usize> {
        let r = self.t_max / self.delta_t;
        let n = r.round();
        if (r - n).abs() > GRID_TOL * r.max(1.0) || n < 1.0 {
            return Err(Error::InvalidParams(format!(
                "t_max = {} is not a positive multiple of delta_t = {}",
                self.t_max, self.delta_t
            )));
        }
        Ok(n as usize)
    }

    /// τ/Δt as an integer.
    pub fn delay_steps(&self) -> Result<usize> {
        let r = self.tau / self.delta_t;
        let d = r.round();
        if (r - d).abs() > GRID_TOL * r.max(1.0) {
            return Err(Error::InvalidParams(format!(
                "tau = {} is not a multiple of delta_t = {}",
                self.tau, self.delta_t
            )));
        }
        Ok(d as usize)
    }

    pub fn n_emitters(&self) -> usize {
        self.d_sys.len()
    }

    pub fn sys_dim(&self) -> usize {
        self.d_sys.iter().product()
    }

    pub fn bin_dim(&self) -> usize {
        self.d_t.iter().product()
    }

    pub fn n_channels(&self) -> usize {
        self.d_t.len()
    }

    pub fn truncation(&self) -> Truncation {
        Truncation::new(self.bond_max, self.cutoff)
    }

    /// Step grid t_0 … t_n.
    pub fn times(&self) -> Result<Vec<f64>> {
        let n = self.n_steps()?;
        Ok((0..=n).map(|k| k as f64 * self.delta_t).collect())
    }
}

/// Classical drive Ω(t) entering as Ω(t)(σ⁺ + σ⁻).
#[derive(Debug, Clone, PartialEq)]
pub enum Pump {
    None,
    Cw {
        omega: f64,
    },
    /// Gaussian pulse whose rotation angle 2∫Ω dt equals `area`.
    Gaussian {
        area: f64,
        t_c: f64,
        sigma: f64,
    },
    /// Ω(t_k) per step.
    Samples(Vec<f64>),
}

impl Pump {
    pub fn validate(&self, n_steps: usize) -> Result<()> {
        match self {
            Pump::None => Ok(()),
            Pump::Cw { omega } if omega.is_finite() => Ok(()),
            Pump::Gaussian { area, t_c, sigma }
                if area.is_finite() && t_c.is_finite() && *sigma > 0.0 =>
            {
                Ok(())
            }
            Pump::Samples(s) if s.len() == n_steps && s.iter().all(|x| x.is_finite()) => Ok(()),
            Pump::Samples(s) if s.len() != n_steps => Err(Error::InvalidParams(format!(
                "pump has {} samples for {n_steps} steps",
                s.len()
            ))),
            _ => Err(Error::InvalidParams(format!("malformed pump {self:?}"))),
        }
    }

    /// Continuous-time amplitude; sample pumps are piecewise constant.
    pub fn omega(&self, t: f64, delta_t: f64) -> f64 {
        match self {
            Pump::None => 0.0,
            Pump::Cw { omega } => *omega,
            Pump::Gaussian { area, t_c, sigma } => {
                let z = (t - t_c) / sigma;
                0.5 * area * (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            Pump::Samples(s) => {
                let k = (t / delta_t + GRID_TOL).floor();
                if k < 0.0 {
                    0.0
                } else {
                    s.get(k as usize).copied().unwrap_or(0.0)
                }
            }
        }
    }

    /// Ω at the left endpoint of step `k`.
    pub fn omega_at_step(&self, k: usize, delta_t: f64) -> f64 {
        match self {
            Pump::Samples(s) => s.get(k).copied().unwrap_or(0.0),
            _ => self.omega(k as f64 * delta_t, delta_t),
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, Pump::Gaussian { .. } | Pump::Samples(_))
    }

    pub fn is_none(&self) -> bool {
        match self {
            Pump::None => true,
            Pump::Cw { omega } => *omega == 0.0,
            Pump::Gaussian { area, .. } => *area == 0.0,
            Pump::Samples(s) => s.iter().all(|&x| x == 0.0),
        }
    }
}
