//! Small independent reference solvers.
//!
//! None of these touch the tensor-network engine: the delay equations are
//! integrated at amplitude level in the single-excitation sector, and the
//! driven emitter is integrated as a 2×2 master equation.

use crate::error::{Error, Result};
use crate::observables::{TimeSeries, Units};
use crate::tensor::C64;

const GRID_TOL: f64 = 1e-9;

/// Reference curves on a time grid, one component per emitter.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSeries {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl OracleSeries {
    pub fn component(&self, j: usize) -> Result<&[f64]> {
        self.values
            .get(j)
            .map(Vec::as_slice)
            .ok_or(Error::OutOfRange {
                index: j,
                len: self.values.len(),
            })
    }

    pub fn to_series(&self, j: usize, label: &str) -> Result<TimeSeries> {
        TimeSeries::new(
            self.times.clone(),
            self.component(j)?.to_vec(),
            label,
            Units::Dimensionless,
        )
    }
}

/// e^{−γt} on the grid.
pub fn analytic_decay(gamma: f64, t_grid: &[f64]) -> Result<OracleSeries> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "gamma must be nonnegative, got {gamma}"
        )));
    }
    Ok(OracleSeries {
        times: t_grid.to_vec(),
        values: vec![t_grid.iter().map(|t| (-gamma * t).exp()).collect()],
    })
}

/// Linear delay system ċ(t) = −A c(t) − B c(t − τ) θ(t − τ) for complex
/// amplitudes, with c(t) = 0 for t < 0 in the delayed term.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDde {
    pub instant: Vec<Vec<C64>>,
    pub delayed: Vec<Vec<C64>>,
    pub tau: f64,
}

fn mat_vec(m: &[Vec<C64>], v: &[C64]) -> Vec<C64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn axpy(y: &[C64], a: f64, x: &[C64]) -> Vec<C64> {
    y.iter().zip(x).map(|(y, x)| y + x * a).collect()
}

impl LinearDde {
    fn dim(&self) -> usize {
        self.instant.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0
            || self.delayed.len() != n
            || self
                .instant
                .iter()
                .chain(&self.delayed)
                .any(|r| r.len() != n)
        {
            return Err(Error::Dimension(
                "delay system matrices must be square and equal in size".into(),
            ));
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParams(format!(
                "tau must be nonnegative, got {}",
                self.tau
            )));
        }
        Ok(())
    }

    /// Fixed-step RK4 with step ≤ `h_max`, chosen so τ falls on the step
    /// grid; delayed values between stored points come from cubic Hermite
    /// interpolation of the history. Returns amplitudes on `t_grid`.
    pub fn integrate(&self, c0: &[C64], t_grid: &[f64], h_max: f64) -> Result<Vec<Vec<C64>>> {
        self.validate()?;
        let n = self.dim();
        if c0.len() != n {
            return Err(Error::Dimension(format!(
                "initial amplitudes of length {} for a {n}-dim system",
                c0.len()
            )));
        }
        if !(h_max > 0.0) {
            return Err(Error::InvalidParams(format!(
                "step must be positive, got {h_max}"
            )));
        }
        let t_end = t_grid.iter().copied().fold(0.0, f64::max);
        if t_grid.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::InvalidParams("time grid must be nonnegative".into()));
        }
        let (instant, delayed, lag) = if self.tau == 0.0 {
            let merged = self
                .instant
                .iter()
                .zip(&self.delayed)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect();
            (merged, None, 0usize)
        } else {
            let m = (self.tau / h_max).ceil().max(1.0) as usize;
            (self.instant.clone(), Some(&self.delayed), m)
        };
        let h = if lag > 0 {
            self.tau / lag as f64
        } else {
            h_max
        };
        let steps = (t_end / h).ceil() as usize;

        let mut c = vec![c0.to_vec()];
        let mut dc: Vec<Vec<C64>> = Vec::with_capacity(steps + 1);
        // History lookup at t = (k + s) h − τ, s ∈ {0, 1/2, 1}.
        let lagged = |c: &[Vec<C64>], dc: &[Vec<C64>], k: usize, s: f64| -> Vec<C64> {
            if lag == 0 || k < lag {
                return vec![C64::new(0.0, 0.0); n];
            }
            let j = k - lag;
            if s == 0.0 {
                return c[j].clone();
            }
            if s == 1.0 {
                return c[j + 1].clone();
            }
            let (h00, h10, h01, h11) = (
                2.0 * s.powi(3) - 3.0 * s * s + 1.0,
                s.powi(3) - 2.0 * s * s + s,
                -2.0 * s.powi(3) + 3.0 * s * s,
                s.powi(3) - s * s,
            );
            (0..n)
                .map(|i| {
                    c[j][i] * h00
                        + dc[j][i] * (h10 * h)
                        + c[j + 1][i] * h01
                        + dc[j + 1][i] * (h11 * h)
                })
                .collect()
        };
        let rhs = |x: &[C64], past: &[C64]| -> Vec<C64> {
            let mut r: Vec<C64> = mat_vec(&instant, x).into_iter().map(|v| -v).collect();
            if let Some(b) = delayed {
                for (ri, v) in r.iter_mut().zip(mat_vec(b, past)) {
                    *ri -= v;
                }
            }
            r
        };

        for k in 0..steps {
            let x = c[k].clone();
            let p0 = lagged(&c, &dc, k, 0.0);
            let k1 = rhs(&x, &p0);
            dc.push(k1.clone());
            let pm = lagged(&c, &dc, k, 0.5);
            let p1 = lagged(&c, &dc, k, 1.0);
            let k2 = rhs(&axpy(&x, 0.5 * h, &k1), &pm);
            let k3 = rhs(&axpy(&x, 0.5 * h, &k2), &pm);
            let k4 = rhs(&axpy(&x, h, &k3), &p1);
            let next = (0..n)
                .map(|i| x[i] + (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0))
                .collect();
            c.push(next);
        }
        let last = c[steps].clone();
        let p_last = lagged(&c, &dc, steps, 0.0);
        dc.push(rhs(&last, &p_last));

        Ok(t_grid
            .iter()
            .map(|&t| {
                let u = t / h;
                let j = (u + GRID_TOL).floor() as usize;
                if j >= steps {
                    return c[steps].clone();
                }
                let s = (u - j as f64).max(0.0);
                if s < GRID_TOL {
                    return c[j].clone();
                }
                let (h00, h10, h01, h11) = (
                    2.0 * s.powi(3) - 3.0 * s * s + 1.0,
                    s.powi(3) - 2.0 * s * s + s,
                    -2.0 * s.powi(3) + 3.0 * s * s,
                    s.powi(3) - s * s,
                );
                (0..n)
                    .map(|i| {
                        c[j][i] * h00
                            + dc[j][i] * (h10 * h)
                            + c[j + 1][i] * h01
                            + dc[j + 1][i] * (h11 * h)
                    })
                    .collect()
            })
            .collect())
    }
}

/// Per-emitter coupling rates into the right and left channels.
#[derive(Debug, Clone, PartialEq)]
pub struct DdeRates {
    pub gamma_r: [f64; 2],
    pub gamma_l: [f64; 2],
}

impl DdeRates {
    /// γ/2 into each channel for both emitters.
    pub fn symmetric(gamma: f64) -> Self {
        Self {
            gamma_r: [gamma / 2.0; 2],
            gamma_l: [gamma / 2.0; 2],
        }
    }
}

/// Two emitters exchanging excitations through a delay line: emitter 1's
/// right-going field reaches emitter 2 after τ and emitter 2's left-going
/// field reaches emitter 1, each picking up e^{iφ}.
pub fn dde_two_tls_rates(
    rates: &DdeRates,
    tau: f64,
    phi: f64,
    c0: [C64; 2],
    t_grid: &[f64],
    h_max: f64,
) -> Result<OracleSeries> {
    if rates
        .gamma_r
        .iter()
        .chain(&rates.gamma_l)
        .any(|g| !(*g >= 0.0))
    {
        return Err(Error::InvalidParams("rates must be nonnegative".into()));
    }
    let z = C64::new(0.0, 0.0);
    let ph = C64::from_polar(1.0, phi);
    let g = |j: usize| C64::new(0.5 * (rates.gamma_r[j] + rates.gamma_l[j]), 0.0);
    let sys = LinearDde {
        instant: vec![vec![g(0), z], vec![z, g(1)]],
        delayed: vec![
            vec![z, ph * (rates.gamma_l[0] * rates.gamma_l[1]).sqrt()],
            vec![ph * (rates.gamma_r[0] * rates.gamma_r[1]).sqrt(), z],
        ],
        tau,
    };
    let amps = sys.integrate(&c0, t_grid, h_max)?;
    let values = (0..2)
        .map(|j| amps.iter().map(|a| a[j].norm_sqr()).collect())
        .collect();
    Ok(OracleSeries {
        times: t_grid.to_vec(),
        values,
    })
}

/// Emitter 1 initially excited, total rate γ split evenly between channels.
pub fn dde_two_tls(gamma: f64, tau: f64, phi: f64, t_grid: &[f64]) -> Result<OracleSeries> {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    dde_two_tls_rates(
        &DdeRates::symmetric(gamma),
        tau,
        phi,
        [one, zero],
        t_grid,
        oracle_step(t_grid),
    )
}

/// Emitter in front of a mirror: emission into the present channel at rate
/// γ_R returns after τ and couples back at rate γ_L with phase e^{iφ}.
pub fn dde_mirror(
    gamma_r: f64,
    gamma_l: f64,
    tau: f64,
    phi: f64,
    t_grid: &[f64],
) -> Result<OracleSeries> {
    if !(gamma_r >= 0.0 && gamma_l >= 0.0) {
        return Err(Error::InvalidParams("rates must be nonnegative".into()));
    }
    let sys = LinearDde {
        instant: vec![vec![C64::new(0.5 * (gamma_r + gamma_l), 0.0)]],
        delayed: vec![vec![C64::from_polar((gamma_r * gamma_l).sqrt(), phi)]],
        tau,
    };
    let amps = sys.integrate(&[C64::new(1.0, 0.0)], t_grid, oracle_step(t_grid))?;
    Ok(OracleSeries {
        times: t_grid.to_vec(),
        values: vec![amps.iter().map(|a| a[0].norm_sqr()).collect()],
    })
}

/// A quarter of the finest grid spacing, capped at 0.01/γ.
fn oracle_step(t_grid: &[f64]) -> f64 {
    let finest = t_grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    (finest / 4.0).min(0.01)
}

/// 2×2 density matrix, row-major, basis (ground, excited).
pub type Density = [C64; 4];

/// Driven, damped two-level emitter:
/// ρ̇ = −i[Ω(t)(σ⁺ + σ⁻) + Δσ⁺σ⁻, ρ] + γ(σ⁻ρσ⁺ − ½{σ⁺σ⁻, ρ}).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladTls {
    pub gamma: f64,
    pub detuning: f64,
    /// RK4 step.
    pub h: f64,
}

/// Largest γh or Ωh accepted by the integrator.
pub const LINDBLAD_STABILITY: f64 = 0.1;

fn mm(a: &Density, b: &Density) -> Density {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

fn lin(a: &Density, s: f64, b: &Density) -> Density {
    [
        a[0] + b[0] * s,
        a[1] + b[1] * s,
        a[2] + b[2] * s,
        a[3] + b[3] * s,
    ]
}

pub const GROUND: Density = [
    C64::new(1.0, 0.0),
    C64::new(0.0, 0.0),
    C64::new(0.0, 0.0),
    C64::new(0.0, 0.0),
];
pub const EXCITED: Density = [
    C64::new(0.0, 0.0),
    C64::new(0.0, 0.0),
    C64::new(0.0, 0.0),
    C64::new(1.0, 0.0),
];
const SIGMA_MINUS: Density = [
    C64::new(0.0, 0.0),
    C64::new(1.0, 0.0),
    C64::new(0.0, 0.0),
    C64::new(0.0, 0.0),
];
const SIGMA_PLUS: Density = [
    C64::new(0.0, 0.0),
    C64::new(0.0, 0.0),
    C64::new(1.0, 0.0),
    C64::new(0.0, 0.0),
];

pub fn trace(x: &Density) -> C64 {
    x[0] + x[3]
}

impl LindbladTls {
    pub fn new(gamma: f64, detuning: f64, h: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidParams(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if !(h > 0.0) || gamma * h >= LINDBLAD_STABILITY || detuning.abs() * h >= LINDBLAD_STABILITY
        {
            return Err(Error::InvalidParams(format!(
                "step {h} violates the stability guard γh, Δh < {LINDBLAD_STABILITY}"
            )));
        }
        Ok(Self { gamma, detuning, h })
    }

    /// Liouvillian applied to any 2×2 operator.
    fn rhs(&self, omega: f64, x: &Density) -> Density {
        let i = C64::new(0.0, 1.0);
        let hm: Density = [
            C64::new(0.0, 0.0),
            C64::new(omega, 0.0),
            C64::new(omega, 0.0),
            C64::new(self.detuning, 0.0),
        ];
        let hx = mm(&hm, x);
        let xh = mm(x, &hm);
        let jump = mm(&mm(&SIGMA_MINUS, x), &SIGMA_PLUS);
        let n = mm(&SIGMA_PLUS, &SIGMA_MINUS);
        let nx = mm(&n, x);
        let xn = mm(x, &n);
        let mut out = [C64::new(0.0, 0.0); 4];
        for k in 0..4 {
            out[k] = -i * (hx[k] - xh[k]) + self.gamma * (jump[k] - 0.5 * (nx[k] + xn[k]));
        }
        out
    }

    fn step(&self, t: f64, x: &Density, omega: &dyn Fn(f64) -> f64) -> Result<Density> {
        let h = self.h;
        let (w0, wm, w1) = (omega(t), omega(t + 0.5 * h), omega(t + h));
        if [w0, wm, w1]
            .iter()
            .any(|w| w.abs() * h >= LINDBLAD_STABILITY)
        {
            return Err(Error::InvalidParams(format!(
                "drive {} at t = {t} violates the stability guard Ωh < {LINDBLAD_STABILITY}",
                w0.abs().max(wm.abs()).max(w1.abs())
            )));
        }
        let k1 = self.rhs(w0, x);
        let k2 = self.rhs(wm, &lin(x, 0.5 * h, &k1));
        let k3 = self.rhs(wm, &lin(x, 0.5 * h, &k2));
        let k4 = self.rhs(w1, &lin(x, h, &k3));
        let mut out = *x;
        for k in 0..4 {
            out[k] += (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]) * (h / 6.0);
        }
        Ok(out)
    }

    fn substeps(&self, dt: f64) -> Result<usize> {
        let r = dt / self.h;
        let m = r.round();
        if m < 1.0 || (r - m).abs() > GRID_TOL * r.max(1.0) {
            return Err(Error::InvalidParams(format!(
                "sampling interval {dt} is not a multiple of the step {}",
                self.h
            )));
        }
        Ok(m as usize)
    }

    /// Propagates `x` from `t0` and samples it every `dt` for `samples` points (the first is `x`).
    pub fn propagate(
        &self,
        x: Density,
        t0: f64,
        dt: f64,
        samples: usize,
        omega: &dyn Fn(f64) -> f64,
    ) -> Result<Vec<Density>> {
        let m = self.substeps(dt)?;
        let mut out = Vec::with_capacity(samples);
        let mut cur = x;
        let mut t = t0;
        for s in 0..samples {
            if s > 0 {
                for _ in 0..m {
                    cur = self.step(t, &cur, omega)?;
                    t += self.h;
                }
            }
            out.push(cur);
        }
        Ok(out)
    }

    /// Excited population on t = 0, dt, …, (samples − 1)·dt.
    pub fn population(
        &self,
        rho0: Density,
        dt: f64,
        samples: usize,
        omega: &dyn Fn(f64) -> f64,
    ) -> Result<OracleSeries> {
        let states = self.propagate(rho0, 0.0, dt, samples, omega)?;
        Ok(OracleSeries {
            times: (0..samples).map(|k| k as f64 * dt).collect(),
            values: vec![states.iter().map(|r| r[3].re).collect()],
        })
    }

    /// Two-time functions from the state at `t_ss` for a constant drive Ω.
    pub fn regression(
        &self,
        rho_ss: &Density,
        omega: f64,
        dt: f64,
        samples: usize,
    ) -> Result<Regression> {
        let drive = move |_: f64| omega;
        // ⟨σ⁺(t)σ⁻(t + t′)⟩ = Tr[σ⁻ e^{Lt′}(ρσ⁺)].
        let x1 = mm(rho_ss, &SIGMA_PLUS);
        let g1 = self
            .propagate(x1, 0.0, dt, samples, &drive)?
            .iter()
            .map(|x| trace(&mm(&SIGMA_MINUS, x)))
            .collect();
        // ⟨σ⁺(t)σ⁺σ⁻(t + t′)σ⁻(t)⟩ = Tr[σ⁺σ⁻ e^{Lt′}(σ⁻ρσ⁺)].
        let x2 = mm(&mm(&SIGMA_MINUS, rho_ss), &SIGMA_PLUS);
        let n = mm(&SIGMA_PLUS, &SIGMA_MINUS);
        let g2 = self
            .propagate(x2, 0.0, dt, samples, &drive)?
            .iter()
            .map(|x| trace(&mm(&n, x)))
            .collect();
        Ok(Regression {
            t_primes: (0..samples).map(|k| k as f64 * dt).collect(),
            population: rho_ss[3].re,
            g1,
            g2,
        })
    }
}

/// Emitter two-time functions ⟨σ⁺(t)σ⁻(t + t′)⟩ and ⟨σ⁺σ⁺σ⁻σ⁻⟩ at a fixed t.
#[derive(Debug, Clone, PartialEq)]
pub struct Regression {
    pub t_primes: Vec<f64>,
    pub population: f64,
    pub g1: Vec<C64>,
    pub g2: Vec<C64>,
}

impl Regression {
    /// g¹(t′) = G¹(t′)/⟨σ⁺σ⁻⟩.
    pub fn g1_normalized(&self) -> Vec<C64> {
        self.g1.iter().map(|v| v / self.population).collect()
    }

    /// g²(t′) = G²(t′)/⟨σ⁺σ⁻⟩².
    pub fn g2_normalized(&self) -> Vec<f64> {
        self.g2
            .iter()
            .map(|v| v.re / (self.population * self.population))
            .collect()
    }
}
