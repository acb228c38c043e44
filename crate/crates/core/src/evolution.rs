//! Time stepping of the emitter–waveguide chain.
//!
//! Chain layout: `[vacuum pre-bins −d…−1, bins emitted so far, S, future bins]`.
//! The system site `S` moves one slot to the right per step. In the delayed
//! case the bin that left the emitter d steps ago is swapped next to `S`,
//! interacts through the three-site gate and is swapped back to its time
//! slot, where it is finalized as output. The chain position of the output
//! bin of step k is always k.

use log::warn;

use crate::error::{Error, Result};
use crate::model::{Hamiltonian, Propagators, Role, StepPropagator};
use crate::mps::{site_density, Cut, Mps, OcSide, SchmidtSpectrum, SiteLabel, SiteTensor};
use crate::params::{Pump, SimParams};
use crate::states::{vacuum_labelled, SystemState};
use crate::tensor::{ComplexTensor, C64};

/// Discarded weight per step above which a truncation alarm is raised.
pub const TRUNCATION_ALARM: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Markovian,
    Delayed { delay_steps: usize },
}

impl Regime {
    pub fn delay_steps(&self) -> usize {
        match self {
            Regime::Markovian => 0,
            Regime::Delayed { delay_steps } => *delay_steps,
        }
    }
}

/// Reduced state of one field bin at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteSnapshot {
    pub label: SiteLabel,
    pub time: f64,
    pub density: ComplexTensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunStats {
    pub discarded_weight: f64,
    pub peak_bond: usize,
    /// Steps whose discarded weight exceeded [`TRUNCATION_ALARM`].
    pub alarms: usize,
}

#[derive(Debug, Clone)]
pub struct BinsRecord {
    /// t_0 … t_n.
    pub times: Vec<f64>,
    /// Reduced emitter density at each t_k (n + 1 entries).
    pub system_states: Vec<ComplexTensor>,
    /// Bin finalized during step k, stamped t_k (n entries).
    pub output_field_states: Vec<SiteSnapshot>,
    /// Bins inside the delay window at each t_k (n + 1 entries, empty when Markovian).
    pub loop_field_states: Vec<Vec<SiteSnapshot>>,
    /// Spectrum at the system cut at each t_k.
    pub schmidt: Vec<SchmidtSpectrum>,
    /// Spectrum at the cut between finalized output and the delay window.
    pub schmidt_tau: Vec<SchmidtSpectrum>,
    pub final_state: Mps,
    pub params: SimParams,
    pub regime: Regime,
    pub stats: RunStats,
}

impl BinsRecord {
    pub fn n_steps(&self) -> usize {
        self.output_field_states.len()
    }

    pub fn delta_t(&self) -> f64 {
        self.params.delta_t
    }
}

fn role_positions(prop: &StepPropagator, layout: &[(Role, usize)]) -> Result<Vec<usize>> {
    prop.roles()
        .iter()
        .map(|r| {
            layout
                .iter()
                .find(|(role, _)| role == r)
                .map(|&(_, pos)| pos)
                .ok_or_else(|| {
                    Error::Dimension(format!("propagator role {r:?} has no slot in this regime"))
                })
        })
        .collect()
}

fn initial_chain(
    sys0: &SystemState,
    field0: Vec<SiteTensor>,
    params: &SimParams,
    d: usize,
) -> Result<(Vec<SiteTensor>, usize)> {
    params.validate()?;
    if sys0.dims != params.d_sys {
        return Err(Error::Dimension(format!(
            "initial emitter extents {:?} differ from {:?}",
            sys0.dims, params.d_sys
        )));
    }
    let n = params.n_steps()?;
    let bin_dim = params.bin_dim();
    for (k, s) in field0.iter().enumerate() {
        if s.physical() != bin_dim {
            return Err(Error::Dimension(format!(
                "field bin {k} has extent {}, expected {bin_dim}",
                s.physical()
            )));
        }
        if s.label != SiteLabel::Bin(k as i64) {
            return Err(Error::Contract(format!(
                "field bin {k} is labelled {}",
                s.label
            )));
        }
    }
    if let Some(first) = field0.first() {
        if first.left_bond() != 1 {
            return Err(Error::Dimension(
                "field chain must start with a unit bond".into(),
            ));
        }
    }
    let m = field0.len();
    let mut sites = vacuum_labelled(-(d as i64)..0, params)?;
    let sys_pos = sites.len();
    sites.push(sys0.to_site()?);
    sites.extend(field0);
    if m < n {
        sites.extend(vacuum_labelled(m as i64..n as i64, params)?);
    }
    Ok((sites, sys_pos))
}

fn pure_density(amps: &[C64]) -> ComplexTensor {
    let p = amps.len();
    let t = ComplexTensor::new(vec![1, p, 1], amps.to_vec()).expect("finite amplitudes");
    site_density(&t, None, None)
}

struct Recorder {
    times: Vec<f64>,
    system_states: Vec<ComplexTensor>,
    output: Vec<SiteSnapshot>,
    loops: Vec<Vec<SiteSnapshot>>,
    schmidt: Vec<SchmidtSpectrum>,
    schmidt_tau: Vec<SchmidtSpectrum>,
    alarms: usize,
}

impl Recorder {
    fn new(
        n: usize,
        delta_t: f64,
        sys0: &SystemState,
        init: &Mps,
        sys_pos: usize,
        d: usize,
    ) -> Result<Self> {
        let mut r = Self {
            times: (0..=n).map(|k| k as f64 * delta_t).collect(),
            system_states: Vec::with_capacity(n + 1),
            output: Vec::with_capacity(n),
            loops: Vec::with_capacity(n + 1),
            schmidt: Vec::with_capacity(n + 1),
            schmidt_tau: Vec::with_capacity(n + 1),
            alarms: 0,
        };
        r.system_states.push(pure_density(&sys0.amplitudes));
        let mut probe = init.clone();
        let sys = probe.schmidt_at_cut(sys_pos)?;
        let tau = probe.schmidt_at_cut(sys_pos - d)?;
        r.schmidt.push(SchmidtSpectrum {
            cut: Cut::System,
            ..sys
        });
        r.schmidt_tau.push(SchmidtSpectrum {
            cut: Cut::Feedback,
            ..tau
        });
        Ok(r)
    }

    fn alarm(&mut self, step: usize, weight: f64) {
        if weight > TRUNCATION_ALARM {
            self.alarms += 1;
            warn!("step {step}: discarded weight {weight:.3e} exceeds {TRUNCATION_ALARM:.0e}");
        }
    }

    fn finish(self, mps: Mps, params: &SimParams, regime: Regime) -> BinsRecord {
        let stats = RunStats {
            discarded_weight: mps.discarded_weight(),
            peak_bond: mps.peak_bond(),
            alarms: self.alarms,
        };
        BinsRecord {
            times: self.times,
            system_states: self.system_states,
            output_field_states: self.output,
            loop_field_states: self.loops,
            schmidt: self.schmidt,
            schmidt_tau: self.schmidt_tau,
            final_state: mps,
            params: params.clone(),
            regime,
            stats,
        }
    }
}

/// Markovian evolution: one two-site gate on (S, bin k) per step.
pub fn t_evol_mar(
    gates: &Propagators,
    sys0: &SystemState,
    field0: Vec<SiteTensor>,
    params: &SimParams,
) -> Result<BinsRecord> {
    if gates.arity() != 2 {
        return Err(Error::Dimension(format!(
            "Markovian stepping needs 2-site gates, got {}",
            gates.arity()
        )));
    }
    let n = params.n_steps()?;
    if let Some(len) = gates.len() {
        if len < n {
            return Err(Error::Dimension(format!("{len} gates for {n} steps")));
        }
    }
    let (sites, sys_pos) = initial_chain(sys0, field0, params, 0)?;
    let mut mps = Mps::from_sites(sites, sys_pos, params.truncation())?;
    mps.set_strict_unitary(false);
    let mut rec = Recorder::new(n, params.delta_t, sys0, &mps, sys_pos, 0)?;

    let layout = [(Role::System, 0), (Role::PresentBin, 1)];
    for k in 0..n {
        let prop = gates.get(k)?;
        let order = role_positions(prop, &layout)?;
        let rep = mps.apply_window(prop.gate(), k, &order, &[1, 0], 1, false)?;
        rec.alarm(k, rep.discarded_weight);
        let [out, sys]: [ComplexTensor; 2] = rep.densities.try_into().expect("two-site window");
        rec.output.push(SiteSnapshot {
            label: SiteLabel::Bin(k as i64),
            time: rec.times[k],
            density: out,
        });
        rec.system_states.push(sys);
        rec.loops.push(Vec::new());
        let cut = rep.cuts[0].clone();
        rec.schmidt.push(SchmidtSpectrum::from_singular_values(
            cut.clone(),
            Cut::System,
            k + 1,
        ));
        rec.schmidt_tau.push(SchmidtSpectrum::from_singular_values(
            cut,
            Cut::Feedback,
            k + 1,
        ));
    }
    rec.loops.push(Vec::new());
    Ok(rec.finish(mps, params, Regime::Markovian))
}

/// Delayed evolution: swap the bin emitted d steps ago next to S, apply the
/// three-site gate on (feedback, S, present), swap it back.
pub fn t_evol_nmar(
    gates: &Propagators,
    sys0: &SystemState,
    field0: Vec<SiteTensor>,
    params: &SimParams,
) -> Result<BinsRecord> {
    if gates.arity() != 3 {
        return Err(Error::Dimension(format!(
            "delayed stepping needs 3-site gates, got {}",
            gates.arity()
        )));
    }
    let n = params.n_steps()?;
    let d = params.delay_steps()?;
    if d == 0 {
        return Err(Error::InvalidParams(
            "delayed stepping needs tau ≥ delta_t".into(),
        ));
    }
    if let Some(len) = gates.len() {
        if len < n {
            return Err(Error::Dimension(format!("{len} gates for {n} steps")));
        }
    }
    let (sites, sys_pos0) = initial_chain(sys0, field0, params, d)?;
    let mut mps = Mps::from_sites(sites, 0, params.truncation())?;
    mps.set_strict_unitary(false);
    let mut rec = Recorder::new(n, params.delta_t, sys0, &mps, sys_pos0, d)?;

    let layout = [
        (Role::FeedbackBin, 0),
        (Role::System, 1),
        (Role::PresentBin, 2),
    ];
    for k in 0..n {
        let sys_pos = sys_pos0 + k;
        debug_assert_eq!(mps.oc(), k);

        // Delay window at t_k while walking the feedback bin towards S.
        let mut window = Vec::with_capacity(d);
        let fb = &mps.sites()[k];
        window.push(SiteSnapshot {
            label: fb.label,
            time: rec.times[k],
            density: site_density(fb.tensor(), None, None),
        });
        let mut step_discard = 0.0;
        for j in 0..d - 1 {
            let rep = mps.swap_adjacent_with(k + j, OcSide::Right)?;
            step_discard += rep.discarded_weight;
            let passed = &mps.sites()[k + j];
            window.push(SiteSnapshot {
                label: passed.label,
                time: rec.times[k],
                density: rep.densities[0].clone(),
            });
        }
        window.sort_by_key(|s| match s.label {
            SiteLabel::Bin(i) => i,
            SiteLabel::System => i64::MAX,
        });
        rec.loops.push(window);

        let prop = gates.get(k)?;
        let order = role_positions(prop, &layout)?;
        let rep = mps.apply_window(prop.gate(), sys_pos - 1, &order, &[0, 2, 1], 0, false)?;
        step_discard += rep.discarded_weight;
        rec.system_states.push(rep.densities[2].clone());
        rec.schmidt.push(SchmidtSpectrum::from_singular_values(
            rep.cuts[1].clone(),
            Cut::System,
            k + 1,
        ));

        let mut tau_cut = rep.cuts[0].clone();
        let mut out_density = rep.densities[0].clone();
        for j in 0..d - 1 {
            let rep = mps.swap_adjacent_with(sys_pos - 2 - j, OcSide::Left)?;
            step_discard += rep.discarded_weight;
            tau_cut = rep.cuts[0].clone();
            out_density = rep.densities[0].clone();
        }
        debug_assert_eq!(mps.oc(), k);
        rec.schmidt_tau.push(SchmidtSpectrum::from_singular_values(
            tau_cut,
            Cut::Feedback,
            k + 1,
        ));
        let label = mps.sites()[k].label;
        rec.output.push(SiteSnapshot {
            label,
            time: rec.times[k],
            density: out_density,
        });
        let before = mps.discarded_weight();
        mps.move_oc(k + 1)?;
        step_discard += mps.discarded_weight() - before;
        rec.alarm(k, step_discard);
    }

    // Delay window at t_n.
    let mut window = Vec::with_capacity(d);
    for j in 0..d {
        let rho = mps.reduced_density(n + j)?;
        window.push(SiteSnapshot {
            label: mps.sites()[n + j].label,
            time: rec.times[n],
            density: rho,
        });
    }
    rec.loops.push(window);
    Ok(rec.finish(mps, params, Regime::Delayed { delay_steps: d }))
}

/// Builds the step schedule and runs the regime matching the generator.
pub fn evolve(
    ham: &Hamiltonian,
    pump: &Pump,
    sys0: &SystemState,
    field0: Vec<SiteTensor>,
    params: &SimParams,
) -> Result<BinsRecord> {
    let gates = ham.schedule(pump, params)?;
    match ham.arity() {
        2 => t_evol_mar(&gates, sys0, field0, params),
        3 => t_evol_nmar(&gates, sys0, field0, params),
        a => Err(Error::Dimension(format!("unsupported gate arity {a}"))),
    }
}
