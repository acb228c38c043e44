//! Discretized step generators H(t_k)Δt and their propagators.
//!
//! Generators act on the tensor product of their roles in the order listed by
//! [`Hamiltonian::roles`]: the joint emitter space, then the present bin, then
//! (for delayed scenarios) the feedback bin.

use crate::error::{Error, Result};
use crate::linalg::{hermiticity_error, matrix_exponential_unitary, unitarity_error};
use crate::params::{Pump, SimParams};
use crate::tensor::{kron_all, ComplexTensor, C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    System,
    PresentBin,
    FeedbackBin,
}

/// Truncated bosonic ladder operators scaled to a bin of width Δt.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseOps {
    /// ΔB = √Δt · a.
    pub annihilate: ComplexTensor,
    /// ΔB†ΔB.
    pub number: ComplexTensor,
}

pub fn noise_operators(d_t: usize, delta_t: f64) -> Result<NoiseOps> {
    if d_t < 2 {
        return Err(Error::InvalidParams(format!(
            "bin extent must be at least 2, got {d_t}"
        )));
    }
    if !(delta_t > 0.0) {
        return Err(Error::InvalidParams(format!(
            "delta_t must be positive, got {delta_t}"
        )));
    }
    let annihilate = ladder(d_t).scale_real(delta_t.sqrt());
    let number = annihilate.dagger()?.matmul(&annihilate)?;
    Ok(NoiseOps { annihilate, number })
}

/// a with √i on the superdiagonal.
pub fn ladder(d: usize) -> ComplexTensor {
    let mut a = ComplexTensor::zeros(vec![d, d]);
    for i in 1..d {
        a.data_mut()[(i - 1) * d + i] = C64::new((i as f64).sqrt(), 0.0);
    }
    a
}

/// σ⁻ = |g⟩⟨e| on an emitter of extent `d` (ladder on the lowest two levels).
pub fn sigma_minus(d: usize) -> ComplexTensor {
    let mut s = ComplexTensor::zeros(vec![d, d]);
    s.data_mut()[1] = C64::new(1.0, 0.0);
    s
}

/// Embeds `op` as factor `pos` of a product space with extents `dims`.
pub fn lift(op: &ComplexTensor, pos: usize, dims: &[usize]) -> Result<ComplexTensor> {
    if pos >= dims.len() || op.shape() != [dims[pos], dims[pos]] {
        return Err(Error::Dimension(format!(
            "operator {:?} does not fit factor {pos} of {dims:?}",
            op.shape()
        )));
    }
    let ids: Vec<ComplexTensor> = dims.iter().map(|&d| ComplexTensor::identity(d)).collect();
    let factors: Vec<&ComplexTensor> = (0..dims.len())
        .map(|i| if i == pos { op } else { &ids[i] })
        .collect();
    kron_all(&factors)
}

/// Per-step unitary with its role layout.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPropagator {
    gate: ComplexTensor,
    roles: Vec<Role>,
    dims: Vec<usize>,
}

const UNITARY_TOL: f64 = 1e-12;

impl StepPropagator {
    pub fn gate(&self) -> &ComplexTensor {
        &self.gate
    }

    pub fn arity(&self) -> usize {
        self.roles.len()
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }
}

/// exp(−i·generator), checked unitary.
pub fn build_propagator(
    generator: &ComplexTensor,
    roles: &[Role],
    dims: &[usize],
) -> Result<StepPropagator> {
    if roles.len() != dims.len() || !(2..=3).contains(&roles.len()) {
        return Err(Error::Dimension(format!(
            "{} roles for {} factors",
            roles.len(),
            dims.len()
        )));
    }
    let d: usize = dims.iter().product();
    if generator.shape() != [d, d] {
        return Err(Error::Dimension(format!(
            "generator {:?} for factor extents {dims:?}",
            generator.shape()
        )));
    }
    let gate = matrix_exponential_unitary(generator)?;
    let err = unitarity_error(&gate)?;
    if err > UNITARY_TOL * (d as f64).sqrt() {
        return Err(Error::Numeric(format!(
            "propagator unitarity error {err:.3e}"
        )));
    }
    Ok(StepPropagator {
        gate,
        roles: roles.to_vec(),
        dims: dims.to_vec(),
    })
}

/// Generator split into a static part and the unit-amplitude drive,
/// both already multiplied by Δt.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    pub static_part: ComplexTensor,
    pub drive: ComplexTensor,
    pub roles: Vec<Role>,
    pub dims: Vec<usize>,
}

impl Hamiltonian {
    pub fn arity(&self) -> usize {
        self.roles.len()
    }

    /// H(t_k)Δt for drive amplitude Ω(t_k).
    pub fn generator(&self, omega: f64) -> ComplexTensor {
        if omega == 0.0 {
            return self.static_part.clone();
        }
        let mut g = self.static_part.clone();
        for (x, d) in g.data_mut().iter_mut().zip(self.drive.data()) {
            *x += d * omega;
        }
        g
    }

    pub fn propagator(&self, omega: f64) -> Result<StepPropagator> {
        build_propagator(&self.generator(omega), &self.roles, &self.dims)
    }

    /// One propagator per step, or a single shared one for static drives.
    pub fn schedule(&self, pump: &Pump, params: &SimParams) -> Result<Propagators> {
        let n = params.n_steps()?;
        pump.validate(n)?;
        if !pump.is_time_dependent() {
            return Ok(Propagators::Constant(
                self.propagator(pump.omega_at_step(0, params.delta_t))?,
            ));
        }
        let mut out: Vec<StepPropagator> = Vec::with_capacity(n);
        for k in 0..n {
            let omega = pump.omega_at_step(k, params.delta_t);
            let same = k > 0 && pump.omega_at_step(k - 1, params.delta_t) == omega;
            out.push(if same {
                out[k - 1].clone()
            } else {
                self.propagator(omega)?
            });
        }
        Ok(Propagators::PerStep(out))
    }
}

#[derive(Debug, Clone)]
pub enum Propagators {
    Constant(StepPropagator),
    PerStep(Vec<StepPropagator>),
}

impl Propagators {
    pub fn get(&self, k: usize) -> Result<&StepPropagator> {
        match self {
            Propagators::Constant(p) => Ok(p),
            Propagators::PerStep(v) => v.get(k).ok_or(Error::OutOfRange {
                index: k,
                len: v.len(),
            }),
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Propagators::Constant(p) => p.arity(),
            Propagators::PerStep(v) => v.first().map_or(0, StepPropagator::arity),
        }
    }

    pub fn len(&self) -> Option<usize> {
        match self {
            Propagators::Constant(_) => None,
            Propagators::PerStep(v) => Some(v.len()),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Propagators::PerStep(v) if v.is_empty())
    }
}

/// Builder for Hermitian sums of κ·X⊗Y + h.c. terms.
struct Terms {
    dims: Vec<usize>,
    acc: ComplexTensor,
}

impl Terms {
    fn new(dims: Vec<usize>) -> Self {
        let d = dims.iter().product();
        Self {
            dims,
            acc: ComplexTensor::zeros(vec![d, d]),
        }
    }

    /// κ·A + conj(κ)·A†.
    fn add_pair(&mut self, kappa: C64, a: &ComplexTensor) -> Result<()> {
        if kappa == ZERO {
            return Ok(());
        }
        let t = a.scale(kappa);
        self.acc = self.acc.add(&t)?.add(&t.dagger()?)?;
        Ok(())
    }

    fn add_hermitian(&mut self, scale: f64, h: &ComplexTensor) -> Result<()> {
        if scale == 0.0 {
            return Ok(());
        }
        self.acc = self.acc.add(&h.scale_real(scale))?;
        Ok(())
    }

    fn lift(&self, op: &ComplexTensor, pos: usize) -> Result<ComplexTensor> {
        lift(op, pos, &self.dims)
    }
}

/// Emitter operators σ⁻_j on the joint system space.
fn emitter_lowering(params: &SimParams) -> Result<Vec<ComplexTensor>> {
    (0..params.n_emitters())
        .map(|j| lift(&sigma_minus(params.d_sys[j]), j, &params.d_sys))
        .collect()
}

/// Channel annihilators ΔB_α on a bin, ordered (right, left).
fn channel_noise(params: &SimParams) -> Result<Vec<ComplexTensor>> {
    params
        .d_t
        .iter()
        .enumerate()
        .map(|(c, &d)| {
            lift(
                &noise_operators(d, params.delta_t)?.annihilate,
                c,
                &params.d_t,
            )
        })
        .collect()
}

/// Detuning Δ·Δt·Σσ⁺σ⁻ and the drive Δt·Σ(σ⁺ + σ⁻), lifted into `terms`.
fn local_parts(
    params: &SimParams,
    sm: &[ComplexTensor],
    terms: &mut Terms,
) -> Result<ComplexTensor> {
    let mut drive = Terms::new(terms.dims.clone());
    for s in sm {
        let n = s.dagger()?.matmul(s)?;
        terms.add_hermitian(params.detuning * params.delta_t, &terms.lift(&n, 0)?)?;
        drive.add_pair(C64::new(params.delta_t, 0.0), &drive.lift(&s.dagger()?, 0)?)?;
    }
    Ok(drive.acc)
}

fn check_emitters(params: &SimParams, n: usize) -> Result<()> {
    params.validate()?;
    if params.n_emitters() != n {
        return Err(Error::InvalidParams(format!(
            "scenario needs {n} emitter(s), got {}",
            params.n_emitters()
        )));
    }
    Ok(())
}

fn check_channels(params: &SimParams, n: usize) -> Result<()> {
    if params.n_channels() != n {
        return Err(Error::Dimension(format!(
            "scenario needs {n} channel(s) per bin, got {:?}",
            params.d_t
        )));
    }
    Ok(())
}

/// One emitter in an infinite waveguide with right and left channels.
pub fn hamiltonian_1tls(params: &SimParams) -> Result<Hamiltonian> {
    check_emitters(params, 1)?;
    check_channels(params, 2)?;
    let dims = vec![params.sys_dim(), params.bin_dim()];
    let mut terms = Terms::new(dims.clone());
    let sm = emitter_lowering(params)?;
    let db = channel_noise(params)?;
    let sp = sm[0].dagger()?;
    for (b, g) in db.iter().zip([params.gamma_r[0], params.gamma_l[0]]) {
        terms.add_pair(C64::new(g.sqrt(), 0.0), &kron_all(&[&sp, b])?)?;
    }
    let drive = local_parts(params, &sm, &mut terms)?;
    Ok(Hamiltonian {
        static_part: terms.acc,
        drive,
        roles: vec![Role::System, Role::PresentBin],
        dims,
    })
}

/// One emitter before a mirror, single folded channel: the present bin couples
/// with √γ_R and the bin returning after τ with √γ_L·e^{iφ}.
pub fn hamiltonian_1tls_feedback(params: &SimParams) -> Result<Hamiltonian> {
    check_emitters(params, 1)?;
    check_channels(params, 1)?;
    if params.delay_steps()? == 0 {
        return Err(Error::InvalidParams("feedback needs tau ≥ delta_t".into()));
    }
    let d = params.bin_dim();
    let dims = vec![params.sys_dim(), d, d];
    let mut terms = Terms::new(dims.clone());
    let sm = emitter_lowering(params)?;
    let b = noise_operators(d, params.delta_t)?.annihilate;
    let id = ComplexTensor::identity(d);
    let sp = sm[0].dagger()?;
    terms.add_pair(
        C64::new(params.gamma_r[0].sqrt(), 0.0),
        &kron_all(&[&sp, &b, &id])?,
    )?;
    let fb = C64::from_polar(params.gamma_l[0].sqrt(), params.phi);
    terms.add_pair(fb, &kron_all(&[&sp, &id, &b])?)?;
    let drive = local_parts(params, &sm, &mut terms)?;
    Ok(Hamiltonian {
        static_part: terms.acc,
        drive,
        roles: vec![Role::System, Role::PresentBin, Role::FeedbackBin],
        dims,
    })
}

/// Two emitters sharing every bin, with inter-emitter phase φ.
///
/// Right-channel couplings are (√γ_R1, √γ_R2·e^{iφ}) and left-channel
/// couplings (√γ_L1·e^{iφ}, √γ_L2). The coherent exchange
/// J σ₁⁺σ₂ + h.c. with J = (g_L e^{iφ} − g_R e^{−iφ})/(2i), g_α = √(γ_α1 γ_α2),
/// makes the single-excitation amplitudes obey the zero-delay equations
/// ċ₁ = −γ₁c₁/2 − g_L e^{iφ} c₂ and ċ₂ = −γ₂c₂/2 − g_R e^{iφ} c₁.
pub fn hamiltonian_2tls_mar(params: &SimParams) -> Result<Hamiltonian> {
    check_emitters(params, 2)?;
    check_channels(params, 2)?;
    let dims = vec![params.sys_dim(), params.bin_dim()];
    let mut terms = Terms::new(dims.clone());
    let sm = emitter_lowering(params)?;
    let db = channel_noise(params)?;
    let phase = C64::from_polar(1.0, params.phi);
    let kappa_r = [
        C64::new(params.gamma_r[0].sqrt(), 0.0),
        phase * params.gamma_r[1].sqrt(),
    ];
    let kappa_l = [
        phase * params.gamma_l[0].sqrt(),
        C64::new(params.gamma_l[1].sqrt(), 0.0),
    ];
    for j in 0..2 {
        let sp = sm[j].dagger()?;
        terms.add_pair(kappa_r[j], &kron_all(&[&sp, &db[0]])?)?;
        terms.add_pair(kappa_l[j], &kron_all(&[&sp, &db[1]])?)?;
    }
    let g_r = (params.gamma_r[0] * params.gamma_r[1]).sqrt();
    let g_l = (params.gamma_l[0] * params.gamma_l[1]).sqrt();
    let j12 = (phase * g_l - phase.conj() * g_r) / C64::new(0.0, 2.0);
    let exchange = sm[0].dagger()?.matmul(&sm[1])?;
    terms.add_pair(j12 * params.delta_t, &terms.lift(&exchange, 0)?)?;
    let drive = local_parts(params, &sm, &mut terms)?;
    Ok(Hamiltonian {
        static_part: terms.acc,
        drive,
        roles: vec![Role::System, Role::PresentBin],
        dims,
    })
}

/// Two emitters separated by a delay τ. Emitter 1 meets the present
/// right-mover and the delayed left-mover; emitter 2 the present left-mover
/// and the delayed right-mover. Delayed couplings carry e^{iφ}.
pub fn hamiltonian_2tls_nmar(params: &SimParams) -> Result<Hamiltonian> {
    check_emitters(params, 2)?;
    check_channels(params, 2)?;
    if params.delay_steps()? == 0 {
        return Err(Error::InvalidParams(
            "delayed coupling needs tau ≥ delta_t".into(),
        ));
    }
    let d = params.bin_dim();
    let dims = vec![params.sys_dim(), d, d];
    let mut terms = Terms::new(dims.clone());
    let sm = emitter_lowering(params)?;
    let db = channel_noise(params)?;
    let id = ComplexTensor::identity(d);
    let phase = C64::from_polar(1.0, params.phi);
    let s1 = sm[0].dagger()?;
    let s2 = sm[1].dagger()?;
    terms.add_pair(
        C64::new(params.gamma_r[0].sqrt(), 0.0),
        &kron_all(&[&s1, &db[0], &id])?,
    )?;
    terms.add_pair(
        C64::new(params.gamma_l[1].sqrt(), 0.0),
        &kron_all(&[&s2, &db[1], &id])?,
    )?;
    terms.add_pair(
        phase * params.gamma_r[1].sqrt(),
        &kron_all(&[&s2, &id, &db[0]])?,
    )?;
    terms.add_pair(
        phase * params.gamma_l[0].sqrt(),
        &kron_all(&[&s1, &id, &db[1]])?,
    )?;
    let drive = local_parts(params, &sm, &mut terms)?;
    Ok(Hamiltonian {
        static_part: terms.acc,
        drive,
        roles: vec![Role::System, Role::PresentBin, Role::FeedbackBin],
        dims,
    })
}

/// Total excitation number Σσ⁺σ⁻ + Σ a†a over all factors of a generator.
pub fn excitation_operator(h: &Hamiltonian, params: &SimParams) -> Result<ComplexTensor> {
    let mut acc = ComplexTensor::zeros(h.static_part.shape().to_vec());
    for j in 0..params.n_emitters() {
        let s = sigma_minus(params.d_sys[j]);
        let n = lift(&s.dagger()?.matmul(&s)?, j, &params.d_sys)?;
        acc = acc.add(&lift(&n, 0, &h.dims)?)?;
    }
    for (pos, role) in h.roles.iter().enumerate() {
        if *role == Role::System {
            continue;
        }
        for (c, &d) in params.d_t.iter().enumerate() {
            let a = ladder(d);
            let n = lift(&a.dagger()?.matmul(&a)?, c, &params.d_t)?;
            acc = acc.add(&lift(&n, pos, &h.dims)?)?;
        }
    }
    Ok(acc)
}

/// ‖G − G†‖ of the full generator at amplitude Ω.
pub fn generator_hermiticity(h: &Hamiltonian, omega: f64) -> Result<f64> {
    hermiticity_error(&h.generator(omega))
}
