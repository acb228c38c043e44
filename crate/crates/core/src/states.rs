//! Initial emitter states, vacuum chains and Fock-pulse chains.
//!
//! Emitter basis order is (ground, excited). A time bin with two channels has
//! basis index `i_R * d_L + i_L`, each channel in photon-number order.

use crate::error::{Error, Result};
use crate::mps::{transfer, SiteLabel, SiteTensor};
use crate::params::SimParams;
use crate::tensor::{kron, ComplexTensor, C64, ONE, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub amplitudes: Vec<C64>,
    pub dims: Vec<usize>,
}

impl SystemState {
    pub fn new(amplitudes: Vec<C64>, dims: Vec<usize>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != amplitudes.len() {
            return Err(Error::Dimension(format!(
                "{} amplitudes for emitter extents {dims:?}",
                amplitudes.len()
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Contract(format!("system state has norm {norm}")));
        }
        Ok(Self { amplitudes, dims })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Product of independent emitter states, first factor most significant.
    pub fn product(parts: &[SystemState]) -> Result<Self> {
        let mut amps = ComplexTensor::identity(1);
        let mut dims = Vec::new();
        for p in parts {
            amps = kron(&amps, &ComplexTensor::column(&p.amplitudes)?)?;
            dims.extend_from_slice(&p.dims);
        }
        Self::new(amps.into_data(), dims)
    }

    /// Excited-state population of emitter `j`.
    pub fn population(&self, j: usize) -> Result<f64> {
        if j >= self.dims.len() {
            return Err(Error::OutOfRange {
                index: j,
                len: self.dims.len(),
            });
        }
        let stride: usize = self.dims[j + 1..].iter().product();
        let d = self.dims[j];
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| (i / stride) % d == 1)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    pub fn to_site(&self) -> Result<SiteTensor> {
        SiteTensor::product(SiteLabel::System, &self.amplitudes)
    }
}

pub fn tls_ground() -> SystemState {
    SystemState {
        amplitudes: vec![ONE, ZERO],
        dims: vec![2],
    }
}

pub fn tls_excited() -> SystemState {
    SystemState {
        amplitudes: vec![ZERO, ONE],
        dims: vec![2],
    }
}

/// c1|e,g⟩ + c2|g,e⟩.
pub fn entangled_pair(c1: C64, c2: C64) -> Result<SystemState> {
    let norm = c1.norm_sqr() + c2.norm_sqr();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::Contract(format!(
            "|c1|² + |c2|² = {norm}, expected 1"
        )));
    }
    // basis |g,g⟩, |g,e⟩, |e,g⟩, |e,e⟩
    SystemState::new(vec![ZERO, c2, c1, ZERO], vec![2, 2])
}

/// Field channel of a time bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Right,
    Left,
}

impl Channel {
    /// Basis index of `level` photons in this channel with vacuum elsewhere.
    pub fn bin_index(self, level: usize, d_t: &[usize]) -> Result<usize> {
        let d = match (self, d_t.len()) {
            (Channel::Right, _) => d_t[0],
            (Channel::Left, 2) => d_t[1],
            (Channel::Left, _) => {
                return Err(Error::InvalidParams(
                    "single-channel bins have no left channel".into(),
                ));
            }
        };
        if level >= d {
            return Err(Error::InvalidParams(format!(
                "{level} photons do not fit a channel of extent {d}"
            )));
        }
        Ok(match self {
            Channel::Right => level * d_t.get(1).copied().unwrap_or(1),
            Channel::Left => level,
        })
    }

    /// Index of the channel inside `d_t`.
    pub fn slot(self) -> usize {
        match self {
            Channel::Right => 0,
            Channel::Left => 1,
        }
    }
}

/// `n_bins` vacuum bins labelled 0…n_bins−1.
pub fn vacuum(n_bins: usize, params: &SimParams) -> Result<Vec<SiteTensor>> {
    vacuum_labelled(0..n_bins as i64, params)
}

pub(crate) fn vacuum_labelled(
    labels: impl Iterator<Item = i64>,
    params: &SimParams,
) -> Result<Vec<SiteTensor>> {
    let d = params.bin_dim();
    labels
        .map(|k| SiteTensor::basis(SiteLabel::Bin(k), d, 0))
        .collect()
}

/// Sampled pulse envelope with Σ|f_k|² = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub samples: Vec<C64>,
    pub delta_t: f64,
}

impl Envelope {
    /// Parses `re,im` lines (blank lines and `#` comments ignored) and normalizes.
    pub fn from_csv(text: &str, delta_t: f64, expected_len: usize) -> Result<Self> {
        let mut samples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (re, im) = line.split_once(',').unwrap_or((line, "0"));
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("envelope line {}: bad number {s:?}", i + 1)))
            };
            samples.push(C64::new(parse(re)?, parse(im)?));
        }
        if samples.len() != expected_len {
            return Err(Error::Dimension(format!(
                "envelope has {} samples, the grid has {expected_len}",
                samples.len()
            )));
        }
        normalize_pulse(&Envelope { samples, delta_t })
    }
}

pub fn normalize_pulse(env: &Envelope) -> Result<Envelope> {
    let norm: f64 = env.samples.iter().map(|f| f.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidParams("envelope has no weight".into()));
    }
    Ok(Envelope {
        samples: env.samples.iter().map(|f| f / norm).collect(),
        delta_t: env.delta_t,
    })
}

/// Gaussian samples exp(−(t_k − t_c)²/(2σ²)) on t_k = kΔt, one per step.
pub fn gaussian_envelope(t_c: f64, sigma: f64, params: &SimParams) -> Result<Envelope> {
    gaussian_envelope_len(t_c, sigma, params.delta_t, params.n_steps()?)
}

pub fn gaussian_envelope_len(t_c: f64, sigma: f64, delta_t: f64, n: usize) -> Result<Envelope> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParams(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let samples = (0..n)
        .map(|k| {
            let z = (k as f64 * delta_t - t_c) / sigma;
            C64::new((-0.5 * z * z).exp(), 0.0)
        })
        .collect();
    normalize_pulse(&Envelope { samples, delta_t })
}

/// One- or two-photon pulse as an MPS chain over bins 0…m−1, scaled to unit norm.
///
/// The one-photon chain has bond 2 and the two-photon chain bond 3; the
/// boundary tensors are the first row and last column of the bulk tensors.
pub fn fock_pulse(
    env: &Envelope,
    n_photons: usize,
    direction: Channel,
    params: &SimParams,
) -> Result<Vec<SiteTensor>> {
    if !(1..=2).contains(&n_photons) {
        return Err(Error::InvalidParams(format!(
            "Fock pulses carry 1 or 2 photons, got {n_photons}"
        )));
    }
    let m = env.samples.len();
    if m == 0 {
        return Err(Error::InvalidParams("empty envelope".into()));
    }
    let d = params.bin_dim();
    let idx: Vec<usize> = (0..=n_photons)
        .map(|lvl| direction.bin_index(lvl, &params.d_t))
        .collect::<Result<_>>()?;
    let chi = n_photons + 1;
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut sites = Vec::with_capacity(m);
    for (k, &f) in env.samples.iter().enumerate() {
        // bulk[p][a][b]
        let mut bulk = vec![ZERO; d * chi * chi];
        let mut put = |p: usize, a: usize, b: usize, v: C64| bulk[(p * chi + a) * chi + b] = v;
        for a in 0..chi {
            put(idx[0], a, a, ONE);
        }
        if n_photons == 1 {
            put(idx[1], 0, 1, f);
        } else {
            put(idx[1], 0, 1, f * sqrt2);
            put(idx[1], 1, 2, f * sqrt2);
            put(idx[2], 0, 2, f * f * sqrt2);
        }
        let rows: Vec<usize> = if k == 0 { vec![0] } else { (0..chi).collect() };
        let cols: Vec<usize> = if k == m - 1 {
            vec![chi - 1]
        } else {
            (0..chi).collect()
        };
        let mut data = Vec::with_capacity(rows.len() * d * cols.len());
        for &a in &rows {
            for p in 0..d {
                for &b in &cols {
                    data.push(bulk[(p * chi + a) * chi + b]);
                }
            }
        }
        let t = ComplexTensor::new(vec![rows.len(), d, cols.len()], data)?;
        sites.push(SiteTensor::new(SiteLabel::Bin(k as i64), t)?);
    }
    let norm = chain_norm_sqr(&sites)?;
    if !(norm > 0.0) {
        return Err(Error::InvalidParams(
            "pulse envelope has zero weight".into(),
        ));
    }
    let first = sites[0].tensor().scale_real(1.0 / norm.sqrt());
    sites[0] = SiteTensor::new(SiteLabel::Bin(0), first)?;
    Ok(sites)
}

/// ⟨ψ|ψ⟩ of an open chain by left-to-right transfer.
fn chain_norm_sqr(sites: &[SiteTensor]) -> Result<f64> {
    let mut env = ComplexTensor::identity(1);
    for s in sites {
        env = transfer(&env, s.tensor(), s.tensor())?;
    }
    Ok(env.data()[0].re)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tls_basis_populations() {
        assert_eq!(tls_excited().population(0).unwrap(), 1.0);
        assert_eq!(tls_ground().population(0).unwrap(), 0.0);
        let eg = SystemState::product(&[tls_excited(), tls_ground()]).unwrap();
        assert_eq!(eg.population(0).unwrap(), 1.0);
        assert_eq!(eg.population(1).unwrap(), 0.0);
    }

    #[test]
    fn pair_populations() {
        let s = entangled_pair(C64::new(0.6, 0.0), C64::new(0.8, 0.0)).unwrap();
        assert!((s.population(0).unwrap() - 0.36).abs() < 1e-15);
        assert!((s.population(1).unwrap() - 0.64).abs() < 1e-15);
        assert_eq!(
            entangled_pair(ONE, ZERO).unwrap(),
            SystemState::product(&[tls_excited(), tls_ground()]).unwrap()
        );
        assert!(entangled_pair(ONE, ONE).is_err());
    }

    #[test]
    fn gaussian_peak_and_norm() {
        let p = SimParams {
            t_max: 3.0,
            ..SimParams::default()
        };
        let env = gaussian_envelope(1.5, 0.5, &p).unwrap();
        let sum: f64 = env.samples.iter().map(|f| f.norm_sqr()).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let (kmax, _) = env
            .samples
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.re.total_cmp(&b.1.re))
            .unwrap();
        assert_eq!(kmax, 30);
        let sym = gaussian_envelope_len(1.5, 0.5, 0.05, 61).unwrap();
        for k in 0..61 {
            assert!((sym.samples[k] - sym.samples[60 - k]).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_envelope_normalizes() {
        let env = Envelope {
            samples: vec![C64::new(3.0, 0.0); 4],
            delta_t: 0.1,
        };
        let n = normalize_pulse(&env).unwrap();
        assert!(n.samples.iter().all(|f| (f.re - 0.5).abs() < 1e-15));
        assert_eq!(normalize_pulse(&n).unwrap(), n);
        assert!(normalize_pulse(&Envelope {
            samples: vec![ZERO; 3],
            delta_t: 0.1
        })
        .is_err());
    }

    #[test]
    fn two_photons_need_extent_three() {
        let env = gaussian_envelope_len(1.0, 0.5, 0.1, 20).unwrap();
        let p = SimParams::default();
        assert!(fock_pulse(&env, 2, Channel::Right, &p).is_err());
        assert!(fock_pulse(&env, 3, Channel::Right, &p).is_err());
    }
}
