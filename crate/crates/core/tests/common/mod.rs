//! Dense state-vector reference for small chains.
//!
//! Sites are addressed by index, gates act on arbitrary index lists, and no
//! swaps or factorizations are involved.

#![allow(dead_code)]

use binwave::correlations::{g1_grid, g2_grid};
use binwave::evolution::{evolve, BinsRecord};
use binwave::model::{Hamiltonian, Propagators, Role};
use binwave::mps::{SiteLabel, SiteTensor};
use binwave::observables::channel_ladder;
use binwave::params::{Pump, SimParams};
use binwave::states::{Channel, SystemState};
use binwave::{ComplexTensor, C64};
use faer::Mat;
use rand::rngs::StdRng;
use rand::Rng;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone)]
pub struct Dense {
    pub dims: Vec<usize>,
    pub amps: Vec<C64>,
}

impl Dense {
    pub fn product(factors: &[Vec<C64>]) -> Self {
        let mut amps = vec![C64::new(1.0, 0.0)];
        for f in factors {
            amps = amps
                .iter()
                .flat_map(|a| f.iter().map(move |b| a * b))
                .collect();
        }
        Self {
            dims: factors.iter().map(Vec::len).collect(),
            amps,
        }
    }

    /// Appends the sites of `other` after the last site.
    pub fn append(&self, other: &Dense) -> Self {
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        let mut dims = self.dims.clone();
        dims.extend(&other.dims);
        Self { dims, amps }
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.dims[i + 1];
        }
        s
    }

    fn digits(&self, mut idx: usize) -> Vec<usize> {
        let mut d = vec![0; self.dims.len()];
        for i in (0..self.dims.len()).rev() {
            d[i] = idx % self.dims[i];
            idx /= self.dims[i];
        }
        d
    }

    /// Applies a row-major matrix acting on `sites`, the first listed site most significant.
    pub fn apply(&mut self, op: &ComplexTensor, sites: &[usize]) {
        let strides = self.strides();
        let sub_dims: Vec<usize> = sites.iter().map(|&s| self.dims[s]).collect();
        let d: usize = sub_dims.iter().product();
        assert_eq!(op.shape(), [d, d]);
        let offsets: Vec<usize> = (0..d)
            .map(|mut j| {
                let mut off = 0;
                for (k, &s) in sites.iter().enumerate().rev() {
                    off += (j % sub_dims[k]) * strides[s];
                    j /= sub_dims[k];
                }
                off
            })
            .collect();
        let mut out = vec![ZERO; self.amps.len()];
        for base in 0..self.amps.len() {
            if sites.iter().any(|&s| self.digits(base)[s] != 0) {
                continue;
            }
            for r in 0..d {
                let mut acc = ZERO;
                for c in 0..d {
                    acc += op.at(r, c) * self.amps[base + offsets[c]];
                }
                out[base + offsets[r]] = acc;
            }
        }
        self.amps = out;
    }

    pub fn inner(&self, other: &Dense) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(C64::norm_sqr).sum()
    }

    /// ⟨ψ| Π_k O_k |ψ⟩ for operators on distinct sites.
    pub fn expectation(&self, ops: &[(&ComplexTensor, usize)]) -> C64 {
        let mut phi = self.clone();
        for (op, s) in ops {
            phi.apply(op, &[*s]);
        }
        self.inner(&phi)
    }

    /// ρ[i][j] = ⟨i|ρ|j⟩ of one site.
    pub fn reduced(&self, site: usize) -> Vec<Vec<C64>> {
        let p = self.dims[site];
        let mut rho = vec![vec![ZERO; p]; p];
        let stride = self.strides()[site];
        for base in 0..self.amps.len() {
            if self.digits(base)[site] != 0 {
                continue;
            }
            for i in 0..p {
                for j in 0..p {
                    rho[i][j] += self.amps[base + i * stride] * self.amps[base + j * stride].conj();
                }
            }
        }
        rho
    }

    /// Schmidt values of the bipartition `left` | rest, descending.
    pub fn schmidt(&self, left: &[usize]) -> Vec<f64> {
        let right: Vec<usize> = (0..self.dims.len()).filter(|s| !left.contains(s)).collect();
        let dl: usize = left.iter().map(|&s| self.dims[s]).product();
        let dr: usize = right.iter().map(|&s| self.dims[s]).product();
        let mut m = vec![vec![ZERO; dr]; dl];
        for (idx, a) in self.amps.iter().enumerate() {
            let dg = self.digits(idx);
            let l = left.iter().fold(0, |acc, &s| acc * self.dims[s] + dg[s]);
            let r = right.iter().fold(0, |acc, &s| acc * self.dims[s] + dg[s]);
            m[l][r] = *a;
        }
        let mat = Mat::<C64>::from_fn(dl, dr, |i, j| m[i][j]);
        let mut ev = mat.singular_values().expect("dense SVD");
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }
}

/// Dense vector of an open chain of site tensors (first site most significant).
pub fn chain_vector(sites: &[SiteTensor]) -> Dense {
    let first = sites[0].tensor();
    assert_eq!(first.shape()[0], 1);
    // rows: physical multi-index, cols: right bond
    let mut acc: Vec<Vec<C64>> = (0..first.shape()[1])
        .map(|p| {
            (0..first.shape()[2])
                .map(|r| first.get(&[0, p, r]).unwrap())
                .collect()
        })
        .collect();
    for s in &sites[1..] {
        let t = s.tensor();
        let (l, p, r) = (t.shape()[0], t.shape()[1], t.shape()[2]);
        let mut next = Vec::with_capacity(acc.len() * p);
        for row in &acc {
            for q in 0..p {
                next.push(
                    (0..r)
                        .map(|c| (0..l).map(|a| row[a] * t.get(&[a, q, c]).unwrap()).sum())
                        .collect(),
                );
            }
        }
        acc = next;
    }
    let last = sites.last().unwrap().tensor();
    assert_eq!(last.shape()[2], 1);
    Dense {
        dims: sites.iter().map(SiteTensor::physical).collect(),
        amps: acc.into_iter().map(|r| r[0]).collect(),
    }
}

pub fn vacuum_bin(params: &SimParams) -> Vec<C64> {
    let mut v = vec![ZERO; params.bin_dim()];
    v[0] = C64::new(1.0, 0.0);
    v
}

/// Dense run in label space: site 0 is the system, site 1 + d + ℓ holds bin ℓ (ℓ ≥ −d).
pub struct DenseRun {
    pub states: Vec<Dense>,
    pub delay: usize,
    pub n: usize,
}

impl DenseRun {
    pub fn bin_site(&self, label: i64) -> usize {
        (1 + self.delay as i64 + label) as usize
    }

    /// Sites holding bins with label ≤ `label`.
    pub fn bins_up_to(&self, label: i64) -> Vec<usize> {
        (-(self.delay as i64)..=label)
            .map(|l| self.bin_site(l))
            .collect()
    }

    /// Label of the bin stored at chain position `pos` of the final MPS.
    pub fn label_at(&self, pos: usize) -> i64 {
        pos as i64 - self.delay as i64
    }

    pub fn last(&self) -> &Dense {
        self.states.last().unwrap()
    }
}

pub fn dense_run(
    gates: &Propagators,
    sys0: &SystemState,
    field0: &[SiteTensor],
    params: &SimParams,
) -> DenseRun {
    let n = params.n_steps().unwrap();
    let d = if gates.arity() == 3 {
        params.delay_steps().unwrap()
    } else {
        0
    };
    let mut parts = vec![sys0.amplitudes.clone()];
    parts.extend((0..d).map(|_| vacuum_bin(params)));
    let mut psi = Dense::product(&parts);
    let m = field0.len();
    if m > 0 {
        psi = psi.append(&chain_vector(field0));
    }
    psi = psi.append(&Dense::product(
        &(m..n).map(|_| vacuum_bin(params)).collect::<Vec<_>>(),
    ));
    let norm = psi.norm_sqr().sqrt();
    psi.amps.iter_mut().for_each(|a| *a /= norm);
    let mut run = DenseRun {
        states: vec![psi.clone()],
        delay: d,
        n,
    };
    for k in 0..n {
        let prop = gates.get(k).unwrap();
        let sites: Vec<usize> = prop
            .roles()
            .iter()
            .map(|r| match r {
                Role::System => 0,
                Role::PresentBin => run.bin_site(k as i64),
                Role::FeedbackBin => run.bin_site(k as i64 - d as i64),
            })
            .collect();
        psi.apply(prop.gate(), &sites);
        run.states.push(psi.clone());
    }
    run
}

/// Dense version of the final MPS ordering `[bins −d … n−1, S]`.
pub fn final_order(run: &DenseRun) -> Vec<C64> {
    let psi = run.last();
    let n_sites = psi.dims.len();
    let mut order: Vec<usize> = (1..n_sites).collect();
    order.push(0);
    let dims: Vec<usize> = order.iter().map(|&s| psi.dims[s]).collect();
    let mut out = vec![ZERO; psi.amps.len()];
    for (idx, a) in psi.amps.iter().enumerate() {
        let dg = psi.digits(idx);
        let j = order
            .iter()
            .zip(&dims)
            .fold(0, |acc, (&s, &dd)| acc * dd + dg[s]);
        out[j] = *a;
    }
    out
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn matrix_diff(a: &ComplexTensor, b: &[Vec<C64>]) -> f64 {
    let p = b.len();
    let mut m: f64 = 0.0;
    for i in 0..p {
        for j in 0..p {
            m = m.max((a.at(i, j) - b[i][j]).norm());
        }
    }
    m
}

/// Compares descending spectra, padding the shorter with zeros.
pub fn spectrum_diff(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

pub fn random_matrix(rng: &mut impl rand::Rng, rows: usize, cols: usize) -> ComplexTensor {
    let data = (0..rows * cols)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    ComplexTensor::new(vec![rows, cols], data).unwrap()
}

pub fn random_state(rng: &mut impl rand::Rng, dim: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let n = v.iter().map(C64::norm_sqr).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

pub fn unrestricted(mut p: SimParams) -> SimParams {
    p.bond_max = 4096;
    p.cutoff = 0.0;
    p
}

pub fn random_pump(rng: &mut StdRng, n: usize) -> Pump {
    match rng.gen_range(0..3) {
        0 => Pump::None,
        1 => Pump::Cw {
            omega: rng.gen_range(-3.0..3.0),
        },
        _ => Pump::Samples((0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()),
    }
}

/// Random bond-2 field chain over the first `m` bins.
pub fn random_field(rng: &mut StdRng, m: usize, p: usize) -> Vec<SiteTensor> {
    (0..m)
        .map(|k| {
            let l = if k == 0 { 1 } else { 2 };
            let r = if k + 1 == m { 1 } else { 2 };
            let data = random_matrix(rng, l * p, r).into_data();
            SiteTensor::new(
                SiteLabel::Bin(k as i64),
                ComplexTensor::new(vec![l, p, r], data).unwrap(),
            )
            .unwrap()
        })
        .collect()
}

/// Largest deviation between an MPS run and the dense run over every recorded quantity.
pub fn compare(
    h: &Hamiltonian,
    pump: &Pump,
    sys0: &SystemState,
    field0: Vec<SiteTensor>,
    params: &SimParams,
) -> f64 {
    let gates = h.schedule(pump, params).unwrap();
    let run = dense_run(&gates, sys0, &field0, params);
    let rec = evolve(h, pump, sys0, field0, params).unwrap();
    let d = run.delay as i64;
    let mut worst: f64 = 0.0;

    for (k, rho) in rec.system_states.iter().enumerate() {
        worst = worst.max(matrix_diff(rho, &run.states[k].reduced(0)));
    }
    for (k, snap) in rec.output_field_states.iter().enumerate() {
        assert_eq!(snap.label, SiteLabel::Bin(k as i64 - d));
        let site = run.bin_site(k as i64 - d);
        worst = worst.max(matrix_diff(&snap.density, &run.states[k + 1].reduced(site)));
    }
    for (k, window) in rec.loop_field_states.iter().enumerate() {
        assert_eq!(window.len(), run.delay);
        for snap in window {
            let SiteLabel::Bin(l) = snap.label else {
                panic!("system in delay window")
            };
            worst = worst.max(matrix_diff(
                &snap.density,
                &run.states[k].reduced(run.bin_site(l)),
            ));
        }
    }
    for (k, spec) in rec.schmidt.iter().enumerate() {
        let exact = run.states[k].schmidt(&run.bins_up_to(k as i64 - 1));
        worst = worst.max(spectrum_diff(&spec.values, &exact));
    }
    for (k, spec) in rec.schmidt_tau.iter().enumerate() {
        let exact = run.states[k].schmidt(&run.bins_up_to(k as i64 - 1 - d));
        worst = worst.max(spectrum_diff(&spec.values, &exact));
    }
    let mps = rec.final_state.to_dense().unwrap();
    let dense = final_order(&run);
    worst = worst.max(
        mps.iter()
            .zip(&dense)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max),
    );
    worst.max(correlation_error(&rec, &run))
}

pub fn correlation_error(rec: &BinsRecord, run: &DenseRun) -> f64 {
    let psi = run.last();
    let dt = rec.delta_t();
    let a = channel_ladder(&rec.params, Channel::Right).unwrap();
    let ad = a.dagger().unwrap();
    let g1 = g1_grid(rec, Channel::Right, Channel::Right).unwrap();
    let g2 = g2_grid(rec, Channel::Right, Channel::Right).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..g1.n_rows() {
        let si = run.bin_site(run.label_at(i));
        for k in 0..g1.values[i].len() {
            let sj = run.bin_site(run.label_at(i + k));
            let (e1, e2) = if k == 0 {
                let n = ad.matmul(&a).unwrap();
                let nn = ad
                    .matmul(&ad)
                    .unwrap()
                    .matmul(&a)
                    .unwrap()
                    .matmul(&a)
                    .unwrap();
                (psi.expectation(&[(&n, si)]), psi.expectation(&[(&nn, si)]))
            } else {
                let n = ad.matmul(&a).unwrap();
                (
                    psi.expectation(&[(&ad, si), (&a, sj)]),
                    psi.expectation(&[(&n, si), (&n, sj)]),
                )
            };
            worst = worst.max((g1.values[i][k] - e1 / dt).norm());
            worst = worst.max((g2.values[i][k] - e2 / (dt * dt)).norm() * dt * dt);
        }
    }
    worst
}

pub fn random_system(rng: &mut StdRng, dims: Vec<usize>) -> SystemState {
    let dim = dims.iter().product();
    SystemState::new(random_state(rng, dim), dims).unwrap()
}
