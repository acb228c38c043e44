//! Matrix product states with a tracked orthogonality center.
//!
//! Sites are rank-3 tensors with axes `[left bond, physical, right bond]`.
//! Every site left of the orthogonality center (OC) is left-normalized and
//! every site right of it is right-normalized, so the OC tensor alone carries
//! the norm and local reduced states are cheap to extract.

use std::fmt;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{svd_truncate_with, unitarity_error, SvdResult, Truncation};
use crate::tensor::{contract, ComplexTensor, C64, ONE, ZERO};

/// Role and time label of a chain site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SiteLabel {
    System,
    /// Field time bin with its step index (negative for pre-delay vacuum bins).
    Bin(i64),
}

impl fmt::Display for SiteLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SiteLabel::System => write!(f, "sys"),
            SiteLabel::Bin(k) => write!(f, "bin{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteTensor {
    pub label: SiteLabel,
    data: ComplexTensor,
}

impl SiteTensor {
    pub fn new(label: SiteLabel, data: ComplexTensor) -> Result<Self> {
        if data.rank() != 3 {
            return Err(Error::Dimension(format!(
                "site tensor must be rank 3, got shape {:?}",
                data.shape()
            )));
        }
        if !data.is_finite() {
            return Err(Error::Numeric("site tensor contains NaN or Inf".into()));
        }
        Ok(Self { label, data })
    }

    /// Bond-1 site holding the given local amplitudes.
    pub fn product(label: SiteLabel, amplitudes: &[C64]) -> Result<Self> {
        Self::new(
            label,
            ComplexTensor::new(vec![1, amplitudes.len(), 1], amplitudes.to_vec())?,
        )
    }

    /// Bond-1 site in local basis state `level`.
    pub fn basis(label: SiteLabel, dim: usize, level: usize) -> Result<Self> {
        if level >= dim {
            return Err(Error::OutOfRange {
                index: level,
                len: dim,
            });
        }
        let mut amps = vec![ZERO; dim];
        amps[level] = ONE;
        Self::product(label, &amps)
    }

    pub fn left_bond(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn physical(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn right_bond(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn tensor(&self) -> &ComplexTensor {
        &self.data
    }

    pub fn is_system(&self) -> bool {
        self.label == SiteLabel::System
    }
}

/// Which bipartition a Schmidt spectrum belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cut {
    /// Emitters plus unvisited bins against everything already emitted.
    System,
    /// Emitters plus the delay window against finalized output.
    Feedback,
    /// A raw bond index.
    Bond(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSpectrum {
    /// Descending, with Σ values² = 1.
    pub values: Vec<f64>,
    pub cut: Cut,
    pub step: usize,
}

impl SchmidtSpectrum {
    /// Sorts and square-normalizes raw singular values.
    pub fn from_singular_values(mut values: Vec<f64>, cut: Cut, step: usize) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = values.iter().map(|v| v * v).sum();
        if total > 0.0 {
            let s = total.sqrt();
            values.iter_mut().for_each(|v| *v /= s);
        }
        Self { values, cut, step }
    }

    pub fn trivial(cut: Cut, step: usize) -> Self {
        Self {
            values: vec![1.0],
            cut,
            step,
        }
    }
}

/// Where the orthogonality center ends up after a two-site re-split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcSide {
    Left,
    Right,
}

/// Outcome of re-splitting a window of sites.
#[derive(Debug, Clone)]
pub struct WindowReport {
    /// Raw singular values at each internal cut of the new window, left to right.
    pub cuts: Vec<Vec<f64>>,
    /// Reduced density matrix of each site of the new window, in chain order.
    pub densities: Vec<ComplexTensor>,
    pub discarded_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mps {
    sites: Vec<SiteTensor>,
    oc: usize,
    trunc: Truncation,
    strict_unitary: bool,
    unitary_tol: f64,
    discarded_weight: f64,
    peak_bond: usize,
}

impl Mps {
    /// Builds a canonical, unit-norm state with the OC at `oc`.
    pub fn from_sites(sites: Vec<SiteTensor>, oc: usize, trunc: Truncation) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Dimension("an MPS needs at least one site".into()));
        }
        if oc >= sites.len() {
            return Err(Error::OutOfRange {
                index: oc,
                len: sites.len(),
            });
        }
        if sites[0].left_bond() != 1 || sites[sites.len() - 1].right_bond() != 1 {
            return Err(Error::Dimension(
                "outer bonds of the chain must have extent 1".into(),
            ));
        }
        for (k, w) in sites.windows(2).enumerate() {
            if w[0].right_bond() != w[1].left_bond() {
                return Err(Error::Dimension(format!(
                    "bond {k}-{}: {} vs {}",
                    k + 1,
                    w[0].right_bond(),
                    w[1].left_bond()
                )));
            }
        }
        let peak_bond = sites.iter().map(SiteTensor::right_bond).max().unwrap_or(1);
        let mut mps = Self {
            sites,
            oc: 0,
            trunc,
            strict_unitary: true,
            unitary_tol: 1e-8,
            discarded_weight: 0.0,
            peak_bond,
        };
        // Left sweep to the end, then normalize and walk back.
        let last = mps.len() - 1;
        let exact = Truncation::exact();
        for k in 0..last {
            mps.gauge_right(k, &exact)?;
        }
        mps.oc = last;
        let norm = mps.sites[last].data.frobenius_norm();
        if !(norm > 0.0) {
            return Err(Error::Contract("state has zero norm".into()));
        }
        mps.sites[last].data = mps.sites[last].data.scale_real(1.0 / norm);
        for k in (oc + 1..=last).rev() {
            mps.gauge_left(k, &exact)?;
        }
        mps.oc = oc;
        mps.peak_bond = mps.bond_dims().into_iter().max().unwrap_or(1);
        Ok(mps)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[SiteTensor] {
        &self.sites
    }

    pub fn site(&self, k: usize) -> Result<&SiteTensor> {
        self.sites.get(k).ok_or(Error::OutOfRange {
            index: k,
            len: self.sites.len(),
        })
    }

    pub fn oc(&self) -> usize {
        self.oc
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn set_truncation(&mut self, trunc: Truncation) {
        self.trunc = trunc;
    }

    pub fn strict_unitary(&self) -> bool {
        self.strict_unitary
    }

    pub fn set_strict_unitary(&mut self, on: bool) {
        self.strict_unitary = on;
    }

    /// Accumulated discarded weight of all truncations so far.
    pub fn discarded_weight(&self) -> f64 {
        self.discarded_weight
    }

    pub fn peak_bond(&self) -> usize {
        self.peak_bond
    }

    /// Extents of the internal bonds, left to right.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.sites.len() - 1]
            .iter()
            .map(SiteTensor::right_bond)
            .collect()
    }

    pub fn physical_dims(&self) -> Vec<usize> {
        self.sites.iter().map(SiteTensor::physical).collect()
    }

    /// Position of the first site carrying `label`.
    pub fn position(&self, label: SiteLabel) -> Option<usize> {
        self.sites.iter().position(|s| s.label == label)
    }

    /// ⟨ψ|ψ⟩ from the OC tensor.
    pub fn norm_sqr(&self) -> f64 {
        self.sites[self.oc].data.frobenius_norm().powi(2)
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.sites.len() {
            return Err(Error::OutOfRange {
                index: k,
                len: self.sites.len(),
            });
        }
        Ok(())
    }

    fn record(&mut self, svd: &SvdResult) {
        self.discarded_weight += svd.discarded_weight;
        self.peak_bond = self.peak_bond.max(svd.rank());
    }

    /// Moves the OC from `k` to `k + 1`.
    fn gauge_right(&mut self, k: usize, trunc: &Truncation) -> Result<()> {
        let a = &self.sites[k].data;
        let (l, p, r) = (a.shape()[0], a.shape()[1], a.shape()[2]);
        let svd = svd_truncate_with(&a.clone().reshaped(vec![l * p, r]), trunc)?;
        let chi = svd.rank();
        let sv = scale_rows(&svd.right, &svd.singular_values);
        let next = contract(&sv, &self.sites[k + 1].data, &[(1, 0)])?;
        self.record(&svd);
        self.sites[k].data = svd.left.reshaped(vec![l, p, chi]);
        self.sites[k + 1].data = next;
        Ok(())
    }

    /// Moves the OC from `k` to `k - 1`.
    fn gauge_left(&mut self, k: usize, trunc: &Truncation) -> Result<()> {
        let a = &self.sites[k].data;
        let (l, p, r) = (a.shape()[0], a.shape()[1], a.shape()[2]);
        let svd = svd_truncate_with(&a.clone().reshaped(vec![l, p * r]), trunc)?;
        let chi = svd.rank();
        let us = scale_cols(&svd.left, &svd.singular_values);
        let prev = contract(&self.sites[k - 1].data, &us, &[(2, 0)])?;
        self.record(&svd);
        self.sites[k].data = svd.right.reshaped(vec![chi, p, r]);
        self.sites[k - 1].data = prev;
        Ok(())
    }

    pub fn move_oc(&mut self, target: usize) -> Result<()> {
        self.check_index(target)?;
        let trunc = self.trunc;
        while self.oc < target {
            self.gauge_right(self.oc, &trunc)?;
            self.oc += 1;
        }
        while self.oc > target {
            self.gauge_left(self.oc, &trunc)?;
            self.oc -= 1;
        }
        Ok(())
    }

    /// Exchanges the physical legs (and labels) of sites `k` and `k + 1`;
    /// the OC ends on `k + 1`.
    pub fn swap_adjacent(&mut self, k: usize) -> Result<WindowReport> {
        self.swap_adjacent_with(k, OcSide::Right)
    }

    pub fn swap_adjacent_with(&mut self, k: usize, side: OcSide) -> Result<WindowReport> {
        if k + 1 >= self.sites.len() {
            return Err(Error::OutOfRange {
                index: k + 1,
                len: self.sites.len(),
            });
        }
        if self.oc != k && self.oc != k + 1 {
            return Err(Error::Contract(format!(
                "swap at {k} needs the OC on {k} or {}, it is on {}",
                k + 1,
                self.oc
            )));
        }
        let target = match side {
            OcSide::Left => 0,
            OcSide::Right => 1,
        };
        self.rewrite_window(k, 2, None, &[1, 0], target)
    }

    /// Applies `gate` to `n` adjacent physical legs starting at `first`, in
    /// chain order. The OC ends on the leftmost system site of the window, or
    /// the leftmost site if the window holds no system site.
    pub fn apply_gate(&mut self, gate: &ComplexTensor, first: usize) -> Result<WindowReport> {
        let n = gate_arity(gate, &self.sites, first)?;
        if !(2..=3).contains(&n) {
            return Err(Error::Dimension(format!(
                "gates act on 2 or 3 sites, got {n}"
            )));
        }
        if self.oc < first || self.oc >= first + n {
            return Err(Error::Contract(format!(
                "OC at {} is outside the gate window {first}..{}",
                self.oc,
                first + n
            )));
        }
        let order: Vec<usize> = (0..n).collect();
        let target = (0..n)
            .find(|&i| self.sites[first + i].is_system())
            .unwrap_or(0);
        self.apply_window(gate, first, &order, &order, target, self.strict_unitary)
    }

    /// General window update used by the evolution engine.
    ///
    /// `gate_order[j]` is the window position fed to the j-th tensor factor of
    /// the gate; `out_order[i]` is the window position that lands at slot `i`
    /// of the re-split window; `oc_target` is a slot of the new window.
    pub fn apply_window(
        &mut self,
        gate: &ComplexTensor,
        first: usize,
        gate_order: &[usize],
        out_order: &[usize],
        oc_target: usize,
        check_unitary: bool,
    ) -> Result<WindowReport> {
        let n = gate_order.len();
        if first + n > self.sites.len() {
            return Err(Error::OutOfRange {
                index: first + n - 1,
                len: self.sites.len(),
            });
        }
        if self.oc < first || self.oc >= first + n {
            return Err(Error::Contract(format!(
                "OC at {} is outside the window {first}..{}",
                self.oc,
                first + n
            )));
        }
        let dim: usize = gate_order
            .iter()
            .map(|&w| self.sites[first + w].physical())
            .product();
        if gate.shape() != [dim, dim] {
            return Err(Error::Dimension(format!(
                "gate of shape {:?} does not match window extent {dim}",
                gate.shape()
            )));
        }
        if check_unitary {
            let err = unitarity_error(gate)?;
            if err > self.unitary_tol {
                return Err(Error::Contract(format!(
                    "gate is not unitary: ‖U†U − I‖ = {err:.3e}"
                )));
            }
        }
        self.rewrite_window(first, n, Some((gate, gate_order)), out_order, oc_target)
    }

    fn rewrite_window(
        &mut self,
        first: usize,
        n: usize,
        gate: Option<(&ComplexTensor, &[usize])>,
        out_order: &[usize],
        oc_target: usize,
    ) -> Result<WindowReport> {
        if out_order.len() != n || !is_permutation(out_order) || oc_target >= n {
            return Err(Error::Dimension("malformed window ordering".into()));
        }
        let phys: Vec<usize> = (0..n).map(|i| self.sites[first + i].physical()).collect();
        let l = self.sites[first].left_bond();
        let r = self.sites[first + n - 1].right_bond();

        // θ[l, p0, …, p_{n-1}, r]
        let mut theta = self.sites[first].data.clone();
        for i in 1..n {
            let rank = theta.rank();
            theta = contract(&theta, &self.sites[first + i].data, &[(rank - 1, 0)])?;
        }

        if let Some((g, gate_order)) = gate {
            if gate_order.len() != n || !is_permutation(gate_order) {
                return Err(Error::Dimension("malformed gate ordering".into()));
            }
            // Bring the legs into gate order, apply, and continue in gate order.
            let mut axes = vec![0];
            axes.extend(gate_order.iter().map(|&w| w + 1));
            axes.push(n + 1);
            let dim: usize = gate_order.iter().map(|&w| phys[w]).product();
            let t = theta.permuted(&axes).reshaped(vec![l, dim, r]);
            let applied = contract(g, &t, &[(1, 1)])?; // [dim, l, r]
            let mut gshape = vec![l];
            gshape.extend(gate_order.iter().map(|&w| phys[w]));
            gshape.push(r);
            let back = applied.permuted(&[1, 0, 2]).reshaped(gshape);
            // Slot j currently holds window position gate_order[j].
            let mut slot_of = vec![0; n];
            for (j, &w) in gate_order.iter().enumerate() {
                slot_of[w] = j;
            }
            let mut axes = vec![0];
            axes.extend(out_order.iter().map(|&w| slot_of[w] + 1));
            axes.push(n + 1);
            theta = back.permuted(&axes);
        } else {
            let mut axes = vec![0];
            axes.extend(out_order.iter().map(|&w| w + 1));
            axes.push(n + 1);
            theta = theta.permuted(&axes);
        }

        let labels: Vec<SiteLabel> = out_order
            .iter()
            .map(|&w| self.sites[first + w].label)
            .collect();
        let new_phys: Vec<usize> = out_order.iter().map(|&w| phys[w]).collect();
        let trunc = self.trunc;

        let mut cuts = vec![Vec::new(); n - 1];
        let mut tensors: Vec<Option<ComplexTensor>> = vec![None; n];
        let mut densities: Vec<Option<ComplexTensor>> = vec![None; n];
        let mut discarded = 0.0;

        // Left-to-right splits up to the OC slot.
        let mut left_bond = l;
        let mut rest = theta;
        for i in 0..oc_target {
            let rows = left_bond * new_phys[i];
            let cols = rest.len() / rows;
            let svd = svd_truncate_with(&rest.reshaped(vec![rows, cols]), &trunc)?;
            let chi = svd.rank();
            let site = svd.left.clone().reshaped(vec![left_bond, new_phys[i], chi]);
            let w2: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
            densities[i] = Some(site_density(&site, None, Some(&w2)));
            tensors[i] = Some(site);
            rest = scale_rows(&svd.right, &svd.singular_values);
            let mut shape = vec![chi];
            shape.extend_from_slice(&new_phys[i + 1..]);
            shape.push(r);
            rest = rest.reshaped(shape);
            discarded += svd.discarded_weight;
            self.record(&svd);
            cuts[i] = svd.singular_values;
            left_bond = chi;
        }
        // Right-to-left splits down to the OC slot.
        let mut right_bond = r;
        for i in (oc_target + 1..n).rev() {
            let cols = new_phys[i] * right_bond;
            let rows = rest.len() / cols;
            let svd = svd_truncate_with(&rest.reshaped(vec![rows, cols]), &trunc)?;
            let chi = svd.rank();
            let site = svd
                .right
                .clone()
                .reshaped(vec![chi, new_phys[i], right_bond]);
            let w2: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
            densities[i] = Some(site_density(&site, Some(&w2), None));
            tensors[i] = Some(site);
            rest = scale_cols(&svd.left, &svd.singular_values);
            let mut shape = vec![left_bond];
            shape.extend_from_slice(&new_phys[oc_target..i]);
            shape.push(chi);
            rest = rest.reshaped(shape);
            discarded += svd.discarded_weight;
            self.record(&svd);
            cuts[i - 1] = svd.singular_values;
            right_bond = chi;
        }
        let center = rest.reshaped(vec![left_bond, new_phys[oc_target], right_bond]);
        if !center.is_finite() {
            return Err(Error::Numeric(
                "window update produced non-finite values".into(),
            ));
        }
        densities[oc_target] = Some(site_density(&center, None, None));
        tensors[oc_target] = Some(center);

        for (i, (t, label)) in tensors.into_iter().zip(labels).enumerate() {
            self.sites[first + i] = SiteTensor {
                label,
                data: t.expect("every slot filled"),
            };
        }
        self.oc = first + oc_target;
        Ok(WindowReport {
            cuts,
            densities: densities
                .into_iter()
                .map(|d| d.expect("every slot filled"))
                .collect(),
            discarded_weight: discarded,
        })
    }

    /// Reduced density matrix ρ[i][j] = ⟨i|ρ|j⟩ of one site.
    pub fn reduced_density(&mut self, site: usize) -> Result<ComplexTensor> {
        self.move_oc(site)?;
        Ok(site_density(&self.sites[site].data, None, None))
    }

    /// ⟨ψ|O_site|ψ⟩.
    pub fn expectation_local(&mut self, op: &ComplexTensor, site: usize) -> Result<C64> {
        self.check_index(site)?;
        let p = self.sites[site].physical();
        if op.shape() != [p, p] {
            return Err(Error::Dimension(format!(
                "operator {:?} on a site of physical extent {p}",
                op.shape()
            )));
        }
        let rho = self.reduced_density(site)?;
        trace_product(op, &rho)
    }

    /// Schmidt spectrum across bond `cut` (between sites `cut - 1` and `cut`).
    pub fn schmidt_at_cut(&mut self, cut: usize) -> Result<SchmidtSpectrum> {
        if cut > self.sites.len() {
            return Err(Error::OutOfRange {
                index: cut,
                len: self.sites.len() + 1,
            });
        }
        if cut == 0 || cut == self.sites.len() {
            return Ok(SchmidtSpectrum::trivial(Cut::Bond(cut), 0));
        }
        self.move_oc(cut - 1)?;
        let a = &self.sites[cut - 1].data;
        let (l, p, r) = (a.shape()[0], a.shape()[1], a.shape()[2]);
        let svd = svd_truncate_with(&a.clone().reshaped(vec![l * p, r]), &Truncation::exact())?;
        Ok(SchmidtSpectrum::from_singular_values(
            svd.singular_values,
            Cut::Bond(cut),
            0,
        ))
    }

    /// Dense state vector, first site most significant.
    pub fn to_dense(&self) -> Result<Vec<C64>> {
        let total: usize = self.sites.iter().map(SiteTensor::physical).product();
        if total > 1 << 22 {
            return Err(Error::Dimension(format!(
                "dense state of dimension {total} is too large"
            )));
        }
        let mut acc = self.sites[0]
            .data
            .clone()
            .reshaped(vec![self.sites[0].physical(), self.sites[0].right_bond()]);
        for s in &self.sites[1..] {
            let merged = contract(&acc, &s.data, &[(1, 0)])?; // [D, p, r]
            let (d, p, r) = (merged.shape()[0], merged.shape()[1], merged.shape()[2]);
            acc = merged.reshaped(vec![d * p, r]);
        }
        Ok(acc.into_data())
    }

    /// Writes a versioned text dump that round-trips bit-exactly.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "binwave-mps 1");
        let _ = writeln!(
            out,
            "sites {} oc {} bond_max {} cutoff {:016x} renormalize {} strict {} discarded {:016x} peak {}",
            self.sites.len(),
            self.oc,
            self.trunc.bond_max,
            self.trunc.cutoff.to_bits(),
            self.trunc.renormalize as u8,
            self.strict_unitary as u8,
            self.discarded_weight.to_bits(),
            self.peak_bond
        );
        for s in &self.sites {
            let _ = writeln!(
                out,
                "site {} {} {} {}",
                s.label,
                s.left_bond(),
                s.physical(),
                s.right_bond()
            );
            for z in s.data.data() {
                let _ = writeln!(out, "{:016x} {:016x}", z.re.to_bits(), z.im.to_bits());
            }
        }
        out
    }

    pub fn load(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let bad = |what: &str| Error::Parse(format!("MPS dump: {what}"));
        if lines.next() != Some("binwave-mps 1") {
            return Err(bad("missing or unsupported header"));
        }
        let head: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("missing summary line"))?
            .split_whitespace()
            .collect();
        if head.len() != 16 {
            return Err(bad("malformed summary line"));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad("bad integer"));
        let bits = |s: &str| {
            u64::from_str_radix(s, 16)
                .map(f64::from_bits)
                .map_err(|_| bad("bad float bits"))
        };
        let n = int(head[1])?;
        let oc = int(head[3])?;
        let trunc = Truncation {
            bond_max: int(head[5])?,
            cutoff: bits(head[7])?,
            renormalize: head[9] == "1",
        };
        let strict = head[11] == "1";
        let discarded = bits(head[13])?;
        let peak = int(head[15])?;
        let mut sites = Vec::with_capacity(n);
        for _ in 0..n {
            let hdr: Vec<&str> = lines
                .next()
                .ok_or_else(|| bad("truncated"))?
                .split_whitespace()
                .collect();
            if hdr.len() != 5 || hdr[0] != "site" {
                return Err(bad("malformed site header"));
            }
            let label = if hdr[1] == "sys" {
                SiteLabel::System
            } else {
                let k = hdr[1].strip_prefix("bin").ok_or_else(|| bad("bad label"))?;
                SiteLabel::Bin(k.parse().map_err(|_| bad("bad label"))?)
            };
            let shape = vec![int(hdr[2])?, int(hdr[3])?, int(hdr[4])?];
            let count: usize = shape.iter().product();
            let mut data = Vec::with_capacity(count);
            for _ in 0..count {
                let line = lines.next().ok_or_else(|| bad("truncated"))?;
                let (re, im) = line.split_once(' ').ok_or_else(|| bad("bad element"))?;
                data.push(C64::new(bits(re)?, bits(im)?));
            }
            sites.push(SiteTensor::new(label, ComplexTensor::new(shape, data)?)?);
        }
        if oc >= n {
            return Err(bad("OC out of range"));
        }
        Ok(Self {
            sites,
            oc,
            trunc,
            strict_unitary: strict,
            unitary_tol: 1e-8,
            discarded_weight: discarded,
            peak_bond: peak,
        })
    }

    /// Inserts a site at `pos`. The new site must have bond extents 1 on
    /// both sides and the neighbouring bond must also be 1.
    pub fn insert_product_site(&mut self, pos: usize, site: SiteTensor) -> Result<()> {
        if pos > self.sites.len() {
            return Err(Error::OutOfRange {
                index: pos,
                len: self.sites.len() + 1,
            });
        }
        if site.left_bond() != 1 || site.right_bond() != 1 {
            return Err(Error::Dimension(
                "inserted site must have unit bonds".into(),
            ));
        }
        if pos > 0 && pos < self.sites.len() && self.sites[pos].left_bond() != 1 {
            return Err(Error::Dimension(format!(
                "bond at {pos} is entangled; cannot insert a product site"
            )));
        }
        let n = site.data.frobenius_norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::Contract(format!("inserted site has norm {n}")));
        }
        self.sites.insert(pos, site);
        if self.oc >= pos {
            self.oc += 1;
        }
        Ok(())
    }

    /// Appends product sites on the right.
    pub fn extend_product(&mut self, sites: impl IntoIterator<Item = SiteTensor>) -> Result<()> {
        for s in sites {
            let pos = self.sites.len();
            self.insert_product_site(pos, s)?;
        }
        Ok(())
    }
}

/// ⟨a|b⟩ by a left-to-right transfer sweep.
pub fn global_overlap(a: &Mps, b: &Mps) -> Result<C64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "chains of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut env = ComplexTensor::identity(1);
    for (k, (sa, sb)) in a.sites.iter().zip(&b.sites).enumerate() {
        if sa.physical() != sb.physical() {
            return Err(Error::Dimension(format!(
                "site {k}: physical extents {} and {}",
                sa.physical(),
                sb.physical()
            )));
        }
        env = transfer(&env, &sa.data, &sb.data)?;
    }
    Ok(env.at(0, 0))
}

/// E'[ra, rb] = Σ conj(A[la, p, ra]) E[la, lb] B[lb, p, rb].
pub(crate) fn transfer(
    env: &ComplexTensor,
    a: &ComplexTensor,
    b: &ComplexTensor,
) -> Result<ComplexTensor> {
    let eb = contract(env, b, &[(1, 0)])?; // [la, p, rb]
    contract(&a.conj(), &eb, &[(0, 0), (1, 1)])
}

/// Reduced density of a site tensor given squared Schmidt weights on its open
/// bonds (`None` means an identity environment).
pub fn site_density(
    a: &ComplexTensor,
    left_w: Option<&[f64]>,
    right_w: Option<&[f64]>,
) -> ComplexTensor {
    let (l, p, r) = (a.shape()[0], a.shape()[1], a.shape()[2]);
    let d = a.data();
    let mut rho = vec![ZERO; p * p];
    for x in 0..l {
        let wl = left_w.map_or(1.0, |w| w[x]);
        for y in 0..r {
            let w = wl * right_w.map_or(1.0, |w| w[y]);
            if w == 0.0 {
                continue;
            }
            for i in 0..p {
                let ai = d[(x * p + i) * r + y];
                if ai == ZERO {
                    continue;
                }
                for j in 0..p {
                    rho[i * p + j] += ai * d[(x * p + j) * r + y].conj() * w;
                }
            }
        }
    }
    ComplexTensor::from_raw(vec![p, p], rho)
}

/// Tr(O ρ).
pub fn trace_product(op: &ComplexTensor, rho: &ComplexTensor) -> Result<C64> {
    op.expect_square("trace_product")?;
    if op.shape() != rho.shape() {
        return Err(Error::Dimension(format!(
            "operator {:?} against density {:?}",
            op.shape(),
            rho.shape()
        )));
    }
    let p = op.shape()[0];
    let mut s = ZERO;
    for i in 0..p {
        for j in 0..p {
            s += op.at(i, j) * rho.at(j, i);
        }
    }
    Ok(s)
}

fn gate_arity(gate: &ComplexTensor, sites: &[SiteTensor], first: usize) -> Result<usize> {
    gate.expect_square("gate")?;
    let dim = gate.shape()[0];
    let mut prod = 1;
    for (n, s) in sites.iter().enumerate().skip(first) {
        prod *= s.physical();
        if prod == dim {
            return Ok(n - first + 1);
        }
        if prod > dim {
            break;
        }
    }
    Err(Error::Dimension(format!(
        "gate extent {dim} does not match any window starting at site {first}"
    )))
}

fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    p.iter()
        .all(|&i| i < p.len() && !std::mem::replace(&mut seen[i], true))
}

fn scale_rows(m: &ComplexTensor, s: &[f64]) -> ComplexTensor {
    let cols = m.shape()[1];
    let mut out = m.clone();
    for (i, row) in out.data_mut().chunks_mut(cols).enumerate() {
        row.iter_mut().for_each(|z| *z *= s[i]);
    }
    out
}

fn scale_cols(m: &ComplexTensor, s: &[f64]) -> ComplexTensor {
    let cols = m.shape()[1];
    let mut out = m.clone();
    for row in out.data_mut().chunks_mut(cols) {
        row.iter_mut().zip(s).for_each(|(z, &w)| *z *= w);
    }
    out
}
