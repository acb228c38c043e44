//! Two-time correlations of the output field and their spectra.
//!
//! Output bins are frozen once finalized, so every two-time expectation is
//! evaluated on the final chain: the bin emitted at step k sits at chain
//! position k. Rows of a grid are swept left to right with the OC parked on
//! the row's first bin, so the left environment is the identity and each
//! t′ costs one transfer step.

use std::fmt::Write as _;

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::evolution::BinsRecord;
use crate::linalg::Truncation;
use crate::mps::{transfer, Mps};
use crate::observables::{channel_ladder, total_excitation};
use crate::states::Channel;
use crate::tensor::{contract, ComplexTensor, C64, ZERO};

/// Default zero-padding factor for spectra.
pub const DEFAULT_PADDING: usize = 4;
/// Peaks below this fraction of the maximum are ignored.
pub const PEAK_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationKind {
    G1,
    G2,
}

/// Correlation values on the triangle t_i + t′_k ≤ t_{n−1}.
///
/// `values[i][k]` is the correlation at (t_i, t_i + t′_k); row i holds
/// `n − i` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationGrid {
    pub kind: CorrelationKind,
    pub channels: Option<(Channel, Channel)>,
    pub delta_t: f64,
    pub t_values: Vec<f64>,
    pub tprime_values: Vec<f64>,
    pub values: Vec<Vec<C64>>,
}

impl CorrelationGrid {
    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, k: usize) -> Option<C64> {
        self.values.get(i).and_then(|row| row.get(k)).copied()
    }

    /// Equal-time values (t′ = 0).
    pub fn diagonal(&self) -> Vec<C64> {
        self.values.iter().map(|row| row[0]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// `t,t_prime,re,im`, one line per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,t_prime,re,im\n");
        for (i, row) in self.values.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e},{:.16e}",
                    self.t_values[i], self.tprime_values[k], v.re, v.im
                );
            }
        }
        out
    }
}

/// ⟨O_i⟩-type transfer: E'[ra, rb] = Σ conj(A[la, p, ra]) E[la, lb] O[p, q] A[lb, q, rb].
fn transfer_op(
    env: &ComplexTensor,
    a: &ComplexTensor,
    op: &ComplexTensor,
) -> Result<ComplexTensor> {
    let oa = contract(op, a, &[(1, 1)])?.permuted(&[1, 0, 2]);
    transfer(env, a, &oa)
}

fn env_trace(env: &ComplexTensor) -> C64 {
    let n = env.shape()[0];
    (0..n).map(|i| env.at(i, i)).sum()
}

fn finalized_bins(record: &BinsRecord) -> Result<usize> {
    let n = record.n_steps();
    if n == 0 {
        return Err(Error::InvalidParams(
            "record has no finalized output bins".into(),
        ));
    }
    Ok(n)
}

fn check_op(op: &ComplexTensor, p: usize) -> Result<()> {
    if op.shape() != [p, p] {
        return Err(Error::Dimension(format!(
            "operator {:?} on bins of physical extent {p}",
            op.shape()
        )));
    }
    Ok(())
}

/// Row sweeps of ⟨X_i Y_j⟩ for j ≥ i, with `same` used when j = i.
struct RowSweeper {
    mps: Mps,
    n: usize,
}

impl RowSweeper {
    fn new(record: &BinsRecord) -> Result<Self> {
        let n = finalized_bins(record)?;
        let mut mps = record.final_state.clone();
        mps.set_truncation(Truncation::exact());
        Ok(Self { mps, n })
    }

    fn physical(&self) -> usize {
        self.mps.sites()[0].physical()
    }

    /// Values for j = i … i + len − 1.
    fn row(
        &mut self,
        i: usize,
        len: usize,
        x: &ComplexTensor,
        y: &ComplexTensor,
        same: &ComplexTensor,
    ) -> Result<Vec<C64>> {
        if i + len > self.n {
            return Err(Error::OutOfRange {
                index: i + len - 1,
                len: self.n,
            });
        }
        self.mps.move_oc(i)?;
        let sites = self.mps.sites();
        let a = sites[i].tensor();
        let id = ComplexTensor::identity(a.shape()[0]);
        let mut out = Vec::with_capacity(len);
        out.push(env_trace(&transfer_op(&id, a, same)?));
        if len == 1 {
            return Ok(out);
        }
        let mut env = transfer_op(&id, a, x)?;
        for j in i + 1..i + len {
            let b = sites[j].tensor();
            out.push(env_trace(&transfer_op(&env, b, y)?));
            if j + 1 < i + len {
                env = transfer(&env, b, b)?;
            }
        }
        Ok(out)
    }
}

fn grid_axes(record: &BinsRecord, n: usize) -> (Vec<f64>, Vec<f64>) {
    let dt = record.delta_t();
    let t = record.times[..n].to_vec();
    let tp = (0..n).map(|k| k as f64 * dt).collect();
    (t, tp)
}

fn scale_rows(rows: &mut [Vec<C64>], s: f64) {
    for v in rows.iter_mut().flatten() {
        *v *= s;
    }
}

/// G(t, t + t′) = ⟨A(t) B(t + t′)⟩ / Δt over every finalized bin pair.
pub fn correlation_2op_2t(
    record: &BinsRecord,
    a_op: &ComplexTensor,
    b_op: &ComplexTensor,
) -> Result<CorrelationGrid> {
    let mut sw = RowSweeper::new(record)?;
    let p = sw.physical();
    check_op(a_op, p)?;
    check_op(b_op, p)?;
    let same = a_op.matmul(b_op)?;
    let n = sw.n;
    let mut values = (0..n)
        .map(|i| sw.row(i, n - i, a_op, b_op, &same))
        .collect::<Result<Vec<_>>>()?;
    scale_rows(&mut values, 1.0 / record.delta_t());
    let (t_values, tprime_values) = grid_axes(record, n);
    Ok(CorrelationGrid {
        kind: CorrelationKind::G1,
        channels: None,
        delta_t: record.delta_t(),
        t_values,
        tprime_values,
        values,
    })
}

/// G(t, t + t′) = ⟨A(t) B(t + t′) C(t + t′) D(t)⟩ / Δt² over every finalized bin pair.
pub fn correlation_4op_2t(
    record: &BinsRecord,
    a_op: &ComplexTensor,
    b_op: &ComplexTensor,
    c_op: &ComplexTensor,
    d_op: &ComplexTensor,
) -> Result<CorrelationGrid> {
    let mut sw = RowSweeper::new(record)?;
    let p = sw.physical();
    for op in [a_op, b_op, c_op, d_op] {
        check_op(op, p)?;
    }
    let (x, y, same) = four_op_parts(a_op, b_op, c_op, d_op)?;
    let n = sw.n;
    let mut values = (0..n)
        .map(|i| sw.row(i, n - i, &x, &y, &same))
        .collect::<Result<Vec<_>>>()?;
    let dt = record.delta_t();
    scale_rows(&mut values, 1.0 / (dt * dt));
    let (t_values, tprime_values) = grid_axes(record, n);
    Ok(CorrelationGrid {
        kind: CorrelationKind::G2,
        channels: None,
        delta_t: dt,
        t_values,
        tprime_values,
        values,
    })
}

fn four_op_parts(
    a: &ComplexTensor,
    b: &ComplexTensor,
    c: &ComplexTensor,
    d: &ComplexTensor,
) -> Result<(ComplexTensor, ComplexTensor, ComplexTensor)> {
    let x = a.matmul(d)?;
    let y = b.matmul(c)?;
    let same = a.matmul(b)?.matmul(c)?.matmul(d)?;
    Ok((x, y, same))
}

/// G¹_{αα′}(t, t + t′) = ⟨b†_α(t) b_α′(t + t′)⟩.
pub fn g1_grid(
    record: &BinsRecord,
    alpha: Channel,
    alpha_prime: Channel,
) -> Result<CorrelationGrid> {
    let a = channel_ladder(&record.params, alpha)?;
    let b = channel_ladder(&record.params, alpha_prime)?;
    let mut g = correlation_2op_2t(record, &a.dagger()?, &b)?;
    g.channels = Some((alpha, alpha_prime));
    Ok(g)
}

/// G²_{αα′}(t, t + t′) = ⟨b†_α(t) b†_α′(t + t′) b_α′(t + t′) b_α(t)⟩.
pub fn g2_grid(
    record: &BinsRecord,
    alpha: Channel,
    alpha_prime: Channel,
) -> Result<CorrelationGrid> {
    let a = channel_ladder(&record.params, alpha)?;
    let b = channel_ladder(&record.params, alpha_prime)?;
    let mut g = correlation_4op_2t(record, &a.dagger()?, &b.dagger()?, &b, &a)?;
    g.channels = Some((alpha, alpha_prime));
    Ok(g)
}

/// Steady-state onset detection and correlation span.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateOptions {
    /// Skip detection and use this onset.
    pub t_ss: Option<f64>,
    /// Required t′ span; `None` takes everything after t_ss.
    pub span: Option<f64>,
    /// Trailing window in units of 1/γ.
    pub window: f64,
    /// Largest population change allowed across the window.
    pub tolerance: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            t_ss: None,
            span: None,
            window: 1.0,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateCorrelation {
    pub t_ss: f64,
    pub t_primes: Vec<f64>,
    /// One series per requested operator set.
    pub values: Vec<Vec<C64>>,
}

impl SteadyStateCorrelation {
    /// `t_prime,re,im` for one series, preceded by a `# t_ss=` line.
    pub fn to_csv(&self, series: usize) -> Result<String> {
        let vals = self.values.get(series).ok_or(Error::OutOfRange {
            index: series,
            len: self.values.len(),
        })?;
        let mut out = format!("# t_ss={:.16e}\nt_prime,re,im\n", self.t_ss);
        for (t, v) in self.t_primes.iter().zip(vals) {
            let _ = writeln!(out, "{t:.16e},{:.16e},{:.16e}", v.re, v.im);
        }
        Ok(out)
    }
}

fn decay_scale(record: &BinsRecord) -> f64 {
    let p = &record.params;
    let g = (0..p.n_emitters())
        .map(|j| p.gamma_l[j] + p.gamma_r[j])
        .fold(0.0, f64::max);
    if g > 0.0 {
        1.0 / g
    } else {
        1.0
    }
}

/// Earliest step k such that the total emitter population varies by less
/// than `tolerance` over the trailing `window`/γ ending at t_k.
pub fn detect_steady_state(
    record: &BinsRecord,
    window: f64,
    tolerance: f64,
) -> Result<Option<usize>> {
    let pop = total_excitation(record)?.values;
    let w = ((window * decay_scale(record)) / record.delta_t()).ceil() as usize;
    let w = w.max(1);
    for k in w..pop.len() {
        let slice = &pop[k - w..=k];
        let hi = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = slice.iter().copied().fold(f64::INFINITY, f64::min);
        if hi - lo < tolerance {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

fn steady_row(record: &BinsRecord, opts: &SteadyStateOptions) -> Result<(usize, usize)> {
    let n = finalized_bins(record)?;
    let dt = record.delta_t();
    let i = match opts.t_ss {
        Some(t) => {
            let i = (t / dt).round();
            if !(i >= 0.0) || i as usize >= n {
                return Err(Error::InvalidParams(format!(
                    "t_ss = {t} lies outside the finalized output"
                )));
            }
            i as usize
        }
        None => detect_steady_state(record, opts.window, opts.tolerance)?.ok_or_else(|| {
            Error::InvalidParams(format!(
                "no steady state within {} over a window of {}/γ before t_max",
                opts.tolerance, opts.window
            ))
        })?,
    };
    let available = n.saturating_sub(i);
    let len = match opts.span {
        Some(span) => {
            let need = (span / dt).round() as usize + 1;
            if i >= n || need > available {
                return Err(Error::InvalidParams(format!(
                    "steady state at t = {:.3} leaves {:.3} of correlation span, {span} requested",
                    i as f64 * dt,
                    available.saturating_sub(1) as f64 * dt
                )));
            }
            need
        }
        None => available,
    };
    if len == 0 {
        return Err(Error::InvalidParams(
            "steady state reached only at the last step".into(),
        ));
    }
    Ok((i, len))
}

/// ⟨A(t_ss) B(t_ss + t′)⟩ / Δt for each (A, B) pair.
pub fn correlation_ss_2op(
    record: &BinsRecord,
    pairs: &[(&ComplexTensor, &ComplexTensor)],
    opts: &SteadyStateOptions,
) -> Result<SteadyStateCorrelation> {
    let (i, len) = steady_row(record, opts)?;
    let mut sw = RowSweeper::new(record)?;
    let p = sw.physical();
    let mut values = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        check_op(a, p)?;
        check_op(b, p)?;
        values.push(sw.row(i, len, a, b, &a.matmul(b)?)?);
    }
    scale_rows(&mut values, 1.0 / record.delta_t());
    Ok(steady_result(record, i, len, values))
}

/// ⟨A(t_ss) B(t_ss + t′) C(t_ss + t′) D(t_ss)⟩ / Δt² for each operator quadruple.
pub fn correlation_ss_4op(
    record: &BinsRecord,
    quads: &[[&ComplexTensor; 4]],
    opts: &SteadyStateOptions,
) -> Result<SteadyStateCorrelation> {
    let (i, len) = steady_row(record, opts)?;
    let mut sw = RowSweeper::new(record)?;
    let p = sw.physical();
    let mut values = Vec::with_capacity(quads.len());
    for [a, b, c, d] in quads {
        for op in [a, b, c, d] {
            check_op(op, p)?;
        }
        let (x, y, same) = four_op_parts(a, b, c, d)?;
        values.push(sw.row(i, len, &x, &y, &same)?);
    }
    let dt = record.delta_t();
    scale_rows(&mut values, 1.0 / (dt * dt));
    Ok(steady_result(record, i, len, values))
}

fn steady_result(
    record: &BinsRecord,
    i: usize,
    len: usize,
    values: Vec<Vec<C64>>,
) -> SteadyStateCorrelation {
    let dt = record.delta_t();
    SteadyStateCorrelation {
        t_ss: record.times[i],
        t_primes: (0..len).map(|k| k as f64 * dt).collect(),
        values,
    }
}

/// g¹ = G¹/flux or g² = G²/flux².
pub fn normalize_g(correlation: &[C64], flux_at_tss: f64, order: u32) -> Result<Vec<C64>> {
    if !(flux_at_tss > 0.0) {
        return Err(Error::InvalidParams(format!(
            "cannot normalize by flux {flux_at_tss}"
        )));
    }
    let scale = match order {
        1 => flux_at_tss,
        2 => flux_at_tss * flux_at_tss,
        _ => {
            return Err(Error::InvalidParams(format!(
                "correlation order must be 1 or 2, got {order}"
            )))
        }
    };
    Ok(correlation.iter().map(|v| v / scale).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Raw,
    Max1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Offsets ω − ω_c in units of γ, ascending.
    pub omega_values: Vec<f64>,
    pub values: Vec<f64>,
    pub normalization: Normalization,
}

impl Spectrum {
    pub fn d_omega(&self) -> f64 {
        match self.omega_values.as_slice() {
            [a, b, ..] => b - a,
            _ => 0.0,
        }
    }

    pub fn normalized_max(&self) -> Result<Spectrum> {
        let m = self
            .values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if !(m > 0.0) {
            return Err(Error::Numeric("spectrum has no positive maximum".into()));
        }
        Ok(Spectrum {
            omega_values: self.omega_values.clone(),
            values: self.values.iter().map(|v| v / m).collect(),
            normalization: Normalization::Max1,
        })
    }

    /// Interior local maxima above `rel_threshold`·max, refined by a parabola
    /// through the three neighbouring samples.
    pub fn peaks(&self, rel_threshold: f64) -> Vec<f64> {
        let v = &self.values;
        let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let dw = self.d_omega();
        let mut out = Vec::new();
        for j in 1..v.len().saturating_sub(1) {
            if v[j] > v[j - 1] && v[j] >= v[j + 1] && v[j] >= rel_threshold * m {
                let denom = v[j - 1] - 2.0 * v[j] + v[j + 1];
                let shift = if denom != 0.0 {
                    0.5 * (v[j - 1] - v[j + 1]) / denom
                } else {
                    0.0
                };
                out.push(self.omega_values[j] + shift * dw);
            }
        }
        out
    }

    /// `omega,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,value\n");
        for (w, v) in self.omega_values.iter().zip(&self.values) {
            let _ = writeln!(out, "{w:.16e},{v:.16e}");
        }
        out
    }
}

/// Frequency grid and Re Σ_k g_k e^{iω t_k} Δt of a zero-padded sequence.
///
/// ω_j = 2πj/(PΔt) for j in [−P/2, P/2), P = padding·len.
fn one_sided_transforms(
    delta_t: f64,
    rows: &[Vec<C64>],
    padding: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let len = rows.iter().map(Vec::len).max().unwrap_or(0);
    if len == 0 {
        return Err(Error::InvalidParams("empty correlation series".into()));
    }
    if !(delta_t > 0.0) {
        return Err(Error::InvalidParams(format!(
            "delta_t must be positive, got {delta_t}"
        )));
    }
    let p = len * padding.max(1);
    let half = p / 2;
    let omega: Vec<f64> = (0..p)
        .map(|j| 2.0 * std::f64::consts::PI * (j as f64 - half as f64) / (p as f64 * delta_t))
        .collect();
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(p);
    let mut buf = vec![ZERO; p];
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        buf.iter_mut().for_each(|b| *b = ZERO);
        buf[..row.len()].copy_from_slice(row);
        fft.process(&mut buf);
        let vals = (0..p)
            .map(|j| buf[(j + p - half) % p].re * delta_t)
            .collect();
        out.push(vals);
    }
    Ok((omega, out))
}

/// Long-time spectrum S(ω) = Re Σ_k g¹(t′_k) e^{iω t′_k} Δt.
pub fn spectrum_w(delta_t: f64, g1_ss: &[C64], padding: usize) -> Result<Spectrum> {
    let (omega_values, mut vals) = one_sided_transforms(delta_t, &[g1_ss.to_vec()], padding)?;
    Ok(Spectrum {
        omega_values,
        values: vals.remove(0),
        normalization: Normalization::Raw,
    })
}

/// Time-resolved spectra on the output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDependentSpectrum {
    /// ω_c plus the transform offsets.
    pub omega_values: Vec<f64>,
    /// t_1 … t_n for `s_values`, t_0 … t_{n−1} for `i_values`.
    pub s_times: Vec<f64>,
    pub i_times: Vec<f64>,
    /// Time-integrated spectrum S(ω, t_m).
    pub s_values: Vec<Vec<f64>>,
    /// Spectral intensity I(ω, t_i).
    pub i_values: Vec<Vec<f64>>,
}

/// Both time-dependent spectra from a G¹ grid; the t′ integrals are cut
/// at the grid edge.
///
/// S(ω, t_m) = Re Σ_{i+k<m} G(t_i, t_i + t′_k) e^{iΔω t′_k} Δt² and
/// I(ω, t_i) = Re Σ_k G(t_i, t_i + t′_k) e^{iΔω t′_k} Δt.
pub fn time_dependent_spectrum(
    grid: &CorrelationGrid,
    center_frequency_offset: f64,
    padding: usize,
) -> Result<TimeDependentSpectrum> {
    let n = grid.n_rows();
    if n < 4 {
        return Err(Error::InvalidParams(format!(
            "time-dependent spectra need at least 4 t′ points, got {n}"
        )));
    }
    let dt = grid.delta_t;
    let (offsets, i_values) = one_sided_transforms(dt, &grid.values, padding)?;

    // Cumulative sums over the triangle i + k < m, grown one anti-diagonal at a time.
    let mut acc = vec![ZERO; n];
    let mut partial = Vec::with_capacity(n);
    for m in 0..n {
        for (k, a) in acc.iter_mut().enumerate().take(m + 1) {
            *a += grid.values[m - k][k];
        }
        partial.push(acc.iter().map(|v| v * dt).collect::<Vec<_>>());
    }
    let (_, s_values) = one_sided_transforms(dt, &partial, padding)?;

    Ok(TimeDependentSpectrum {
        omega_values: offsets
            .iter()
            .map(|w| w + center_frequency_offset)
            .collect(),
        s_times: (1..=n).map(|m| m as f64 * dt).collect(),
        i_times: grid.t_values.clone(),
        s_values,
        i_values,
    })
}
