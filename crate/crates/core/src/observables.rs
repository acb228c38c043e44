//! Single-time observables extracted from a [`BinsRecord`].
//!
//! Fluxes are photons per unit time: the bin photon number ⟨a†a⟩ divided by
//! Δt, i.e. ⟨ΔB†ΔB⟩/Δt². Summing flux·Δt over bins therefore counts photons.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::evolution::{BinsRecord, Regime, SiteSnapshot};
use crate::model::{ladder, lift, sigma_minus};
use crate::mps::{trace_product, SchmidtSpectrum};
use crate::params::SimParams;
use crate::states::Channel;
use crate::tensor::ComplexTensor;

const IMAG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    Dimensionless,
    /// Units of the decay rate γ.
    Rate,
    Photons,
    Bits,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub label: String,
    pub units: Units,
}

impl TimeSeries {
    pub fn new(
        times: Vec<f64>,
        values: Vec<f64>,
        label: impl Into<String>,
        units: Units,
    ) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} times for {} values",
                times.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("time series contains NaN or Inf".into()));
        }
        Ok(Self {
            times,
            values,
            label: label.into(),
            units,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Value at the grid point closest to `t`.
    pub fn at(&self, t: f64) -> Option<f64> {
        let (i, _) = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?;
        Some(self.values[i])
    }
}

/// Real expectation of a Hermitian operator, dropping the imaginary residue.
fn real_expectation(op: &ComplexTensor, rho: &ComplexTensor) -> Result<f64> {
    let v = trace_product(op, rho)?;
    if v.im.abs() > IMAG_TOL * v.re.abs().max(1.0) {
        return Err(Error::Contract(format!(
            "expectation has imaginary part {:.3e}; operator not Hermitian?",
            v.im
        )));
    }
    Ok(v.re)
}

/// One series per labelled operator over a sequence of reduced states.
pub fn single_time_expectation(
    states: &[ComplexTensor],
    times: &[f64],
    ops: &[(&str, &ComplexTensor)],
) -> Result<Vec<TimeSeries>> {
    if states.len() != times.len() {
        return Err(Error::Dimension(format!(
            "{} states for {} times",
            states.len(),
            times.len()
        )));
    }
    ops.iter()
        .map(|(label, op)| {
            let values = states
                .iter()
                .map(|rho| real_expectation(op, rho))
                .collect::<Result<Vec<_>>>()?;
            TimeSeries::new(times.to_vec(), values, *label, Units::Dimensionless)
        })
        .collect()
}

/// σ⁺σ⁻ of emitter `j` on the joint emitter space.
pub fn emitter_number(params: &SimParams, j: usize) -> Result<ComplexTensor> {
    if j >= params.n_emitters() {
        return Err(Error::OutOfRange {
            index: j,
            len: params.n_emitters(),
        });
    }
    let s = sigma_minus(params.d_sys[j]);
    lift(&s.dagger()?.matmul(&s)?, j, &params.d_sys)
}

/// Dimensionless ladder a_α on the full bin space.
pub fn channel_ladder(params: &SimParams, channel: Channel) -> Result<ComplexTensor> {
    let slot = channel.slot();
    if slot >= params.n_channels() {
        return Err(Error::InvalidParams(format!(
            "bins have no {channel:?} channel"
        )));
    }
    lift(&ladder(params.d_t[slot]), slot, &params.d_t)
}

/// a_α†a_α on the full bin space.
pub fn channel_number(params: &SimParams, channel: Channel) -> Result<ComplexTensor> {
    let a = channel_ladder(params, channel)?;
    a.dagger()?.matmul(&a)
}

/// Total photon number over all channels of a bin.
pub fn bin_number(params: &SimParams) -> Result<ComplexTensor> {
    let mut acc = ComplexTensor::zeros(vec![params.bin_dim(), params.bin_dim()]);
    for slot in 0..params.n_channels() {
        let a = lift(&ladder(params.d_t[slot]), slot, &params.d_t)?;
        acc = acc.add(&a.dagger()?.matmul(&a)?)?;
    }
    Ok(acc)
}

/// Excited-state population of emitter `j` at every t_k.
pub fn population(record: &BinsRecord, j: usize) -> Result<TimeSeries> {
    let op = emitter_number(&record.params, j)?;
    let mut s = single_time_expectation(&record.system_states, &record.times, &[("n_tls", &op)])?;
    let mut series = s.remove(0);
    series.label = if record.params.n_emitters() == 1 {
        "n_tls".into()
    } else {
        format!("n_tls{}", j + 1)
    };
    Ok(series)
}

/// Total emitter excitation Σ_j ⟨σ_j⁺σ_j⁻⟩ at every t_k.
pub fn total_excitation(record: &BinsRecord) -> Result<TimeSeries> {
    let mut values = vec![0.0; record.times.len()];
    for j in 0..record.params.n_emitters() {
        for (v, p) in values.iter_mut().zip(population(record, j)?.values) {
            *v += p;
        }
    }
    TimeSeries::new(record.times.clone(), values, "n_sys", Units::Dimensionless)
}

/// Photon flux of one channel over finalized bins, in units of γ.
pub fn flux(bins: &[SiteSnapshot], channel: Channel, params: &SimParams) -> Result<TimeSeries> {
    let op = channel_number(params, channel)?;
    let values = bins
        .iter()
        .map(|b| Ok(real_expectation(&op, &b.density)? / params.delta_t))
        .collect::<Result<Vec<_>>>()?;
    let label = match channel {
        Channel::Right => "flux_R",
        Channel::Left => "flux_L",
    };
    TimeSeries::new(
        bins.iter().map(|b| b.time).collect(),
        values,
        label,
        Units::Rate,
    )
}

/// Output flux of a run in one channel.
pub fn output_flux(record: &BinsRecord, channel: Channel) -> Result<TimeSeries> {
    flux(&record.output_field_states, channel, &record.params)
}

/// Left-Riemann running integral N(t_0) = 0, N(t_{k+1}) = N(t_k) + f_k Δt.
pub fn integrated_flux(flux: &TimeSeries) -> Result<TimeSeries> {
    let dt = match flux.times.as_slice() {
        [a, b, ..] => b - a,
        _ => {
            return Err(Error::Dimension(
                "integration needs at least two samples".into(),
            ))
        }
    };
    for w in flux.times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::InvalidParams(
                "integration needs a uniform grid".into(),
            ));
        }
    }
    let mut acc = 0.0;
    let mut values = Vec::with_capacity(flux.len() + 1);
    values.push(0.0);
    for f in &flux.values {
        acc += f * dt;
        values.push(acc);
    }
    let mut times = flux.times.clone();
    times.push(flux.times[flux.len() - 1] + dt);
    let label = flux.label.replacen("flux", "N", 1);
    TimeSeries::new(times, values, label, Units::Photons)
}

/// Integrated output flux of one channel on the t_0 … t_n grid.
pub fn integrated_output(record: &BinsRecord, channel: Channel) -> Result<TimeSeries> {
    let f = output_flux(record, channel)?;
    if f.len() < 2 {
        let mut values = vec![0.0];
        values.extend(f.values.iter().map(|v| v * record.params.delta_t));
        return TimeSeries::new(record.times.clone(), values, "N", Units::Photons);
    }
    integrated_flux(&f)
}

/// Photons inside the delay window (t − τ, t] at every t_k.
pub fn loop_integrated_statistics(record: &BinsRecord) -> Result<TimeSeries> {
    if record.regime == Regime::Markovian {
        return Err(Error::InvalidParams(
            "loop statistics need a delayed run".into(),
        ));
    }
    let op = bin_number(&record.params)?;
    let values = record
        .loop_field_states
        .iter()
        .map(|window| {
            window
                .iter()
                .map(|b| real_expectation(&op, &b.density))
                .sum()
        })
        .collect::<Result<Vec<_>>>()?;
    TimeSeries::new(record.times.clone(), values, "N_loop", Units::Photons)
}

/// n_sys + Σ_α N_out,α (+ N_loop) at every t_k.
pub fn quanta_conservation(record: &BinsRecord) -> Result<TimeSeries> {
    let mut total = total_excitation(record)?.values;
    let channels: &[Channel] = if record.params.n_channels() == 2 {
        &[Channel::Right, Channel::Left]
    } else {
        &[Channel::Right]
    };
    for &c in channels {
        for (t, n) in total.iter_mut().zip(integrated_output(record, c)?.values) {
            *t += n;
        }
    }
    if record.regime != Regime::Markovian {
        for (t, n) in total
            .iter_mut()
            .zip(loop_integrated_statistics(record)?.values)
        {
            *t += n;
        }
    }
    TimeSeries::new(record.times.clone(), total, "N_total", Units::Photons)
}

/// −Σ λ² log₂ λ² of one spectrum.
pub fn entropy(spectrum: &SchmidtSpectrum) -> Result<f64> {
    let total: f64 = spectrum.values.iter().map(|v| v * v).sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Contract(format!("Schmidt weights sum to {total}")));
    }
    Ok(spectrum
        .values
        .iter()
        .map(|v| v * v)
        .filter(|&p| p >= 1e-15)
        .map(|p| -p * p.log2())
        .sum::<f64>()
        .max(0.0))
}

/// Entanglement entropy (bits) of each spectrum, stamped at its step time.
pub fn entanglement(spectra: &[SchmidtSpectrum], delta_t: f64) -> Result<TimeSeries> {
    let values = spectra.iter().map(entropy).collect::<Result<Vec<_>>>()?;
    let times = spectra.iter().map(|s| s.step as f64 * delta_t).collect();
    TimeSeries::new(times, values, "S", Units::Bits)
}

/// CSV with a `t` column followed by one column per series; all series must
/// share the same grid.
pub fn to_csv(series: &[&TimeSeries]) -> Result<String> {
    let first = series
        .first()
        .ok_or_else(|| Error::InvalidParams("no series to write".into()))?;
    for s in series {
        if s.times.len() != first.times.len() {
            return Err(Error::Dimension(format!(
                "series {} has a different grid",
                s.label
            )));
        }
    }
    let mut out = String::from("t");
    for s in series {
        out.push(',');
        out.push_str(&s.label);
    }
    out.push('\n');
    for (i, t) in first.times.iter().enumerate() {
        let _ = write!(out, "{t:.16e}");
        for s in series {
            let _ = write!(out, ",{:.16e}", s.values[i]);
        }
        out.push('\n');
    }
    Ok(out)
}
