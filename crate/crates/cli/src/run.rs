use std::path::{Path, PathBuf};
use std::time::Instant;

use binwave::correlations::{
    correlation_ss_2op, correlation_ss_4op, g1_grid, g2_grid, spectrum_w, SteadyStateOptions,
};
use binwave::evolution::{evolve, BinsRecord};
use binwave::model::{
    hamiltonian_1tls, hamiltonian_1tls_feedback, hamiltonian_2tls_mar, hamiltonian_2tls_nmar,
    Hamiltonian,
};
use binwave::mps::SiteTensor;
use binwave::observables::{
    entanglement, integrated_output, loop_integrated_statistics, output_flux, population,
    quanta_conservation, to_csv, TimeSeries,
};
use binwave::states::{
    fock_pulse, gaussian_envelope, tls_excited, tls_ground, Channel, Envelope, SystemState,
};
use binwave::C64;
use serde::Serialize;
use serde_json::Value;

use crate::config::{Level, Output, RunConfig, Scenario};
use crate::error::{io_err, CliError, Result};

pub const MANIFEST: &str = "manifest.json";

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub setup: f64,
    pub evolution: f64,
    pub observables: f64,
    pub correlations: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config: Value,
    pub timings: Timings,
    pub discarded_weight: f64,
    pub peak_bond: usize,
    pub truncation_alarms: usize,
    pub t_ss: Option<f64>,
    pub files: Vec<String>,
}

/// Engine run of a configuration with its setup and evolution timings.
pub struct Evolved {
    pub record: BinsRecord,
    pub timings: Timings,
}

pub(crate) fn engine<T>(cfg: &RunConfig, r: binwave::Result<T>) -> Result<T> {
    r.map_err(|source| CliError::Engine {
        scenario: cfg.scenario.name().to_string(),
        source,
    })
}

fn hamiltonian(cfg: &RunConfig) -> binwave::Result<Hamiltonian> {
    let p = &cfg.params;
    match cfg.scenario {
        Scenario::TwoTlsMar => hamiltonian_2tls_mar(p),
        Scenario::TwoTlsNmar => hamiltonian_2tls_nmar(p),
        _ if cfg.is_delayed() => hamiltonian_1tls_feedback(p),
        _ => hamiltonian_1tls(p),
    }
}

fn system_state(levels: &[Level]) -> binwave::Result<SystemState> {
    let parts: Vec<SystemState> = levels
        .iter()
        .map(|l| match l {
            Level::Ground => tls_ground(),
            Level::Excited => tls_excited(),
        })
        .collect();
    if parts.len() == 1 {
        Ok(parts.into_iter().next().unwrap())
    } else {
        SystemState::product(&parts)
    }
}

fn initial_field(cfg: &RunConfig) -> Result<Vec<SiteTensor>> {
    let Some(pulse) = &cfg.initial.pulse else {
        return Ok(Vec::new());
    };
    let p = &cfg.params;
    let env = match &pulse.file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            let steps = engine(cfg, p.n_steps())?;
            Envelope::from_csv(&text, p.delta_t, steps)
                .map_err(|e| CliError::Config(format!("[initial] file: {e}")))?
        }
        None => engine(cfg, gaussian_envelope(pulse.t_c, pulse.sigma, p))?,
    };
    engine(cfg, fock_pulse(&env, pulse.photons, pulse.direction, p))
}

/// Builds the model and initial state and evolves to t_max.
pub fn evolve_config(cfg: &RunConfig) -> Result<Evolved> {
    let start = Instant::now();
    let h = engine(cfg, hamiltonian(cfg))?;
    let sys0 = engine(cfg, system_state(&cfg.initial.emitters))?;
    let field = initial_field(cfg)?;
    let pump = cfg.pump.to_pump();
    let setup = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let record = engine(cfg, evolve(&h, &pump, &sys0, field, &cfg.params))?;
    let evolution = start.elapsed().as_secs_f64();
    Ok(Evolved {
        record,
        timings: Timings {
            setup,
            evolution,
            ..Timings::default()
        },
    })
}

fn channels(rec: &BinsRecord) -> &'static [Channel] {
    if rec.params.n_channels() == 2 {
        &[Channel::Right, Channel::Left]
    } else {
        &[Channel::Right]
    }
}

pub(crate) fn populations(rec: &BinsRecord) -> binwave::Result<Vec<TimeSeries>> {
    (0..rec.params.n_emitters())
        .map(|j| population(rec, j))
        .collect()
}

fn time_series_csv(series: &[TimeSeries]) -> binwave::Result<String> {
    to_csv(&series.iter().collect::<Vec<_>>())
}

fn observable_csv(rec: &BinsRecord, out: Output) -> binwave::Result<String> {
    match out {
        Output::Populations => time_series_csv(&populations(rec)?),
        Output::Fluxes => {
            let f = channels(rec)
                .iter()
                .map(|&c| output_flux(rec, c))
                .collect::<binwave::Result<Vec<_>>>()?;
            time_series_csv(&f)
        }
        Output::Conservation => {
            let mut s = populations(rec)?;
            for &c in channels(rec) {
                s.push(integrated_output(rec, c)?);
            }
            if rec.params.tau > 0.0 {
                s.push(loop_integrated_statistics(rec)?);
            }
            s.push(quanta_conservation(rec)?);
            time_series_csv(&s)
        }
        Output::Entropy => {
            let mut sys = entanglement(&rec.schmidt, rec.delta_t())?;
            sys.label = "S_system".into();
            let mut circ = entanglement(&rec.schmidt_tau, rec.delta_t())?;
            circ.label = "S_circuit".into();
            time_series_csv(&[sys, circ])
        }
        Output::Loop => time_series_csv(&[loop_integrated_statistics(rec)?]),
        _ => unreachable!("correlation outputs are written separately"),
    }
}

/// `t_prime,re,im,norm_re,norm_im`; the normalized columns divide by the
/// channel fluxes at t_ss (one power each for g¹, two for g²).
fn steady_csv(t_primes: &[f64], values: &[C64], scale: f64) -> String {
    let mut out = String::from("t_prime,re,im,norm_re,norm_im\n");
    for (t, v) in t_primes.iter().zip(values) {
        let g = v / scale;
        out.push_str(&format!(
            "{t:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            v.re, v.im, g.re, g.im
        ));
    }
    out
}

struct Writer {
    dir: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(io_err(&path))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Executes the scenario and writes one CSV per requested output plus the manifest.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let Evolved {
        record: rec,
        mut timings,
    } = evolve_config(cfg)?;
    let mut w = Writer {
        dir: out_dir.to_path_buf(),
        files: Vec::new(),
    };

    let start = Instant::now();
    for &o in &cfg.outputs {
        if matches!(
            o,
            Output::Populations
                | Output::Fluxes
                | Output::Conservation
                | Output::Entropy
                | Output::Loop
        ) {
            let csv = engine(cfg, observable_csv(&rec, o))?;
            w.write(&o.file_name(), &csv)?;
        }
    }
    timings.observables = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let t_ss = write_correlations(cfg, &rec, &mut w)?;
    timings.correlations = start.elapsed().as_secs_f64();

    let manifest = Manifest {
        config: cfg.echo(),
        timings,
        discarded_weight: rec.stats.discarded_weight,
        peak_bond: rec.stats.peak_bond,
        truncation_alarms: rec.stats.alarms,
        t_ss,
        files: w.files.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    w.write(MANIFEST, &(json + "\n"))?;
    Ok(manifest)
}

fn write_correlations(cfg: &RunConfig, rec: &BinsRecord, w: &mut Writer) -> Result<Option<f64>> {
    let want = |o: Output| cfg.outputs.contains(&o);
    let (alpha, beta) = cfg.correlation.channels;
    let p = &cfg.params;
    if want(Output::G1Grid) {
        w.write(
            &Output::G1Grid.file_name(),
            &engine(cfg, g1_grid(rec, alpha, beta))?.to_csv(),
        )?;
    }
    if want(Output::G2Grid) {
        w.write(
            &Output::G2Grid.file_name(),
            &engine(cfg, g2_grid(rec, alpha, beta))?.to_csv(),
        )?;
    }
    if !(want(Output::G1Ss) || want(Output::G2Ss) || want(Output::Spectrum)) {
        return Ok(None);
    }

    let opts = SteadyStateOptions {
        t_ss: cfg.correlation.t_ss,
        ..SteadyStateOptions::default()
    };
    let a = engine(cfg, binwave::observables::channel_ladder(p, alpha))?;
    let b = engine(cfg, binwave::observables::channel_ladder(p, beta))?;
    let (ad, bd) = (engine(cfg, a.dagger())?, engine(cfg, b.dagger())?);
    let g1 = engine(
        cfg,
        correlation_ss_2op(rec, &[(&ad, &b), (&ad, &a), (&bd, &b)], &opts),
    )?;
    let (flux_a, flux_b) = (g1.values[1][0].re, g1.values[2][0].re);
    let pair_flux = (flux_a * flux_b).sqrt();
    if want(Output::G1Ss) {
        let scale = if pair_flux > 0.0 { pair_flux } else { f64::NAN };
        w.write(
            &Output::G1Ss.file_name(),
            &steady_csv(&g1.t_primes, &g1.values[0], scale),
        )?;
    }
    if want(Output::G2Ss) {
        let g2 = engine(cfg, correlation_ss_4op(rec, &[[&ad, &bd, &b, &a]], &opts))?;
        let scale = if pair_flux > 0.0 {
            flux_a * flux_b
        } else {
            f64::NAN
        };
        w.write(
            &Output::G2Ss.file_name(),
            &steady_csv(&g2.t_primes, &g2.values[0], scale),
        )?;
    }
    if want(Output::Spectrum) {
        let s = engine(
            cfg,
            spectrum_w(p.delta_t, &g1.values[0], cfg.correlation.padding)
                .and_then(|s| s.normalized_max()),
        )?;
        w.write(&Output::Spectrum.file_name(), &s.to_csv())?;
    }
    Ok(Some(g1.t_ss))
}
