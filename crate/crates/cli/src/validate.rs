use std::path::Path;

use binwave::oracles::{
    analytic_decay, dde_mirror, dde_two_tls_rates, DdeRates, LindbladTls, OracleSeries, EXCITED,
    GROUND,
};
use binwave::C64;
use serde::Serialize;
use serde_json::Value;

use crate::config::{Level, PumpSpec, RunConfig, Scenario};
use crate::error::{io_err, CliError, Result};
use crate::run::{engine, evolve_config, populations, Timings};

pub const REPORT: &str = "validation.json";
pub const SERIES: &str = "validation.csv";

pub const DECAY_THRESHOLD: f64 = 0.01;
pub const ORACLE_THRESHOLD: f64 = 0.02;

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: Value,
    pub oracle: String,
    pub max_deviation: f64,
    pub threshold: f64,
    pub passed: bool,
    pub timings: Timings,
    pub discarded_weight: f64,
    pub peak_bond: usize,
}

fn no_oracle(cfg: &RunConfig, why: &str) -> CliError {
    CliError::NoOracle(format!("scenario {}: {why}", cfg.scenario.name()))
}

fn single_excitation(cfg: &RunConfig) -> Result<[C64; 2]> {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    match cfg.initial.emitters.as_slice() {
        [Level::Excited, Level::Ground] => Ok([one, zero]),
        [Level::Ground, Level::Excited] => Ok([zero, one]),
        _ => Err(no_oracle(
            cfg,
            "the delay oracle needs exactly one excited emitter",
        )),
    }
}

/// Oracle populations on the run grid, with the oracle's name and threshold.
fn oracle(cfg: &RunConfig, times: &[f64]) -> Result<(String, OracleSeries, f64)> {
    let p = &cfg.params;
    let undriven = matches!(cfg.pump, PumpSpec::None);
    let excited = cfg.initial.emitters.iter().all(|l| *l == Level::Excited);
    let step = (p.delta_t / 4.0).min(0.01);
    match cfg.scenario {
        Scenario::Decay => {
            if !excited {
                return Err(no_oracle(cfg, "free decay needs an excited emitter"));
            }
            let s = engine(cfg, analytic_decay(p.gamma_l[0] + p.gamma_r[0], times))?;
            Ok(("analytic_decay".into(), s, DECAY_THRESHOLD))
        }
        Scenario::Feedback => {
            if !excited || !undriven {
                return Err(no_oracle(
                    cfg,
                    "the mirror oracle needs an excited, undriven emitter",
                ));
            }
            let s = engine(
                cfg,
                dde_mirror(p.gamma_r[0], p.gamma_l[0], p.tau, p.phi, times),
            )?;
            Ok(("dde_mirror".into(), s, ORACLE_THRESHOLD))
        }
        Scenario::TwoTlsMar | Scenario::TwoTlsNmar => {
            let c0 = single_excitation(cfg)?;
            let rates = DdeRates {
                gamma_r: [p.gamma_r[0], p.gamma_r[1]],
                gamma_l: [p.gamma_l[0], p.gamma_l[1]],
            };
            let s = engine(
                cfg,
                dde_two_tls_rates(&rates, p.tau, p.phi, c0, times, step),
            )?;
            Ok(("dde_two_tls".into(), s, ORACLE_THRESHOLD))
        }
        Scenario::DriveCw | Scenario::DrivePulse => {
            if cfg.is_delayed() {
                return Err(no_oracle(
                    cfg,
                    "the master-equation oracle is Markovian only",
                ));
            }
            let h = p.delta_t / 10.0;
            let lind = engine(
                cfg,
                LindbladTls::new(p.gamma_l[0] + p.gamma_r[0], p.detuning, h),
            )?;
            let rho0 = if excited { EXCITED } else { GROUND };
            let pump = cfg.pump.to_pump();
            let dt = p.delta_t;
            let s = engine(
                cfg,
                lind.population(rho0, dt, times.len(), &|t| pump.omega(t, dt)),
            )?;
            Ok(("lindblad".into(), s, ORACLE_THRESHOLD))
        }
        Scenario::Fock => Err(no_oracle(cfg, "pulse scattering has no independent oracle")),
    }
}

/// Runs engine and oracle, writes `validation.csv` and `validation.json`.
pub fn validate(cfg: &RunConfig, out_dir: &Path) -> Result<Report> {
    // fail before the engine run when no oracle applies
    let grid = engine(cfg, cfg.params.times())?;
    oracle(cfg, &grid[..2.min(grid.len())])?;

    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let ev = evolve_config(cfg)?;
    let rec = &ev.record;
    let pops = engine(cfg, populations(rec))?;
    let (name, reference, threshold) = oracle(cfg, &rec.times)?;

    let mut max_deviation: f64 = 0.0;
    for (s, o) in pops.iter().zip(&reference.values) {
        for (a, b) in s.values.iter().zip(o) {
            max_deviation = max_deviation.max((a - b).abs());
        }
    }
    let mut csv = String::from("t");
    for s in &pops {
        csv.push_str(&format!(",{0},{0}_oracle", s.label));
    }
    csv.push('\n');
    for (k, t) in rec.times.iter().enumerate() {
        csv.push_str(&format!("{t:.16e}"));
        for (s, o) in pops.iter().zip(&reference.values) {
            csv.push_str(&format!(",{:.16e},{:.16e}", s.values[k], o[k]));
        }
        csv.push('\n');
    }
    let path = out_dir.join(SERIES);
    std::fs::write(&path, csv).map_err(io_err(&path))?;

    let report = Report {
        config: cfg.echo(),
        oracle: name,
        max_deviation,
        threshold,
        passed: max_deviation <= threshold,
        timings: ev.timings,
        discarded_weight: rec.stats.discarded_weight,
        peak_bond: rec.stats.peak_bond,
    };
    let path = out_dir.join(REPORT);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&path, json + "\n").map_err(io_err(&path))?;
    Ok(report)
}
