//! Run configuration: a sectioned `key = value` file. The grammar is
//! documented in the repository README.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use binwave::correlations::DEFAULT_PADDING;
use binwave::params::{Pump, SimParams};
use binwave::states::Channel;
use ini::Ini;
use serde_json::{json, Value};

use crate::error::{io_err, CliError, Result};

const GENERAL: &str = "";

const KEYS: &[(&str, &[&str])] = &[
    (GENERAL, &["scenario"]),
    (
        "params",
        &[
            "delta_t", "t_max", "d_t", "gamma_l", "gamma_r", "tau", "phi", "bond_max", "cutoff",
            "detuning",
        ],
    ),
    ("pump", &["kind", "omega", "area", "t_c", "sigma", "file"]),
    (
        "initial",
        &["emitters", "photons", "direction", "t_c", "sigma", "file"],
    ),
    ("outputs", &["include", "channels", "padding", "t_ss"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Decay,
    Feedback,
    TwoTlsMar,
    TwoTlsNmar,
    DriveCw,
    DrivePulse,
    Fock,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Decay,
        Scenario::Feedback,
        Scenario::TwoTlsMar,
        Scenario::TwoTlsNmar,
        Scenario::DriveCw,
        Scenario::DrivePulse,
        Scenario::Fock,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Decay => "decay",
            Scenario::Feedback => "feedback",
            Scenario::TwoTlsMar => "two_tls_mar",
            Scenario::TwoTlsNmar => "two_tls_nmar",
            Scenario::DriveCw => "drive_cw",
            Scenario::DrivePulse => "drive_pulse",
            Scenario::Fock => "fock",
        }
    }

    pub fn n_emitters(self) -> usize {
        match self {
            Scenario::TwoTlsMar | Scenario::TwoTlsNmar => 2,
            _ => 1,
        }
    }

    fn is_driven(self) -> bool {
        matches!(self, Scenario::DriveCw | Scenario::DrivePulse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Output {
    Populations,
    Fluxes,
    Conservation,
    Entropy,
    G1Ss,
    G2Ss,
    Spectrum,
    G1Grid,
    G2Grid,
    Loop,
}

impl Output {
    pub const ALL: [Output; 10] = [
        Output::Populations,
        Output::Fluxes,
        Output::Conservation,
        Output::Entropy,
        Output::G1Ss,
        Output::G2Ss,
        Output::Spectrum,
        Output::G1Grid,
        Output::G2Grid,
        Output::Loop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Output::Populations => "populations",
            Output::Fluxes => "fluxes",
            Output::Conservation => "conservation",
            Output::Entropy => "entropy",
            Output::G1Ss => "g1_ss",
            Output::G2Ss => "g2_ss",
            Output::Spectrum => "spectrum",
            Output::G1Grid => "g1_grid",
            Output::G2Grid => "g2_grid",
            Output::Loop => "loop",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PumpSpec {
    None,
    Cw {
        omega: f64,
    },
    /// Rotation angle `area`, centre `t_c`, width `sigma`.
    Gaussian {
        area: f64,
        t_c: f64,
        sigma: f64,
    },
    /// Ω per step read from `file`.
    Envelope {
        samples: Vec<f64>,
        file: PathBuf,
    },
}

impl PumpSpec {
    pub fn to_pump(&self) -> Pump {
        match self {
            PumpSpec::None => Pump::None,
            PumpSpec::Cw { omega } => Pump::Cw { omega: *omega },
            PumpSpec::Gaussian { area, t_c, sigma } => Pump::Gaussian {
                area: *area,
                t_c: *t_c,
                sigma: *sigma,
            },
            PumpSpec::Envelope { samples, .. } => Pump::Samples(samples.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Ground,
    Excited,
}

/// Fock pulse injected into the waveguide.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpec {
    pub photons: usize,
    pub direction: Channel,
    pub t_c: f64,
    pub sigma: f64,
    /// `re,im` samples that replace the Gaussian envelope.
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialSpec {
    pub emitters: Vec<Level>,
    pub pulse: Option<PulseSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSpec {
    pub channels: (Channel, Channel),
    pub padding: usize,
    pub t_ss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub params: SimParams,
    pub pump: PumpSpec,
    pub initial: InitialSpec,
    pub outputs: Vec<Output>,
    pub correlation: CorrelationSpec,
}

/// Command-line replacements for `[params]` entries.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub bond_max: Option<usize>,
    pub delta_t: Option<f64>,
    pub t_max: Option<f64>,
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    parse_config_with(path, &Overrides::default())
}

pub fn parse_config_with(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_str(&text, base, overrides)
}

/// Parses config text; relative file references resolve against `base`.
pub fn parse_str(text: &str, base: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let raw = read_sections(text)?;
    let scenario = parse_scenario(
        raw.section(GENERAL)
            .word("scenario")?
            .ok_or_else(|| missing(GENERAL, "scenario"))?,
    )?;
    let initial_sec = raw.section("initial");
    let photons = match (scenario, initial_sec.int("photons")?) {
        (Scenario::Fock, Some(n)) if (1..=2).contains(&n) => n,
        (Scenario::Fock, Some(n)) => {
            return Err(bad(
                "initial",
                "photons",
                format!("must be 1 or 2, got {n}"),
            ))
        }
        (Scenario::Fock, None) => 1,
        (_, Some(_)) => return Err(unused("initial", "photons", scenario)),
        (_, None) => 0,
    };
    let params = resolve_params(scenario, photons, &raw.section("params"), overrides)?;
    let pump = resolve_pump(scenario, &raw.section("pump"), &params, base)?;
    let initial = resolve_initial(scenario, photons, &initial_sec, &params, base)?;
    let (outputs, correlation) = resolve_outputs(&raw.section("outputs"), &params)?;
    Ok(RunConfig {
        scenario,
        params,
        pump,
        initial,
        outputs,
        correlation,
    })
}

impl RunConfig {
    /// Whether the run uses the delay-line layout.
    pub fn is_delayed(&self) -> bool {
        self.params.tau > 0.0
    }

    /// Resolved configuration with every default filled in.
    pub fn echo(&self) -> Value {
        let p = &self.params;
        let pump = match &self.pump {
            PumpSpec::None => json!({ "kind": "none" }),
            PumpSpec::Cw { omega } => json!({ "kind": "cw", "omega": omega }),
            PumpSpec::Gaussian { area, t_c, sigma } => {
                json!({ "kind": "gaussian", "area": area, "t_c": t_c, "sigma": sigma })
            }
            PumpSpec::Envelope { samples, file } => {
                json!({ "kind": "envelope", "file": file.display().to_string(), "samples": samples.len() })
            }
        };
        let level = |l: &Level| match l {
            Level::Ground => "ground",
            Level::Excited => "excited",
        };
        let pulse = self.initial.pulse.as_ref().map(|s| {
            json!({
                "photons": s.photons,
                "direction": channel_name(s.direction),
                "t_c": s.t_c,
                "sigma": s.sigma,
                "file": s.file.as_ref().map(|f| f.display().to_string()),
            })
        });
        json!({
            "scenario": self.scenario.name(),
            "params": {
                "delta_t": p.delta_t,
                "t_max": p.t_max,
                "d_sys": p.d_sys,
                "d_t": p.d_t,
                "gamma_l": p.gamma_l,
                "gamma_r": p.gamma_r,
                "tau": p.tau,
                "phi": p.phi,
                "bond_max": p.bond_max,
                "cutoff": p.cutoff,
                "detuning": p.detuning,
            },
            "pump": pump,
            "initial": {
                "emitters": self.initial.emitters.iter().map(level).collect::<Vec<_>>(),
                "pulse": pulse,
            },
            "outputs": {
                "include": self.outputs.iter().map(|o| o.name()).collect::<Vec<_>>(),
                "channels": [channel_name(self.correlation.channels.0), channel_name(self.correlation.channels.1)],
                "padding": self.correlation.padding,
                "t_ss": self.correlation.t_ss,
            },
        })
    }
}

pub fn channel_name(c: Channel) -> &'static str {
    match c {
        Channel::Right => "right",
        Channel::Left => "left",
    }
}

fn resolve_params(
    scenario: Scenario,
    photons: usize,
    sec: &Section,
    ov: &Overrides,
) -> Result<SimParams> {
    let n = scenario.n_emitters();
    let mut p = SimParams {
        d_sys: vec![2; n],
        gamma_l: vec![0.5; n],
        gamma_r: vec![0.5; n],
        ..SimParams::default()
    };
    match scenario {
        Scenario::DriveCw => {
            p.t_max = 40.0;
            p.bond_max = 18;
        }
        Scenario::DrivePulse => p.bond_max = 18,
        Scenario::Fock => {
            p.gamma_l = vec![0.0];
            p.gamma_r = vec![1.0];
            p.d_t = vec![photons + 1; 2];
            p.bond_max = if photons == 2 { 8 } else { 4 };
        }
        _ => {}
    }

    let tau = sec.num("tau")?;
    let phi = sec.num("phi")?;
    let delayed = match scenario {
        Scenario::Feedback | Scenario::TwoTlsNmar => {
            let t = tau.ok_or_else(|| missing("params", "tau"))?;
            if !(t > 0.0) {
                return Err(bad(
                    "params",
                    "tau",
                    format!("{} needs a positive delay, got {t}", scenario.name()),
                ));
            }
            true
        }
        Scenario::DriveCw | Scenario::DrivePulse => tau.is_some_and(|t| t != 0.0),
        _ => {
            if tau.is_some_and(|t| t != 0.0) {
                return Err(bad(
                    "params",
                    "tau",
                    format!("{} is Markovian; tau must be 0", scenario.name()),
                ));
            }
            false
        }
    };
    let needs_phi = delayed || scenario == Scenario::TwoTlsMar;
    if needs_phi && phi.is_none() {
        return Err(missing("params", "phi"));
    }
    p.tau = tau.unwrap_or(0.0);
    p.phi = phi.unwrap_or(0.0);
    if delayed && n == 1 {
        p.d_t = vec![2];
    }

    if let Some(v) = sec.num("delta_t")? {
        p.delta_t = v;
    }
    if let Some(v) = sec.num("t_max")? {
        p.t_max = v;
    }
    if let Some(v) = sec.int("bond_max")? {
        p.bond_max = v;
    }
    if let Some(v) = sec.num("cutoff")? {
        p.cutoff = v;
    }
    if let Some(v) = sec.num("detuning")? {
        p.detuning = v;
    }
    if let Some(v) = sec.int_list("d_t")? {
        p.d_t = v;
    }
    if let Some(v) = sec.num_list("gamma_l")? {
        p.gamma_l = broadcast(v, n, "gamma_l")?;
    }
    if let Some(v) = sec.num_list("gamma_r")? {
        p.gamma_r = broadcast(v, n, "gamma_r")?;
    }
    if let Some(v) = ov.delta_t {
        p.delta_t = v;
    }
    if let Some(v) = ov.t_max {
        p.t_max = v;
    }
    if let Some(v) = ov.bond_max {
        p.bond_max = v;
    }

    let channels = if delayed && n == 1 { 1 } else { 2 };
    if p.d_t.len() != channels {
        return Err(bad(
            "params",
            "d_t",
            format!(
                "{} needs {channels} channel extent(s), got {:?}",
                scenario.name(),
                p.d_t
            ),
        ));
    }
    if scenario == Scenario::Fock && p.d_t.iter().any(|&d| d <= photons) {
        return Err(bad(
            "params",
            "d_t",
            format!(
                "{photons} photon(s) need extents above {photons}, got {:?}",
                p.d_t
            ),
        ));
    }
    p.validate()
        .map_err(|e| CliError::Config(format!("[params] {e}")))?;
    Ok(p)
}

fn broadcast(v: Vec<f64>, n: usize, key: &str) -> Result<Vec<f64>> {
    match v.len() {
        1 => Ok(vec![v[0]; n]),
        m if m == n => Ok(v),
        m => Err(bad(
            "params",
            key,
            format!("expected 1 or {n} values, got {m}"),
        )),
    }
}

fn resolve_pump(scenario: Scenario, sec: &Section, p: &SimParams, base: &Path) -> Result<PumpSpec> {
    let default = match scenario {
        Scenario::DriveCw => "cw",
        Scenario::DrivePulse => "gaussian",
        _ => "none",
    };
    let kind = sec.word("kind")?.unwrap_or(default);
    if kind != "none" && !scenario.is_driven() {
        return Err(bad(
            "pump",
            "kind",
            format!(
                "{} takes no pump; use drive_cw or drive_pulse",
                scenario.name()
            ),
        ));
    }
    let allowed: &[&str] = match kind {
        "none" => &[],
        "cw" => &["omega"],
        "gaussian" => &["area", "t_c", "sigma"],
        "envelope" => &["file"],
        other => {
            return Err(bad(
                "pump",
                "kind",
                format!(
                    "unknown kind {other:?}{}",
                    suggest(other, &["none", "cw", "gaussian", "envelope"])
                ),
            ));
        }
    };
    sec.only(&[&["kind"], allowed].concat(), &format!("pump kind {kind}"))?;
    Ok(match kind {
        "none" => PumpSpec::None,
        "cw" => PumpSpec::Cw {
            omega: sec.num("omega")?.ok_or_else(|| missing("pump", "omega"))?,
        },
        "gaussian" => PumpSpec::Gaussian {
            area: sec.num("area")?.unwrap_or(PI),
            t_c: sec.num("t_c")?.unwrap_or(1.5),
            sigma: sec.num("sigma")?.unwrap_or(0.5),
        },
        _ => {
            let file = base.join(sec.word("file")?.ok_or_else(|| missing("pump", "file"))?);
            let samples = read_pump_samples(&file)?;
            let steps = p
                .n_steps()
                .map_err(|e| CliError::Config(format!("[params] {e}")))?;
            if samples.len() != steps {
                return Err(bad(
                    "pump",
                    "file",
                    format!("{} samples for {steps} steps", samples.len()),
                ));
            }
            PumpSpec::Envelope { samples, file }
        }
    })
}

fn read_pump_samples(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<f64>().map_err(|_| {
                bad(
                    "pump",
                    "file",
                    format!("{}: bad number {l:?}", path.display()),
                )
            })
        })
        .collect()
}

fn resolve_initial(
    scenario: Scenario,
    photons: usize,
    sec: &Section,
    p: &SimParams,
    base: &Path,
) -> Result<InitialSpec> {
    let n = scenario.n_emitters();
    let emitters = match sec.word_list("emitters")? {
        Some(words) => {
            if words.len() != n {
                return Err(bad(
                    "initial",
                    "emitters",
                    format!(
                        "{} has {n} emitter(s), got {}",
                        scenario.name(),
                        words.len()
                    ),
                ));
            }
            words
                .iter()
                .map(|w| match *w {
                    "ground" => Ok(Level::Ground),
                    "excited" => Ok(Level::Excited),
                    other => Err(bad(
                        "initial",
                        "emitters",
                        format!(
                            "unknown level {other:?}{}",
                            suggest(other, &["ground", "excited"])
                        ),
                    )),
                })
                .collect::<Result<Vec<_>>>()?
        }
        None => match scenario {
            Scenario::Decay | Scenario::Feedback => vec![Level::Excited],
            Scenario::TwoTlsMar | Scenario::TwoTlsNmar => vec![Level::Excited, Level::Ground],
            _ => vec![Level::Ground],
        },
    };
    if scenario != Scenario::Fock {
        for key in ["direction", "t_c", "sigma", "file"] {
            if sec.get(key).is_some() {
                return Err(unused("initial", key, scenario));
            }
        }
        return Ok(InitialSpec {
            emitters,
            pulse: None,
        });
    }
    let direction = match sec.word("direction")?.unwrap_or("right") {
        "right" => Channel::Right,
        "left" => Channel::Left,
        other => {
            return Err(bad(
                "initial",
                "direction",
                format!(
                    "unknown direction {other:?}{}",
                    suggest(other, &["right", "left"])
                ),
            ))
        }
    };
    if direction == Channel::Left && p.n_channels() < 2 {
        return Err(bad(
            "initial",
            "direction",
            "bins have no left channel".into(),
        ));
    }
    let pulse = PulseSpec {
        photons,
        direction,
        t_c: sec.num("t_c")?.unwrap_or(1.5),
        sigma: sec.num("sigma")?.unwrap_or(0.5),
        file: sec.word("file")?.map(|f| base.join(f)),
    };
    if !(pulse.sigma > 0.0) {
        return Err(bad(
            "initial",
            "sigma",
            format!("must be positive, got {}", pulse.sigma),
        ));
    }
    Ok(InitialSpec {
        emitters,
        pulse: Some(pulse),
    })
}

fn resolve_outputs(sec: &Section, p: &SimParams) -> Result<(Vec<Output>, CorrelationSpec)> {
    let names: Vec<&str> = Output::ALL.iter().map(|o| o.name()).collect();
    let mut outputs = Vec::new();
    for w in sec
        .word_list("include")?
        .unwrap_or_else(|| vec!["populations", "conservation"])
    {
        let o = Output::ALL
            .into_iter()
            .find(|o| o.name() == w)
            .ok_or_else(|| {
                bad(
                    "outputs",
                    "include",
                    format!("unknown output {w:?}{}", suggest(w, &names)),
                )
            })?;
        if !outputs.contains(&o) {
            outputs.push(o);
        }
    }
    if outputs.contains(&Output::Loop) && p.tau == 0.0 {
        return Err(bad(
            "outputs",
            "include",
            "loop needs a delayed scenario".into(),
        ));
    }
    let channel = |w: &str| match w {
        "right" => Ok(Channel::Right),
        "left" if p.n_channels() == 2 => Ok(Channel::Left),
        "left" => Err(bad(
            "outputs",
            "channels",
            "bins have no left channel".into(),
        )),
        other => Err(bad(
            "outputs",
            "channels",
            format!(
                "unknown channel {other:?}{}",
                suggest(other, &["right", "left"])
            ),
        )),
    };
    let channels = match sec.word_list("channels")?.as_deref() {
        None => (Channel::Right, Channel::Right),
        Some([a, b]) => (channel(a)?, channel(b)?),
        Some(other) => {
            return Err(bad(
                "outputs",
                "channels",
                format!("expected two channels, got {}", other.len()),
            ))
        }
    };
    let padding = sec.int("padding")?.unwrap_or(DEFAULT_PADDING);
    if padding == 0 {
        return Err(bad("outputs", "padding", "must be at least 1".into()));
    }
    let t_ss = sec.num("t_ss")?;
    if let Some(t) = t_ss {
        if !(0.0..p.t_max).contains(&t) {
            return Err(bad(
                "outputs",
                "t_ss",
                format!("must lie in [0, t_max), got {t}"),
            ));
        }
    }
    Ok((
        outputs,
        CorrelationSpec {
            channels,
            padding,
            t_ss,
        },
    ))
}

fn parse_scenario(word: &str) -> Result<Scenario> {
    Scenario::ALL
        .into_iter()
        .find(|s| s.name() == word)
        .ok_or_else(|| {
            let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
            bad(
                GENERAL,
                "scenario",
                format!("unknown scenario {word:?}{}", suggest(word, &names)),
            )
        })
}

fn section_label(section: &str) -> String {
    if section.is_empty() {
        "top level".into()
    } else {
        format!("[{section}]")
    }
}

fn missing(section: &str, key: &str) -> CliError {
    CliError::Config(format!(
        "{} missing required key `{key}`",
        section_label(section)
    ))
}

fn bad(section: &str, key: &str, msg: String) -> CliError {
    CliError::Config(format!("{} {key}: {msg}", section_label(section)))
}

fn unused(section: &str, key: &str, scenario: Scenario) -> CliError {
    bad(
        section,
        key,
        format!("not used by scenario {}", scenario.name()),
    )
}

/// `"; did you mean `x`?"` when some candidate is close to `word`.
fn suggest(word: &str, candidates: &[&str]) -> String {
    closest(word, candidates.iter().copied())
        .map(|c| format!("; did you mean `{c}`?"))
        .unwrap_or_default()
}

fn closest<'a>(word: &str, candidates: impl Iterator<Item = &'a str>) -> Option<&'a str> {
    candidates
        .map(|c| (strsim::jaro_winkler(word, c), c))
        .filter(|(s, _)| *s >= 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c)
}

struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RawConfig {
    fn section(&self, name: &'static str) -> Section<'_> {
        Section {
            name,
            map: self.sections.get(name),
        }
    }
}

fn read_sections(text: &str) -> Result<RawConfig> {
    let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(format!("syntax: {e}")))?;
    let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for (name, props) in &ini {
        let name = name.unwrap_or(GENERAL);
        let Some((_, keys)) = KEYS.iter().find(|(s, _)| *s == name) else {
            let known: Vec<&str> = KEYS
                .iter()
                .map(|(s, _)| *s)
                .filter(|s| !s.is_empty())
                .collect();
            let hint = closest(name, known.iter().copied())
                .map(|c| format!("; did you mean [{c}]?"))
                .unwrap_or_default();
            return Err(CliError::Config(format!("unknown section [{name}]{hint}")));
        };
        let entry = sections.entry(name.to_string()).or_default();
        for (key, value) in props.iter() {
            if !keys.contains(&key) {
                return Err(unknown_key(name, key));
            }
            if entry
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(bad(name, key, "given more than once".into()));
            }
        }
    }
    Ok(RawConfig { sections })
}

fn unknown_key(section: &str, key: &str) -> CliError {
    let mut best: Option<(f64, &str, &str)> = None;
    for (s, keys) in KEYS {
        for k in keys.iter() {
            let score = strsim::jaro_winkler(key, k) + if *s == section { 1e-3 } else { 0.0 };
            if score >= 0.8 && best.is_none_or(|b| score > b.0) {
                best = Some((score, s, k));
            }
        }
    }
    let hint = match best {
        Some((_, s, k)) if s == section => format!("; did you mean `{k}`?"),
        Some((_, s, k)) => format!("; did you mean `{k}` in {}?", section_label(s)),
        None => String::new(),
    };
    CliError::Config(format!(
        "{} unknown key `{key}`{hint}",
        section_label(section)
    ))
}

struct Section<'a> {
    name: &'static str,
    map: Option<&'a BTreeMap<String, String>>,
}

impl<'a> Section<'a> {
    fn get(&self, key: &str) -> Option<&'a str> {
        self.map.and_then(|m| m.get(key)).map(String::as_str)
    }

    fn only(&self, allowed: &[&str], context: &str) -> Result<()> {
        for key in self.map.into_iter().flat_map(|m| m.keys()) {
            if !allowed.contains(&key.as_str()) {
                return Err(bad(self.name, key, format!("not used by {context}")));
            }
        }
        Ok(())
    }

    fn word(&self, key: &str) -> Result<Option<&'a str>> {
        match self.get(key) {
            Some("") => Err(bad(self.name, key, "empty value".into())),
            v => Ok(v),
        }
    }

    fn num(&self, key: &str) -> Result<Option<f64>> {
        self.word(key)?
            .map(|v| parse_num(self.name, key, v))
            .transpose()
    }

    fn int(&self, key: &str) -> Result<Option<usize>> {
        self.word(key)?
            .map(|v| parse_int(self.name, key, v))
            .transpose()
    }

    fn word_list(&self, key: &str) -> Result<Option<Vec<&'a str>>> {
        let Some(v) = self.word(key)? else {
            return Ok(None);
        };
        let items: Vec<&str> = v.split(',').map(str::trim).collect();
        if items.iter().any(|s| s.is_empty()) {
            return Err(bad(self.name, key, format!("empty list entry in {v:?}")));
        }
        Ok(Some(items))
    }

    fn num_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.word_list(key)?
            .map(|l| l.iter().map(|v| parse_num(self.name, key, v)).collect())
            .transpose()
    }

    fn int_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.word_list(key)?
            .map(|l| l.iter().map(|v| parse_int(self.name, key, v)).collect())
            .transpose()
    }
}

/// Numbers also accept `pi`, `-pi` and `k*pi` / `pi/k` forms.
fn parse_num(section: &str, key: &str, v: &str) -> Result<f64> {
    let lower = v.to_ascii_lowercase();
    let (sign, body) = match lower.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, lower.as_str()),
    };
    let parsed = if body == "pi" {
        Some(PI)
    } else if let Some(k) = body.strip_suffix("*pi") {
        k.trim().parse::<f64>().ok().map(|k| k * PI)
    } else if let Some(k) = body.strip_prefix("pi/") {
        k.trim().parse::<f64>().ok().map(|k| PI / k)
    } else {
        body.parse::<f64>().ok()
    };
    match parsed.map(|x| sign * x) {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(bad(section, key, format!("expected a number, got {v:?}"))),
    }
}

fn parse_int(section: &str, key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>().map_err(|_| {
        bad(
            section,
            key,
            format!("expected a nonnegative integer, got {v:?}"),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        parse_str(text, Path::new("."), &Overrides::default())
    }

    #[test]
    fn pi_forms() {
        assert_eq!(parse_num("", "x", "pi").unwrap(), PI);
        assert_eq!(parse_num("", "x", "-pi").unwrap(), -PI);
        assert_eq!(parse_num("", "x", "2*pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_num("", "x", "pi/2").unwrap(), PI / 2.0);
        assert_eq!(parse_num("", "x", "1e-3").unwrap(), 1e-3);
        assert!(parse_num("", "x", "inf").is_err());
        assert!(parse_num("", "x", "two").is_err());
    }

    #[test]
    fn closest_needs_similarity() {
        assert_eq!(
            closest("bond_mx", ["bond_max", "t_max"].into_iter()),
            Some("bond_max")
        );
        assert_eq!(closest("zzz", ["bond_max", "t_max"].into_iter()), None);
    }

    #[test]
    fn duplicate_keys_rejected() {
        let e = parse("scenario = decay\n[params]\nt_max = 4\nt_max = 5\n").unwrap_err();
        assert!(e.to_string().contains("more than once"), "{e}");
    }

    #[test]
    fn rates_broadcast_to_both_emitters() {
        let c = parse(
            "scenario = two_tls_mar\n[params]\nphi = pi\ngamma_l = 0.3\ngamma_r = 0.2, 0.4\n",
        )
        .unwrap();
        assert_eq!(c.params.gamma_l, vec![0.3, 0.3]);
        assert_eq!(c.params.gamma_r, vec![0.2, 0.4]);
        assert!(parse("scenario = two_tls_mar\n[params]\nphi = 0\ngamma_l = 1, 2, 3\n").is_err());
    }

    #[test]
    fn pump_keys_follow_kind() {
        let e = parse("scenario = drive_cw\n[pump]\nomega = 1\narea = 2\n").unwrap_err();
        assert!(e.to_string().contains("area"), "{e}");
        let e = parse("scenario = decay\n[pump]\nkind = cw\nomega = 1\n").unwrap_err();
        assert!(e.to_string().contains("takes no pump"), "{e}");
    }
}
