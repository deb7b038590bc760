//! Scenario configs, batch execution and run reports.
//!
//! A config is one TOML file. Every block except `scenario` is optional and
//! falls back to the library defaults; unknown keys are rejected. Trial `i`
//! runs under `seed::trial_seed(seed, i)`.

use crate::card::{self, InsertionOutcome, InsertionSetup};
use crate::gel::{GelPadSpec, PlantSpec};
use crate::mpc::{run_closed_loop_with, GraspState, Limits, MpcParams};
use crate::rub::{self, GrainSpec, ObjectProfile, RubConfig, Shape, SingulationSetup, TrialOutcome};
use crate::scoop::{self, ScoopProblem, SweepAxes};
use crate::seed::{self, Stream};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    MpcSim,
    Singulate,
    ScoopAnalyze,
    CardInsert,
    Sweep,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::MpcSim => "mpc-sim",
            Scenario::Singulate => "singulate",
            Scenario::ScoopAnalyze => "scoop-analyze",
            Scenario::CardInsert => "card-insert",
            Scenario::Sweep => "sweep",
        }
    }
}

/// Closed-loop run settings for `mpc-sim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Simulated time, s.
    pub duration: f64,
    /// Initial opening, mm.
    pub p0: f64,
    /// Object width oscillation amplitude, mm.
    pub width_amplitude: f64,
    /// Object width oscillation frequency, Hz.
    pub width_freq: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            duration: 3.0,
            p0: 35.0,
            width_amplitude: 0.0,
            width_freq: 1.0,
        }
    }
}

/// An object to singulate: a named preset or an explicit profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObjectEntry {
    Preset { preset: String },
    Profile(ObjectProfile),
}

impl ObjectEntry {
    pub fn resolve(&self) -> Result<ObjectProfile> {
        match self {
            ObjectEntry::Preset { preset } => rub::preset(preset).ok_or_else(|| {
                let names: Vec<String> = rub::presets().into_iter().map(|p| p.label).collect();
                Error::Config(format!(
                    "objects.preset {preset:?} unknown; choose one of {}",
                    names.join(", ")
                ))
            }),
            ObjectEntry::Profile(p) => {
                p.validate()?;
                Ok(p.clone())
            }
        }
    }
}

fn default_objects() -> Vec<ObjectEntry> {
    vec![
        ObjectEntry::Profile(ObjectProfile::sphere("sphere", 30.0)),
        ObjectEntry::Profile(ObjectProfile::ellipse("ellipse", 14.0, 9.0)),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

/// Either explicit values or an evenly spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Range(AxisRange),
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Axis::Values(v) => v.clone(),
            Axis::Range(r) => scoop::linspace(r.min, r.max, r.n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub theta: Axis,
    pub mu1: Axis,
    pub mu2: Axis,
    pub f_l: Axis,
}

impl SweepConfig {
    pub fn axes(&self) -> SweepAxes {
        SweepAxes {
            theta: self.theta.values(),
            mu1: self.mu1.values(),
            mu2: self.mu2.values(),
            f_l: self.f_l.values(),
        }
    }
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_trials() -> u64 {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub mpc: MpcParams,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub plant: PlantSpec,
    #[serde(default)]
    pub pad: GelPadSpec,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub rub: RubConfig,
    #[serde(default)]
    pub grains: GrainSpec,
    #[serde(default = "default_objects")]
    pub objects: Vec<ObjectEntry>,
    #[serde(default)]
    pub scoop: ScoopProblem,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub card: card::CardSpec,
    #[serde(default)]
    pub reader: card::ReaderSpec,
    #[serde(default)]
    pub explore: card::ExploreConfig,
}

impl ScenarioConfig {
    /// Defaults for everything but the scenario.
    pub fn new(scenario: Scenario) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario,
            seed: 0,
            trials: 1,
            output_dir: default_output(),
            mpc: MpcParams::default(),
            limits: Limits::default(),
            plant: PlantSpec::default(),
            pad: GelPadSpec::default(),
            sim: SimConfig::default(),
            rub: RubConfig::default(),
            grains: GrainSpec::default(),
            objects: default_objects(),
            scoop: ScoopProblem::default(),
            sweep: None,
            card: card::CardSpec::default(),
            reader: card::ReaderSpec::default(),
            explore: card::ExploreConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config("seed must be below 2^63".into()));
        }
        match self.scenario {
            Scenario::MpcSim => {
                self.mpc.validate()?;
                self.limits.validate()?;
                self.pad.validate()?;
                self.plant.validate(&self.pad)?;
                let s = &self.sim;
                if !(s.duration > 0.0) || !(s.width_freq >= 0.0) || !(s.width_amplitude >= 0.0) {
                    return Err(Error::Config(
                        "sim.duration must be positive, sim.width_* non-negative".into(),
                    ));
                }
                if !(s.p0 >= self.limits.p_min && s.p0 <= self.limits.p_max) {
                    return Err(Error::Config(format!("sim.p0 {} outside the opening limits", s.p0)));
                }
                if s.width_amplitude >= self.plant.object_width {
                    return Err(Error::Config(
                        "sim.width_amplitude must be below plant.object_width".into(),
                    ));
                }
            }
            Scenario::Singulate => {
                self.singulation_setup().validate()?;
                self.pad.validate()?;
                self.plant.validate(&self.pad)?;
                if self.objects.is_empty() {
                    return Err(Error::Config("objects must list at least one object".into()));
                }
                for o in &self.objects {
                    o.resolve()?;
                }
            }
            Scenario::ScoopAnalyze => {
                self.scoop.validate()?;
                if let Some(sw) = &self.sweep {
                    check_axes(&sw.axes())?;
                }
            }
            Scenario::Sweep => {
                let sw = self
                    .sweep
                    .as_ref()
                    .ok_or_else(|| Error::Config("sweep scenario needs a [sweep] block".into()))?;
                check_axes(&sw.axes())?;
            }
            Scenario::CardInsert => self.insertion_setup().validate()?,
        }
        Ok(())
    }

    pub fn singulation_setup(&self) -> SingulationSetup {
        SingulationSetup {
            mpc: self.mpc,
            limits: self.limits,
            plant: self.plant,
            rub: self.rub,
            grains: self.grains,
        }
    }

    pub fn insertion_setup(&self) -> InsertionSetup {
        InsertionSetup {
            card: self.card,
            reader: self.reader,
            pad: self.pad,
            explore: self.explore.clone(),
        }
    }

    /// Every resolved parameter as `key: value` pairs, dotted by table.
    pub fn echo(&self) -> Result<Vec<(String, String)>> {
        let value = toml::Value::try_from(self).map_err(|e| Error::Config(format!("cannot echo config: {e}")))?;
        let mut out = Vec::new();
        flatten("", &value, &mut out);
        Ok(out)
    }
}

fn check_axes(axes: &SweepAxes) -> Result<()> {
    for (name, a) in [
        ("theta", &axes.theta),
        ("mu1", &axes.mu1),
        ("mu2", &axes.mu2),
        ("f_l", &axes.f_l),
    ] {
        if a.is_empty() {
            return Err(Error::Config(format!("sweep.{name} needs at least one value")));
        }
    }
    Ok(())
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<(String, String)>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        toml::Value::Array(items) if items.iter().any(|v| v.is_table()) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), v, out);
            }
        }
        toml::Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Parse and validate a config held in memory. `origin` names it in errors.
pub fn parse_config(text: &str, origin: &Path) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::ConfigFile {
        path: origin.to_path_buf(),
        message: parse_message(text, &e),
    })?;
    cfg.validate().map_err(|e| match e {
        Error::Config(m) | Error::Domain(m) => Error::ConfigFile {
            path: origin.to_path_buf(),
            message: match locate(text, &m) {
                Some(line) => format!("line {line}: {m}"),
                None => m,
            },
        },
        other => other,
    })?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

fn parse_message(text: &str, err: &toml::de::Error) -> String {
    let msg = err.message().trim().to_string();
    match err.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}: {msg}")
        }
        None => msg,
    }
}

/// Line of the key a validation message names as `table.key`, or of the
/// table header it names.
fn locate(text: &str, message: &str) -> Option<usize> {
    let mut table = String::new();
    let mut headers = Vec::new();
    let mut keys = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(inner) = line.strip_prefix('[') {
            table = inner.trim_start_matches('[').trim_end_matches(']').trim().to_string();
            headers.push((n + 1, table.clone()));
        } else if let Some((key, _)) = line.split_once('=') {
            let key = key.trim();
            let dotted = if table.is_empty() {
                key.to_string()
            } else {
                format!("{table}.{key}")
            };
            keys.push((n + 1, dotted));
        }
    }
    let mentions = |name: &str| {
        message.match_indices(name).any(|(at, _)| {
            let end = at + name.len();
            let before_ok = at == 0 || !message.as_bytes()[at - 1].is_ascii_alphanumeric();
            let after_ok = end == message.len()
                || !(message.as_bytes()[end].is_ascii_alphanumeric() || message.as_bytes()[end] == b'_');
            before_ok && after_ok
        })
    };
    keys.iter()
        .find(|(_, k)| k.contains('.') && mentions(k))
        .or_else(|| keys.iter().find(|(_, k)| !k.contains('.') && mentions(k)))
        .or_else(|| headers.iter().rev().find(|(_, t)| message.starts_with(t.as_str())))
        .map(|(n, _)| *n)
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(o) = &self.output_dir {
            cfg.output_dir = o.clone();
        }
        cfg.validate()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub trials: u64,
    pub wall_time_s: f64,
    /// One line per trial, `k=v` separated by spaces.
    pub trial_rows: Vec<String>,
    pub aggregates: Vec<(String, String)>,
    /// Published hardware figures next to simulated ones, for `reproduce`.
    pub comparison: Vec<String>,
    pub config_echo: Vec<(String, String)>,
    pub artifacts: Vec<PathBuf>,
}

impl RunReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario: {}", self.scenario);
        let _ = writeln!(out, "seed: {}", self.seed);
        let _ = writeln!(out, "trials: {}", self.trials);
        let _ = writeln!(out, "wall_time_s: {:.3}", self.wall_time_s);
        for (k, v) in &self.aggregates {
            let _ = writeln!(out, "{k}: {v}");
        }
        for (i, line) in self.comparison.iter().enumerate() {
            let _ = writeln!(out, "compare.{i}: {line}");
        }
        for (i, row) in self.trial_rows.iter().enumerate() {
            let _ = writeln!(out, "trial.{i}: {row}");
        }
        for (k, v) in &self.config_echo {
            let _ = writeln!(out, "config.{k}: {v}");
        }
        for a in &self.artifacts {
            let _ = writeln!(out, "artifact: {}", a.display());
        }
        out
    }

    pub fn aggregate(&self, key: &str) -> Option<&str> {
        self.aggregates.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::Config("--jobs must be >= 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn rate(num: usize, den: usize) -> String {
    format!(
        "{num}/{den} = {:.6}",
        if den == 0 { 0.0 } else { num as f64 / den as f64 }
    )
}

/// Execute `cfg`, writing traces and `report.txt` under its output dir.
pub fn run(cfg: &ScenarioConfig, jobs: Option<usize>) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut report = RunReport {
        scenario: cfg.scenario.as_str().into(),
        seed: cfg.seed,
        trials: cfg.trials,
        config_echo: cfg.echo()?,
        ..RunReport::default()
    };
    let pool = pool(jobs)?;
    pool.install(|| match cfg.scenario {
        Scenario::MpcSim => run_mpc_sim(cfg, &mut report),
        Scenario::Singulate => run_singulate(cfg, &mut report).map(|_| ()),
        Scenario::ScoopAnalyze => run_scoop(cfg, &mut report),
        Scenario::Sweep => run_sweep(cfg, &mut report),
        Scenario::CardInsert => run_cards(cfg, &mut report).map(|_| ()),
    })?;
    finish(report, out, start)
}

fn finish(mut report: RunReport, out: &Path, start: Instant) -> Result<RunReport> {
    report.wall_time_s = start.elapsed().as_secs_f64();
    let path = out.join("report.txt");
    report.artifacts.push(path.clone());
    write_file(&path, &report.to_text())?;
    Ok(report)
}

fn run_mpc_sim(cfg: &ScenarioConfig, report: &mut RunReport) -> Result<()> {
    let c_d = cfg.mpc.c_desired;
    let results: Vec<(u64, String, PathBuf)> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let ts = seed::trial_seed(cfg.seed, i);
            let mut plant = crate::gel::ContactPlant::new(cfg.plant, seed::stream_seed(ts, Stream::PlantNoise));
            let w0 = cfg.plant.object_width;
            let sim = cfg.sim;
            let trace = run_closed_loop_with(
                &mut plant,
                &cfg.mpc,
                &cfg.limits,
                &GraspState::new(0.0, sim.p0, 0.0),
                sim.duration,
                |t, p| {
                    p.set_object_width(w0 + sim.width_amplitude * (std::f64::consts::TAU * sim.width_freq * t).sin())
                },
            )?;
            let path = cfg.output_dir.join(format!("trace_mpc_{i:03}.csv"));
            write_file(&path, &trace.to_csv())?;
            let settle = trace.settling_time(c_d, 0.02, 0.05);
            let dev = trace
                .rows
                .iter()
                .filter(|r| r.t >= 1.0)
                .map(|r| (r.c - c_d).abs() / c_d)
                .fold(0.0, f64::max);
            let row = format!(
                "seed={ts} settling_time_s={} max_rel_dev_after_1s={dev:.6} infeasible_ticks={}",
                settle.map_or("none".into(), |t| format!("{t:.4}")),
                trace.infeasible_ticks()
            );
            Ok((settle.map_or(0, |t| (t < 2.0) as u64), row, path))
        })
        .collect::<Result<_>>()?;
    let settled: u64 = results.iter().map(|r| r.0).sum();
    for (_, row, path) in results {
        report.trial_rows.push(row);
        report.artifacts.push(path);
    }
    report
        .aggregates
        .push(("settled_before_2s".into(), rate(settled as usize, cfg.trials as usize)));
    Ok(())
}

fn run_singulate(cfg: &ScenarioConfig, report: &mut RunReport) -> Result<Vec<TrialOutcome>> {
    let profiles: Vec<ObjectProfile> = cfg.objects.iter().map(|o| o.resolve()).collect::<Result<_>>()?;
    let outcomes = rub::run_singulation_batch(&profiles, &cfg.singulation_setup(), cfg.seed, cfg.trials)?;
    let paths: Vec<PathBuf> = outcomes
        .par_iter()
        .enumerate()
        .map(|(k, o)| {
            let i = k as u64 % cfg.trials;
            let path = cfg.output_dir.join(format!("trace_{}_{i:03}.csv", o.label));
            write_file(&path, &rub::rub_trace_csv(&o.trace))?;
            Ok(path)
        })
        .collect::<Result<_>>()?;
    let batch = cfg.output_dir.join("singulation_batch.csv");
    write_file(&batch, &rub::batch_csv(&outcomes))?;
    report.artifacts.push(batch);
    for (o, path) in outcomes.iter().zip(paths) {
        report.trial_rows.push(format!(
            "label={} seed={} retained={} aborted={} residual_grains={} min_area_px={:.4} strokes={} p_stable_mm={:.4} stroke_range_mm={:.4} servo_rad={:.6} trace={}",
            o.label,
            o.seed,
            o.retained,
            o.aborted,
            o.residual_grains,
            o.min_area,
            o.strokes_executed,
            o.p_stable,
            o.stroke_range,
            o.servo_angle,
            path.display()
        ));
        report.artifacts.push(path);
    }
    let (mut kept, mut total) = (0, 0);
    for (label, k, n) in rub::retention_rates(&outcomes) {
        report.aggregates.push((format!("retention.{label}"), rate(k, n)));
        kept += k;
        total += n;
    }
    report.aggregates.push(("retention.all".into(), rate(kept, total)));
    let sphere = class_rate(&outcomes, &profiles, true);
    let other = class_rate(&outcomes, &profiles, false);
    if let (Some((sk, sn)), Some((ok, on))) = (sphere, other) {
        report.aggregates.push(("retention.spheres".into(), rate(sk, sn)));
        report.aggregates.push(("retention.non_spheres".into(), rate(ok, on)));
        let holds = sk as f64 / sn as f64 >= ok as f64 / on as f64;
        report
            .aggregates
            .push(("property.sphere_ge_non_sphere".into(), holds.to_string()));
    }
    let monotone = outcomes
        .iter()
        .all(|o| o.trace.windows(2).all(|w| w[1].n_grains <= w[0].n_grains));
    report
        .aggregates
        .push(("property.grains_non_increasing".into(), monotone.to_string()));
    Ok(outcomes)
}

fn class_rate(outcomes: &[TrialOutcome], profiles: &[ObjectProfile], spheres: bool) -> Option<(usize, usize)> {
    let labels: Vec<&str> = profiles
        .iter()
        .filter(|p| p.is_sphere() == spheres)
        .map(|p| p.label.as_str())
        .collect();
    let chosen: Vec<&TrialOutcome> = outcomes.iter().filter(|o| labels.contains(&o.label.as_str())).collect();
    (!chosen.is_empty()).then(|| (chosen.iter().filter(|o| o.retained).count(), chosen.len()))
}

fn run_scoop(cfg: &ScenarioConfig, report: &mut RunReport) -> Result<()> {
    let p = &cfg.scoop;
    let sol = scoop::solve_forces(p)?;
    let verdict = scoop::flip_predicate(p)?;
    let direct = scoop::moment_direct(p, &sol);
    let rows = scoop::sweep(
        p,
        &SweepAxes {
            theta: vec![p.theta],
            mu1: vec![p.mu1],
            mu2: vec![p.mu2],
            f_l: vec![p.f_l],
        },
    )?;
    let path = cfg.output_dir.join("scoop_analysis.csv");
    write_file(&path, &scoop::sweep_csv(&rows))?;
    report.artifacts.push(path);
    for (k, v) in [
        ("F_Rx_N", sol.f_rx),
        ("F_Ry_N", sol.f_ry),
        ("F_Bx_N", sol.f_bx),
        ("F_By_N", sol.f_by),
        ("M_all_Nmm", sol.m_all),
        ("M_direct_Nmm", direct),
        ("K1_mm", sol.k1),
        ("K2_Nmm", sol.k2),
    ] {
        report.aggregates.push((format!("scoop.{k}"), format!("{v:.9}")));
    }
    report
        .aggregates
        .push(("scoop.feasible".into(), sol.feasible.to_string()));
    report
        .aggregates
        .push(("scoop.verdict".into(), verdict.as_str().into()));
    if cfg.sweep.is_some() {
        run_sweep(cfg, report)?;
    }
    Ok(())
}

fn run_sweep(cfg: &ScenarioConfig, report: &mut RunReport) -> Result<()> {
    let sw = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("no [sweep] block in the config".into()))?;
    let rows = scoop::sweep(&cfg.scoop, &sw.axes())?;
    let path = cfg.output_dir.join("scoop_sweep.csv");
    write_file(&path, &scoop::sweep_csv(&rows))?;
    report.artifacts.push(path);
    let count = |v: &str| rows.iter().filter(|r| r.verdict_str() == v).count();
    report.aggregates.push(("sweep.rows".into(), rows.len().to_string()));
    for v in ["flips_ccw", "no_flip", "infeasible", "out_of_model"] {
        report.aggregates.push((format!("sweep.{v}"), count(v).to_string()));
    }
    Ok(())
}

fn run_cards(cfg: &ScenarioConfig, report: &mut RunReport) -> Result<Vec<InsertionOutcome>> {
    let setup = cfg.insertion_setup();
    let results: Vec<(InsertionOutcome, PathBuf)> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let out = card::run_seeded_insertion(&setup, seed::trial_seed(cfg.seed, i))?;
            let path = cfg.output_dir.join(format!("trace_card_{i:03}.csv"));
            write_file(&path, &card::card_trace_csv(&out.trace))?;
            Ok((out, path))
        })
        .collect::<Result<_>>()?;
    let done = results.iter().filter(|(o, _)| o.done()).count();
    let legal = results
        .iter()
        .all(|(o, _)| o.transitions.iter().all(|&(a, b)| card::is_legal_transition(a, b)));
    let mut outcomes = Vec::with_capacity(results.len());
    for (o, path) in results {
        report.trial_rows.push(format!(
            "seed={} start_x_mm={:.4} start_y_mm={:.4} side={:?} verdict={} steps={} trace={}",
            o.seed,
            o.pose.grasp_x,
            o.pose.grasp_y,
            o.pose.side,
            o.final_state.verdict(),
            o.final_state.steps_taken,
            path.display()
        ));
        report.artifacts.push(path);
        outcomes.push(o);
    }
    report.aggregates.push(("done".into(), rate(done, outcomes.len())));
    report
        .aggregates
        .push(("property.legal_transitions".into(), legal.to_string()));
    Ok(outcomes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Singulation,
    Insertion,
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "singulation" => Ok(Experiment::Singulation),
            "insertion" => Ok(Experiment::Insertion),
            other => Err(Error::Config(format!(
                "unknown experiment {other:?}; expected singulation or insertion"
            ))),
        }
    }
}

/// Published hardware successes per object, out of 15.
const HARDWARE_SINGULATION: [(&str, u32); 10] = [
    ("tree_seed_1", 13),
    ("tree_seed_2", 13),
    ("almond", 10),
    ("peanut", 11),
    ("soft_ball", 15),
    ("pla_ball_1", 15),
    ("pla_ball_2", 14),
    ("pla_ball_3", 15),
    ("strawberry", 9),
    ("golf_ball", 14),
];

/// The canned desk-scale config for `experiment`.
pub fn reproduce_config(experiment: Experiment) -> ScenarioConfig {
    match experiment {
        Experiment::Singulation => {
            let mut cfg = ScenarioConfig::new(Scenario::Singulate);
            cfg.trials = 15;
            cfg.objects = rub::presets()
                .into_iter()
                .map(|p| ObjectEntry::Preset { preset: p.label })
                .collect();
            cfg.output_dir = PathBuf::from("reproduce_singulation");
            cfg
        }
        Experiment::Insertion => {
            let mut cfg = ScenarioConfig::new(Scenario::CardInsert);
            cfg.trials = 10;
            cfg.output_dir = PathBuf::from("reproduce_insertion");
            cfg
        }
    }
}

const CONTEXT: &str = "hardware figure, context only";

/// Run a canned experiment and set the simulator's numbers beside the
/// published hardware results.
pub fn reproduce(experiment: Experiment, overrides: &Overrides) -> Result<RunReport> {
    let mut cfg = reproduce_config(experiment);
    overrides.apply(&mut cfg)?;
    let start = Instant::now();
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let mut report = RunReport {
        scenario: format!(
            "reproduce-{}",
            match experiment {
                Experiment::Singulation => "singulation",
                Experiment::Insertion => "insertion",
            }
        ),
        seed: cfg.seed,
        trials: cfg.trials,
        config_echo: cfg.echo()?,
        ..RunReport::default()
    };
    let pool = pool(overrides.jobs)?;
    match experiment {
        Experiment::Singulation => {
            let outcomes = pool.install(|| run_singulate(&cfg, &mut report))?;
            let rates = rub::retention_rates(&outcomes);
            report.comparison.push(format!(
                "{:<14} {:>22} {:>12}",
                "object", "hardware (15 trials)", "simulated"
            ));
            for (label, k, n) in &rates {
                let hw = HARDWARE_SINGULATION
                    .iter()
                    .find(|(l, _)| l == label)
                    .map_or("-".to_string(), |(_, s)| format!("{s}/15"));
                report
                    .comparison
                    .push(format!("{label:<14} {hw:>22} {:>12}", format!("{k}/{n}")));
            }
            let sim = |key: &str| report.aggregate(key).unwrap_or("-").to_string();
            let (all, spheres, order) = (
                sim("retention.all"),
                sim("retention.spheres"),
                sim("property.sphere_ge_non_sphere"),
            );
            report.comparison.push(format!(
                "overall: hardware 114/150 = 76.0% ({CONTEXT}); simulated {all}"
            ));
            report.comparison.push(format!(
                "spheres: hardware 99/105 = 94.3% ({CONTEXT}); simulated {spheres}"
            ));
            report
                .comparison
                .push(format!("property sphere >= non-sphere retention: {order}"));
        }
        Experiment::Insertion => {
            let outcomes = pool.install(|| run_cards(&cfg, &mut report))?;
            let done = outcomes.iter().filter(|o| o.done()).count();
            report.comparison.push(format!(
                "insertion: hardware 10/10 ({CONTEXT}); simulated {done}/{}",
                outcomes.len()
            ));
        }
    }
    finish(report, &cfg.output_dir, start)
}

/// Run only the `[sweep]` block of a config, whatever its scenario.
pub fn sweep(cfg: &ScenarioConfig) -> Result<RunReport> {
    let mut cfg = cfg.clone();
    cfg.scenario = Scenario::Sweep;
    run(&cfg, None)
}

/// Shape labels for a resolved object list, used in reports.
pub fn shape_kind(profile: &ObjectProfile) -> &'static str {
    match profile.shape {
        Shape::Sphere { .. } => "sphere",
        Shape::Ellipse { .. } => "ellipse",
        Shape::Irregular { .. } => "irregular",
    }
}
