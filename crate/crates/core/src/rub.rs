//! Rubbing maneuver: hold the object under tactile MPC, then stroke the
//! fingertips in opposition so the object rolls and adhered grains are shed.

use crate::gel::{ContactPlant, PlantSpec};
use crate::mpc::{trace_csv_header, ClosedLoop, CondensedMpc, Limits, MpcParams, TraceRow};
use crate::seed::{self, Stream};
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::fmt::Write as _;

/// Linear actuator travel, mm.
pub const ACTUATOR_TRAVEL: f64 = 30.0;

/// Rotation servo working range, rad.
pub const SERVO_RANGE: f64 = FRAC_PI_4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    Sphere {
        diameter: f64,
    },
    /// Full axis lengths, mm.
    Ellipse {
        major: f64,
        minor: f64,
    },
    /// Widths sampled evenly over one half turn, `[0, pi)`.
    Irregular {
        widths: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectProfile {
    pub label: String,
    pub shape: Shape,
}

impl ObjectProfile {
    pub fn sphere(label: &str, diameter: f64) -> Self {
        Self {
            label: label.into(),
            shape: Shape::Sphere { diameter },
        }
    }

    pub fn ellipse(label: &str, major: f64, minor: f64) -> Self {
        Self {
            label: label.into(),
            shape: Shape::Ellipse { major, minor },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match &self.shape {
            Shape::Sphere { diameter } => *diameter > 0.0 && diameter.is_finite(),
            Shape::Ellipse { major, minor } => *minor > 0.0 && major >= minor && major.is_finite(),
            Shape::Irregular { widths } => !widths.is_empty() && widths.iter().all(|w| *w > 0.0 && w.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("object {:?} has an invalid shape", self.label)))
        }
    }

    /// Width between the fingers when the object is rotated by `phi`.
    pub fn width(&self, phi: f64) -> f64 {
        match &self.shape {
            Shape::Sphere { diameter } => *diameter,
            Shape::Ellipse { major, minor } => {
                let (s, c) = phi.sin_cos();
                let (a, b) = (0.5 * major, 0.5 * minor);
                2.0 * (a * a * s * s + b * b * c * c).sqrt()
            }
            Shape::Irregular { widths } => {
                let n = widths.len();
                let u = phi.rem_euclid(PI) / PI * n as f64;
                let i = (u.floor() as usize).min(n - 1);
                let frac = u - i as f64;
                widths[i] * (1.0 - frac) + widths[(i + 1) % n] * frac
            }
        }
    }

    pub fn nominal_width(&self) -> f64 {
        match &self.shape {
            Shape::Sphere { diameter } => *diameter,
            Shape::Ellipse { major, .. } => *major,
            Shape::Irregular { widths } => widths.iter().copied().fold(0.0, f64::max),
        }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.shape, Shape::Sphere { .. })
    }
}

/// Stand-ins for the ten test objects. Golf ball and seed sizes are
/// nominal; the rest are plausible guesses.
pub fn presets() -> Vec<ObjectProfile> {
    vec![
        ObjectProfile::sphere("tree_seed_1", 10.0),
        ObjectProfile::sphere("tree_seed_2", 9.0),
        ObjectProfile::ellipse("almond", 14.0, 9.0),
        ObjectProfile::ellipse("peanut", 16.0, 10.0),
        ObjectProfile::sphere("soft_ball", 30.0),
        ObjectProfile::sphere("pla_ball_1", 25.0),
        ObjectProfile::sphere("pla_ball_2", 30.0),
        ObjectProfile::sphere("pla_ball_3", 35.0),
        ObjectProfile {
            label: "strawberry".into(),
            shape: Shape::Irregular {
                widths: vec![34.0, 36.0, 39.0, 37.0, 33.0, 31.0, 32.0],
            },
        },
        ObjectProfile::sphere("golf_ball", 41.0),
    ]
}

pub fn preset(label: &str) -> Option<ObjectProfile> {
    presets().into_iter().find(|p| p.label == label)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RubConfig {
    pub k_p: f64,
    /// mm.
    pub b: f64,
    /// Objects narrower than this get the servo retract, mm.
    pub retract_threshold: f64,
    /// rad.
    pub retract_angle: f64,
    /// Hz.
    pub stroke_freq: f64,
    pub n_strokes: u32,
    /// Contact area below which the object counts as slipping, px.
    pub drop_area_floor: f64,
    /// How long the area must stay under the floor to declare a drop, s.
    pub drop_dwell: f64,
    /// Longest the closing phase may take before rubbing starts anyway, s.
    pub settle_timeout: f64,
    /// Time inside the settling band that counts as settled, s.
    pub settle_hold: f64,
    /// Initial gap between each finger and the object, mm.
    pub approach_gap: f64,
}

impl Default for RubConfig {
    fn default() -> Self {
        Self {
            k_p: 0.5,
            b: 2.0,
            retract_threshold: 15.0,
            retract_angle: 10f64.to_radians(),
            stroke_freq: 1.0,
            n_strokes: 6,
            drop_area_floor: 2200.0,
            drop_dwell: 0.25,
            settle_timeout: 4.0,
            settle_hold: 0.25,
            approach_gap: 2.0,
        }
    }
}

impl RubConfig {
    pub fn validate(&self, c_desired: f64) -> Result<()> {
        if !(self.stroke_freq > 0.0) {
            return Err(Error::Config("rub.stroke_freq must be positive".into()));
        }
        if !(self.drop_area_floor > 0.0 && self.drop_area_floor < c_desired) {
            return Err(Error::Config(format!(
                "rub.drop_area_floor {} must lie in (0, c_desired={c_desired})",
                self.drop_area_floor
            )));
        }
        if self.retract_angle.abs() > SERVO_RANGE {
            return Err(Error::Config(format!(
                "rub.retract_angle {} exceeds the servo range of 45 degrees",
                self.retract_angle
            )));
        }
        let non_neg = [
            self.drop_dwell,
            self.settle_timeout,
            self.settle_hold,
            self.approach_gap,
            self.retract_threshold,
        ];
        if !non_neg.iter().all(|x| *x >= 0.0) || !self.k_p.is_finite() || !self.b.is_finite() {
            return Err(Error::Config(
                "rub timings, gap and threshold must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Rubbing stroke length for a grasp that stabilised at `p_stable`.
pub fn stroke_range(p_stable: f64, cfg: &RubConfig) -> Result<f64> {
    if !(p_stable >= 0.0) {
        return Err(Error::Domain(format!("p_stable must be >= 0, got {p_stable}")));
    }
    Ok((cfg.k_p * p_stable + cfg.b).clamp(0.0, ACTUATOR_TRAVEL))
}

/// Servo angle to hold during rubbing.
pub fn servo_policy(nominal_width: f64, cfg: &RubConfig) -> Result<f64> {
    if !(nominal_width > 0.0) {
        return Err(Error::Domain(format!(
            "nominal width must be positive, got {nominal_width}"
        )));
    }
    if cfg.retract_angle.abs() > SERVO_RANGE {
        return Err(Error::Config(format!(
            "retract angle {} exceeds the servo range",
            cfg.retract_angle
        )));
    }
    Ok(if nominal_width < cfg.retract_threshold {
        cfg.retract_angle
    } else {
        0.0
    })
}

/// Roll the object without slip by a fingertip displacement `stroke_delta`.
pub fn rub_step(phi: f64, stroke_delta: f64, profile: &ObjectProfile) -> (f64, f64) {
    let phi = phi + stroke_delta / (0.5 * profile.width(phi));
    (phi, profile.width(phi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrainSpec {
    pub n_grains: u64,
    /// Removal probability per mm of stroke at full target contact.
    pub removal_rate: f64,
}

impl Default for GrainSpec {
    fn default() -> Self {
        Self {
            n_grains: 50,
            removal_rate: 0.02,
        }
    }
}

/// Grains stuck between pad and object.
#[derive(Debug, Clone)]
pub struct GrainField {
    pub n_grains: u64,
    pub removal_rate: f64,
    pub rng_seed: u64,
    rng: ChaCha8Rng,
}

impl GrainField {
    pub fn new(spec: GrainSpec, rng_seed: u64) -> Result<Self> {
        if !(spec.removal_rate >= 0.0) {
            return Err(Error::Config("grains.removal_rate must be non-negative".into()));
        }
        Ok(Self {
            n_grains: spec.n_grains,
            removal_rate: spec.removal_rate,
            rng_seed,
            rng: seed::rng(rng_seed),
        })
    }

    pub fn removal_probability(&self, stroke_delta: f64, contact_area: f64, c_desired: f64) -> f64 {
        (self.removal_rate * stroke_delta.abs() * contact_area / c_desired).min(1.0)
    }
}

/// Shed grains for one stroke increment; each grain leaves independently.
/// Returns the number removed.
pub fn grain_step(field: &mut GrainField, stroke_delta: f64, contact_area: f64, c_desired: f64) -> Result<u64> {
    if !(contact_area >= 0.0) || !(c_desired > 0.0) {
        return Err(Error::Domain(format!(
            "contact area {contact_area} must be >= 0 and c_desired {c_desired} > 0"
        )));
    }
    let p = field.removal_probability(stroke_delta, contact_area, c_desired);
    if p == 0.0 || field.n_grains == 0 {
        return Ok(0);
    }
    let removed = Binomial::new(field.n_grains, p)
        .map_err(|e| Error::Domain(e.to_string()))?
        .sample(&mut field.rng);
    field.n_grains -= removed;
    Ok(removed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RubTraceRow {
    pub mpc: TraceRow,
    pub phi: f64,
    pub w: f64,
    pub n_grains: u64,
}

pub fn rub_trace_header() -> String {
    format!("{},phi_rad,w_mm,n_grains", trace_csv_header())
}

pub fn rub_trace_csv(rows: &[RubTraceRow]) -> String {
    let mut out = String::with_capacity(96 * (rows.len() + 1));
    out.push_str(&rub_trace_header());
    out.push('\n');
    for r in rows {
        r.mpc.write_csv(&mut out);
        let _ = writeln!(out, ",{:.6},{:.6},{}", r.phi, r.w, r.n_grains);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub label: String,
    pub seed: u64,
    pub retained: bool,
    /// The controller hit an infeasible QP and the trial stopped.
    pub aborted: bool,
    pub residual_grains: u64,
    pub initial_grains: u64,
    /// Smallest contact area seen while rubbing, px.
    pub min_area: f64,
    pub strokes_executed: u32,
    pub p_stable: f64,
    pub stroke_range: f64,
    pub servo_angle: f64,
    pub trace: Vec<RubTraceRow>,
}

/// Everything a singulation trial needs besides the object and seed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SingulationSetup {
    pub mpc: MpcParams,
    pub limits: Limits,
    pub plant: PlantSpec,
    pub rub: RubConfig,
    pub grains: GrainSpec,
}

impl SingulationSetup {
    pub fn validate(&self) -> Result<()> {
        self.mpc.validate()?;
        self.limits.validate()?;
        self.rub.validate(self.mpc.c_desired)?;
        if !(self.grains.removal_rate >= 0.0) {
            return Err(Error::Config("grains.removal_rate must be non-negative".into()));
        }
        Ok(())
    }
}

/// Close on the object, settle, then rub. The object starts at a random
/// rotation; all randomness comes from `seed`.
pub fn run_singulation_trial(profile: &ObjectProfile, setup: &SingulationSetup, seed: u64) -> Result<TrialOutcome> {
    setup.validate()?;
    profile.validate()?;
    let mpc = CondensedMpc::new(setup.mpc, setup.limits)?;
    run_with_controller(profile, setup, mpc, seed)
}

fn run_with_controller(
    profile: &ObjectProfile,
    setup: &SingulationSetup,
    mpc: CondensedMpc,
    seed: u64,
) -> Result<TrialOutcome> {
    let params = setup.mpc;
    let cfg = setup.rub;
    let c_d = params.c_desired;

    let mut pose = seed::rng(seed::stream_seed(seed, Stream::InitialPose));
    let mut phi: f64 = pose.gen_range(0.0..PI);
    let mut w = profile.width(phi);
    let mut plant = ContactPlant::new(
        PlantSpec {
            object_width: w,
            ..setup.plant
        },
        seed::stream_seed(seed, Stream::PlantNoise),
    );
    let mut grains = GrainField::new(setup.grains, seed::stream_seed(seed, Stream::Grains))?;
    let servo_angle = servo_policy(profile.nominal_width(), &cfg)?;

    let p0 = (w + cfg.approach_gap).clamp(setup.limits.p_min, setup.limits.p_max);
    let mut cl = ClosedLoop::with_controller(mpc, p0, 0.0);
    let mut trace = Vec::new();
    let mut outcome = TrialOutcome {
        label: profile.label.clone(),
        seed,
        retained: true,
        aborted: false,
        residual_grains: grains.n_grains,
        initial_grains: grains.n_grains,
        min_area: f64::INFINITY,
        strokes_executed: 0,
        p_stable: p0,
        stroke_range: 0.0,
        servo_angle,
        trace: Vec::new(),
    };

    // Closing phase.
    let hold_ticks = (cfg.settle_hold * params.freq).round() as u64;
    let max_ticks = (cfg.settle_timeout * params.freq).round() as u64;
    let mut inside = 0u64;
    for _ in 0..max_ticks {
        let (row, plan) = cl.tick(&mut plant)?;
        let settled = (row.c - c_d).abs() <= 0.02 * c_d && row.v.abs() < 0.05;
        trace.push(RubTraceRow {
            mpc: row,
            phi,
            w,
            n_grains: grains.n_grains,
        });
        if !plan.is_feasible() {
            outcome.aborted = true;
            outcome.retained = false;
            break;
        }
        inside = if settled { inside + 1 } else { 0 };
        if inside >= hold_ticks.max(1) {
            break;
        }
    }
    outcome.p_stable = cl.opening();

    if !outcome.aborted && cfg.n_strokes > 0 {
        let range = stroke_range(outcome.p_stable, &cfg)?;
        outcome.stroke_range = range;
        let amp = 0.5 * range;
        let rub_ticks = (cfg.n_strokes as f64 / cfg.stroke_freq * params.freq).round() as u64;
        let dwell_ticks = (cfg.drop_dwell * params.freq).round() as u64;
        let mut below = 0u64;
        let mut s_prev = 0.0;
        for k in 1..=rub_ticks {
            let t = k as f64 * params.dt;
            let s = amp * (TAU * cfg.stroke_freq * t).sin();
            let delta = s - s_prev;
            s_prev = s;
            (phi, w) = rub_step(phi, delta, profile);
            plant.set_object_width(w);
            let (row, plan) = cl.tick(&mut plant)?;
            let c = row.c;
            grain_step(&mut grains, delta, c, c_d)?;
            outcome.min_area = outcome.min_area.min(c);
            trace.push(RubTraceRow {
                mpc: row,
                phi,
                w,
                n_grains: grains.n_grains,
            });
            outcome.strokes_executed = ((t * cfg.stroke_freq) + 1e-9).floor() as u32;
            if !plan.is_feasible() {
                outcome.aborted = true;
                outcome.retained = false;
                break;
            }
            below = if c < cfg.drop_area_floor { below + 1 } else { 0 };
            if below >= dwell_ticks.max(1) {
                outcome.retained = false;
                break;
            }
        }
        outcome.strokes_executed = outcome.strokes_executed.min(cfg.n_strokes);
    }
    if outcome.min_area == f64::INFINITY {
        outcome.min_area = trace.last().map_or(0.0, |r| r.mpc.c);
    }
    outcome.residual_grains = grains.n_grains;
    outcome.trace = trace;
    Ok(outcome)
}

/// `trials` runs per object. Trial `i` of every object uses the same seed,
/// so shapes are compared under common random numbers. Runs on the current
/// rayon pool.
pub fn run_singulation_batch(
    profiles: &[ObjectProfile],
    setup: &SingulationSetup,
    seed: u64,
    trials: u64,
) -> Result<Vec<TrialOutcome>> {
    setup.validate()?;
    for p in profiles {
        p.validate()?;
    }
    let mpc = CondensedMpc::new(setup.mpc, setup.limits)?;
    let jobs: Vec<(usize, u64)> = (0..profiles.len())
        .flat_map(|k| (0..trials).map(move |i| (k, i)))
        .collect();
    jobs.par_iter()
        .map(|&(k, i)| run_with_controller(&profiles[k], setup, mpc.clone(), seed::trial_seed(seed, i)))
        .collect()
}

pub const BATCH_CSV_HEADER: &str = "label,seed,retained,residual_grains,min_area_px,strokes";

pub fn batch_csv(outcomes: &[TrialOutcome]) -> String {
    let mut out = String::from(BATCH_CSV_HEADER);
    out.push('\n');
    for o in outcomes {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.4},{}",
            o.label, o.seed, o.retained, o.residual_grains, o.min_area, o.strokes_executed
        );
    }
    out
}

/// Retention rate per label, in first-seen order.
pub fn retention_rates(outcomes: &[TrialOutcome]) -> Vec<(String, usize, usize)> {
    let mut rates: Vec<(String, usize, usize)> = Vec::new();
    for o in outcomes {
        let idx = match rates.iter().position(|r| r.0 == o.label) {
            Some(i) => i,
            None => {
                rates.push((o.label.clone(), 0, 0));
                rates.len() - 1
            }
        };
        rates[idx].1 += o.retained as usize;
        rates[idx].2 += 1;
    }
    rates
}
