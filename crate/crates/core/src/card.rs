//! Card scooping, tactile exploration and slot insertion as a finite-state
//! machine. See `docs/card_fsm.md` for the transition graph.
//!
//! Card coordinates are in mm, viewed from the embossed side: `x` along the
//! long edge from the short edge that is inserted first, `y` along the short
//! edge from the long edge that rests on the table after scooping.

use crate::gel::{GelPadSpec, TactileFrame, DEFAULT_THRESHOLD, DIGIT_EMBOSS_MM};
use crate::scoop::{flip_predicate, FlipVerdict, ScoopProblem};
use crate::seed::{self, Stream};
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt::{self, Write as _};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CardSpec {
    pub length: f64,
    pub width: f64,
    pub thickness: f64,
    /// Thickness over the embossed digits.
    pub digit_thickness: f64,
    pub digits_x: [f64; 2],
    pub digits_y: [f64; 2],
}

impl Default for CardSpec {
    fn default() -> Self {
        Self {
            length: 85.5,
            width: 54.0,
            thickness: 0.8,
            digit_thickness: 1.2,
            digits_x: [10.0, 76.0],
            digits_y: [18.0, 23.0],
        }
    }
}

impl CardSpec {
    pub fn validate(&self) -> Result<()> {
        let [x0, x1] = self.digits_x;
        let [y0, y1] = self.digits_y;
        if !(self.length > 0.0 && self.width > 0.0 && self.thickness > 0.0) {
            return Err(Error::Config("card dimensions must be positive".into()));
        }
        if !(self.digit_thickness >= self.thickness) {
            return Err(Error::Config("card digit_thickness must be >= thickness".into()));
        }
        if !(0.0 <= x0 && x0 < x1 && x1 <= self.length && 0.0 <= y0 && y0 < y1 && y1 <= self.width) {
            return Err(Error::Config("card digit band must lie inside the card".into()));
        }
        Ok(())
    }

    pub fn in_digits(&self, x: f64, y: f64) -> bool {
        (self.digits_x[0]..=self.digits_x[1]).contains(&x) && (self.digits_y[0]..=self.digits_y[1]).contains(&y)
    }

    /// Thickness of the short edge that enters the slot first.
    pub fn leading_thickness(&self) -> f64 {
        if self.digits_x[0] <= 0.0 {
            self.digit_thickness
        } else {
            self.thickness
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReaderSpec {
    pub slot_length: f64,
    pub slot_width: f64,
    /// Offset of the gripper's card plane from the slot centerline across the
    /// slot, mm.
    pub mount_offset: f64,
}

impl Default for ReaderSpec {
    fn default() -> Self {
        Self {
            slot_length: 56.0,
            slot_width: 1.5,
            mount_offset: 0.0,
        }
    }
}

impl ReaderSpec {
    pub fn validate(&self, card: &CardSpec) -> Result<()> {
        if !(self.slot_length > 0.0 && self.slot_width > 0.0) {
            return Err(Error::Config("reader slot dimensions must be positive".into()));
        }
        if self.slot_length <= card.width {
            return Err(Error::Config(format!(
                "slot length {} does not admit the {} mm card edge",
                self.slot_length, card.width
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExploreConfig {
    /// Allowed regrasp steps, mm. All negative.
    pub steps: Vec<f64>,
    /// Target distance from the grasp to the trailing short edge, mm.
    pub x_d: f64,
    /// Target distance from the grasp to the top long edge, mm.
    pub y_d: f64,
    pub edge_tolerance: f64,
    pub max_steps: u32,
    /// Largest grasp distance from the card end at which gravity rotation
    /// is trusted, mm.
    pub rotate_margin: f64,
    /// Gel indentation while holding the card, mm.
    pub indent: f64,
    /// Depth noise std-dev on rendered frames, mm.
    pub depth_noise: f64,
    /// Range of grasp positions the scoop leaves the card in, mm.
    pub initial_x: [f64; 2],
    pub initial_y: [f64; 2],
    pub scoop: ScoopProblem,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        Self {
            steps: vec![-2.0, -4.0, -8.0],
            x_d: 8.0,
            y_d: 27.0,
            edge_tolerance: 1.0,
            max_steps: 64,
            rotate_margin: 12.0,
            indent: 0.5,
            depth_noise: 0.0,
            initial_x: [27.75, 57.75],
            initial_y: [8.0, 14.0],
            scoop: ScoopProblem::card(),
        }
    }
}

impl ExploreConfig {
    pub fn validate(&self, card: &CardSpec, pad: &GelPadSpec) -> Result<()> {
        if self.steps.is_empty() || self.steps.iter().any(|s| !(*s < 0.0)) {
            return Err(Error::Config("explore.steps must be non-empty and all negative".into()));
        }
        let min_step = self.steps.iter().map(|s| s.abs()).fold(f64::INFINITY, f64::min);
        if !(self.edge_tolerance >= 0.5 * min_step) {
            return Err(Error::Config(format!(
                "explore.edge_tolerance {} must be at least half the smallest step ({})",
                self.edge_tolerance,
                0.5 * min_step
            )));
        }
        if !(self.x_d > 0.0 && self.x_d < card.length) || !(self.y_d > 0.0 && self.y_d < card.width) {
            return Err(Error::Config(
                "explore.x_d and explore.y_d must lie inside the card".into(),
            ));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("explore.max_steps must be positive".into()));
        }
        if !(self.rotate_margin > 0.0) || !(self.depth_noise >= 0.0) {
            return Err(Error::Config(
                "explore.rotate_margin must be positive, depth_noise non-negative".into(),
            ));
        }
        if !(self.indent > 0.0 && self.indent + DIGIT_EMBOSS_MM <= pad.max_indent) {
            return Err(Error::Config(format!(
                "explore.indent {} plus relief must fit the gel depth {}",
                self.indent, pad.max_indent
            )));
        }
        let [x0, x1] = self.initial_x;
        let [y0, y1] = self.initial_y;
        if !(0.0 <= x0 && x0 <= x1 && x1 <= card.length && 0.0 <= y0 && y0 <= y1 && y1 <= card.width) {
            return Err(Error::Config("explore initial ranges must lie inside the card".into()));
        }
        self.scoop.validate()
    }

    fn min_step(&self) -> f64 {
        self.steps.iter().map(|s| s.abs()).fold(f64::INFINITY, f64::min)
    }
}

/// Everything fixed across insertion trials.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InsertionSetup {
    pub card: CardSpec,
    pub reader: ReaderSpec,
    pub pad: GelPadSpec,
    pub explore: ExploreConfig,
}

impl InsertionSetup {
    pub fn validate(&self) -> Result<()> {
        self.card.validate()?;
        self.reader.validate(&self.card)?;
        self.pad.validate()?;
        self.explore.validate(&self.card, &self.pad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Scoop,
    OrientCheck,
    FlipInHand,
    ExploreX,
    RotateVertical,
    ExploreY,
    Insert,
    Done,
    Fail,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Scoop => "scoop",
            Phase::OrientCheck => "orient_check",
            Phase::FlipInHand => "flip_in_hand",
            Phase::ExploreX => "explore_x",
            Phase::RotateVertical => "rotate_vertical",
            Phase::ExploreY => "explore_y",
            Phase::Insert => "insert",
            Phase::Done => "done",
            Phase::Fail => "fail",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Fail)
    }
}

/// Edges of the transition graph.
pub fn is_legal_transition(from: Phase, to: Phase) -> bool {
    use Phase::*;
    matches!(
        (from, to),
        (Scoop, OrientCheck)
            | (Scoop, Fail)
            | (OrientCheck, FlipInHand)
            | (OrientCheck, ExploreX)
            | (FlipInHand, OrientCheck)
            | (FlipInHand, Fail)
            | (ExploreX, ExploreX)
            | (ExploreX, RotateVertical)
            | (ExploreX, Fail)
            | (RotateVertical, ExploreY)
            | (RotateVertical, Fail)
            | (ExploreY, ExploreY)
            | (ExploreY, Insert)
            | (ExploreY, Fail)
            | (Insert, Done)
            | (Insert, Fail)
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FailReason {
    ScoopInfeasible,
    SensorInconsistent,
    BudgetExhausted,
    LostFeature,
    /// The reading is already past the target; steps only go one way.
    PastTarget,
    RotationUnsafe,
    /// Signed miss distances, lateral and across the slot, mm.
    Misaligned {
        lateral: f64,
        across: f64,
    },
}

impl fmt::Display for FailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailReason::ScoopInfeasible => f.write_str("scoop_infeasible"),
            FailReason::SensorInconsistent => f.write_str("sensor_inconsistent"),
            FailReason::BudgetExhausted => f.write_str("budget_exhausted"),
            FailReason::LostFeature => f.write_str("lost_feature"),
            FailReason::PastTarget => f.write_str("past_target"),
            FailReason::RotationUnsafe => f.write_str("rotation_unsafe"),
            FailReason::Misaligned { lateral, across } => {
                write!(f, "misaligned(lateral={lateral:.4},across={across:.4})")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    DigitsToPad,
    BackToPad,
}

impl Side {
    fn flipped(self) -> Self {
        match self {
            Side::DigitsToPad => Side::BackToPad,
            Side::BackToPad => Side::DigitsToPad,
        }
    }
}

/// Which card edge rests on the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resting {
    LongEdge,
    ShortEdge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Orientation {
    DigitsPresent,
    DigitsAbsent,
}

/// Where the gripper holds the card right after scooping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialPose {
    pub grasp_x: f64,
    pub grasp_y: f64,
    pub side: Side,
}

impl InitialPose {
    pub fn sample(cfg: &ExploreConfig, rng: &mut ChaCha8Rng) -> Self {
        let grasp_x = rng.gen_range(cfg.initial_x[0]..=cfg.initial_x[1]);
        let grasp_y = rng.gen_range(cfg.initial_y[0]..=cfg.initial_y[1]);
        let side = if rng.gen_bool(0.5) {
            Side::DigitsToPad
        } else {
            Side::BackToPad
        };
        Self { grasp_x, grasp_y, side }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationState {
    pub phase: Phase,
    /// Grasp point in card coordinates (embossed-side view), mm.
    pub grasp_x: f64,
    pub grasp_y: f64,
    pub side: Side,
    pub resting: Resting,
    /// Last distance reading toward the current target, mm.
    pub last_edge_reading: Option<f64>,
    pub steps_taken: u32,
    /// Flips since the last orientation change was confirmed.
    pub flips_in_row: u32,
    pub failure: Option<FailReason>,
}

impl ExplorationState {
    fn fail(mut self, reason: FailReason) -> Self {
        self.phase = Phase::Fail;
        self.failure = Some(reason);
        self
    }

    pub fn verdict(&self) -> String {
        match (self.phase, self.failure) {
            (Phase::Fail, Some(r)) => format!("fail:{r}"),
            (p, _) => p.as_str().to_string(),
        }
    }
}

/// Tactile distance reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reading {
    Exact(f64),
    /// The feature runs past the pad; the true value is at least this.
    AtLeast(f64),
    Lost,
}

impl Reading {
    pub fn value(self) -> Option<f64> {
        match self {
            Reading::Exact(v) | Reading::AtLeast(v) => Some(v),
            Reading::Lost => None,
        }
    }
}

/// Depth image of the card held at `state`'s grasp.
///
/// With the long edge down the card's x axis runs along the pad's x axis.
/// After the gravity rotation the card hangs from the grasp: card `+x` maps
/// to pad `+y` and card `+y` to pad `-x`.
pub fn render_grasp(
    setup: &InsertionSetup,
    state: &ExplorationState,
    noise: Option<&mut ChaCha8Rng>,
) -> Result<TactileFrame> {
    let pad = &setup.pad;
    let card = &setup.card;
    let indent = setup.explore.indent;
    let mut depth = vec![0.0; pad.cells()];
    for j in 0..pad.height_px {
        for i in 0..pad.width_px {
            let (px, py) = pad.cell_center(i, j);
            let (dx, dy) = match state.resting {
                Resting::LongEdge => (px, py),
                Resting::ShortEdge => (py, -px),
            };
            let (cx, cy) = (state.grasp_x + dx, state.grasp_y + dy);
            if !(0.0..=card.length).contains(&cx) || !(0.0..=card.width).contains(&cy) {
                continue;
            }
            let raised = state.side == Side::DigitsToPad && card.in_digits(cx, cy);
            depth[j * pad.width_px + i] = if raised { indent + DIGIT_EMBOSS_MM } else { indent };
        }
    }
    if let Some(rng) = noise {
        let sigma = setup.explore.depth_noise;
        if sigma > 0.0 {
            for d in &mut depth {
                if *d > 0.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    *d += sigma * z;
                }
            }
        }
    }
    TactileFrame::from_depths(*pad, depth)
}

/// Contact cells standing out from the median contact depth by at least
/// half the emboss relief.
fn relief_mask(frame: &TactileFrame) -> Vec<bool> {
    let mut contact: Vec<f64> = frame
        .depths()
        .iter()
        .copied()
        .filter(|&d| d >= DEFAULT_THRESHOLD)
        .collect();
    if contact.is_empty() {
        return vec![false; frame.depths().len()];
    }
    let mid = contact.len() / 2;
    let (_, base, _) = contact.select_nth_unstable_by(mid, f64::total_cmp);
    let cut = *base + 0.5 * DIGIT_EMBOSS_MM;
    frame.depths().iter().map(|&d| d >= cut).collect()
}

pub fn detect_orientation(frame: &TactileFrame) -> Orientation {
    if relief_mask(frame).iter().any(|&m| m) {
        Orientation::DigitsPresent
    } else {
        Orientation::DigitsAbsent
    }
}

/// Pad-frame extent of the embossed digits along pad x: the right boundary
/// of the right-most relief column (`toward_max`) or the negated left
/// boundary of the left-most one.
fn relief_extent(frame: &TactileFrame, toward_max: bool) -> Reading {
    let mask = relief_mask(frame);
    let w = frame.width();
    let cols: Vec<usize> = (0..w)
        .filter(|&i| (0..frame.height()).any(|j| mask[j * w + i]))
        .collect();
    let (Some(&first), Some(&last)) = (cols.first(), cols.last()) else {
        return Reading::Lost;
    };
    let res = frame.pad.resolution;
    let half = w as f64 / 2.0;
    if toward_max {
        let e = (last as f64 + 1.0 - half) / res;
        if last == w - 1 {
            Reading::AtLeast(e)
        } else {
            Reading::Exact(e)
        }
    } else {
        let e = -(first as f64 - half) / res;
        if first == 0 {
            Reading::AtLeast(e)
        } else {
            Reading::Exact(e)
        }
    }
}

fn shift(reading: Reading, by: f64) -> Reading {
    match reading {
        Reading::Exact(v) => Reading::Exact(v + by),
        Reading::AtLeast(v) => Reading::AtLeast(v + by),
        Reading::Lost => Reading::Lost,
    }
}

/// Distance from the grasp to the trailing short edge, inferred from where
/// the last digit sits on the pad.
pub fn read_x(setup: &InsertionSetup, frame: &TactileFrame) -> Reading {
    shift(relief_extent(frame, true), setup.card.length - setup.card.digits_x[1])
}

/// Distance from the grasp to the top long edge, inferred from the digits'
/// upper boundary. Only meaningful once the card hangs short edge down.
pub fn read_y(setup: &InsertionSetup, frame: &TactileFrame) -> Reading {
    shift(relief_extent(frame, false), setup.card.width - setup.card.digits_y[1])
}

/// Regrasp step for a reading `distance` above the target: the largest step
/// that does not pass the target, or the smallest step if all would.
/// `None` once within tolerance.
pub fn select_step(distance: f64, cfg: &ExploreConfig) -> Option<f64> {
    if distance.abs() <= cfg.edge_tolerance {
        return None;
    }
    let fitting = cfg
        .steps
        .iter()
        .copied()
        .filter(|s| s.abs() <= distance)
        .max_by(|a, b| a.abs().total_cmp(&b.abs()));
    Some(fitting.unwrap_or(-cfg.min_step()))
}

/// Clearance check at the slot. `lateral` is the card centerline's miss
/// along the slot, `across` its offset across the slot.
pub fn insert_check(setup: &InsertionSetup, lateral: f64, across: f64) -> Option<FailReason> {
    let lateral_room = 0.5 * (setup.reader.slot_length - setup.card.width);
    let across_room = 0.5 * (setup.reader.slot_width - setup.card.leading_thickness());
    if lateral.abs() <= lateral_room && across.abs() <= across_room {
        None
    } else {
        Some(FailReason::Misaligned { lateral, across })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CardTraceRow {
    pub step: u32,
    pub phase: Phase,
    pub grasp_x: f64,
    pub grasp_y: f64,
    pub edge: Option<f64>,
    pub action: &'static str,
    pub step_mm: Option<f64>,
    pub verdict: String,
}

pub const CARD_TRACE_HEADER: &str = "step,phase,grasp_x_mm,grasp_y_mm,edge_mm,action,step_mm,verdict";

pub fn card_trace_csv(rows: &[CardTraceRow]) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.4}"));
    let mut out = String::from(CARD_TRACE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.4},{:.4},{},{},{},{}",
            r.step,
            r.phase.as_str(),
            r.grasp_x,
            r.grasp_y,
            opt(r.edge),
            r.action,
            opt(r.step_mm),
            r.verdict
        );
    }
    out
}

/// One insertion attempt: the FSM state, its trace and the sensor noise
/// stream.
#[derive(Debug, Clone)]
pub struct InsertionTrial<'a> {
    pub setup: &'a InsertionSetup,
    pub state: ExplorationState,
    pub trace: Vec<CardTraceRow>,
    pub transitions: Vec<(Phase, Phase)>,
    noise: ChaCha8Rng,
}

impl<'a> InsertionTrial<'a> {
    /// Starts in `Scoop` at `pose`, which must lie in the configured range.
    pub fn new(setup: &'a InsertionSetup, pose: InitialPose, seed: u64) -> Result<Self> {
        setup.validate()?;
        let cfg = &setup.explore;
        let in_range = |v: f64, r: [f64; 2]| v >= r[0] && v <= r[1];
        if !in_range(pose.grasp_x, cfg.initial_x) || !in_range(pose.grasp_y, cfg.initial_y) {
            return Err(Error::Domain(format!(
                "initial grasp ({}, {}) outside the assumed range x {:?}, y {:?}",
                pose.grasp_x, pose.grasp_y, cfg.initial_x, cfg.initial_y
            )));
        }
        Ok(Self {
            setup,
            state: ExplorationState {
                phase: Phase::Scoop,
                grasp_x: pose.grasp_x,
                grasp_y: pose.grasp_y,
                side: pose.side,
                resting: Resting::LongEdge,
                last_edge_reading: None,
                steps_taken: 0,
                flips_in_row: 0,
                failure: None,
            },
            trace: Vec::new(),
            transitions: Vec::new(),
            noise: seed::rng(seed::stream_seed(seed, Stream::SensorNoise)),
        })
    }

    fn expect(&self, phase: Phase) -> Result<()> {
        if self.state.phase == phase {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "operation needs phase {}, state is in {}",
                phase.as_str(),
                self.state.phase.as_str()
            )))
        }
    }

    fn record(&mut self, next: ExplorationState, action: &'static str, edge: Option<f64>, step_mm: Option<f64>) {
        let from = self.state.phase;
        self.transitions.push((from, next.phase));
        self.trace.push(CardTraceRow {
            step: self.trace.len() as u32,
            phase: from,
            grasp_x: next.grasp_x,
            grasp_y: next.grasp_y,
            edge,
            action,
            step_mm,
            verdict: next.verdict(),
        });
        self.state = next;
    }

    pub fn frame(&mut self) -> Result<TactileFrame> {
        render_grasp(self.setup, &self.state, Some(&mut self.noise))
    }

    /// Flip the card onto its edge with the nail; fails when the statics
    /// predict no counterclockwise flip.
    pub fn scoop_card(&mut self) -> Result<()> {
        self.expect(Phase::Scoop)?;
        let verdict = flip_predicate(&self.setup.explore.scoop)?;
        let mut next = self.state.clone();
        if verdict == FlipVerdict::FlipsCcw {
            next.phase = Phase::OrientCheck;
        } else {
            next = next.fail(FailReason::ScoopInfeasible);
        }
        self.record(next, "scoop", None, None);
        Ok(())
    }

    pub fn check_orientation(&mut self) -> Result<Orientation> {
        self.expect(Phase::OrientCheck)?;
        let frame = self.frame()?;
        let found = detect_orientation(&frame);
        let mut next = self.state.clone();
        match found {
            Orientation::DigitsPresent => {
                next.phase = Phase::ExploreX;
                next.flips_in_row = 0;
            }
            Orientation::DigitsAbsent => next.phase = Phase::FlipInHand,
        }
        self.record(next, "orient_check", None, None);
        Ok(found)
    }

    /// Turn the card over about the vertical axis through the grasp.
    pub fn flip_in_hand(&mut self) -> Result<()> {
        self.expect(Phase::FlipInHand)?;
        let mut next = self.state.clone();
        if next.flips_in_row >= 1 {
            next = next.fail(FailReason::SensorInconsistent);
        } else {
            next.side = next.side.flipped();
            next.grasp_x = self.setup.card.length - next.grasp_x;
            next.flips_in_row += 1;
            next.phase = Phase::OrientCheck;
        }
        self.record(next, "flip_in_hand", None, None);
        Ok(())
    }

    fn explore_step(&mut self, phase: Phase, done: Phase) -> Result<()> {
        self.expect(phase)?;
        let cfg = &self.setup.explore;
        let frame = self.frame()?;
        let (reading, target, action) = match phase {
            Phase::ExploreX => (read_x(self.setup, &frame), cfg.x_d, "explore_x"),
            _ => (read_y(self.setup, &frame), cfg.y_d, "explore_y"),
        };
        let mut next = self.state.clone();
        next.last_edge_reading = reading.value();
        let Some(r) = reading.value() else {
            self.record(next.fail(FailReason::LostFeature), action, None, None);
            return Ok(());
        };
        match select_step(r - target, cfg) {
            None => {
                next.phase = done;
                self.record(next, action, Some(r), None);
            }
            Some(_) if r < target => {
                self.record(next.fail(FailReason::PastTarget), action, Some(r), None);
            }
            Some(_) if next.steps_taken >= cfg.max_steps => {
                self.record(next.fail(FailReason::BudgetExhausted), action, Some(r), None);
            }
            Some(s) => {
                // A step of s shortens the reading by |s|: the grasp moves
                // toward the far edge.
                match phase {
                    Phase::ExploreX => next.grasp_x -= s,
                    _ => next.grasp_y -= s,
                }
                next.steps_taken += 1;
                self.record(next, action, Some(r), Some(s));
            }
        }
        Ok(())
    }

    pub fn step_explore_x(&mut self) -> Result<()> {
        self.explore_step(Phase::ExploreX, Phase::RotateVertical)
    }

    pub fn step_explore_y(&mut self) -> Result<()> {
        self.explore_step(Phase::ExploreY, Phase::Insert)
    }

    /// Loosen the grip near the card end so gravity swings it short edge
    /// down.
    pub fn rotate_vertical(&mut self) -> Result<()> {
        self.expect(Phase::RotateVertical)?;
        let mut next = self.state.clone();
        if self.setup.card.length - next.grasp_x > self.setup.explore.rotate_margin {
            next = next.fail(FailReason::RotationUnsafe);
        } else {
            next.resting = Resting::ShortEdge;
            next.phase = Phase::ExploreY;
        }
        self.record(next, "rotate_vertical", None, None);
        Ok(())
    }

    /// Final regrasp onto the measured target, then the clearance check.
    pub fn insert(&mut self) -> Result<()> {
        self.expect(Phase::Insert)?;
        let frame = self.frame()?;
        let reading = read_y(self.setup, &frame);
        let Some(r) = reading.value() else {
            let next = self.state.clone().fail(FailReason::LostFeature);
            self.record(next, "final_grasp", None, None);
            return Ok(());
        };
        let correction = r - self.setup.explore.y_d;
        self.state.grasp_y += correction;
        self.state.last_edge_reading = Some(r);
        self.trace.push(CardTraceRow {
            step: self.trace.len() as u32,
            phase: Phase::Insert,
            grasp_x: self.state.grasp_x,
            grasp_y: self.state.grasp_y,
            edge: Some(r),
            action: "final_grasp",
            step_mm: Some(-correction),
            verdict: Phase::Insert.as_str().into(),
        });

        // The gripper places the point it believes is y_d below the top
        // edge onto the slot position for that point.
        let lateral = self.setup.explore.y_d - (self.setup.card.width - self.state.grasp_y);
        let across = self.setup.reader.mount_offset;
        let mut next = self.state.clone();
        match insert_check(self.setup, lateral, across) {
            None => next.phase = Phase::Done,
            Some(reason) => next = next.fail(reason),
        }
        self.record(next, "insert", None, None);
        Ok(())
    }

    /// Advance one FSM step.
    pub fn advance(&mut self) -> Result<()> {
        match self.state.phase {
            Phase::Scoop => self.scoop_card(),
            Phase::OrientCheck => self.check_orientation().map(|_| ()),
            Phase::FlipInHand => self.flip_in_hand(),
            Phase::ExploreX => self.step_explore_x(),
            Phase::RotateVertical => self.rotate_vertical(),
            Phase::ExploreY => self.step_explore_y(),
            Phase::Insert => self.insert(),
            Phase::Done | Phase::Fail => Err(Error::Contract("trial already finished".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InsertionOutcome {
    pub seed: u64,
    pub pose: InitialPose,
    pub final_state: ExplorationState,
    pub trace: Vec<CardTraceRow>,
    pub transitions: Vec<(Phase, Phase)>,
}

impl InsertionOutcome {
    pub fn done(&self) -> bool {
        self.final_state.phase == Phase::Done
    }
}

/// Full FSM run from a scooped card at `pose`.
pub fn run_insertion_trial(setup: &InsertionSetup, pose: InitialPose, seed: u64) -> Result<InsertionOutcome> {
    let mut trial = InsertionTrial::new(setup, pose, seed)?;
    // Every phase-step either moves the grasp or changes phase; the bound
    // only guards against bugs.
    let cap = 4 * setup.explore.max_steps as usize + 16;
    for _ in 0..cap {
        if trial.state.phase.is_terminal() {
            break;
        }
        trial.advance()?;
    }
    if !trial.state.phase.is_terminal() {
        return Err(Error::Contract("insertion trial did not terminate".into()));
    }
    Ok(InsertionOutcome {
        seed,
        pose,
        final_state: trial.state,
        trace: trial.trace,
        transitions: trial.transitions,
    })
}

/// Initial pose drawn from the trial seed, then the full run.
pub fn run_seeded_insertion(setup: &InsertionSetup, seed: u64) -> Result<InsertionOutcome> {
    setup.validate()?;
    let pose = InitialPose::sample(
        &setup.explore,
        &mut seed::rng(seed::stream_seed(seed, Stream::InitialPose)),
    );
    run_insertion_trial(setup, pose, seed)
}
