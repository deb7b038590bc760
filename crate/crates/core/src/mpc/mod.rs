//! Contact-area MPC grasp controller.
//!
//! The prediction model tracks `[c, p, v]`: contact area (px), gripper
//! opening (mm) and opening rate (mm/s, positive opens). One step of length
//! `dt` under acceleration `a` is
//!
//! ```text
//! c+ = c - K_c dt v
//! p+ = p + dt v + dt^2 a / 2
//! v+ = v + dt a
//! ```
//!
//! The cost penalizes `y = [c - c_desired, v]` with `diag(Q_c, Q_v)` over the
//! horizon, the terminal term amplified by `P`, plus `Q_a a^2` per input.

mod closed_loop;
mod condensed;
mod qp;

pub use closed_loop::{run_closed_loop, run_closed_loop_with, trace_csv_header, ClosedLoop, ClosedLoopTrace, TraceRow};
pub use condensed::CondensedMpc;
pub use qp::{DenseQp, QpSolution, QpStatus};

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspState {
    /// Contact area, pixels.
    pub c: f64,
    /// Gripper opening, mm.
    pub p: f64,
    /// Opening rate, mm/s.
    pub v: f64,
    pub tick: u64,
}

impl GraspState {
    pub fn new(c: f64, p: f64, v: f64) -> Self {
        Self { c, p, v, tick: 0 }
    }
}

/// Controller parameters. Defaults are the published GelSight Mini tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcParams {
    pub c_desired: f64,
    pub q_a: f64,
    pub q_c: f64,
    pub q_v: f64,
    /// Terminal cost amplification.
    pub p_terminal: f64,
    /// Prediction horizon, steps.
    pub horizon: usize,
    /// Area/opening slope as published (unitless there).
    pub k_c: f64,
    /// Converts `k_c` to px/mm.
    pub k_c_scale: f64,
    pub dt: f64,
    pub freq: f64,
}

impl Default for MpcParams {
    fn default() -> Self {
        Self {
            c_desired: 5500.0,
            q_a: 1.0,
            q_c: 1.0,
            q_v: 2.0,
            p_terminal: 10.0,
            horizon: 30,
            k_c: 50_000.0,
            k_c_scale: 0.01,
            dt: 1.0 / 60.0,
            freq: 60.0,
        }
    }
}

impl MpcParams {
    /// Effective model slope, px/mm.
    pub fn k_c_eff(&self) -> f64 {
        self.k_c * self.k_c_scale
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("q_a", self.q_a),
            ("q_c", self.q_c),
            ("q_v", self.q_v),
            ("c_desired", self.c_desired),
            ("k_c", self.k_c),
            ("k_c_scale", self.k_c_scale),
        ];
        for (name, w) in weights {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Config(format!("mpc.{name} must be finite and >= 0, got {w}")));
            }
        }
        if !(self.p_terminal >= 1.0) {
            return Err(Error::Config(format!(
                "mpc.p_terminal must be >= 1, got {}",
                self.p_terminal
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Config("mpc.horizon must be >= 1".into()));
        }
        if !(self.dt > 0.0) || !(self.freq > 0.0) || (self.dt * self.freq - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "mpc.dt ({}) and mpc.freq ({}) must satisfy dt * freq = 1",
                self.dt, self.freq
            )));
        }
        Ok(())
    }
}

/// Box limits on opening, rate and acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Limits {
    pub p_min: f64,
    pub p_max: f64,
    pub v_max: f64,
    pub a_max: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            p_min: 0.0,
            p_max: 55.0,
            v_max: 20.0,
            a_max: 200.0,
        }
    }
}

impl Limits {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_min < self.p_max) {
            return Err(Error::Config(format!(
                "limits.p_min ({}) must be below limits.p_max ({})",
                self.p_min, self.p_max
            )));
        }
        if !(self.v_max > 0.0) || !(self.a_max > 0.0) {
            return Err(Error::Config("limits.v_max and limits.a_max must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanStatus {
    Optimal,
    /// No input sequence satisfies the limits; the plan is the solver's last
    /// iterate clamped to the acceleration box.
    Infeasible,
    IterationLimit,
}

impl PlanStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanStatus::Optimal => "optimal",
            PlanStatus::Infeasible => "infeasible",
            PlanStatus::IterationLimit => "iteration_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlPlan {
    /// Accelerations over the horizon, mm/s^2.
    pub a: Vec<f64>,
    pub cost: f64,
    /// Scaled KKT residual of the condensed QP (see [`DenseQp::kkt_residual`]).
    pub kkt_residual: f64,
    pub status: PlanStatus,
    pub iterations: usize,
}

impl ControlPlan {
    pub fn first(&self) -> f64 {
        self.a[0]
    }

    pub fn is_feasible(&self) -> bool {
        self.status != PlanStatus::Infeasible
    }
}

/// One model step.
pub fn step_model(state: &GraspState, a: f64, params: &MpcParams) -> GraspState {
    let dt = params.dt;
    GraspState {
        c: state.c - params.k_c_eff() * dt * state.v,
        p: state.p + dt * state.v + 0.5 * dt * dt * a,
        v: state.v + dt * a,
        tick: state.tick + 1,
    }
}

/// Rolls the model forward; the result has `a.len() + 1` states.
pub fn predict(state: &GraspState, a: &[f64], params: &MpcParams) -> Result<Vec<GraspState>> {
    if a.is_empty() {
        return Err(Error::Contract("predict needs at least one input".into()));
    }
    let mut out = Vec::with_capacity(a.len() + 1);
    out.push(*state);
    for &ak in a {
        let next = step_model(out.last().unwrap(), ak, params);
        out.push(next);
    }
    Ok(out)
}

/// Horizon cost `J` of input sequence `a` from `state`.
pub fn cost(state: &GraspState, a: &[f64], params: &MpcParams) -> Result<f64> {
    if a.len() != params.horizon {
        return Err(Error::Contract(format!(
            "cost needs {} inputs, got {}",
            params.horizon,
            a.len()
        )));
    }
    let traj = predict(state, a, params)?;
    let err = |s: &GraspState| {
        let ec = s.c - params.c_desired;
        params.q_c * ec * ec + params.q_v * s.v * s.v
    };
    let stage: f64 = traj[..a.len()]
        .iter()
        .zip(a)
        .map(|(s, &ak)| err(s) + params.q_a * ak * ak)
        .sum();
    Ok(params.p_terminal * err(&traj[a.len()]) + stage)
}

/// Minimizes the horizon cost under the model and the box limits.
pub fn solve(state: &GraspState, params: &MpcParams, limits: &Limits) -> Result<ControlPlan> {
    CondensedMpc::new(*params, *limits)?.solve(state)
}
