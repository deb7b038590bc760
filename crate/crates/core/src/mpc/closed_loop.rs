use super::{CondensedMpc, ControlPlan, GraspState, Limits, MpcParams, PlanStatus};
use crate::gel::ContactPlant;
use crate::{Error, Result};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub tick: u64,
    pub t: f64,
    pub c: f64,
    pub p: f64,
    pub v: f64,
    /// Applied acceleration.
    pub a: f64,
    pub cost: f64,
    pub kkt: f64,
    pub status: PlanStatus,
}

pub fn trace_csv_header() -> &'static str {
    "tick,t_s,c_px,p_mm,v_mms,a_mms2,cost,kkt"
}

impl TraceRow {
    pub fn write_csv(&self, out: &mut String) {
        let _ = write!(
            out,
            "{},{:.6},{:.4},{:.6},{:.6},{:.6},{:.6},{:.3e}",
            self.tick, self.t, self.c, self.p, self.v, self.a, self.cost, self.kkt
        );
    }
}

#[derive(Debug, Clone, Default)]
pub struct ClosedLoopTrace {
    pub rows: Vec<TraceRow>,
}

impl ClosedLoopTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(trace_csv_header());
        out.push('\n');
        for row in &self.rows {
            row.write_csv(&mut out);
            out.push('\n');
        }
        out
    }

    pub fn infeasible_ticks(&self) -> usize {
        self.rows.iter().filter(|r| r.status == PlanStatus::Infeasible).count()
    }

    /// First time after which `c` stays within `band` (relative) of `target`
    /// and `|v| < v_tol` until the end of the trace.
    pub fn settling_time(&self, target: f64, band: f64, v_tol: f64) -> Option<f64> {
        let mut since = None;
        for row in &self.rows {
            let inside = (row.c - target).abs() <= band * target && row.v.abs() < v_tol;
            match (inside, since) {
                (true, None) => since = Some(row.t),
                (false, _) => since = None,
                _ => {}
            }
        }
        since
    }
}

/// Receding-horizon loop: measure, solve, apply the first input through
/// the opening kinematics. The rate is integrated from commanded inputs.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    mpc: CondensedMpc,
    p: f64,
    v: f64,
    tick: u64,
}

impl ClosedLoop {
    pub fn new(params: MpcParams, limits: Limits, p0: f64, v0: f64) -> Result<Self> {
        Ok(Self::with_controller(CondensedMpc::new(params, limits)?, p0, v0))
    }

    pub fn with_controller(mpc: CondensedMpc, p0: f64, v0: f64) -> Self {
        Self {
            mpc,
            p: p0,
            v: v0,
            tick: 0,
        }
    }

    pub fn opening(&self) -> f64 {
        self.p
    }

    pub fn rate(&self) -> f64 {
        self.v
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.mpc.params().dt
    }

    pub fn controller(&self) -> &CondensedMpc {
        &self.mpc
    }

    /// One control period against `plant`.
    pub fn tick(&mut self, plant: &mut ContactPlant) -> Result<(TraceRow, ControlPlan)> {
        let c = plant.plant_step(self.p.max(0.0))?;
        let state = GraspState {
            c,
            p: self.p,
            v: self.v,
            tick: self.tick,
        };
        let plan = self.mpc.solve(&state)?;
        let a = plan.first();
        let row = TraceRow {
            tick: self.tick,
            t: self.time(),
            c,
            p: self.p,
            v: self.v,
            a,
            cost: plan.cost,
            kkt: plan.kkt_residual,
            status: plan.status,
        };
        let dt = self.mpc.params().dt;
        let lim = self.mpc.limits();
        self.p = (self.p + dt * self.v + 0.5 * dt * dt * a).clamp(lim.p_min, lim.p_max);
        self.v += dt * a;
        self.tick += 1;
        Ok((row, plan))
    }
}

pub fn run_closed_loop(
    plant: &mut ContactPlant,
    params: &MpcParams,
    limits: &Limits,
    initial: &GraspState,
    duration: f64,
) -> Result<ClosedLoopTrace> {
    run_closed_loop_with(plant, params, limits, initial, duration, |_, _| {})
}

/// As [`run_closed_loop`], calling `disturb(t, plant)` before every
/// measurement so the object can change under the fingers.
pub fn run_closed_loop_with(
    plant: &mut ContactPlant,
    params: &MpcParams,
    limits: &Limits,
    initial: &GraspState,
    duration: f64,
    mut disturb: impl FnMut(f64, &mut ContactPlant),
) -> Result<ClosedLoopTrace> {
    if !(duration > 0.0) {
        return Err(Error::Domain(format!("duration must be positive, got {duration}")));
    }
    let mut cl = ClosedLoop::new(*params, *limits, initial.p, initial.v)?;
    let ticks = (duration * params.freq).round() as u64;
    let mut trace = ClosedLoopTrace {
        rows: Vec::with_capacity(ticks as usize),
    };
    for _ in 0..ticks {
        disturb(cl.time(), plant);
        let (row, _) = cl.tick(plant)?;
        trace.rows.push(row);
    }
    Ok(trace)
}
