//! Independent oracles shared by the integration tests and the acceptance
//! suite. Nothing here calls the code under test to produce a reference.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use tacgrip::gel::{extract_patch, render_edge_contact, render_sphere_contact, GelPadSpec, DEFAULT_THRESHOLD};
use tacgrip::mpc::{solve, GraspState, Limits, MpcParams};
use tacgrip::scoop::{moment_direct, solve_forces, ScoopProblem};

/// Grid minimum of the horizon cost over a regular grid of inputs, with its
/// own copy of the dynamics. Returns `None` when no grid point is feasible.
pub fn grid_minimum(state: &GraspState, params: &MpcParams, limits: &Limits, points: usize) -> Option<f64> {
    let n = params.horizon;
    assert!((1..=3).contains(&n));
    let dt = params.dt;
    let k = params.k_c * params.k_c_scale;
    let grid: Vec<f64> = (0..points)
        .map(|i| -limits.a_max + 2.0 * limits.a_max * i as f64 / (points - 1) as f64)
        .collect();
    let stage = |c: f64, v: f64| {
        let e = c - params.c_desired;
        params.q_c * e * e + params.q_v * v * v
    };
    let ok = |p: f64, v: f64| p >= limits.p_min - 1e-12 && p <= limits.p_max + 1e-12 && v.abs() <= limits.v_max + 1e-12;
    let step = |(c, p, v): (f64, f64, f64), a: f64| (c - k * dt * v, p + dt * v + 0.5 * dt * dt * a, v + dt * a);

    let x0 = (state.c, state.p, state.v);
    let j0 = stage(x0.0, x0.2);
    let mut best = f64::INFINITY;
    for &a0 in &grid {
        let x1 = step(x0, a0);
        if !ok(x1.1, x1.2) {
            continue;
        }
        let j1 = j0 + params.q_a * a0 * a0;
        if n == 1 {
            best = best.min(j1 + params.p_terminal * stage(x1.0, x1.2));
            continue;
        }
        let j1 = j1 + stage(x1.0, x1.2);
        for &a1 in &grid {
            let x2 = step(x1, a1);
            if !ok(x2.1, x2.2) {
                continue;
            }
            let j2 = j1 + params.q_a * a1 * a1;
            if n == 2 {
                best = best.min(j2 + params.p_terminal * stage(x2.0, x2.2));
                continue;
            }
            let j2 = j2 + stage(x2.0, x2.2);
            for &a2 in &grid {
                let x3 = step(x2, a2);
                if !ok(x3.1, x3.2) {
                    continue;
                }
                best = best.min(j2 + params.q_a * a2 * a2 + params.p_terminal * stage(x3.0, x3.2));
            }
        }
    }
    best.is_finite().then_some(best)
}

pub fn random_mpc_instance(rng: &mut ChaCha8Rng, horizon: usize) -> (GraspState, MpcParams, Limits) {
    let params = MpcParams {
        horizon,
        q_a: rng.gen_range(0.01..2.0),
        q_c: rng.gen_range(0.1..2.0),
        q_v: rng.gen_range(0.1..4.0),
        p_terminal: rng.gen_range(1.0..50.0),
        ..MpcParams::default()
    };
    let limits = Limits {
        p_min: 0.0,
        p_max: 55.0,
        v_max: rng.gen_range(0.5..20.0),
        a_max: rng.gen_range(5.0..200.0),
    };
    let v = rng.gen_range(-limits.v_max..=limits.v_max);
    // Some states sit against the opening limits so the state constraints bind.
    let p = match rng.gen_range(0..4) {
        0 => limits.p_max - rng.gen_range(0.0..0.05),
        1 => limits.p_min + rng.gen_range(0.0..0.05),
        _ => rng.gen_range(limits.p_min..limits.p_max),
    };
    let c = params.c_desired + rng.gen_range(-3000.0..3000.0);
    (GraspState::new(c, p, v), params, limits)
}

pub struct OracleReport {
    pub instances: usize,
    /// Instances where the grid found a feasible point.
    pub checked: usize,
    /// Largest `(solver cost - grid cost) / (1 + grid cost)`.
    pub worst_gap: f64,
    pub worst_kkt: f64,
    /// Solver and grid disagree on feasibility.
    pub status_mismatches: usize,
}

/// Solver against the 201-point-per-input grid on `instances` random
/// problems with horizons cycling through 1, 2, 3.
pub fn mpc_oracle(seed: u64, instances: usize) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = OracleReport {
        instances,
        checked: 0,
        worst_gap: f64::NEG_INFINITY,
        worst_kkt: 0.0,
        status_mismatches: 0,
    };
    for i in 0..instances {
        let (state, params, limits) = random_mpc_instance(&mut rng, 1 + i % 3);
        let plan = solve(&state, &params, &limits).unwrap();
        match grid_minimum(&state, &params, &limits, 201) {
            Some(grid) => {
                r.checked += 1;
                if !plan.is_feasible() {
                    r.status_mismatches += 1;
                    continue;
                }
                r.worst_gap = r.worst_gap.max((plan.cost - grid) / (1.0 + grid.abs()));
                r.worst_kkt = r.worst_kkt.max(plan.kkt_residual);
            }
            None => {
                if plan.is_feasible() {
                    r.status_mismatches += 1;
                }
            }
        }
    }
    r
}

pub fn random_scoop(rng: &mut ChaCha8Rng) -> ScoopProblem {
    let h = rng.gen_range(0.1..5.0);
    ScoopProblem {
        h,
        l: rng.gen_range(1.0..200.0),
        d: rng.gen_range(0.0..=h),
        theta: rng.gen_range(0.01..88f64.to_radians()),
        mu1: rng.gen_range(0.0..1.5),
        mu2: rng.gen_range(0.0..1.5),
        m: rng.gen_range(0.0..0.1),
        f_l: rng.gen_range(0.0..20.0),
    }
}

/// Worst `|direct - reduced| / (1 + |direct|)` over random problems.
pub fn scoop_identity_gap(seed: u64, instances: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let prob = random_scoop(&mut rng);
        let sol = solve_forces(&prob).unwrap();
        let direct = moment_direct(&prob, &sol);
        worst = worst.max((direct - sol.m_all).abs() / (1.0 + direct.abs()));
    }
    worst
}

/// Worst relative residual of the two force balances, each measured
/// against the magnitude of the terms entering it.
pub fn scoop_balance_residual(seed: u64, instances: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let p = random_scoop(&mut rng);
        let s = solve_forces(&p).unwrap();
        let (sin, cos) = p.theta.sin_cos();
        let mg = p.m * 9.81;
        let f_ry = p.mu1 * s.f_rx;
        let f_bx = p.mu2 * s.f_by;
        let horizontal =
            (f_bx - s.f_rx + p.f_l * cos).abs() / (f_bx.abs() + s.f_rx.abs() + p.f_l * cos.abs()).max(1e-300);
        let vertical =
            (s.f_by + f_ry - p.f_l * sin - mg).abs() / (s.f_by.abs() + f_ry.abs() + p.f_l * sin.abs() + mg).max(1e-300);
        worst = worst.max(horizontal).max(vertical);
    }
    worst
}

pub struct GelReport {
    pub frames: usize,
    pub worst_offset_px: f64,
    pub worst_angle_deg: f64,
    pub missing_edges: usize,
    pub area_mismatches: usize,
}

/// Cells whose centers satisfy `n . x < offset`, counted from pixel
/// indices alone.
fn half_plane_count(pad: &GelPadSpec, offset: f64, angle: f64) -> usize {
    let (nx, ny) = (-angle.sin(), angle.cos());
    let mut n = 0;
    for j in 0..pad.height_px {
        for i in 0..pad.width_px {
            let x = (i as f64 + 0.5 - pad.width_px as f64 / 2.0) / pad.resolution;
            let y = (j as f64 + 0.5 - pad.height_px as f64 / 2.0) / pad.resolution;
            if nx * x + ny * y < offset {
                n += 1;
            }
        }
    }
    n
}

fn disc_count(pad: &GelPadSpec, radius: f64, indent: f64) -> usize {
    // Depth indent - r^2/(2R) reaches the threshold inside this radius.
    let r2 = 2.0 * radius * (indent - DEFAULT_THRESHOLD) * pad.resolution * pad.resolution;
    let (cx, cy) = (pad.width_px as f64 / 2.0, pad.height_px as f64 / 2.0);
    let mut n = 0;
    for j in 0..pad.height_px {
        for i in 0..pad.width_px {
            let (dx, dy) = (i as f64 + 0.5 - cx, j as f64 + 0.5 - cy);
            if dx * dx + dy * dy <= r2 * (1.0 + 1e-12) {
                n += 1;
            }
        }
    }
    n
}

/// Random straight-edge frames through the central part of the pad, plus
/// sphere frames for the area count.
pub fn gel_round_trip(seed: u64, frames: usize) -> GelReport {
    let pad = GelPadSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = GelReport {
        frames,
        worst_offset_px: 0.0,
        worst_angle_deg: 0.0,
        missing_edges: 0,
        area_mismatches: 0,
    };
    for _ in 0..frames {
        let angle = rng.gen_range(-PI..PI);
        let offset = rng.gen_range(-6.0..6.0);
        let frame = render_edge_contact(&pad, offset, angle, rng.gen_range(0.1..1.5)).unwrap();
        let patch = extract_patch(&frame, DEFAULT_THRESHOLD).unwrap();
        if patch.area != half_plane_count(&pad, offset, angle) {
            r.area_mismatches += 1;
        }
        match patch.edge {
            Some(e) => {
                let mut da = (e.angle - angle).rem_euclid(2.0 * PI);
                if da > PI {
                    da -= 2.0 * PI;
                }
                r.worst_angle_deg = r.worst_angle_deg.max(da.abs().to_degrees());
                r.worst_offset_px = r.worst_offset_px.max((e.offset_mm - offset).abs() * pad.resolution);
            }
            None => r.missing_edges += 1,
        }

        let radius = rng.gen_range(5.0..25.0);
        let indent = rng.gen_range(0.1..1.5f64.min(radius));
        let frame = render_sphere_contact(&pad, radius, indent).unwrap();
        if extract_patch(&frame, DEFAULT_THRESHOLD).unwrap().area != disc_count(&pad, radius, indent) {
            r.area_mismatches += 1;
        }
    }
    r
}
