//! Optimality and constraint checks for the MPC solver against an
//! independent brute-force grid search.

mod common;

use common::{grid_minimum, random_mpc_instance};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tacgrip::mpc::{cost, predict, solve, step_model, CondensedMpc, GraspState, Limits, MpcParams, PlanStatus};

#[test]
fn two_step_solution_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let (state, params, limits) = random_mpc_instance(&mut rng, 2);
        let plan = solve(&state, &params, &limits).unwrap();
        match grid_minimum(&state, &params, &limits, 201) {
            Some(grid) => {
                assert_eq!(plan.status, PlanStatus::Optimal);
                assert!(plan.cost <= grid + 1e-9 * (1.0 + grid), "{} > {grid}", plan.cost);
                assert!(plan.kkt_residual <= 1e-6);
            }
            None => assert_ne!(plan.status, PlanStatus::Optimal),
        }
    }
}

#[test]
fn random_mixed_horizons_match_grid_search() {
    let r = common::mpc_oracle(3, 60);
    assert!(r.checked > 30);
    assert_eq!(r.status_mismatches, 0);
    assert!(r.worst_gap <= 1e-9, "{}", r.worst_gap);
    assert!(r.worst_kkt <= 1e-6);
}

#[test]
fn equilibrium_gives_zero_plan() {
    for p in [0.0, 12.5, 27.25, 55.0] {
        let plan = solve(
            &GraspState::new(5500.0, p, 0.0),
            &MpcParams::default(),
            &Limits::default(),
        )
        .unwrap();
        assert_eq!(plan.status, PlanStatus::Optimal);
        assert!(plan.a.iter().all(|&a| a == 0.0));
        assert_eq!(plan.cost, 0.0);
    }
}

#[test]
fn low_area_closes_the_gripper() {
    let params = MpcParams::default();
    let plan = solve(&GraspState::new(4000.0, 27.0, 0.0), &params, &Limits::default()).unwrap();
    assert!(plan.a[0] < 0.0, "{}", plan.a[0]);
    // Same sign with the grid oracle on a short horizon.
    let short = MpcParams { horizon: 2, ..params };
    let plan = solve(&GraspState::new(4000.0, 27.0, 0.0), &short, &Limits::default()).unwrap();
    assert!(plan.a[0] < 0.0);
}

#[test]
fn unrecoverable_state_is_reported_and_clamped() {
    let limits = Limits {
        p_min: 0.0,
        p_max: 30.0,
        v_max: 20.0,
        a_max: 1.0,
    };
    let plan = solve(&GraspState::new(5500.0, 30.0, 15.0), &MpcParams::default(), &limits).unwrap();
    assert_eq!(plan.status, PlanStatus::Infeasible);
    assert!(plan.a.iter().all(|a| a.abs() <= 1.0));
}

#[test]
fn solve_is_deterministic() {
    let s = GraspState::new(3000.0, 31.0, -4.0);
    let a = solve(&s, &MpcParams::default(), &Limits::default()).unwrap();
    let b = solve(&s, &MpcParams::default(), &Limits::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn resolve_cost_bounded_by_shifted_plan() {
    let params = MpcParams::default();
    let limits = Limits::default();
    let mpc = CondensedMpc::new(params, limits).unwrap();
    for start in [
        GraspState::new(0.0, 35.0, 0.0),
        GraspState::new(5000.0, 27.5, 0.0),
        GraspState::new(6500.0, 27.0, 1.0),
    ] {
        let mut s = start;
        let mut prev = mpc.solve(&s).unwrap();
        for _ in 0..200 {
            let mut shifted = prev.a[1..].to_vec();
            shifted.push(0.0);
            s = step_model(&s, prev.a[0], &params);
            let candidate = cost(&s, &shifted, &params).unwrap();
            let traj = predict(&s, &shifted, &params).unwrap();
            let feasible = traj[1..]
                .iter()
                .all(|x| x.p >= limits.p_min && x.p <= limits.p_max && x.v.abs() <= limits.v_max);
            let next = mpc.solve(&s).unwrap();
            if feasible {
                assert!(
                    next.cost <= candidate + 1e-6 * (1.0 + candidate),
                    "{} > {candidate}",
                    next.cost
                );
            }
            prev = next;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn plans_respect_limits(
        c in 0.0f64..20000.0,
        p in 0.0f64..55.0,
        v in -20.0f64..20.0,
        a_max in 10.0f64..300.0,
    ) {
        let params = MpcParams::default();
        let limits = Limits { a_max, ..Limits::default() };
        let state = GraspState::new(c, p, v);
        let plan = solve(&state, &params, &limits).unwrap();
        if plan.status == PlanStatus::Optimal {
            prop_assert!(plan.kkt_residual <= 1e-6);
            let traj = predict(&state, &plan.a, &params).unwrap();
            for (x, a) in traj[1..].iter().zip(&plan.a) {
                prop_assert!(a.abs() <= limits.a_max + 1e-9);
                prop_assert!(x.v.abs() <= limits.v_max + 1e-9);
                prop_assert!(x.p >= limits.p_min - 1e-9 && x.p <= limits.p_max + 1e-9);
            }
        }
    }
}
