mod common;

use common::random_scoop;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tacgrip::scoop::{flip_predicate, linspace, solve_forces, sweep, FlipVerdict, ScoopProblem, SweepAxes};

#[test]
fn reduced_moment_matches_direct_form() {
    let worst = common::scoop_identity_gap(7, 100_000);
    assert!(worst <= 1e-9, "worst relative gap {worst}");
}

#[test]
fn balances_hold_on_many_instances() {
    let worst = common::scoop_balance_residual(8, 100_000);
    assert!(worst <= 1e-12, "worst relative residual {worst}");
}

#[test]
fn feasibility_changes_once_along_force_columns() {
    let axes = SweepAxes {
        theta: linspace(0.05, 1.5, 12),
        mu1: linspace(0.0, 1.5, 8),
        mu2: linspace(0.0, 1.0, 5),
        f_l: linspace(0.0, 10.0, 40),
    };
    let rows = sweep(&ScoopProblem::card(), &axes).unwrap();
    for column in rows.chunks(axes.f_l.len()) {
        let flags: Vec<bool> = column.iter().map(|r| r.outcome.unwrap().0.feasible).collect();
        // Feasible at F_L = 0, then at most one switch to infeasible.
        assert!(flags[0]);
        let switches = flags.windows(2).filter(|w| w[0] != w[1]).count();
        assert!(switches <= 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn balances_hold(seed in any::<u64>()) {
        let prob = random_scoop(&mut ChaCha8Rng::seed_from_u64(seed));
        let sol = solve_forces(&prob).unwrap();
        let (s, c) = prob.theta.sin_cos();
        let mg = prob.m * 9.81;
        let tol = |x: f64| 1e-12 * (1.0 + x.abs() + prob.f_l + mg);
        prop_assert_eq!(sol.f_ry, prob.mu1 * sol.f_rx);
        prop_assert_eq!(sol.f_bx, prob.mu2 * sol.f_by);
        prop_assert!((sol.f_bx - (sol.f_rx - prob.f_l * c)).abs() <= tol(sol.f_bx));
        prop_assert!((sol.f_by - (prob.f_l * s - sol.f_ry + mg)).abs() <= tol(sol.f_by));
        prop_assert_eq!(sol.feasible, sol.f_by >= 0.0 && sol.f_rx >= 0.0);
    }

    #[test]
    fn never_flips_when_infeasible(seed in any::<u64>()) {
        let prob = random_scoop(&mut ChaCha8Rng::seed_from_u64(seed));
        let sol = solve_forces(&prob).unwrap();
        let v = flip_predicate(&prob).unwrap();
        prop_assert!(!(v == FlipVerdict::FlipsCcw && !sol.feasible));
        prop_assert_eq!(v == FlipVerdict::Infeasible, sol.f_by < 0.0);
    }

    #[test]
    fn frictionless_table_moment_ignores_weight_except_reaction(seed in any::<u64>()) {
        let prob = ScoopProblem { mu2: 0.0, ..random_scoop(&mut ChaCha8Rng::seed_from_u64(seed)) };
        let heavy = ScoopProblem { m: prob.m * 2.0, ..prob };
        let (a, b) = (solve_forces(&prob).unwrap(), solve_forces(&heavy).unwrap());
        let expect = -0.5 * prob.m * 9.81 * prob.l;
        prop_assert!((b.m_all - a.m_all - expect).abs() <= 1e-9 * (1.0 + a.m_all.abs() + expect.abs()));
    }
}
