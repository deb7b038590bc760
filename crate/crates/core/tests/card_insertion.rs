use proptest::prelude::*;
use tacgrip::card::{
    is_legal_transition, run_insertion_trial, run_seeded_insertion, InitialPose, InsertionSetup, Phase, Side,
};
use tacgrip::seed::trial_seed;

fn check_trace(out: &tacgrip::card::InsertionOutcome, setup: &InsertionSetup) {
    assert!(out.transitions.iter().all(|&(a, b)| is_legal_transition(a, b)));
    for row in out.trace.iter().filter(|r| r.action.starts_with("explore")) {
        if let Some(s) = row.step_mm {
            assert!([-2.0, -4.0, -8.0].contains(&s), "step {s}");
        }
    }
    assert!(out.final_state.steps_taken <= setup.explore.max_steps);
    assert!(out.final_state.phase.is_terminal());
}

#[test]
fn ten_seeded_poses_all_insert() {
    let setup = InsertionSetup::default();
    for i in 0..10 {
        let out = run_seeded_insertion(&setup, trial_seed(42, i)).unwrap();
        assert!(out.done(), "trial {i}: {:?}", out.final_state);
        check_trace(&out, &setup);
    }
}

#[test]
fn exploration_distance_shrinks_every_step() {
    let setup = InsertionSetup::default();
    let card = setup.card;
    for side in [Side::DigitsToPad, Side::BackToPad] {
        let pose = InitialPose {
            grasp_x: 27.75,
            grasp_y: 8.0,
            side,
        };
        let out = run_insertion_trial(&setup, pose, 3).unwrap();
        assert!(out.done());
        // True distances to target, before every explore step.
        let mut prev_x = f64::INFINITY;
        let mut prev_y = f64::INFINITY;
        let mut gx = out.pose.grasp_x;
        let mut gy = out.pose.grasp_y;
        for row in &out.trace {
            match row.action {
                "flip_in_hand" => gx = row.grasp_x,
                "explore_x" if row.step_mm.is_some() => {
                    let d = (card.length - gx - setup.explore.x_d).abs();
                    assert!(d < prev_x);
                    prev_x = d;
                    gx = row.grasp_x;
                }
                "explore_y" if row.step_mm.is_some() => {
                    let d = (card.width - gy - setup.explore.y_d).abs();
                    assert!(d < prev_y);
                    prev_y = d;
                    gy = row.grasp_y;
                }
                _ => {}
            }
        }
        let d = (card.length - gx - setup.explore.x_d).abs();
        assert!(d < prev_x && d <= setup.explore.edge_tolerance + 0.1);
    }
}

#[test]
fn depth_noise_keeps_the_fsm_legal() {
    let mut setup = InsertionSetup::default();
    setup.explore.depth_noise = 0.02;
    for i in 0..5 {
        let out = run_seeded_insertion(&setup, trial_seed(8, i)).unwrap();
        check_trace(&out, &setup);
        assert!(out.done());
    }
}

#[test]
fn trials_are_deterministic() {
    let setup = InsertionSetup::default();
    let a = run_seeded_insertion(&setup, 99).unwrap();
    let b = run_seeded_insertion(&setup, 99).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_pose_in_range_terminates_legally(x in 27.75f64..=57.75, y in 8.0f64..=14.0, back in any::<bool>()) {
        let setup = InsertionSetup::default();
        let side = if back { Side::BackToPad } else { Side::DigitsToPad };
        let out = run_insertion_trial(&setup, InitialPose { grasp_x: x, grasp_y: y, side }, 0).unwrap();
        check_trace(&out, &setup);
        prop_assert_eq!(out.final_state.phase, Phase::Done);
    }
}
