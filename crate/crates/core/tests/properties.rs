mod common;

use common::*;
use majoring::cover::{build_grid_cover, majoring_points_from_cover_fn};
use majoring::eval::{mae, net_predictor, op_metric, rmse, TestSet};
use majoring::network::{train_until_verified, TrainConfig};
use majoring::oracle::Synthetic;
use proptest::prelude::*;

fn ok(check: Check) {
    match check {
        Ok(msg) => println!("{msg}"),
        Err(msg) => panic!("{msg}"),
    }
}

#[test]
fn nonneg_networks_are_monotone() {
    ok(monotone_networks());
}

#[test]
fn backprop_matches_finite_differences() {
    ok(gradient_check());
}

#[test]
fn covers_are_complete() {
    ok(cover_completeness());
}

#[test]
fn dyadic_children_partition_the_cell() {
    ok(dyadic_decomposition());
}

#[test]
fn indexed_lookup_equals_scan() {
    ok(lookup_equivalence());
}

#[test]
fn verification_is_exact() {
    ok(verify_exactness());
}

#[test]
fn dichotomy_terminates_within_bound() {
    ok(termination());
}

#[test]
fn verified_network_dominates_f_c_and_f() {
    let (oracle, cover, pts) = f1_grid(0.5);
    let cfg = TrainConfig {
        epochs: 1000,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let outcome = train_until_verified(&pts, &cfg).expect("coarse f1 grid verifies");
    let test = TestSet::uniform(&oracle, 20_000, 8).unwrap();
    ok(guarantee_chain(&outcome.net, &cover, &test));
    assert_eq!(op_metric(net_predictor(&outcome.net), &test), 100.0);
    assert!(rmse(net_predictor(&outcome.net), &test).is_finite());
}

#[test]
fn mae_is_nonnegative_for_sound_points() {
    for (f, eps) in [(Synthetic::F1, 0.3), (Synthetic::G2d, 1.0), (Synthetic::Mono6, 0.5)] {
        let o = f.oracle();
        let cover = build_grid_cover(o.domain(), eps).unwrap();
        let pts = majoring_points_from_cover_fn(&cover, &o).unwrap();
        assert!(mae(&pts, &o) >= 0.0, "{f}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rmse_of_constant_offset(c in -50.0f64..50.0, seed in 0u64..1000) {
        let o = Synthetic::G2d.oracle();
        let test = TestSet::uniform(&o, 200, seed).unwrap();
        let r = rmse(|x: &[f64]| o.eval(x) + c, &test);
        prop_assert!((r - c.abs()).abs() <= 1e-9 * (1.0 + c.abs()));
    }

    #[test]
    fn grid_points_are_sound(eps in 0.05f64..3.0) {
        let o = Synthetic::F1.oracle();
        let cover = build_grid_cover(o.domain(), eps).unwrap();
        let pts = majoring_points_from_cover_fn(&cover, &o).unwrap();
        for p in pts.iter() {
            prop_assert!(p.b >= o.eval(&p.a));
        }
    }
}
