mod common;

use finsler::bundle::{self, bundled_specs};
use finsler::metric::Family;
use finsler::nalgebra::DMatrix;
use finsler::sampling::chart_samples;
use finsler::{cartan_tensor, euler_check, fundamental_tensor, FdConfig, MetricSpec};
use proptest::prelude::*;

fn cfg() -> FdConfig {
    FdConfig::default()
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn fundamental_examples() {
    let euclid = bundle::euclidean(2);
    let g = fundamental_tensor(&euclid, &[0.0, 0.0], &[1.0, 2.0], &cfg()).unwrap().g;
    assert!(common::max_diff(&g, &DMatrix::identity(2, 2)) < 1e-9);

    let randers = bundle::minkowski_randers();
    let g = fundamental_tensor(&randers, &[0.0, 0.0], &[1.0, 0.0], &cfg()).unwrap().g;
    let closed = randers.closed_form_g(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
    assert!(rel(&g, &closed) < 1e-7);
    approx::assert_relative_eq!(g.determinant(), 2.197, max_relative = 1e-7);

    for (_, spec) in bundled_specs() {
        let x = [0.1, -0.3];
        let y = [0.6, -0.2];
        let g1 = fundamental_tensor(&spec, &x, &y, &cfg()).unwrap().g;
        let g3 = fundamental_tensor(&spec, &x, &[1.8, -0.6], &cfg()).unwrap().g;
        assert!(common::max_diff(&g1, &g3) < 1e-7);
    }
}

#[test]
fn fundamental_matches_oracle_on_sweep() {
    for (name, spec) in bundled_specs() {
        for (x, y) in chart_samples(&spec, 100, 21) {
            let ft = fundamental_tensor(&spec, &x, &y, &cfg()).unwrap();
            let oracle = common::randers_g(&common::a_at(&spec, &x), &common::b_at(&spec, &x), &y);
            assert!(rel(&ft.g, &oracle) < 1e-7, "{name}: {}", rel(&ft.g, &oracle));
            assert!(ft.asymmetry < 1e-8);
            assert!(ft.g.clone().symmetric_eigen().eigenvalues.min() > 0.0);
        }
    }
}

#[test]
fn fundamental_errors() {
    let spec = bundle::minkowski_randers();
    assert!(fundamental_tensor(&spec, &[0.0, 0.0], &[0.0, 0.0], &cfg()).is_err());
    assert!(fundamental_tensor(&spec, &[0.0, 3.0], &[1.0, 0.0], &cfg()).is_err());
    let bad = FdConfig {
        h0: 1e-3,
        richardson_levels: 5,
    };
    assert!(fundamental_tensor(&spec, &[0.0, 0.0], &[1.0, 0.0], &bad).is_err());
}

#[test]
fn richardson_second_level_beats_first() {
    let spec = bundle::minkowski_randers();
    let one = FdConfig {
        h0: 1e-3,
        richardson_levels: 1,
    };
    let two = FdConfig {
        h0: 1e-3,
        richardson_levels: 2,
    };
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for (x, y) in chart_samples(&spec, 20, 4) {
        let oracle = common::randers_g(&common::a_at(&spec, &x), &common::b_at(&spec, &x), &y);
        e1 = e1.max(common::max_diff(&fundamental_tensor(&spec, &x, &y, &one).unwrap().g, &oracle));
        e2 = e2.max(common::max_diff(&fundamental_tensor(&spec, &x, &y, &two).unwrap().g, &oracle));
    }
    assert!(e1 >= 10.0 * e2, "level 1 error {e1:e}, level 2 error {e2:e}");
}

fn cartan_oracle_diff(spec: &MetricSpec, x: &[f64], y: &[f64]) -> f64 {
    let c = cartan_tensor(spec, x, y, &cfg()).unwrap().c;
    let oracle = common::randers_cartan(&common::a_at(spec, x), &common::b_at(spec, x), y);
    let n = spec.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                worst = worst.max((c.get(i, j, k) - oracle[k][(i, j)]).abs());
            }
        }
    }
    worst
}

#[test]
fn cartan_examples() {
    let riem = bundle::conformal_riemannian();
    let c = cartan_tensor(&riem, &[0.3, 0.2], &[1.0, -0.4], &cfg()).unwrap().c;
    assert!(c.max_abs() < 1e-6);

    let randers = bundle::minkowski_randers();
    assert!(cartan_oracle_diff(&randers, &[0.0, 0.0], &[1.0, 1.0]) < 1e-6);

    for (_, spec) in bundled_specs() {
        let y = [0.7, -1.1];
        let c = cartan_tensor(&spec, &[0.2, 0.4], &y, &cfg()).unwrap().c;
        assert!(c.contract_last(&y).amax() < 1e-6);
    }
}

#[test]
fn cartan_matches_oracle_on_sweep() {
    for (name, spec) in bundled_specs() {
        for (x, y) in chart_samples(&spec, 30, 8) {
            let d = cartan_oracle_diff(&spec, &x, &y);
            assert!(d < 1e-6, "{name}: {d:e}");
        }
    }
}

#[test]
fn cartan_vanishes_exactly_for_riemannian_specs() {
    let mut specs = bundled_specs();
    specs.push(("diag3", bundle::diagonal_riemannian(&[1.0, 2.0, 0.5])));
    for (name, spec) in specs {
        let largest = chart_samples(&spec, 40, 2)
            .iter()
            .map(|(x, y)| cartan_tensor(&spec, x, y, &cfg()).unwrap().c.max_abs())
            .fold(0.0, f64::max);
        if spec.family() == Family::Riemannian {
            assert!(largest <= 1e-6, "{name}: {largest:e}");
        } else {
            assert!(largest > 1e-6, "{name}: {largest:e}");
        }
    }
}

#[test]
fn euler_examples() {
    let euclid = bundle::euclidean(2);
    assert!(euler_check(&euclid, &[0.0, 0.0], &[3.0, 4.0], &cfg()).unwrap() < 1e-9);
    let diag = bundle::diagonal_riemannian(&[1.0, 4.0]);
    assert!(euler_check(&diag, &[0.0, 0.0], &[1.0, 1.0], &cfg()).unwrap() < 1e-9);
    let randers = bundle::minkowski_randers();
    assert!(euler_check(&randers, &[0.0, 0.0], &[1.0, 0.0], &cfg()).unwrap() < 1e-8);
}

fn arb_case() -> impl Strategy<Value = (usize, [f64; 2], [f64; 2])> {
    (0usize..5, [-0.9f64..0.9, -0.9f64..0.9], [-3.0f64..3.0, -3.0f64..3.0])
        .prop_filter("y away from zero", |(_, _, y)| y[0].hypot(y[1]) > 0.05)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fundamental_is_zero_homogeneous((which, x, y) in arb_case()) {
        let (_, spec) = &bundled_specs()[which];
        let g = fundamental_tensor(spec, &x, &y, &cfg()).unwrap().g;
        for lambda in [0.5, 2.0, 10.0] {
            let scaled = [lambda * y[0], lambda * y[1]];
            let gl = fundamental_tensor(spec, &x, &scaled, &cfg()).unwrap().g;
            prop_assert!(rel(&gl, &g) < 1e-7);
        }
    }

    #[test]
    fn euler_identity_holds((which, x, y) in arb_case()) {
        let (_, spec) = &bundled_specs()[which];
        prop_assert!(euler_check(spec, &x, &y, &cfg()).unwrap() < 1e-8);
    }
}
