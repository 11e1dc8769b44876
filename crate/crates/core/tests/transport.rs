mod common;

use finsler::bundle::{self, bundled_curves, bundled_specs};
use finsler::metric::Family;
use finsler::nalgebra::DMatrix;
use finsler::transport::{transport_endpoint, unit_sphere_samples};
use finsler::{parallel_transport, transport_differential_at, unit_ball_residual, CurveSpec, FdConfig, FinslerError, MetricSpec, OdeConfig};
use proptest::prelude::*;

fn cfg() -> FdConfig {
    FdConfig::default()
}

fn ode() -> OdeConfig {
    OdeConfig::default()
}

/// A curve whose second coordinate oscillates, so time-stepping error dominates
/// the difference noise floor at moderate step counts.
fn wiggly() -> CurveSpec {
    CurveSpec::new(vec![vec![-0.8, 1.6], vec![-0.8, 14.4, -38.4, 25.6]]).unwrap()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().map(|c| c.abs()).fold(0.0, f64::max)
}

#[test]
fn minkowski_transport_is_trivial() {
    let spec = bundle::minkowski_randers();
    for (_, curve) in bundled_curves() {
        let run = parallel_transport(&spec, &curve, &[1.0, 2.0], &ode(), &cfg()).unwrap();
        assert!(common::vec_diff(&run.endpoint, &[1.0, 2.0]) < 1e-12);
        assert!(common::max_diff(&run.differential, &DMatrix::identity(2, 2)) < 1e-12);
        assert!(run.f_drift < 1e-12);
        assert_eq!(run.path.len(), ode().steps + 1);
    }
}

#[test]
fn conformal_transport_matches_levi_civita_oracle() {
    let spec = bundle::conformal_riemannian();
    for (_, curve) in bundled_curves() {
        for y in [[1.0, 0.0], [0.3, -0.7]] {
            let run = parallel_transport(&spec, &curve, &y, &ode(), &cfg()).unwrap();
            let (end, jac) = common::levi_civita_transport(&spec, &curve, &y, 2048);
            assert!(common::vec_diff(&run.endpoint, &end) < 1e-6);
            assert!(common::max_diff(&run.differential, &jac) < 1e-6);
        }
    }
}

#[test]
fn transport_is_one_homogeneous() {
    for (name, spec) in bundled_specs() {
        let curve = bundle::parabola();
        let y = [0.6, -0.9];
        let (phi, _) = transport_endpoint(&spec, &curve, &y, &ode(), &cfg()).unwrap();
        let (phi2, _) = transport_endpoint(&spec, &curve, &[1.2, -1.8], &ode(), &cfg()).unwrap();
        let doubled: Vec<f64> = phi.iter().map(|c| 2.0 * c).collect();
        assert!(common::vec_diff(&phi2, &doubled) < 1e-7, "{name}");
    }
}

#[test]
fn drift_stays_small_in_every_direction() {
    for (name, spec) in bundled_specs() {
        for (cname, curve) in bundled_curves() {
            for y in unit_sphere_samples(&spec, &curve.start(), 64, 0) {
                let (_, drift) = transport_endpoint(&spec, &curve, &y, &ode(), &cfg()).unwrap();
                assert!(drift <= 1e-6, "{name}/{cname}: {drift:e}");
            }
        }
    }
}

fn drift_at(spec: &MetricSpec, curve: &CurveSpec, y: &[f64], steps: usize) -> f64 {
    transport_endpoint(spec, curve, y, &OdeConfig::with_steps(steps), &cfg()).unwrap().1
}

#[test]
fn rk4_drift_shrinks_at_fourth_order() {
    let spec = bundle::nonparallel_randers(0.2);
    let curve = wiggly();
    for y in [[1.0, 0.3], [-0.4, 1.0]] {
        let coarse = drift_at(&spec, &curve, &y, 32);
        let fine = drift_at(&spec, &curve, &y, 64);
        let ratio = coarse / fine;
        assert!((8.0..=32.0).contains(&ratio), "{coarse:e} / {fine:e} = {ratio}");
    }
}

#[test]
fn reversal_and_chain_rule() {
    for (name, spec) in bundled_specs() {
        for (_, curve) in bundled_curves() {
            let y = [0.8, 0.5];
            let there = parallel_transport(&spec, &curve, &y, &ode(), &cfg()).unwrap();
            let back = parallel_transport(&spec, &curve.reversed(), &there.endpoint, &ode(), &cfg()).unwrap();
            assert!(common::vec_diff(&back.endpoint, &y) <= 1e-6 * norm_inf(&y), "{name}");
            let round = &back.differential * &there.differential;
            assert!(common::max_diff(&round, &DMatrix::identity(2, 2)) <= 1e-5, "{name}");
        }
    }
}

#[test]
fn differential_maps_y_to_its_image() {
    for (name, spec) in bundled_specs() {
        let y = [-0.5, 1.1];
        let run = parallel_transport(&spec, &bundle::parabola(), &y, &ode(), &cfg()).unwrap();
        let image = &run.differential * finsler::nalgebra::DVector::from_column_slice(&y);
        assert!(common::vec_diff(image.as_slice(), &run.endpoint) <= 1e-6 * norm_inf(&run.endpoint), "{name}");
        assert!(run.differential.determinant().abs() > 1e-12);
    }
}

#[test]
fn differential_is_constant_for_berwald_specs() {
    for (name, spec) in bundled_specs().into_iter().filter(|(n, _)| *n != "randers_nonparallel") {
        let curve = bundle::line();
        let d1 = transport_differential_at(&spec, &curve, &[1.0, 0.0], &ode(), &cfg()).unwrap();
        let d2 = transport_differential_at(&spec, &curve, &[0.0, 1.0], &ode(), &cfg()).unwrap();
        let d3 = transport_differential_at(&spec, &curve, &[-0.6, -0.8], &ode(), &cfg()).unwrap();
        assert!(common::max_diff(&d1, &d2) <= 1e-6, "{name}");
        assert!(common::max_diff(&d1, &d3) <= 1e-6, "{name}");
    }
}

/// Columnwise central differences of the transport endpoint.
fn endpoint_jacobian(spec: &MetricSpec, curve: &CurveSpec, nu: &[f64]) -> DMatrix<f64> {
    let n = nu.len();
    let eps = 1e-4 * norm_inf(nu);
    let mut jac = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut plus = nu.to_vec();
        let mut minus = nu.to_vec();
        plus[k] += eps;
        minus[k] -= eps;
        let (p, _) = transport_endpoint(spec, curve, &plus, &ode(), &cfg()).unwrap();
        let (m, _) = transport_endpoint(spec, curve, &minus, &ode(), &cfg()).unwrap();
        for i in 0..n {
            jac[(i, k)] = (p[i] - m[i]) / (2.0 * eps);
        }
    }
    jac
}

#[test]
fn differential_matches_endpoint_differences() {
    let spec = bundle::nonparallel_randers(0.2);
    for (_, curve) in bundled_curves() {
        for nu in [[1.0, 0.0], [0.4, -0.9]] {
            let d = transport_differential_at(&spec, &curve, &nu, &ode(), &cfg()).unwrap();
            let fd = endpoint_jacobian(&spec, &curve, &nu);
            assert!(common::max_diff(&d, &fd) <= 1e-5, "{:e}", common::max_diff(&d, &fd));
        }
    }
}

#[test]
fn randers_differential_depends_on_the_fiber_point() {
    let spec = bundle::nonparallel_randers(0.2);
    let curve = bundle::parabola();
    let (nu1, nu2) = ([1.0, 0.0], [0.0, 1.0]);
    let d1 = transport_differential_at(&spec, &curve, &nu1, &ode(), &cfg()).unwrap();
    let d2 = transport_differential_at(&spec, &curve, &nu2, &ode(), &cfg()).unwrap();
    assert!(common::max_diff(&d1, &d2) > 1e-4);
    let fd_gap = common::max_diff(&endpoint_jacobian(&spec, &curve, &nu1), &endpoint_jacobian(&spec, &curve, &nu2));
    assert!((fd_gap - common::max_diff(&d1, &d2)).abs() < 1e-5);
}

#[test]
fn unit_ball_is_preserved() {
    for (name, spec) in bundled_specs() {
        let r = unit_ball_residual(&spec, &bundle::parabola(), 64, &ode(), &cfg()).unwrap();
        assert!(r <= 1e-6, "{name}: {r:e}");
    }
    let mink = unit_ball_residual(&bundle::minkowski_randers(), &bundle::line(), 64, &ode(), &cfg()).unwrap();
    assert!(mink < 1e-14);
    let randers = bundle::nonparallel_randers(0.2);
    for steps in [256, 512] {
        let r = unit_ball_residual(&randers, &bundle::parabola(), 128, &OdeConfig::with_steps(steps), &cfg()).unwrap();
        assert!(r <= 1e-6, "{steps}: {r:e}");
    }
}

#[test]
fn refine_check_reports_a_small_delta() {
    let spec = bundle::nonparallel_randers(0.2);
    let ode = OdeConfig {
        steps: 128,
        refine_check: true,
    };
    let run = parallel_transport(&spec, &bundle::parabola(), &[1.0, 1.0], &ode, &cfg()).unwrap();
    let delta = run.refine_delta.unwrap();
    assert!(delta < 1e-7, "{delta:e}");
}

#[test]
fn transport_errors() {
    let spec = bundle::nonparallel_randers(0.2);
    let curve = bundle::line();
    assert!(matches!(parallel_transport(&spec, &curve, &[0.0, 0.0], &ode(), &cfg()), Err(FinslerError::ZeroVector)));
    let outside = CurveSpec::segment(&[0.0, 0.0], &[1.5, 0.0]).unwrap();
    assert!(matches!(
        parallel_transport(&spec, &outside, &[1.0, 0.0], &ode(), &cfg()),
        Err(FinslerError::CurveLeavesDomain { .. })
    ));
    assert!(parallel_transport(&spec, &curve, &[1.0, 0.0], &OdeConfig::with_steps(8), &cfg()).is_err());
    assert!(matches!(
        transport_endpoint(&spec, &wiggly(), &[1.0, 0.3], &OdeConfig::with_steps(16), &cfg()),
        Err(FinslerError::DriftExceeded { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn riemannian_transport_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, d in -2.0f64..2.0) {
        prop_assume!(a.hypot(b) > 0.1 && c.hypot(d) > 0.1 && (a + c).hypot(b + d) > 0.1);
        let spec = bundle::conformal_riemannian();
        prop_assert_eq!(spec.family(), Family::Riemannian);
        let curve = bundle::parabola();
        let ode = OdeConfig::with_steps(128);
        let (p, _) = transport_endpoint(&spec, &curve, &[a, b], &ode, &cfg()).unwrap();
        let (q, _) = transport_endpoint(&spec, &curve, &[c, d], &ode, &cfg()).unwrap();
        let (s, _) = transport_endpoint(&spec, &curve, &[a + c, b + d], &ode, &cfg()).unwrap();
        let sum = [p[0] + q[0], p[1] + q[1]];
        prop_assert!(common::vec_diff(&s, &sum) < 1e-8);
    }
}
