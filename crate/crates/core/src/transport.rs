//! Berwald parallel transport along a chart curve and its differential.
//!
//! The transported vector solves `ẏ^i = −N^i_j(c, y) ċ^j`. Its differential
//! with respect to the initial vector solves the variational equation
//! `J̇^i_m = −Γ^i_jk(c, y) ċ^j J^k_m`, `J(0) = I`, integrated jointly on the
//! same fixed RK4 grid.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::FdConfig;
use crate::connection::connection_unchecked;
use crate::error::{FinslerError, Result};
use crate::metric::{CurveSpec, MetricSpec};
use crate::sampling::fiber_directions;

/// Relative F drift above which a run is rejected.
pub const DRIFT_LIMIT: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    pub steps: usize,
    pub refine_check: bool,
}

impl Default for OdeConfig {
    fn default() -> Self {
        OdeConfig {
            steps: 512,
            refine_check: false,
        }
    }
}

impl OdeConfig {
    pub fn with_steps(steps: usize) -> Self {
        OdeConfig {
            steps,
            ..OdeConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 16 {
            return Err(FinslerError::invalid("steps", "must be at least 16"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TransportResult {
    /// `φ(y_a) ∈ T_b M`.
    pub endpoint: Vec<f64>,
    /// `y(t_k)` on the RK4 grid, including both ends.
    pub path: Vec<Vec<f64>>,
    /// `d_{y_a} φ`.
    pub differential: DMatrix<f64>,
    /// `max_k |F(c(t_k), y(t_k)) − F(a, y_a)|`.
    pub f_drift: f64,
    /// Largest entry change of endpoint and differential at doubled steps.
    pub refine_delta: Option<f64>,
}

struct Run {
    endpoint: DVector<f64>,
    path: Vec<Vec<f64>>,
    differential: Option<DMatrix<f64>>,
    f_drift: f64,
}

fn derivative(
    spec: &MetricSpec,
    curve: &CurveSpec,
    t: f64,
    y: &DVector<f64>,
    jac: Option<&DMatrix<f64>>,
    cfg: &FdConfig,
) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
    let n = spec.dim();
    let (c, v) = curve.eval(t);
    let conn = connection_unchecked(spec, &c, y.as_slice(), cfg, jac.is_some())?;
    let vel = DVector::from_vec(v);
    let dy = -(&conn.nonlinear * &vel);
    let dj = jac.map(|j| {
        // A^i_k = Γ^i_jk ċ^j
        let gamma = conn.gamma.as_ref().expect("gamma requested");
        let a = DMatrix::from_fn(n, n, |i, k| (0..n).map(|jj| gamma.get(i, jj, k) * vel[jj]).sum());
        -(a * j)
    });
    Ok((dy, dj))
}

fn integrate(
    spec: &MetricSpec,
    curve: &CurveSpec,
    y_a: &[f64],
    steps: usize,
    cfg: &FdConfig,
    with_differential: bool,
) -> Result<Run> {
    let n = spec.dim();
    let a = curve.start();
    let f0 = spec.norm_unchecked(&a, y_a);
    let h = 1.0 / steps as f64;
    let mut y = DVector::from_column_slice(y_a);
    let mut jac = with_differential.then(|| DMatrix::identity(n, n));
    let mut path = Vec::with_capacity(steps + 1);
    path.push(y_a.to_vec());
    let mut f_drift = 0.0f64;

    for step in 0..steps {
        let t = step as f64 * h;
        let (k1, m1) = derivative(spec, curve, t, &y, jac.as_ref(), cfg)?;
        let y2 = &y + &k1 * (0.5 * h);
        let j2 = jac.as_ref().zip(m1.as_ref()).map(|(j, m)| j + m * (0.5 * h));
        let (k2, m2) = derivative(spec, curve, t + 0.5 * h, &y2, j2.as_ref(), cfg)?;
        let y3 = &y + &k2 * (0.5 * h);
        let j3 = jac.as_ref().zip(m2.as_ref()).map(|(j, m)| j + m * (0.5 * h));
        let (k3, m3) = derivative(spec, curve, t + 0.5 * h, &y3, j3.as_ref(), cfg)?;
        let y4 = &y + &k3 * h;
        let j4 = jac.as_ref().zip(m3.as_ref()).map(|(j, m)| j + m * h);
        let (k4, m4) = derivative(spec, curve, t + h, &y4, j4.as_ref(), cfg)?;

        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if let (Some(j), Some(m1), Some(m2), Some(m3), Some(m4)) = (jac.as_mut(), m1, m2, m3, m4) {
            *j += (m1 + m2 * 2.0 + m3 * 2.0 + m4) * (h / 6.0);
        }
        // Pin the last grid time to exactly 1.
        let t_next = if step + 1 == steps { 1.0 } else { (step + 1) as f64 * h };
        let (c, _) = curve.eval(t_next);
        f_drift = f_drift.max((spec.norm_unchecked(&c, y.as_slice()) - f0).abs());
        path.push(y.as_slice().to_vec());
    }
    Ok(Run {
        endpoint: y,
        path,
        differential: jac,
        f_drift,
    })
}

fn check_inputs(spec: &MetricSpec, curve: &CurveSpec, y_a: &[f64], ode: &OdeConfig, cfg: &FdConfig) -> Result<()> {
    cfg.validate()?;
    ode.validate()?;
    curve.check_for(spec)?;
    spec.check_args(&curve.start(), y_a)
}

fn check_drift(spec: &MetricSpec, curve: &CurveSpec, y_a: &[f64], drift: f64) -> Result<()> {
    let allowed = DRIFT_LIMIT * spec.norm_unchecked(&curve.start(), y_a);
    if drift > allowed || !drift.is_finite() {
        return Err(FinslerError::DriftExceeded { drift, allowed });
    }
    Ok(())
}

pub fn parallel_transport(
    spec: &MetricSpec,
    curve: &CurveSpec,
    y_a: &[f64],
    ode: &OdeConfig,
    cfg: &FdConfig,
) -> Result<TransportResult> {
    check_inputs(spec, curve, y_a, ode, cfg)?;
    let run = integrate(spec, curve, y_a, ode.steps, cfg, true)?;
    check_drift(spec, curve, y_a, run.f_drift)?;
    let differential = run.differential.expect("differential requested");
    let refine_delta = if ode.refine_check {
        let fine = integrate(spec, curve, y_a, 2 * ode.steps, cfg, true)?;
        let dj = (fine.differential.expect("differential requested") - &differential).amax();
        Some((fine.endpoint - &run.endpoint).amax().max(dj))
    } else {
        None
    };
    Ok(TransportResult {
        endpoint: run.endpoint.as_slice().to_vec(),
        path: run.path,
        differential,
        f_drift: run.f_drift,
        refine_delta,
    })
}

/// `φ(y_a)` and the F drift, without the variational equation.
pub fn transport_endpoint(
    spec: &MetricSpec,
    curve: &CurveSpec,
    y_a: &[f64],
    ode: &OdeConfig,
    cfg: &FdConfig,
) -> Result<(Vec<f64>, f64)> {
    check_inputs(spec, curve, y_a, ode, cfg)?;
    let run = integrate(spec, curve, y_a, ode.steps, cfg, false)?;
    check_drift(spec, curve, y_a, run.f_drift)?;
    Ok((run.endpoint.as_slice().to_vec(), run.f_drift))
}

/// `d_ν φ`.
pub fn transport_differential_at(
    spec: &MetricSpec,
    curve: &CurveSpec,
    nu: &[f64],
    ode: &OdeConfig,
    cfg: &FdConfig,
) -> Result<DMatrix<f64>> {
    Ok(parallel_transport(spec, curve, nu, ode, cfg)?.differential)
}

/// Points of the unit sphere `{F(a, ·) = 1}` in the directions of the fiber
/// grid.
pub fn unit_sphere_samples(spec: &MetricSpec, a: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    fiber_directions(spec.dim(), count, seed)
        .into_iter()
        .map(|u| {
            let f = spec.norm_unchecked(a, &u);
            u.into_iter().map(|c| c / f).collect()
        })
        .collect()
}

/// `max |F(b, φ(y_a)) − 1|` over unit-sphere samples `y_a`.
pub fn unit_ball_residual(
    spec: &MetricSpec,
    curve: &CurveSpec,
    samples: usize,
    ode: &OdeConfig,
    cfg: &FdConfig,
) -> Result<f64> {
    if samples == 0 {
        return Err(FinslerError::invalid("samples", "must be at least 1"));
    }
    let a = curve.start();
    let b = curve.end();
    let ys = unit_sphere_samples(spec, &a, samples, 0);
    let residuals: Vec<Result<f64>> = ys
        .par_iter()
        .map(|y| {
            let (phi, _) = transport_endpoint(spec, curve, y, ode, cfg)?;
            Ok((spec.norm_unchecked(&b, &phi) - 1.0).abs())
        })
        .collect();
    residuals.into_iter().try_fold(0.0f64, |m, r| Ok(m.max(r?)))
}
