//! Transport identities for the fundamental tensor, the volume form, the unit
//! ball and the averaged metric, and the ν-dependence of `d_ν φ` that
//! separates the pointwise isometry condition from the fixed-differential one.
//!
//! All matrix residuals are relative Frobenius norms,
//! `‖M − M_ref‖_F / ‖M_ref‖_F`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{averaged_metric, pullback_metric, QuadConfig};
use crate::calculus::{fundamental_tensor, FdConfig};
use crate::connection::{classify, Classification, ZERO_BAND};
use crate::error::{FinslerError, Result, ResultExt};
use crate::metric::{CurveSpec, MetricSpec};
use crate::tensor::{matrix_to_rows, relative_frobenius};
use crate::transport::{parallel_transport, unit_ball_residual, unit_sphere_samples, OdeConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapConfig {
    pub fd: FdConfig,
    pub ode: OdeConfig,
    pub quad: QuadConfig,
    pub fiber_samples: usize,
    pub nu_samples: usize,
    pub unit_ball_samples: usize,
    pub classify_samples: usize,
    pub seed: u64,
}

impl Default for GapConfig {
    fn default() -> Self {
        GapConfig {
            fd: FdConfig::default(),
            ode: OdeConfig::default(),
            quad: QuadConfig::default(),
            fiber_samples: 32,
            nu_samples: 8,
            unit_ball_samples: 64,
            classify_samples: 16,
            seed: 0,
        }
    }
}

/// Transport data of one fiber point.
struct FiberRun {
    y_a: Vec<f64>,
    differential: DMatrix<f64>,
    g_a: DMatrix<f64>,
    g_b: DMatrix<f64>,
}

fn fiber_runs(spec: &MetricSpec, curve: &CurveSpec, ys: &[Vec<f64>], ode: &OdeConfig, cfg: &FdConfig) -> Result<Vec<FiberRun>> {
    let a = curve.start();
    let b = curve.end();
    let runs: Vec<Result<FiberRun>> = ys
        .par_iter()
        .map(|y| {
            let tr = parallel_transport(spec, curve, y, ode, cfg)?;
            Ok(FiberRun {
                g_a: fundamental_tensor(spec, &a, y, cfg)?.g,
                g_b: fundamental_tensor(spec, &b, &tr.endpoint, cfg)?.g,
                y_a: y.clone(),
                differential: tr.differential,
            })
        })
        .collect();
    runs.into_iter().collect()
}

/// Pointwise isometry defect `‖Dᵀ g_b D − g_a‖ / ‖g_a‖`.
fn isometry_defect(run: &FiberRun, d: &DMatrix<f64>) -> f64 {
    relative_frobenius(&pullback_metric(&run.g_b, d), &run.g_a)
}

fn volume_defect(run: &FiberRun) -> f64 {
    let va = run.g_a.determinant().sqrt();
    let vb = run.g_b.determinant().sqrt();
    (run.differential.determinant().abs() * vb - va).abs() / va
}

fn check_count(count: usize, min: usize, field: &str) -> Result<()> {
    if count < min {
        return Err(FinslerError::invalid(field, format!("must be at least {min}")));
    }
    Ok(())
}

/// `ν / F(a, ν)`, the unit-sphere point on the ray of `ν`.
fn normalize_nu(spec: &MetricSpec, curve: &CurveSpec, nu: &[f64]) -> Result<Vec<f64>> {
    let a = curve.start();
    let f = spec.evaluate_f(&a, nu)?;
    Ok(nu.iter().map(|c| c / f).collect())
}

/// Pointwise isometry: each sample is compared through its own differential
/// `d_{y_a} φ`. Returns the largest defect.
pub fn pointwise_isometry_residual(spec: &MetricSpec, curve: &CurveSpec, fiber_samples: usize, ode: &OdeConfig, cfg: &FdConfig) -> Result<f64> {
    check_count(fiber_samples, 1, "fiber_samples")?;
    let ys = unit_sphere_samples(spec, &curve.start(), fiber_samples, 0);
    let runs = fiber_runs(spec, curve, &ys, ode, cfg)?;
    Ok(runs.iter().map(|r| isometry_defect(r, &r.differential)).fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub y_a: Vec<f64>,
    /// Defect through the fixed differential `d_ν φ`.
    pub fixed_residual: f64,
    /// Defect through the sample's own differential `d_{y_a} φ`.
    pub isometry_residual: f64,
}

fn profile_from(runs: &[FiberRun]) -> Vec<ProfileEntry> {
    let fixed = &runs[0].differential;
    runs.iter()
        .map(|r| ProfileEntry {
            y_a: r.y_a.clone(),
            fixed_residual: isometry_defect(r, fixed),
            isometry_residual: isometry_defect(r, &r.differential),
        })
        .collect()
}

fn profile_samples(spec: &MetricSpec, curve: &CurveSpec, nu: &[f64], fiber_samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut ys = vec![normalize_nu(spec, curve, nu)?];
    ys.extend(unit_sphere_samples(spec, &curve.start(), fiber_samples, seed));
    Ok(ys)
}

/// Isometry defect through the single differential `d_ν φ` at every sample.
/// The first entry is the unit-sphere point on the ray of `ν` itself.
pub fn fixed_differential_profile(
    spec: &MetricSpec,
    curve: &CurveSpec,
    nu: &[f64],
    fiber_samples: usize,
    ode: &OdeConfig,
    cfg: &FdConfig,
) -> Result<Vec<ProfileEntry>> {
    check_count(fiber_samples, 1, "fiber_samples")?;
    let ys = profile_samples(spec, curve, nu, fiber_samples, 0)?;
    Ok(profile_from(&fiber_runs(spec, curve, &ys, ode, cfg)?))
}

#[derive(Clone, Debug)]
pub struct PullbackComparison {
    /// `ḡ(a)`.
    pub lhs: DMatrix<f64>,
    /// `(d_ν φ)ᵀ ḡ(b) d_ν φ`.
    pub rhs: DMatrix<f64>,
    pub diff_norm: f64,
}

fn pullback_from(spec: &MetricSpec, curve: &CurveSpec, d_nu: &DMatrix<f64>, quad: &QuadConfig, cfg: &FdConfig) -> Result<PullbackComparison> {
    let lhs = averaged_metric(spec, &curve.start(), quad, cfg)?.g_bar;
    let at_b = averaged_metric(spec, &curve.end(), quad, cfg)?.g_bar;
    let rhs = pullback_metric(&at_b, d_nu);
    let diff_norm = relative_frobenius(&rhs, &lhs);
    Ok(PullbackComparison { lhs, rhs, diff_norm })
}

/// Averaged metric at `a` against its transport-pullback from `b` through
/// `d_ν φ`.
pub fn averaged_metric_pullback(
    spec: &MetricSpec,
    curve: &CurveSpec,
    nu: &[f64],
    quad: &QuadConfig,
    ode: &OdeConfig,
    cfg: &FdConfig,
) -> Result<PullbackComparison> {
    let nu_hat = normalize_nu(spec, curve, nu)?;
    let d_nu = parallel_transport(spec, curve, &nu_hat, ode, cfg)?.differential;
    pullback_from(spec, curve, &d_nu, quad, cfg)
}

/// `max | |det d_{y_a}φ| sqrt(det g_b) − sqrt(det g_a) | / sqrt(det g_a)`.
pub fn check_volume_preservation(
    spec: &MetricSpec,
    curve: &CurveSpec,
    fiber_samples: usize,
    ode: &OdeConfig,
    cfg: &FdConfig,
) -> Result<f64> {
    check_count(fiber_samples, 1, "fiber_samples")?;
    let ys = unit_sphere_samples(spec, &curve.start(), fiber_samples, 0);
    let runs = fiber_runs(spec, curve, &ys, ode, cfg)?;
    Ok(runs.iter().map(volume_defect).fold(0.0, f64::max))
}

fn spread_of(diffs: &[DMatrix<f64>]) -> f64 {
    let mut spread = 0.0f64;
    for i in 0..diffs.len() {
        for j in 0..i {
            spread = spread.max((&diffs[i] - &diffs[j]).amax());
        }
    }
    spread
}

/// Largest max-norm difference `‖d_{ν₁}φ − d_{ν₂}φ‖` over pairs of unit-sphere
/// samples; zero exactly when the transport is linear.
pub fn gap_spread(spec: &MetricSpec, curve: &CurveSpec, nu_samples: usize, ode: &OdeConfig, cfg: &FdConfig) -> Result<f64> {
    gap_spread_seeded(spec, curve, nu_samples, 0, ode, cfg)
}

fn gap_spread_seeded(
    spec: &MetricSpec,
    curve: &CurveSpec,
    nu_samples: usize,
    seed: u64,
    ode: &OdeConfig,
    cfg: &FdConfig,
) -> Result<f64> {
    check_count(nu_samples, 2, "nu_samples")?;
    let nus = unit_sphere_samples(spec, &curve.start(), nu_samples, seed);
    let diffs: Vec<Result<DMatrix<f64>>> = nus
        .par_iter()
        .map(|nu| Ok(parallel_transport(spec, curve, nu, ode, cfg)?.differential))
        .collect();
    let diffs: Vec<DMatrix<f64>> = diffs.into_iter().collect::<Result<_>>()?;
    Ok(spread_of(&diffs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullbackSummary {
    pub lhs: Vec<Vec<f64>>,
    pub rhs: Vec<Vec<f64>>,
    pub diff_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub matrix_norm: String,
    pub landsberg_tensor: String,
    pub zero_band: f64,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            matrix_norm: "relative Frobenius: |M - M_ref|_F / |M_ref|_F".into(),
            landsberg_tensor: "L_jkl = -1/2 y_i B^i_jkl, y_i = g_im y^m".into(),
            zero_band: ZERO_BAND,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub nu: Vec<f64>,
    pub unit_ball_residual: f64,
    pub isometry_residual: f64,
    pub fixed_differential_profile: Vec<ProfileEntry>,
    pub averaged_pullback: PullbackSummary,
    pub volume_residual: f64,
    pub gap_spread: f64,
    pub classification: Classification,
    pub conventions: Conventions,
    pub config: GapConfig,
}

impl GapReport {
    /// Largest gap between the fixed-differential and own-differential defects over profile entries other than `y_a = ν`.
    pub fn profile_separation(&self) -> f64 {
        self.fixed_differential_profile[1..]
            .iter()
            .map(|e| (e.fixed_residual - e.isometry_residual).abs())
            .fold(0.0, f64::max)
    }

    /// The same gap at `y_a = ν`, zero by construction.
    pub fn profile_mismatch_at_nu(&self) -> f64 {
        let e = &self.fixed_differential_profile[0];
        (e.fixed_residual - e.isometry_residual).abs()
    }

    pub fn profile_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["y_a", "fixed_differential_residual"]).expect("in-memory csv");
        for e in &self.fixed_differential_profile {
            w.write_record([crate::metric::format_vector(&e.y_a), format!("{:e}", e.fixed_residual)])
                .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
    }
}

/// Every check above on one metric, curve and `ν`.
pub fn full_gap_report(spec: &MetricSpec, curve: &CurveSpec, nu: &[f64], config: &GapConfig) -> Result<GapReport> {
    let (fd, ode) = (&config.fd, &config.ode);
    fd.validate()?;
    ode.validate()?;
    config.quad.validate()?;
    check_count(config.fiber_samples, 1, "fiber_samples")?;
    check_count(config.nu_samples, 2, "nu_samples")?;
    check_count(config.unit_ball_samples, 1, "unit_ball_samples")?;
    curve.check_for(spec)?;

    let ys = profile_samples(spec, curve, nu, config.fiber_samples, config.seed).context("isometry fiber samples")?;
    let runs = fiber_runs(spec, curve, &ys, ode, fd).context("isometry transports")?;
    let profile = profile_from(&runs);
    let isometry_residual = profile.iter().map(|e| e.isometry_residual).fold(0.0, f64::max);
    let volume_residual = runs.iter().map(volume_defect).fold(0.0, f64::max);

    let pullback = pullback_from(spec, curve, &runs[0].differential, &config.quad, fd).context("averaged metric pullback")?;
    let unit_ball_residual = unit_ball_residual(spec, curve, config.unit_ball_samples, ode, fd).context("unit ball check")?;
    let spread =
        gap_spread_seeded(spec, curve, config.nu_samples, config.seed, ode, fd).context("gap spread")?;
    let classification =
        classify(spec, config.classify_samples.max(1), config.seed, fd).context("classification")?;

    Ok(GapReport {
        nu: nu.to_vec(),
        unit_ball_residual,
        isometry_residual,
        fixed_differential_profile: profile,
        averaged_pullback: PullbackSummary {
            lhs: matrix_to_rows(&pullback.lhs),
            rhs: matrix_to_rows(&pullback.rhs),
            diff_norm: pullback.diff_norm,
        },
        volume_residual,
        gap_spread: spread,
        classification,
        conventions: Conventions::default(),
        config: *config,
    })
}
