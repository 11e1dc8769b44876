//! Averaged Riemannian metric: the fundamental tensor integrated against the
//! Finsler volume form `sqrt(det g) dy` over the unit ball `{F(x, ·) ≤ 1}`.
//!
//! `g` and `sqrt(det g)` are 0-homogeneous in `y`, so in polar form the radial
//! integral of `r^{n-1}` over `[0, 1/F(x, u)]` is exact and
//!
//! ```text
//! ḡ_ij(x) = (1/n) ∫_{S^{n-1}} g_ij(x, u) sqrt(det g(x, u)) F(x, u)^{-n} dσ(u).
//! ```
//!
//! Only the angular integral is numerical: the trapezoid rule on the circle,
//! Gauss–Legendre in `cos θ` times the trapezoid rule in azimuth on `S²`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{fundamental_tensor, FdConfig};
use crate::error::{FinslerError, Result};
use crate::metric::MetricSpec;

/// Allowed refinement change of `ḡ`, relative to its Frobenius norm.
pub const REFINE_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    /// Circle nodes for `n = 2`; for `n = 3`, `order / 8` polar by
    /// `order / 4` azimuthal nodes.
    pub angular_order: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { angular_order: 256 }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.angular_order < 16 {
            return Err(FinslerError::invalid("order", "angular order must be at least 16"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AveragedMetric {
    pub g_bar: DMatrix<f64>,
    /// `∫_{F ≤ 1} sqrt(det g) dy`.
    pub total_measure: f64,
    /// Largest entry change of `ḡ` when the angular order is doubled.
    pub refine_delta: f64,
    pub angular_order: usize,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        // Chebyshev initial guess, then Newton on P_m.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..m {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = m as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[m - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

/// Nodes on `S^{n-1}` with weights summing to the sphere's area.
pub fn sphere_rule(n: usize, order: usize) -> Vec<(Vec<f64>, f64)> {
    use std::f64::consts::TAU;
    match n {
        2 => (0..order)
            .map(|k| {
                let angle = TAU * k as f64 / order as f64;
                (vec![angle.cos(), angle.sin()], TAU / order as f64)
            })
            .collect(),
        3 => {
            let polar = (order / 8).max(2);
            let azimuth = (order / 4).max(4);
            let (zs, ws) = gauss_legendre(polar);
            let mut out = Vec::with_capacity(polar * azimuth);
            for (z, w) in zs.iter().zip(&ws) {
                let r = (1.0 - z * z).sqrt();
                for k in 0..azimuth {
                    let phi = TAU * k as f64 / azimuth as f64;
                    out.push((vec![r * phi.cos(), r * phi.sin(), *z], w * TAU / azimuth as f64));
                }
            }
            out
        }
        _ => panic!("unsupported dimension {n}"),
    }
}

fn pairwise_sum(items: &[(DMatrix<f64>, f64)]) -> (DMatrix<f64>, f64) {
    if items.len() <= 8 {
        let n = items[0].0.nrows();
        return items
            .iter()
            .fold((DMatrix::zeros(n, n), 0.0), |(m, s), (a, b)| (m + a, s + b));
    }
    let (l, r) = items.split_at(items.len() / 2);
    let (ml, sl) = pairwise_sum(l);
    let (mr, sr) = pairwise_sum(r);
    (ml + mr, sl + sr)
}

fn average_at_order(spec: &MetricSpec, x: &[f64], order: usize, cfg: &FdConfig) -> Result<(DMatrix<f64>, f64)> {
    let n = spec.dim();
    let rule = sphere_rule(n, order);
    let terms: Vec<Result<(DMatrix<f64>, f64)>> = rule
        .par_iter()
        .map(|(u, w)| {
            let g = fundamental_tensor(spec, x, u, cfg)?.g;
            let f = spec.norm_unchecked(x, u);
            let weight = w * g.determinant().sqrt() / (n as f64 * f.powi(n as i32));
            Ok((g * weight, weight))
        })
        .collect();
    let terms: Vec<(DMatrix<f64>, f64)> = terms.into_iter().collect::<Result<_>>()?;
    Ok(pairwise_sum(&terms))
}

pub fn averaged_metric(spec: &MetricSpec, x: &[f64], quad: &QuadConfig, cfg: &FdConfig) -> Result<AveragedMetric> {
    quad.validate()?;
    cfg.validate()?;
    if x.len() != spec.dim() {
        return Err(FinslerError::invalid("point", format!("expected {} coordinates", spec.dim())));
    }
    if !spec.contains(x) {
        return Err(FinslerError::OutOfDomain { point: x.to_vec() });
    }
    let (g_bar, total_measure) = average_at_order(spec, x, quad.angular_order, cfg)?;
    let (fine, _) = average_at_order(spec, x, 2 * quad.angular_order, cfg)?;
    let refine_delta = (&fine - &g_bar).amax();
    let allowed = REFINE_TOLERANCE * g_bar.norm();
    if refine_delta > allowed {
        return Err(FinslerError::QuadratureUnstable {
            delta: refine_delta,
            allowed,
        });
    }
    Ok(AveragedMetric {
        g_bar,
        total_measure,
        refine_delta,
        angular_order: quad.angular_order,
    })
}

/// `Aᵀ M A`: the bilinear form `M` pulled back through the linear map `A`.
pub fn pullback_metric(m: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * m * a
}
