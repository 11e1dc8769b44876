//! Geodesic spray, nonlinear connection, Berwald and Landsberg tensors.
//!
//! Conventions: geodesics satisfy `ẍ^i + 2 G^i(x, ẋ) = 0`,
//! `N^i_j = ∂G^i/∂y^j`, `Γ^i_jk = ∂²G^i/∂y^j∂y^k`,
//! `B^i_jkl = ∂³G^i/∂y^j∂y^k∂y^l` and `L_jkl = −½ y_i B^i_jkl` with
//! `y_i = g_im y^m`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{check_positive_definite, euclidean_norm, permutations3, richardson, FdConfig, Stencil, Value};
use crate::error::{FinslerError, Result};
use crate::metric::{MetricSpec, MAX_DIM};
use crate::sampling::chart_samples;
use crate::tensor::{Tensor3, Tensor4};

/// Below this, a deviation is indistinguishable from difference noise.
pub const ZERO_BAND: f64 = 1e-5;

/// Difference step and Richardson depth of the `G` evaluations feeding one
/// derived quantity.
#[derive(Clone, Copy)]
struct SprayPrecision {
    /// x-step inside `G`, in units of `h0`; the y-step is the same times
    /// `max(1, ‖y‖)`.
    inner_factor: f64,
    inner_levels: usize,
    /// Outer fiber step on `G`, in units of `h0 ‖y‖`.
    outer_factor: f64,
    outer_levels: usize,
}

impl SprayPrecision {
    /// For `N` and `Γ`, evaluated at every transport stage.
    fn connection(cfg: &FdConfig) -> Self {
        SprayPrecision {
            inner_factor: 30.0,
            inner_levels: cfg.richardson_levels + 1,
            outer_factor: 50.0,
            outer_levels: cfg.richardson_levels + 1,
        }
    }

    /// For the third differences giving `B`, which need a quieter `G`.
    fn berwald(cfg: &FdConfig) -> Self {
        SprayPrecision {
            inner_factor: 50.0,
            inner_levels: cfg.richardson_levels + 2,
            outer_factor: 100.0,
            outer_levels: cfg.richardson_levels + 1,
        }
    }
}

type Small = [[f64; MAX_DIM]; MAX_DIM];

/// Solves `g s = r` for symmetric positive definite `g` of size `n ≤ 3`.
fn cholesky_solve(g: &Small, r: &Value, n: usize) -> Option<Value> {
    let mut l = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for j in 0..=i {
            let mut s = g[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut z = [0.0; MAX_DIM];
    for i in 0..n {
        let mut s = r[i];
        for k in 0..i {
            s -= l[i][k] * z[k];
        }
        z[i] = s / l[i][i];
    }
    let mut out = [0.0; MAX_DIM];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[k][i] * out[k];
        }
        out[i] = s / l[i][i];
    }
    Some(out)
}

/// Slots of one difference row: `∂F²/∂x^l`, `∂²F²/∂x^k∂y^l` (row-major) and
/// `∂²F²/∂y^i∂y^j` (row-major), each padded to the largest dimension.
const ROW: usize = MAX_DIM + 2 * MAX_DIM * MAX_DIM;

/// Central differences of `F²` on `(x, y)` steps `(hx, hy)`.
fn spray_row(spec: &MetricSpec, x: &[f64], y: &[f64], hx: f64, hy: f64) -> [f64; ROW] {
    let n = spec.dim();
    let mut row = [0.0; ROW];
    let shifted = |v: &[f64], k: usize, d: f64| {
        let mut out = [0.0; MAX_DIM];
        out[..n].copy_from_slice(v);
        out[k] += d;
        out
    };
    for k in 0..n {
        let plus = spec.coefficients(&shifted(x, k, hx)[..n]);
        let minus = spec.coefficients(&shifted(x, k, -hx)[..n]);
        row[k] = (plus.norm_sq(y) - minus.norm_sq(y)) / (2.0 * hx);
        for l in 0..n {
            let yp = shifted(y, l, hy);
            let ym = shifted(y, l, -hy);
            let mixed = plus.norm_sq(&yp[..n]) - plus.norm_sq(&ym[..n]) - minus.norm_sq(&yp[..n])
                + minus.norm_sq(&ym[..n]);
            row[MAX_DIM + k * MAX_DIM + l] = mixed / (4.0 * hx * hy);
        }
    }
    let base = spec.coefficients(x);
    let center = base.norm_sq(y);
    let fiber = MAX_DIM + MAX_DIM * MAX_DIM;
    for i in 0..n {
        let yp = shifted(y, i, hy);
        let ym = shifted(y, i, -hy);
        row[fiber + i * MAX_DIM + i] = (base.norm_sq(&yp[..n]) - 2.0 * center + base.norm_sq(&ym[..n])) / (hy * hy);
        for j in i + 1..n {
            let corner = |si: f64, sj: f64| {
                let mut p = [0.0; MAX_DIM];
                p[..n].copy_from_slice(y);
                p[i] += si * hy;
                p[j] += sj * hy;
                base.norm_sq(&p[..n])
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * hy * hy);
            row[fiber + i * MAX_DIM + j] = v;
            row[fiber + j * MAX_DIM + i] = v;
        }
    }
    row
}

/// `G^i = ¼ g^{il} ( ∂²F²/∂x^k∂y^l · y^k − ∂F²/∂x^l )`, with `g = ½ ∂²F²/∂y²`
/// taken from the same difference rows.
fn spray_with(spec: &MetricSpec, x: &[f64], y: &[f64], cfg: &FdConfig, factor: f64, levels: usize) -> Result<Value> {
    let n = spec.dim();
    let hx = factor * cfg.h0;
    let hy = hx * euclidean_norm(y).max(1.0);
    let mut rows = [[0.0; ROW]; 8];
    for (level, row) in rows.iter_mut().enumerate().take(levels) {
        let scale = 0.5f64.powi(level as i32);
        *row = spray_row(spec, x, y, hx * scale, hy * scale);
    }
    let d = richardson(&rows[..levels]);

    let mut rhs = [0.0; MAX_DIM];
    for l in 0..n {
        let mut acc = -d[l];
        for (k, yk) in y.iter().enumerate() {
            acc += d[MAX_DIM + k * MAX_DIM + l] * yk;
        }
        rhs[l] = acc;
    }
    if rhs.iter().all(|&r| r == 0.0) {
        return Ok([0.0; MAX_DIM]);
    }
    let fiber = MAX_DIM + MAX_DIM * MAX_DIM;
    let mut g = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            g[i][j] = 0.5 * d[fiber + i * MAX_DIM + j];
        }
    }
    match cholesky_solve(&g, &rhs, n) {
        Some(sol) => Ok(sol.map(|s| 0.25 * s)),
        None => {
            let m = DMatrix::from_fn(n, n, |i, j| g[i][j]);
            check_positive_definite(&m)?;
            Err(FinslerError::NotPositiveDefinite { min_eigenvalue: 0.0 })
        }
    }
}

pub(crate) fn spray_coefficients(spec: &MetricSpec, x: &[f64], y: &[f64], cfg: &FdConfig) -> Result<Value> {
    let p = SprayPrecision::connection(cfg);
    spray_with(spec, x, y, cfg, p.inner_factor, p.inner_levels)
}

/// `N` and, when requested, `Γ` at one point: the data the transport ODE
/// consumes.
#[derive(Clone, Debug)]
pub struct Connection {
    pub nonlinear: DMatrix<f64>,
    pub gamma: Option<Tensor3>,
}

pub(crate) fn connection_unchecked(
    spec: &MetricSpec,
    x: &[f64],
    y: &[f64],
    cfg: &FdConfig,
    with_gamma: bool,
) -> Result<Connection> {
    let n = spec.dim();
    let p = SprayPrecision::connection(cfg);
    let h = p.outer_factor * cfg.h0 * euclidean_norm(y);
    let steps = [h; MAX_DIM];
    let mut st = Stencil::new(
        |q: &[f64]| spray_with(spec, x, q, cfg, p.inner_factor, p.inner_levels),
        y,
        &steps[..n],
        p.outer_levels,
    );
    let mut nonlinear = DMatrix::zeros(n, n);
    for j in 0..n {
        let d = st.derivative(&[j])?;
        for i in 0..n {
            nonlinear[(i, j)] = d[i];
        }
    }
    let gamma = if with_gamma {
        let mut gamma = Tensor3::zeros(n);
        for j in 0..n {
            for k in j..n {
                let d = st.derivative(&[j, k])?;
                for i in 0..n {
                    gamma.set(i, j, k, d[i]);
                    gamma.set(i, k, j, d[i]);
                }
            }
        }
        Some(gamma)
    } else {
        None
    };
    Ok(Connection { nonlinear, gamma })
}

/// `B^i_jkl`, computed on `j ≤ k ≤ l` and mirrored.
fn berwald_unchecked(spec: &MetricSpec, x: &[f64], y: &[f64], cfg: &FdConfig) -> Result<Tensor4> {
    let n = spec.dim();
    let p = SprayPrecision::berwald(cfg);
    let h = p.outer_factor * cfg.h0 * euclidean_norm(y);
    let steps = [h; MAX_DIM];
    let mut st = Stencil::new(
        |q: &[f64]| spray_with(spec, x, q, cfg, p.inner_factor, p.inner_levels),
        y,
        &steps[..n],
        p.outer_levels,
    );
    let mut b = Tensor4::zeros(n);
    for j in 0..n {
        for k in j..n {
            for l in k..n {
                let d = st.derivative(&[j, k, l])?;
                for (p, q, r) in permutations3(j, k, l) {
                    for i in 0..n {
                        b.set(i, p, q, r, d[i]);
                    }
                }
            }
        }
    }
    Ok(b)
}

#[derive(Clone, Debug)]
pub struct SprayData {
    /// `G^i`.
    pub spray: Vec<f64>,
    /// `N^i_j`, row `i`, column `j`.
    pub nonlinear: DMatrix<f64>,
    /// `Γ^i_jk`.
    pub gamma: Tensor3,
    /// `B^i_jkl`.
    pub berwald: Tensor4,
}

pub fn spray(spec: &MetricSpec, x: &[f64], y: &[f64], cfg: &FdConfig) -> Result<SprayData> {
    cfg.validate()?;
    spec.check_args(x, y)?;
    let conn = connection_unchecked(spec, x, y, cfg, true)?;
    let berwald = berwald_unchecked(spec, x, y, cfg)?;
    Ok(SprayData {
        spray: spray_coefficients(spec, x, y, cfg)?[..spec.dim()].to_vec(),
        nonlinear: conn.nonlinear,
        gamma: conn.gamma.expect("gamma requested"),
        berwald,
    })
}

#[derive(Clone, Debug)]
pub struct LandsbergTensor {
    pub l: Tensor3,
    /// `sqrt(g^{ja} g^{kb} g^{lc} L_jkl L_abc)`.
    pub norm: f64,
}

fn landsberg_from(b: &Tensor4, g: &DMatrix<f64>, y: &[f64]) -> Tensor3 {
    let n = g.nrows();
    let y_low: Vec<f64> = (0..n).map(|i| (0..n).map(|m| g[(i, m)] * y[m]).sum()).collect();
    Tensor3::from_fn(n, |j, k, l| -0.5 * (0..n).map(|i| y_low[i] * b.get(i, j, k, l)).sum::<f64>())
}

/// g-norm of a covariant rank-3 tensor.
fn norm3(t: &Tensor3, g_inv: &DMatrix<f64>) -> f64 {
    let n = t.dim();
    let raised = raise3(t, g_inv);
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                s += t.get(a, b, c) * raised.get(a, b, c);
            }
        }
    }
    s.max(0.0).sqrt()
}

fn raise3(t: &Tensor3, g_inv: &DMatrix<f64>) -> Tensor3 {
    let n = t.dim();
    let mut first = Tensor3::zeros(n);
    for a in 0..n {
        for k in 0..n {
            for l in 0..n {
                first.set(a, k, l, (0..n).map(|j| g_inv[(a, j)] * t.get(j, k, l)).sum());
            }
        }
    }
    let mut second = Tensor3::zeros(n);
    for a in 0..n {
        for b in 0..n {
            for l in 0..n {
                second.set(a, b, l, (0..n).map(|k| g_inv[(b, k)] * first.get(a, k, l)).sum());
            }
        }
    }
    Tensor3::from_fn(n, |a, b, c| (0..n).map(|l| g_inv[(c, l)] * second.get(a, b, l)).sum())
}

/// `sqrt(g_ip g^{jq} g^{kr} g^{ls} B^i_jkl B^p_qrs)`.
fn berwald_norm(b: &Tensor4, g: &DMatrix<f64>, g_inv: &DMatrix<f64>) -> f64 {
    let n = g.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for p in 0..n {
            // Slice B^i and B^p as covariant rank-3 tensors.
            let bi = Tensor3::from_fn(n, |j, k, l| b.get(i, j, k, l));
            let bp = Tensor3::from_fn(n, |j, k, l| b.get(p, j, k, l));
            let raised = raise3(&bp, g_inv);
            let mut inner = 0.0;
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        inner += bi.get(j, k, l) * raised.get(j, k, l);
                    }
                }
            }
            s += g[(i, p)] * inner;
        }
    }
    s.max(0.0).sqrt()
}

fn invert_spd(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match g.clone().cholesky() {
        Some(c) => Ok(c.inverse()),
        None => {
            check_positive_definite(g)?;
            Err(FinslerError::NotPositiveDefinite { min_eigenvalue: 0.0 })
        }
    }
}

pub fn landsberg_tensor(spec: &MetricSpec, x: &[f64], y: &[f64], cfg: &FdConfig) -> Result<LandsbergTensor> {
    cfg.validate()?;
    spec.check_args(x, y)?;
    let b = berwald_unchecked(spec, x, y, cfg)?;
    let g = crate::calculus::fundamental_tensor(spec, x, y, cfg)?.g;
    let g_inv = invert_spd(&g)?;
    let l = landsberg_from(&b, &g, y);
    let norm = norm3(&l, &g_inv);
    Ok(LandsbergTensor { l, norm })
}

/// `(‖B‖_g, ‖L‖_g)` at one point.
pub fn deviations_at(spec: &MetricSpec, x: &[f64], y: &[f64], cfg: &FdConfig) -> Result<(f64, f64)> {
    spec.check_args(x, y)?;
    let b = berwald_unchecked(spec, x, y, cfg)?;
    let g = crate::calculus::fundamental_tensor(spec, x, y, cfg)?.g;
    let g_inv = invert_spd(&g)?;
    let l = landsberg_from(&b, &g, y);
    Ok((berwald_norm(&b, &g, &g_inv), norm3(&l, &g_inv)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub berwald_dev: f64,
    pub landsberg_dev: f64,
    pub samples: usize,
    pub seed: u64,
    pub zero_band: f64,
}

/// Largest Berwald and Landsberg tensor norms over a seeded sample of chart
/// points. Every sampled `y` is paired with `−y`.
pub fn classify(spec: &MetricSpec, sample_count: usize, seed: u64, cfg: &FdConfig) -> Result<Classification> {
    cfg.validate()?;
    if sample_count == 0 {
        return Err(FinslerError::invalid("samples", "must be at least 1"));
    }
    let samples = chart_samples(spec, sample_count, seed);
    let points: Vec<(Vec<f64>, Vec<f64>)> = samples
        .into_iter()
        .flat_map(|(x, y)| {
            let neg: Vec<f64> = y.iter().map(|c| -c).collect();
            [(x.clone(), y), (x, neg)]
        })
        .collect();
    let devs: Vec<Result<(f64, f64)>> = points
        .par_iter()
        .map(|(x, y)| deviations_at(spec, x, y, cfg))
        .collect();
    let (mut berwald_dev, mut landsberg_dev) = (0.0f64, 0.0f64);
    for d in devs {
        let (b, l) = d?;
        berwald_dev = berwald_dev.max(b);
        landsberg_dev = landsberg_dev.max(l);
    }
    Ok(Classification {
        berwald_dev,
        landsberg_dev,
        samples: sample_count,
        seed,
        zero_band: ZERO_BAND,
    })
}
