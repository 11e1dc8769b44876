//! Independent reference computations shared by the integration tests.
//!
//! The oracles work from the polynomial coefficients of a spec directly and do
//! not touch the finite-difference machinery of the crate. The one exception is
//! `landsberg_from_transport`, which checks the tensor against the transport.

#![allow(dead_code)]

use finsler::metric::Polynomial;
use finsler::nalgebra::{DMatrix, DVector};
use finsler::{fundamental_tensor, parallel_transport, CurveSpec, FdConfig, MetricSpec, OdeConfig};

pub fn poly_value(p: &Polynomial, x: &[f64]) -> f64 {
    p.terms
        .iter()
        .map(|t| t.coef * t.exps.iter().zip(x).map(|(&e, &xi)| xi.powi(e as i32)).product::<f64>())
        .sum()
}

/// Exact partial derivative `∂p/∂x^k`.
pub fn poly_partial(p: &Polynomial, k: usize, x: &[f64]) -> f64 {
    p.terms
        .iter()
        .filter(|t| t.exps[k] > 0)
        .map(|t| {
            let mut m = t.coef * t.exps[k] as f64;
            for (i, (&e, &xi)) in t.exps.iter().zip(x).enumerate() {
                let e = if i == k { e - 1 } else { e };
                m *= xi.powi(e as i32);
            }
            m
        })
        .sum()
}

pub fn a_at(spec: &MetricSpec, x: &[f64]) -> DMatrix<f64> {
    let n = spec.dim();
    let a = &spec.doc().a;
    // Only the upper triangle is authoritative.
    DMatrix::from_fn(n, n, |i, j| {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        poly_value(&a[r][c], x)
    })
}

pub fn da_at(spec: &MetricSpec, x: &[f64], k: usize) -> DMatrix<f64> {
    let n = spec.dim();
    let a = &spec.doc().a;
    DMatrix::from_fn(n, n, |i, j| {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        poly_partial(&a[r][c], k, x)
    })
}

pub fn b_at(spec: &MetricSpec, x: &[f64]) -> DVector<f64> {
    let n = spec.dim();
    match &spec.doc().b {
        Some(b) => DVector::from_fn(n, |i, _| poly_value(&b[i], x)),
        None => DVector::zeros(n),
    }
}

/// Jacobian `db[i][(j)] = ∂_j b_i`.
pub fn db_at(spec: &MetricSpec, x: &[f64]) -> DMatrix<f64> {
    let n = spec.dim();
    match &spec.doc().b {
        Some(b) => DMatrix::from_fn(n, n, |i, j| poly_partial(&b[i], j, x)),
        None => DMatrix::zeros(n, n),
    }
}

/// Fiber jet of `F = α + β` up to third order.
pub struct RandersJet {
    pub f: f64,
    pub f1: Vec<f64>,
    pub alpha_2: DMatrix<f64>,
    pub alpha_3: Vec<DMatrix<f64>>,
}

pub fn randers_jet(a: &DMatrix<f64>, b: &DVector<f64>, y: &[f64]) -> RandersJet {
    let n = a.nrows();
    let yv = DVector::from_column_slice(y);
    let ay = a * &yv;
    let alpha = yv.dot(&ay).sqrt();
    let a1: Vec<f64> = (0..n).map(|i| ay[i] / alpha).collect();
    let alpha_2 = DMatrix::from_fn(n, n, |i, j| (a[(i, j)] - a1[i] * a1[j]) / alpha);
    let alpha_3 = (0..n)
        .map(|k| {
            DMatrix::from_fn(n, n, |i, j| {
                -(alpha_2[(i, k)] * a1[j] + a1[i] * alpha_2[(j, k)] + alpha_2[(i, j)] * a1[k]) / alpha
            })
        })
        .collect();
    RandersJet {
        f: alpha + b.dot(&yv),
        f1: (0..n).map(|i| a1[i] + b[i]).collect(),
        alpha_2,
        alpha_3,
    }
}

/// `g_ij = F F_ij + F_i F_j`.
pub fn randers_g(a: &DMatrix<f64>, b: &DVector<f64>, y: &[f64]) -> DMatrix<f64> {
    let jet = randers_jet(a, b, y);
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| jet.f * jet.alpha_2[(i, j)] + jet.f1[i] * jet.f1[j])
}

/// `C_ijk = ½ (F_k F_ij + F_j F_ik + F_i F_jk + F F_ijk)`, indexed `[k][(i, j)]`.
pub fn randers_cartan(a: &DMatrix<f64>, b: &DVector<f64>, y: &[f64]) -> Vec<DMatrix<f64>> {
    let jet = randers_jet(a, b, y);
    let n = a.nrows();
    let (f, f1, f2, f3) = (jet.f, &jet.f1, &jet.alpha_2, &jet.alpha_3);
    (0..n)
        .map(|k| {
            DMatrix::from_fn(n, n, |i, j| {
                0.5 * (f1[k] * f2[(i, j)] + f1[j] * f2[(i, k)] + f1[i] * f2[(j, k)] + f * f3[k][(i, j)])
            })
        })
        .collect()
}

/// Christoffel symbols of `a`, indexed `[i][(j, k)]`.
pub fn christoffel(spec: &MetricSpec, x: &[f64]) -> Vec<DMatrix<f64>> {
    let n = spec.dim();
    let inv = a_at(spec, x).try_inverse().expect("a is invertible");
    let da: Vec<DMatrix<f64>> = (0..n).map(|k| da_at(spec, x, k)).collect();
    // Γ_ljk = ½ (∂_j a_lk + ∂_k a_lj − ∂_l a_jk)
    let lower = |l: usize, j: usize, k: usize| 0.5 * (da[j][(l, k)] + da[k][(l, j)] - da[l][(j, k)]);
    (0..n)
        .map(|i| DMatrix::from_fn(n, n, |j, k| (0..n).map(|l| inv[(i, l)] * lower(l, j, k)).sum()))
        .collect()
}

/// `G^i = ½ Γ^i_jk y^j y^k`.
pub fn christoffel_spray(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Vec<f64> {
    let gamma = christoffel(spec, x);
    let yv = DVector::from_column_slice(y);
    gamma.iter().map(|g| 0.5 * yv.dot(&(g * &yv))).collect()
}

/// Spray of a Randers metric with constant `a = I`:
/// `G = (r00 − 2α s0)/(2F) y + α s_0`, `r_ij`, `s_ij` the symmetric and
/// antisymmetric parts of `∂_j b_i`.
pub fn flat_randers_spray(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = spec.dim();
    let b = b_at(spec, x);
    let db = db_at(spec, x);
    let yv = DVector::from_column_slice(y);
    let r = (&db + db.transpose()) * 0.5;
    let s = (&db - db.transpose()) * 0.5;
    let alpha = yv.norm();
    let f = alpha + b.dot(&yv);
    let r00 = yv.dot(&(&r * &yv));
    let s_up0 = &s * &yv;
    let s0 = b.dot(&s_up0);
    (0..n)
        .map(|i| (r00 - 2.0 * alpha * s0) / (2.0 * f) * y[i] + alpha * s_up0[i])
        .collect()
}

pub fn curve_at(curve: &CurveSpec, t: f64) -> (Vec<f64>, Vec<f64>) {
    let mut pos = Vec::new();
    let mut vel = Vec::new();
    for coeffs in curve.control() {
        pos.push(coeffs.iter().enumerate().map(|(p, c)| c * t.powi(p as i32)).sum());
        vel.push(
            coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(p, c)| p as f64 * c * t.powi(p as i32 - 1))
                .sum(),
        );
    }
    (pos, vel)
}

/// Levi-Civita transport of `y` and of the identity frame by RK4.
pub fn levi_civita_transport(spec: &MetricSpec, curve: &CurveSpec, y: &[f64], steps: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = spec.dim();
    let rhs = |t: f64, state: &DMatrix<f64>| -> DMatrix<f64> {
        let (x, v) = curve_at(curve, t);
        let gamma = christoffel(spec, &x);
        // A^i_k = Γ^i_jk v^j
        let a = DMatrix::from_fn(n, n, |i, k| (0..n).map(|j| gamma[i][(j, k)] * v[j]).sum());
        -(a * state)
    };
    let mut state = DMatrix::zeros(n, n + 1);
    for i in 0..n {
        state[(i, 0)] = y[i];
        state[(i, i + 1)] = 1.0;
    }
    let h = 1.0 / steps as f64;
    for s in 0..steps {
        let t = s as f64 * h;
        let k1 = rhs(t, &state);
        let k2 = rhs(t + h / 2.0, &(&state + &k1 * (h / 2.0)));
        let k3 = rhs(t + h / 2.0, &(&state + &k2 * (h / 2.0)));
        let k4 = rhs(t + h, &(&state + &k3 * h));
        state += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    let end = state.column(0).iter().copied().collect();
    (end, state.columns(1, n).into_owned())
}

/// Complete elliptic integral of the first kind via the AGM.
pub fn elliptic_k(k: f64) -> f64 {
    let (mut a, mut g) = (1.0f64, (1.0 - k * k).sqrt());
    while (a - g).abs() > 4.0 * f64::EPSILON * a {
        let next = 0.5 * (a + g);
        g = (a * g).sqrt();
        a = next;
    }
    std::f64::consts::PI / (2.0 * a)
}

/// `∫_{F≤1} g √det g dy` and `∫_{F≤1} √det g dy` in dimension 2 by midpoint
/// rule on a Cartesian grid over a bounding box, with recursive refinement of
/// cells cut by the indicatrix.
pub fn grid_average(spec: &MetricSpec, x: &[f64], cells: usize, depth: u32) -> (DMatrix<f64>, f64) {
    assert_eq!(spec.dim(), 2);
    let a = a_at(spec, x);
    let b = b_at(spec, x);
    let norm = |y: &[f64]| {
        let yv = DVector::from_column_slice(y);
        (yv.dot(&(&a * &yv))).sqrt() + b.dot(&yv)
    };
    // F ≥ (1 − ‖b‖_a) α and α ≥ sqrt(λ_min) |y|.
    let b_norm = b.dot(&(a.clone().try_inverse().unwrap() * &b)).sqrt();
    let lam = a.clone().symmetric_eigen().eigenvalues.min();
    let radius = 1.0 / ((1.0 - b_norm) * lam.sqrt()) * 1.01;
    let h = 2.0 * radius / cells as f64;

    let mut acc = DMatrix::zeros(2, 2);
    let mut measure = 0.0;
    let mut add = |y: [f64; 2], area: f64| {
        if y == [0.0, 0.0] {
            return;
        }
        let g = randers_g(&a, &b, &y);
        let w = g.determinant().sqrt() * area;
        acc += g * w;
        measure += w;
    };

    fn visit(
        lo: [f64; 2],
        h: f64,
        depth: u32,
        norm: &dyn Fn(&[f64]) -> f64,
        add: &mut dyn FnMut([f64; 2], f64),
    ) {
        let mid = [lo[0] + h / 2.0, lo[1] + h / 2.0];
        let corners = [
            [lo[0], lo[1]],
            [lo[0] + h, lo[1]],
            [lo[0], lo[1] + h],
            [lo[0] + h, lo[1] + h],
        ];
        let inside = corners.iter().filter(|c| norm(&c[..]) <= 1.0).count();
        let mid_in = norm(&mid) <= 1.0;
        if inside == 4 {
            add(mid, h * h);
        } else if inside == 0 && !mid_in {
        } else if depth == 0 {
            if mid_in {
                add(mid, h * h);
            }
        } else {
            let half = h / 2.0;
            for (dx, dy) in [(0.0, 0.0), (half, 0.0), (0.0, half), (half, half)] {
                visit([lo[0] + dx, lo[1] + dy], half, depth - 1, norm, add);
            }
        }
    }

    for i in 0..cells {
        for j in 0..cells {
            let lo = [-radius + i as f64 * h, -radius + j as f64 * h];
            visit(lo, h, depth, &norm, &mut add);
        }
    }
    (acc, measure)
}

/// `max |a_ij − b_ij|`.
pub fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

pub fn vec_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

/// `Q(s) = Jᵀ g(c(s), φ(y)) J` after transport along the segment from `x` to
/// `x + s v`.
fn transported_metric(spec: &MetricSpec, x: &[f64], v: &[f64], y: &[f64], s: f64) -> DMatrix<f64> {
    let end: Vec<f64> = x.iter().zip(v).map(|(p, q)| p + s * q).collect();
    let curve = CurveSpec::segment(x, &end).unwrap();
    let ode = OdeConfig::with_steps(16);
    let run = parallel_transport(spec, &curve, y, &ode, &FdConfig::default()).unwrap();
    let g = fundamental_tensor(spec, &end, &run.endpoint, &FdConfig::default()).unwrap().g;
    run.differential.transpose() * g * &run.differential
}

/// The derivative of the transported metric at the start of a curve with
/// velocity `v` is `−2 L(·, ·, v)`.
pub fn landsberg_from_transport(spec: &MetricSpec, x: &[f64], y: &[f64], v: &[f64]) -> DMatrix<f64> {
    let s = 1e-3;
    let forward = transported_metric(spec, x, v, y, s);
    let backward = transported_metric(spec, x, v, y, -s);
    (forward - backward) / (2.0 * s)
}
