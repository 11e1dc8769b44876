//! Finite-difference fiber calculus: fundamental and Cartan tensors from `F`
//! alone.
//!
//! Every derivative is a nested product of central differences,
//! `D_{i1} ⋯ D_{im} f`, whose error expansion is even in the step, followed by
//! Richardson extrapolation over successive step halvings.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{FinslerError, Result};
use crate::metric::{MetricSpec, MAX_DIM};
use crate::tensor::Tensor3;

/// Largest number of stencil coordinates (x and y of a 3-dimensional chart).
const MAX_VARS: usize = 2 * MAX_DIM;

/// Smallest eigenvalue accepted for a fundamental tensor.
pub const MIN_EIGENVALUE: f64 = 1e-10;

/// Cartan tensor third differences run on a step this much wider than `h0`.
const CARTAN_STEP_FACTOR: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdConfig {
    pub h0: f64,
    pub richardson_levels: usize,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            h0: 1e-3,
            richardson_levels: 2,
        }
    }
}

impl FdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h0 > 0.0 && self.h0.is_finite()) {
            return Err(FinslerError::invalid("fd_h0", "must be positive"));
        }
        if !(1..=4).contains(&self.richardson_levels) {
            return Err(FinslerError::invalid("fd_levels", "must be between 1 and 4"));
        }
        Ok(())
    }

    /// Step used for fiber differences at `y`: `h0 · max(1, ‖y‖)`.
    pub fn fiber_step(&self, y: &[f64]) -> f64 {
        self.h0 * euclidean_norm(y).max(1.0)
    }
}

pub(crate) type Value = [f64; MAX_DIM];

/// Level and offsets packed one byte each.
fn pack_key(level: u8, offsets: &[i8; MAX_VARS]) -> u64 {
    offsets
        .iter()
        .fold(u64::from(level), |acc, &o| (acc << 8) | u64::from(o as u8))
}

/// Memoized Richardson-extrapolated central-difference stencil around one
/// point.
pub(crate) struct Stencil<F> {
    f: F,
    len: usize,
    center: [f64; MAX_VARS],
    steps: [f64; MAX_VARS],
    levels: usize,
    keys: Vec<u64>,
    values: Vec<Value>,
}

impl<F> Stencil<F>
where
    F: FnMut(&[f64]) -> Result<Value>,
{
    pub fn new(f: F, center: &[f64], steps: &[f64], levels: usize) -> Self {
        debug_assert!(center.len() <= MAX_VARS && center.len() == steps.len());
        debug_assert!((1..=6).contains(&levels));
        let mut c = [0.0; MAX_VARS];
        let mut s = [0.0; MAX_VARS];
        c[..center.len()].copy_from_slice(center);
        s[..steps.len()].copy_from_slice(steps);
        Stencil {
            f,
            len: center.len(),
            center: c,
            steps: s,
            levels,
            keys: Vec::with_capacity(48),
            values: Vec::with_capacity(48),
        }
    }

    fn value(&mut self, mut level: u8, mut offsets: [i8; MAX_VARS]) -> Result<Value> {
        // level l, offset 2k is the same point as level l-1, offset k.
        while level > 0 && offsets.iter().all(|o| o % 2 == 0) {
            level -= 1;
            offsets.iter_mut().for_each(|o| *o /= 2);
        }
        let key = pack_key(level, &offsets);
        if let Some(pos) = self.keys.iter().position(|&k| k == key) {
            return Ok(self.values[pos]);
        }
        let scale = 0.5f64.powi(level as i32);
        let mut point = [0.0; MAX_VARS];
        for (k, p) in point.iter_mut().enumerate().take(self.len) {
            *p = self.center[k] + f64::from(offsets[k]) * self.steps[k] * scale;
        }
        let v = (self.f)(&point[..self.len])?;
        self.keys.push(key);
        self.values.push(v);
        Ok(v)
    }

    fn raw(&mut self, level: usize, idx: &[usize]) -> Result<Value> {
        let m = idx.len();
        let mut acc = [0.0; MAX_DIM];
        for mask in 0..(1u32 << m) {
            let mut offsets = [0i8; MAX_VARS];
            let mut sign = 1.0;
            for (bit, &i) in idx.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    offsets[i] -= 1;
                    sign = -sign;
                } else {
                    offsets[i] += 1;
                }
            }
            let v = self.value(level as u8, offsets)?;
            for (a, b) in acc.iter_mut().zip(v) {
                *a += sign * b;
            }
        }
        let scale = 0.5f64.powi(level as i32);
        let denom: f64 = idx.iter().map(|&i| 2.0 * self.steps[i] * scale).product();
        for a in acc.iter_mut() {
            *a /= denom;
        }
        Ok(acc)
    }

    /// `∂^m f / ∂z^{i1} ⋯ ∂z^{im}` at the center.
    pub fn derivative(&mut self, idx: &[usize]) -> Result<Value> {
        let mut rows = [[0.0; MAX_DIM]; 8];
        for (level, row) in rows.iter_mut().enumerate().take(self.levels) {
            *row = self.raw(level, idx)?;
        }
        Ok(richardson(&rows[..self.levels]))
    }
}

/// Richardson extrapolation of estimates on steps `h, h/2, h/4, …` whose
/// error expands in even powers of `h`.
pub(crate) fn richardson<const K: usize>(rows: &[[f64; K]]) -> [f64; K] {
    let mut table = [[0.0; K]; 8];
    debug_assert!(!rows.is_empty() && rows.len() <= table.len());
    for (level, raw) in rows.iter().enumerate() {
        let mut row = *raw;
        // Eliminate h^2, h^4, ... against the previous (coarser) row.
        let mut factor = 1.0;
        for prev in table.iter_mut().take(level) {
            factor *= 4.0;
            let mut next = [0.0; K];
            for c in 0..K {
                next[c] = (factor * row[c] - prev[c]) / (factor - 1.0);
            }
            *prev = row;
            row = next;
        }
        table[level] = row;
    }
    table[rows.len() - 1]
}

pub(crate) fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

#[derive(Clone, Debug)]
pub struct FundamentalTensor {
    pub g: DMatrix<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Largest `|g_ij − g_ji|` before symmetrization.
    pub asymmetry: f64,
}

pub fn fundamental_tensor(spec: &MetricSpec, x: &[f64], y: &[f64], cfg: &FdConfig) -> Result<FundamentalTensor> {
    cfg.validate()?;
    spec.check_args(x, y)?;
    let n = spec.dim();
    let h = cfg.fiber_step(y);
    let steps = vec![h; n];
    let mut st = Stencil::new(
        |p: &[f64]| Ok([spec.norm_sq_unchecked(x, p), 0.0, 0.0]),
        y,
        &steps,
        cfg.richardson_levels,
    );
    let mut raw = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            raw[(i, j)] = 0.5 * st.derivative(&[i, j])?[0];
        }
    }
    let asymmetry = (&raw - raw.transpose()).amax();
    let g = (&raw + raw.transpose()) * 0.5;
    check_positive_definite(&g)?;
    Ok(FundamentalTensor {
        g,
        x: x.to_vec(),
        y: y.to_vec(),
        asymmetry,
    })
}

pub(crate) fn check_positive_definite(g: &DMatrix<f64>) -> Result<()> {
    let min_eigenvalue = g.clone().symmetric_eigenvalues().min();
    if !(min_eigenvalue > MIN_EIGENVALUE) {
        return Err(FinslerError::NotPositiveDefinite { min_eigenvalue });
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct CartanTensor {
    pub c: Tensor3,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// `C_ijk = ¼ ∂³F²/∂y^i∂y^j∂y^k`, computed on `i ≤ j ≤ k` and symmetrized by
/// construction.
pub fn cartan_tensor(spec: &MetricSpec, x: &[f64], y: &[f64], cfg: &FdConfig) -> Result<CartanTensor> {
    cfg.validate()?;
    spec.check_args(x, y)?;
    let n = spec.dim();
    let h = CARTAN_STEP_FACTOR * cfg.fiber_step(y);
    let steps = vec![h; n];
    let mut st = Stencil::new(
        |p: &[f64]| Ok([spec.norm_sq_unchecked(x, p), 0.0, 0.0]),
        y,
        &steps,
        cfg.richardson_levels,
    );
    let mut c = Tensor3::zeros(n);
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                let v = 0.25 * st.derivative(&[i, j, k])?[0];
                for (a, b, d) in permutations3(i, j, k) {
                    c.set(a, b, d, v);
                }
            }
        }
    }
    Ok(CartanTensor {
        c,
        x: x.to_vec(),
        y: y.to_vec(),
    })
}

pub(crate) fn permutations3(i: usize, j: usize, k: usize) -> [(usize, usize, usize); 6] {
    [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)]
}

/// `|g_ij y^i y^j − F²| / F²`.
pub fn euler_check(spec: &MetricSpec, x: &[f64], y: &[f64], cfg: &FdConfig) -> Result<f64> {
    let g = fundamental_tensor(spec, x, y, cfg)?.g;
    let f2 = spec.norm_sq_unchecked(x, y);
    let n = spec.dim();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += g[(i, j)] * y[i] * y[j];
        }
    }
    Ok((q - f2).abs() / f2)
}
