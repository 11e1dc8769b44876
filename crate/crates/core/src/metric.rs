//! Chart, metric families and exact evaluation of `F(x, y)`.
//!
//! Three closed families are supported, all of Randers type `F = α + β`
//! with `α = sqrt(a_ij(x) y^i y^j)` and `β = b_i(x) y^i`:
//!
//! * `riemannian`: `b = 0`, polynomial `a_ij(x)`;
//! * `randers`: polynomial `a_ij(x)` and `b_i(x)`;
//! * `locally_minkowski_randers`: constant `a_ij` and `b_i`.
//!
//! Validity (positive definite `a`, `‖b‖_a < 1`) is checked on a dense grid of
//! the domain box when a spec is built.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FinslerError, Result};

/// Largest supported chart dimension.
pub const MAX_DIM: usize = 3;

/// Number of curve samples used for domain and velocity checks.
pub const CURVE_CHECK_SAMPLES: usize = 129;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub exps: Vec<u32>,
    pub coef: f64,
}

/// Multivariate polynomial stored as a list of monomials.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    pub terms: Vec<Term>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial { terms: Vec::new() }
    }

    pub fn constant(dim: usize, coef: f64) -> Self {
        Polynomial::monomial(vec![0; dim], coef)
    }

    pub fn monomial(exps: Vec<u32>, coef: f64) -> Self {
        Polynomial {
            terms: vec![Term { exps, coef }],
        }
    }

    pub fn from_terms(terms: &[(&[u32], f64)]) -> Self {
        Polynomial {
            terms: terms
                .iter()
                .map(|(e, c)| Term {
                    exps: e.to_vec(),
                    coef: *c,
                })
                .collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for term in &self.terms {
            let mut m = term.coef;
            for (xi, &e) in x.iter().zip(&term.exps) {
                if e != 0 {
                    m *= xi.powi(e as i32);
                }
            }
            acc += m;
        }
        acc
    }

    pub fn is_constant(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.coef == 0.0 || t.exps.iter().all(|&e| e == 0))
    }

    /// Sets the coefficient of the monomial `exps`, adding the term if absent.
    pub fn set_coefficient(&mut self, exps: &[u32], coef: f64) {
        match self.terms.iter_mut().find(|t| t.exps == exps) {
            Some(t) => t.coef = coef,
            None => self.terms.push(Term {
                exps: exps.to_vec(),
                coef,
            }),
        }
    }

    fn check(&self, dim: usize, field: &str) -> Result<()> {
        for term in &self.terms {
            if term.exps.len() != dim {
                return Err(FinslerError::invalid(
                    field,
                    format!("exponent tuple {:?} has length {}, expected {dim}", term.exps, term.exps.len()),
                ));
            }
            if !term.coef.is_finite() {
                return Err(FinslerError::invalid(field, "non-finite coefficient"));
            }
            if term.exps.iter().any(|&e| e > 64) {
                return Err(FinslerError::invalid(field, "exponent larger than 64"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Riemannian,
    Randers,
    LocallyMinkowskiRanders,
}

/// Raw, unvalidated JSON form of a [`MetricSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricDoc {
    pub dimension: usize,
    pub family: Family,
    pub a: Vec<Vec<Polynomial>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Polynomial>>,
    pub domain: Vec<[f64; 2]>,
}

/// A validated Finsler metric on a single chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MetricDoc", into = "MetricDoc")]
pub struct MetricSpec {
    doc: MetricDoc,
}

impl From<MetricSpec> for MetricDoc {
    fn from(spec: MetricSpec) -> Self {
        spec.doc
    }
}

impl TryFrom<MetricDoc> for MetricSpec {
    type Error = FinslerError;

    fn try_from(doc: MetricDoc) -> Result<Self> {
        MetricSpec::new(doc)
    }
}

impl MetricSpec {
    pub fn new(doc: MetricDoc) -> Result<Self> {
        let n = doc.dimension;
        if !(2..=MAX_DIM).contains(&n) {
            return Err(FinslerError::invalid("dimension", format!("must be 2 or 3, got {n}")));
        }
        if doc.a.len() != n || doc.a.iter().any(|row| row.len() != n) {
            return Err(FinslerError::invalid("a", format!("must be a {n}x{n} table")));
        }
        for (i, row) in doc.a.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                p.check(n, &format!("a[{i}][{j}]"))?;
            }
        }
        match (&doc.family, &doc.b) {
            (Family::Riemannian, Some(b)) if b.iter().any(|p| p.terms.iter().any(|t| t.coef != 0.0)) => {
                return Err(FinslerError::invalid("b", "riemannian family takes no 1-form"));
            }
            (Family::Randers | Family::LocallyMinkowskiRanders, None) => {
                return Err(FinslerError::invalid("b", "missing 1-form for a randers family"));
            }
            _ => {}
        }
        if let Some(b) = &doc.b {
            if b.len() != n {
                return Err(FinslerError::invalid("b", format!("must have {n} entries")));
            }
            for (i, p) in b.iter().enumerate() {
                p.check(n, &format!("b[{i}]"))?;
            }
        }
        if doc.family == Family::LocallyMinkowskiRanders {
            let all_constant = doc.a.iter().flatten().all(Polynomial::is_constant)
                && doc.b.iter().flatten().all(Polynomial::is_constant);
            if !all_constant {
                return Err(FinslerError::invalid(
                    "a",
                    "locally_minkowski_randers requires constant coefficients",
                ));
            }
        }
        if doc.domain.len() != n {
            return Err(FinslerError::invalid("domain", format!("must have {n} intervals")));
        }
        for [lo, hi] in &doc.domain {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(FinslerError::invalid("domain", format!("bad interval [{lo}, {hi}]")));
            }
        }

        let spec = MetricSpec { doc };
        spec.check_domain_grid()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MetricDoc = serde_json::from_str(text)?;
        MetricSpec::new(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.doc).expect("metric doc serializes")
    }

    pub fn doc(&self) -> &MetricDoc {
        &self.doc
    }

    pub fn dim(&self) -> usize {
        self.doc.dimension
    }

    pub fn family(&self) -> Family {
        self.doc.family
    }

    pub fn domain(&self) -> &[[f64; 2]] {
        &self.doc.domain
    }

    pub fn center(&self) -> Vec<f64> {
        self.doc.domain.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(&self.doc.domain).all(|(v, [lo, hi])| {
                let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
                *v >= lo - slack && *v <= hi + slack
            })
    }

    /// Riemannian part `a_ij(x)`, row-major into a 3x3 buffer.
    #[inline]
    pub(crate) fn eval_a(&self, x: &[f64]) -> [[f64; MAX_DIM]; MAX_DIM] {
        let n = self.dim();
        let mut a = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..n {
            for j in i..n {
                let v = self.doc.a[i][j].eval(x);
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        a
    }

    #[inline]
    pub(crate) fn eval_b(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let mut b = [0.0; MAX_DIM];
        if let Some(polys) = &self.doc.b {
            for (bi, p) in b.iter_mut().zip(polys) {
                *bi = p.eval(x);
            }
        }
        b
    }

    pub fn a_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let a = self.eval_a(x);
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| a[i][j])
    }

    pub fn b_vector(&self, x: &[f64]) -> DVector<f64> {
        let b = self.eval_b(x);
        DVector::from_fn(self.dim(), |i, _| b[i])
    }

    /// `a(x)` and `b(x)` evaluated once, for repeated norms at the same base
    /// point.
    #[inline]
    pub(crate) fn coefficients(&self, x: &[f64]) -> Coefficients {
        Coefficients {
            n: self.dim(),
            a: self.eval_a(x),
            b: self.doc.b.as_ref().map(|_| self.eval_b(x)),
        }
    }

    /// `F(x, y)` without any validity checks. Used inside the difference
    /// stencils, which may step slightly outside the domain box.
    #[inline]
    pub fn norm_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        self.coefficients(x).norm(y)
    }

    /// `F²(x, y)`; the squared norm is what the difference stencils act on.
    #[inline]
    pub fn norm_sq_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let f = self.norm_unchecked(x, y);
        f * f
    }

    /// `F(x, y)` with argument and validity checks.
    pub fn evaluate_f(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_args(x, y)?;
        let f = self.norm_unchecked(x, y);
        if !(f > 0.0 && f.is_finite()) {
            return Err(FinslerError::DegenerateSpec {
                point: x.to_vec(),
                reason: format!("F = {f}"),
            });
        }
        Ok(f)
    }

    /// Analytic fundamental tensor. For `F = α + β`:
    /// `g_ij = (F/α)(a_ij − α_i α_j) + (α_i + b_i)(α_j + b_j)` with
    /// `α_i = a_ij y^j / α`; for Riemannian specs this is `a_ij(x)`.
    pub fn closed_form_g(&self, x: &[f64], y: &[f64]) -> Result<DMatrix<f64>> {
        self.check_args(x, y)?;
        let a = self.a_matrix(x);
        if self.family() == Family::Riemannian {
            return Ok(a);
        }
        let yv = DVector::from_column_slice(y);
        let b = self.b_vector(x);
        let ay = &a * &yv;
        let alpha = yv.dot(&ay).sqrt();
        let f = alpha + b.dot(&yv);
        let alpha_i = ay / alpha;
        let l = &alpha_i + &b;
        Ok((a - &alpha_i * alpha_i.transpose()) * (f / alpha) + &l * l.transpose())
    }

    pub(crate) fn check_args(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.dim() || y.len() != self.dim() {
            return Err(FinslerError::invalid(
                "dimension",
                format!("expected vectors of length {}", self.dim()),
            ));
        }
        if !x.iter().chain(y).all(|v| v.is_finite()) {
            return Err(FinslerError::invalid("point", "non-finite entry"));
        }
        if y.iter().all(|&v| v == 0.0) {
            return Err(FinslerError::ZeroVector);
        }
        if !self.contains(x) {
            return Err(FinslerError::OutOfDomain { point: x.to_vec() });
        }
        if self.doc.b.is_some() {
            self.check_point(x)?;
        }
        Ok(())
    }

    /// Positive definiteness of `a` and `‖b‖_a < 1` at one point.
    fn check_point(&self, x: &[f64]) -> Result<()> {
        let n = self.dim();
        let a = self.a_matrix(x);
        for i in 0..n {
            for j in 0..i {
                let (u, v) = (a[(i, j)], a[(j, i)]);
                if (u - v).abs() > 1e-12 * (1.0 + u.abs().max(v.abs())) {
                    return Err(FinslerError::invalid("a", format!("not symmetric at {x:?}")));
                }
            }
        }
        let chol = a.cholesky().ok_or_else(|| FinslerError::DegenerateSpec {
            point: x.to_vec(),
            reason: "a(x) is not positive definite".into(),
        })?;
        if self.doc.b.is_some() {
            let b = self.b_vector(x);
            let b_norm_sq = b.dot(&chol.solve(&b));
            if !(b_norm_sq < 1.0) {
                return Err(FinslerError::DegenerateSpec {
                    point: x.to_vec(),
                    reason: format!("a-norm of b is {} >= 1", b_norm_sq.sqrt()),
                });
            }
        }
        Ok(())
    }

    fn check_domain_grid(&self) -> Result<()> {
        let n = self.dim();
        let per_axis: usize = if n == 2 { 17 } else { 9 };
        let total = per_axis.pow(n as u32);
        let mut x = vec![0.0; n];
        for flat in 0..total {
            let mut rem = flat;
            for (k, xk) in x.iter_mut().enumerate() {
                let idx = rem % per_axis;
                rem /= per_axis;
                let [lo, hi] = self.doc.domain[k];
                *xk = lo + (hi - lo) * idx as f64 / (per_axis - 1) as f64;
            }
            self.check_point(&x)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Coefficients {
    n: usize,
    a: [[f64; MAX_DIM]; MAX_DIM],
    b: Option<[f64; MAX_DIM]>,
}

impl Coefficients {
    #[inline]
    pub fn norm(&self, y: &[f64]) -> f64 {
        let n = self.n;
        let mut quad = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.a[i][j] * y[j];
            }
            quad += y[i] * row;
        }
        let alpha = quad.sqrt();
        match &self.b {
            None => alpha,
            Some(b) => alpha + (0..n).map(|i| b[i] * y[i]).sum::<f64>(),
        }
    }

    #[inline]
    pub fn norm_sq(&self, y: &[f64]) -> f64 {
        let f = self.norm(y);
        f * f
    }
}

/// Polynomial chart curve `c: [0, 1] → M`, one coefficient list per coordinate
/// in ascending powers of `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveDoc", into = "CurveDoc")]
pub struct CurveSpec {
    control: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveDoc {
    pub control: Vec<Vec<f64>>,
}

impl From<CurveSpec> for CurveDoc {
    fn from(c: CurveSpec) -> Self {
        CurveDoc { control: c.control }
    }
}

impl TryFrom<CurveDoc> for CurveSpec {
    type Error = FinslerError;

    fn try_from(doc: CurveDoc) -> Result<Self> {
        CurveSpec::new(doc.control)
    }
}

impl CurveSpec {
    pub fn new(control: Vec<Vec<f64>>) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&control.len()) {
            return Err(FinslerError::invalid("control", "curve must have 2 or 3 coordinates"));
        }
        if control.iter().flatten().any(|c| !c.is_finite()) {
            return Err(FinslerError::invalid("control", "non-finite coefficient"));
        }
        let curve = CurveSpec { control };
        for k in 0..CURVE_CHECK_SAMPLES {
            let t = k as f64 / (CURVE_CHECK_SAMPLES - 1) as f64;
            let (_, v) = curve.eval(t);
            if v.iter().map(|c| c * c).sum::<f64>().sqrt() <= 1e-12 {
                return Err(FinslerError::invalid("control", format!("velocity vanishes at t = {t}")));
            }
        }
        Ok(curve)
    }

    /// Straight segment from `a` to `b`.
    pub fn segment(a: &[f64], b: &[f64]) -> Result<Self> {
        CurveSpec::new(a.iter().zip(b).map(|(p, q)| vec![*p, q - p]).collect())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&CurveDoc::from(self.clone())).expect("curve serializes")
    }

    pub fn dim(&self) -> usize {
        self.control.len()
    }

    pub fn control(&self) -> &[Vec<f64>] {
        &self.control
    }

    /// Position and velocity at `t` without range checking.
    pub fn eval(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let mut pos = Vec::with_capacity(self.dim());
        let mut vel = Vec::with_capacity(self.dim());
        for coeffs in &self.control {
            // Horner for the value and the derivative together.
            let (mut p, mut dp) = (0.0, 0.0);
            for &c in coeffs.iter().rev() {
                dp = dp * t + p;
                p = p * t + c;
            }
            pos.push(p);
            vel.push(dp);
        }
        (pos, vel)
    }

    pub fn evaluate(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if !(0.0..=1.0).contains(&t) {
            return Err(FinslerError::OutOfRange { value: t, lo: 0.0, hi: 1.0 });
        }
        Ok(self.eval(t))
    }

    pub fn start(&self) -> Vec<f64> {
        self.eval(0.0).0
    }

    pub fn end(&self) -> Vec<f64> {
        self.eval(1.0).0
    }

    /// The same trace run backwards, `t ↦ c(1 - t)`.
    pub fn reversed(&self) -> CurveSpec {
        let control = self
            .control
            .iter()
            .map(|coeffs| {
                // Expand sum_k c_k (1 - t)^k in powers of t.
                let mut out = vec![0.0; coeffs.len()];
                for (k, &c) in coeffs.iter().enumerate() {
                    let mut binom = 1.0;
                    for j in 0..=k {
                        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                        out[j] += c * binom * sign;
                        binom = binom * (k - j) as f64 / (j + 1) as f64;
                    }
                }
                out
            })
            .collect();
        CurveSpec { control }
    }

    /// Checks the curve against a metric's chart on the sampling grid.
    pub fn check_for(&self, spec: &MetricSpec) -> Result<()> {
        if self.dim() != spec.dim() {
            return Err(FinslerError::invalid(
                "control",
                format!("curve has dimension {}, metric has {}", self.dim(), spec.dim()),
            ));
        }
        for k in 0..CURVE_CHECK_SAMPLES {
            let t = k as f64 / (CURVE_CHECK_SAMPLES - 1) as f64;
            if !spec.contains(&self.eval(t).0) {
                return Err(FinslerError::CurveLeavesDomain { t });
            }
        }
        Ok(())
    }
}

/// Parses comma-separated decimals such as `"1,2"` or `"0.5, -1e-3"`.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| FinslerError::invalid("vector", format!("cannot parse `{s}` as a number")))
        })
        .collect()
}

pub fn format_vector(v: &[f64]) -> String {
    v.iter().map(|c| format!("{c:?}")).collect::<Vec<_>>().join(",")
}
