//! Derivative-free search for small Landsberg deviation over parametrized
//! metric families, logging the Berwald deviation alongside.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::FdConfig;
use crate::connection::{classify, Classification};
use crate::error::{FinslerError, Result};
use crate::metric::{MetricDoc, MetricSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamField {
    A,
    B,
}

/// One free coefficient: the monomial `exps` of `a[i][j]` (mirrored to
/// `a[j][i]`) or of `b[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub name: String,
    pub field: ParamField,
    pub index: Vec<usize>,
    pub exps: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDoc {
    pub base: MetricDoc,
    pub params: Vec<ParamSpec>,
    pub bounds: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilyDoc", into = "FamilyDoc")]
pub struct FamilySpec {
    doc: FamilyDoc,
}

impl From<FamilySpec> for FamilyDoc {
    fn from(f: FamilySpec) -> Self {
        f.doc
    }
}

impl TryFrom<FamilyDoc> for FamilySpec {
    type Error = FinslerError;

    fn try_from(doc: FamilyDoc) -> Result<Self> {
        FamilySpec::new(doc)
    }
}

impl FamilySpec {
    pub fn new(doc: FamilyDoc) -> Result<Self> {
        let k = doc.params.len();
        let n = doc.base.dimension;
        if k == 0 {
            return Err(FinslerError::invalid("params", "at least one parameter is required"));
        }
        if doc.bounds.len() != k {
            return Err(FinslerError::invalid("bounds", format!("expected {k} intervals")));
        }
        for [lo, hi] in &doc.bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(FinslerError::invalid("bounds", format!("bad interval [{lo}, {hi}]")));
            }
        }
        for p in &doc.params {
            let ok = match p.field {
                ParamField::A => p.index.len() == 2 && p.index.iter().all(|&i| i < n),
                ParamField::B => p.index.len() == 1 && p.index[0] < n && doc.base.b.is_some(),
            };
            if !ok {
                return Err(FinslerError::invalid("params", format!("bad index {:?} for `{}`", p.index, p.name)));
            }
            if p.exps.len() != n {
                return Err(FinslerError::invalid("params", format!("`{}` needs {n} exponents", p.name)));
            }
        }
        let family = FamilySpec { doc };
        // Corners and center of the bounds box must all be valid metrics.
        for mask in 0..(1usize << k) {
            let corner: Vec<f64> = family
                .doc
                .bounds
                .iter()
                .enumerate()
                .map(|(i, [lo, hi])| if mask & (1 << i) != 0 { *hi } else { *lo })
                .collect();
            family.instantiate(&corner)?;
        }
        family.instantiate(&family.center())?;
        Ok(family)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.doc).expect("family serializes")
    }

    pub fn doc(&self) -> &FamilyDoc {
        &self.doc
    }

    pub fn num_params(&self) -> usize {
        self.doc.params.len()
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.doc.bounds
    }

    pub fn center(&self) -> Vec<f64> {
        self.doc.bounds.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect()
    }

    pub fn in_bounds(&self, theta: &[f64]) -> bool {
        theta.len() == self.num_params()
            && theta.iter().zip(&self.doc.bounds).all(|(t, [lo, hi])| t >= lo && t <= hi)
    }

    pub fn instantiate(&self, theta: &[f64]) -> Result<MetricSpec> {
        if theta.len() != self.num_params() {
            return Err(FinslerError::invalid("theta", format!("expected {} values", self.num_params())));
        }
        let invalid = |reason: String| FinslerError::InvalidInstance {
            theta: theta.to_vec(),
            reason,
        };
        if !self.in_bounds(theta) {
            return Err(invalid("outside the parameter bounds".into()));
        }
        let mut doc = self.doc.base.clone();
        for (p, &value) in self.doc.params.iter().zip(theta) {
            match p.field {
                ParamField::A => {
                    let (i, j) = (p.index[0], p.index[1]);
                    doc.a[i][j].set_coefficient(&p.exps, value);
                    if i != j {
                        doc.a[j][i].set_coefficient(&p.exps, value);
                    }
                }
                ParamField::B => {
                    if let Some(b) = doc.b.as_mut() {
                        b[p.index[0]].set_coefficient(&p.exps, value);
                    }
                }
            }
        }
        MetricSpec::new(doc).map_err(|e| invalid(e.to_string()))
    }
}

/// Landsberg and Berwald deviations of the family member `θ`.
pub fn evaluate(family: &FamilySpec, theta: &[f64], samples: usize, seed: u64, cfg: &FdConfig) -> Result<Classification> {
    let spec = family.instantiate(theta)?;
    classify(&spec, samples, seed, cfg)
}

/// The sampled Landsberg deviation of the member `θ`.
pub fn objective(family: &FamilySpec, theta: &[f64], samples: usize, seed: u64, cfg: &FdConfig) -> Result<f64> {
    Ok(evaluate(family, theta, samples, seed, cfg)?.landsberg_dev)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub theta: Vec<f64>,
    pub landsberg_dev: f64,
    pub berwald_dev: f64,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    /// Best vertex after the initial simplex and after every iteration.
    pub iterates: Vec<Iterate>,
    pub best: Iterate,
    pub converged: bool,
    pub stop_reason: String,
    pub evals: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub samples: usize,
    pub seed: u64,
    pub budget: usize,
    pub tol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            samples: 8,
            seed: 0,
            budget: 200,
            tol: 1e-6,
        }
    }
}

#[derive(Clone)]
struct Vertex {
    theta: Vec<f64>,
    class: Option<Classification>,
    value: f64,
}

impl Vertex {
    fn iterate(&self) -> Iterate {
        let c = self.class.as_ref().expect("best vertex is valid");
        Iterate {
            theta: self.theta.clone(),
            landsberg_dev: c.landsberg_dev,
            berwald_dev: c.berwald_dev,
            objective: self.value,
        }
    }
}

struct Evaluator<'a> {
    family: &'a FamilySpec,
    search: &'a SearchConfig,
    cfg: &'a FdConfig,
    evals: usize,
}

impl Evaluator<'_> {
    fn eval_many(&mut self, thetas: Vec<Vec<f64>>) -> Result<Vec<Vertex>> {
        self.evals += thetas.len();
        thetas
            .into_par_iter()
            .map(|theta| match evaluate(self.family, &theta, self.search.samples, self.search.seed, self.cfg) {
                Ok(c) => Ok(Vertex {
                    value: c.landsberg_dev,
                    class: Some(c),
                    theta,
                }),
                // Invalid members sit at +inf so the simplex can back off.
                Err(FinslerError::InvalidInstance { .. }) => Ok(Vertex {
                    theta,
                    class: None,
                    value: f64::INFINITY,
                }),
                Err(e) => Err(e),
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    }

    fn eval(&mut self, theta: Vec<f64>) -> Result<Vertex> {
        Ok(self.eval_many(vec![theta])?.remove(0))
    }
}

fn affine(base: &[f64], dir_from: &[f64], dir_to: &[f64], s: f64) -> Vec<f64> {
    // base + s (dir_to - dir_from)
    base.iter()
        .zip(dir_from.iter().zip(dir_to))
        .map(|(b, (f, t))| b + s * (t - f))
        .collect()
}

/// Nelder–Mead simplex minimization of the Landsberg deviation.
///
/// Stops when the simplex diameter drops below `tol`, when all vertices carry
/// the same objective value, or before an iteration could exceed `budget`
/// evaluations.
pub fn nelder_mead(family: &FamilySpec, theta0: &[f64], search: &SearchConfig, cfg: &FdConfig) -> Result<SearchTrace> {
    let k = family.num_params();
    if !family.in_bounds(theta0) {
        return Err(FinslerError::invalid("theta0", "must lie within the parameter bounds"));
    }
    if search.budget < k + 1 {
        return Err(FinslerError::invalid("budget", format!("must be at least {}", k + 1)));
    }
    if !(search.tol > 0.0) {
        return Err(FinslerError::invalid("tol", "must be positive"));
    }
    let mut ev = Evaluator {
        family,
        search,
        cfg,
        evals: 0,
    };

    let mut initial = vec![theta0.to_vec()];
    for i in 0..k {
        let [lo, hi] = family.bounds()[i];
        let step = 0.1 * (hi - lo);
        let mut v = theta0.to_vec();
        v[i] = if v[i] + step <= hi { v[i] + step } else { v[i] - step };
        initial.push(v);
    }
    let mut simplex = ev.eval_many(initial)?;
    if simplex[0].class.is_none() {
        return Err(FinslerError::InvalidInstance {
            theta: theta0.to_vec(),
            reason: "starting point is not a valid metric".into(),
        });
    }

    let mut iterates = Vec::new();
    let (converged, stop_reason) = loop {
        simplex.sort_by(|a, b| a.value.total_cmp(&b.value));
        iterates.push(simplex[0].iterate());

        let best = simplex[0].theta.clone();
        let diameter = simplex[1..]
            .iter()
            .map(|v| v.theta.iter().zip(&best).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        if diameter < search.tol {
            break (true, "simplex diameter below tol".to_string());
        }
        if simplex.iter().all(|v| v.value == simplex[0].value) {
            break (true, "flat simplex".to_string());
        }
        if ev.evals + k + 2 > search.budget {
            break (false, "evaluation budget exhausted".to_string());
        }

        let mut centroid = vec![0.0; k];
        for v in &simplex[..k] {
            for (c, t) in centroid.iter_mut().zip(&v.theta) {
                *c += t / k as f64;
            }
        }
        let worst = simplex[k].clone();
        let second_worst = simplex[k - 1].value.max(simplex[0].value);

        let reflected = ev.eval(affine(&centroid, &worst.theta, &centroid, 1.0))?;
        if reflected.value < simplex[0].value {
            let expanded = ev.eval(affine(&centroid, &worst.theta, &centroid, 2.0))?;
            simplex[k] = if expanded.value < reflected.value { expanded } else { reflected };
            continue;
        }
        if reflected.value < second_worst {
            simplex[k] = reflected;
            continue;
        }
        let contracted = if reflected.value < worst.value {
            let c = ev.eval(affine(&centroid, &worst.theta, &centroid, 0.5))?;
            (c.value <= reflected.value).then_some(c)
        } else {
            let c = ev.eval(affine(&centroid, &centroid, &worst.theta, 0.5))?;
            (c.value < worst.value).then_some(c)
        };
        match contracted {
            Some(c) => simplex[k] = c,
            None => {
                let shrunk: Vec<Vec<f64>> = simplex[1..]
                    .iter()
                    .map(|v| affine(&best, &best, &v.theta, 0.5))
                    .collect();
                let fresh = ev.eval_many(shrunk)?;
                for (slot, v) in simplex[1..].iter_mut().zip(fresh) {
                    *slot = v;
                }
            }
        }
    };

    Ok(SearchTrace {
        best: iterates.last().expect("at least one iterate").clone(),
        iterates,
        converged,
        stop_reason,
        evals: ev.evals,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub theta: Vec<f64>,
    pub landsberg_dev: Option<f64>,
    pub berwald_dev: Option<f64>,
    pub status: String,
}

/// Regular grid of `resolution` points per parameter axis (at most two axes).
pub fn scan_grid(family: &FamilySpec, resolution: usize) -> Result<Vec<Vec<f64>>> {
    let k = family.num_params();
    if k > 2 {
        return Err(FinslerError::invalid("params", "grid scans support at most two parameters"));
    }
    if resolution < 2 {
        return Err(FinslerError::invalid("grid", "resolution must be at least 2"));
    }
    let axis = |i: usize| -> Vec<f64> {
        let [lo, hi] = family.bounds()[i];
        (0..resolution)
            .map(|s| lo + (hi - lo) * s as f64 / (resolution - 1) as f64)
            .collect()
    };
    Ok(match k {
        1 => axis(0).into_iter().map(|t| vec![t]).collect(),
        _ => {
            let (a0, a1) = (axis(0), axis(1));
            a0.iter().flat_map(|&u| a1.iter().map(move |&v| vec![u, v])).collect()
        }
    })
}

/// Landsberg and Berwald deviations on the regular grid; invalid members are
/// kept and marked.
pub fn landscape_scan(
    family: &FamilySpec,
    resolution: usize,
    samples: usize,
    seed: u64,
    cfg: &FdConfig,
) -> Result<Vec<ScanRow>> {
    let grid = scan_grid(family, resolution)?;
    grid.into_par_iter()
        .map(|theta| match evaluate(family, &theta, samples, seed, cfg) {
            Ok(c) => Ok(ScanRow {
                theta,
                landsberg_dev: Some(c.landsberg_dev),
                berwald_dev: Some(c.berwald_dev),
                status: "ok".into(),
            }),
            Err(FinslerError::InvalidInstance { reason, .. }) => Ok(ScanRow {
                theta,
                landsberg_dev: None,
                berwald_dev: None,
                status: format!("invalid: {reason}"),
            }),
            Err(e) => Err(e),
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Grid points that are Landsberg-small but not Berwald-small.
pub fn unicorn_candidates(rows: &[ScanRow], landsberg_below: f64, berwald_above: f64) -> Vec<&ScanRow> {
    rows.iter()
        .filter(|r| matches!((r.landsberg_dev, r.berwald_dev), (Some(l), Some(b)) if l < landsberg_below && b > berwald_above))
        .collect()
}

pub fn scan_to_csv(family: &FamilySpec, rows: &[ScanRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = family.doc().params.iter().map(|p| p.name.clone()).collect();
    header.extend(["landsberg_dev", "berwald_dev", "status"].map(String::from));
    w.write_record(&header).expect("in-memory csv");
    for r in rows {
        let mut rec: Vec<String> = r.theta.iter().map(|t| format!("{t:?}")).collect();
        rec.push(r.landsberg_dev.map(|v| format!("{v:e}")).unwrap_or_default());
        rec.push(r.berwald_dev.map(|v| format!("{v:e}")).unwrap_or_default());
        rec.push(r.status.clone());
        w.write_record(&rec).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
}
