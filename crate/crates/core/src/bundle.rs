//! Bundled example metrics, curves and search families.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{FinslerError, Result};
use crate::metric::{CurveSpec, Family, MetricDoc, MetricSpec, Polynomial};
use crate::search::{FamilyDoc, FamilySpec, ParamField, ParamSpec};

const BOX: [f64; 2] = [-1.0, 1.0];

fn diagonal(n: usize, entries: &[Polynomial]) -> Vec<Vec<Polynomial>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { entries[i].clone() } else { Polynomial::zero() })
                .collect()
        })
        .collect()
}

fn build(doc: MetricDoc) -> MetricSpec {
    MetricSpec::new(doc).expect("bundled metric is valid")
}

/// Euclidean metric on `[-1, 1]^n`.
pub fn euclidean(n: usize) -> MetricSpec {
    build(MetricDoc {
        dimension: n,
        family: Family::Riemannian,
        a: diagonal(n, &vec![Polynomial::constant(n, 1.0); n]),
        b: None,
        domain: vec![BOX; n],
    })
}

/// Constant diagonal Riemannian metric.
pub fn diagonal_riemannian(entries: &[f64]) -> MetricSpec {
    let n = entries.len();
    let polys: Vec<Polynomial> = entries.iter().map(|&d| Polynomial::constant(n, d)).collect();
    build(MetricDoc {
        dimension: n,
        family: Family::Riemannian,
        a: diagonal(n, &polys),
        b: None,
        domain: vec![BOX; n],
    })
}

/// `a_ij = (1 + 0.2 x¹) δ_ij` in dimension 2.
pub fn conformal_riemannian() -> MetricSpec {
    let factor = Polynomial::from_terms(&[(&[0, 0], 1.0), (&[1, 0], 0.2)]);
    build(MetricDoc {
        dimension: 2,
        family: Family::Riemannian,
        a: diagonal(2, &[factor.clone(), factor]),
        b: None,
        domain: vec![BOX; 2],
    })
}

/// Flat Randers metric `|y| + 0.3 y¹`.
pub fn minkowski_randers() -> MetricSpec {
    build(MetricDoc {
        dimension: 2,
        family: Family::LocallyMinkowskiRanders,
        a: diagonal(2, &[Polynomial::constant(2, 1.0), Polynomial::constant(2, 1.0)]),
        b: Some(vec![Polynomial::constant(2, 0.3), Polynomial::zero()]),
        domain: vec![BOX; 2],
    })
}

/// Flat-α Randers metric with the non-parallel 1-form `β = θ x² dx¹`.
pub fn nonparallel_randers(theta: f64) -> MetricSpec {
    build(MetricDoc {
        dimension: 2,
        family: Family::Randers,
        a: diagonal(2, &[Polynomial::constant(2, 1.0), Polynomial::constant(2, 1.0)]),
        b: Some(vec![Polynomial::monomial(vec![0, 1], theta), Polynomial::zero()]),
        domain: vec![BOX; 2],
    })
}

/// Diagonal segment from `(-0.5, -0.5)` to `(0.5, 0.5)`.
pub fn line() -> CurveSpec {
    CurveSpec::segment(&[-0.5, -0.5], &[0.5, 0.5]).expect("bundled curve is valid")
}

/// `c(t) = (-0.5 + t, -0.5 + 1.6 t - 0.8 t²)`.
pub fn parabola() -> CurveSpec {
    CurveSpec::new(vec![vec![-0.5, 1.0], vec![-0.5, 1.6, -0.8]]).expect("bundled curve is valid")
}

fn family(base: MetricSpec, params: Vec<ParamSpec>, bounds: Vec<[f64; 2]>) -> FamilySpec {
    FamilySpec::new(FamilyDoc {
        base: base.doc().clone(),
        params,
        bounds,
    })
    .expect("bundled family is valid")
}

/// `β = θ x² dx¹` on flat α, `θ ∈ [-0.5, 0.5]`.
pub fn randers_family_1d() -> FamilySpec {
    family(
        nonparallel_randers(0.0),
        vec![ParamSpec {
            name: "theta".into(),
            field: ParamField::B,
            index: vec![0],
            exps: vec![0, 1],
        }],
        vec![[-0.5, 0.5]],
    )
}

/// `β = θ₁ dx¹ + θ₂ x¹ dx²` on flat α. Parallel exactly on `θ₂ = 0`.
pub fn randers_family_2d() -> FamilySpec {
    let mut base = nonparallel_randers(0.0).doc().clone();
    base.b = Some(vec![Polynomial::constant(2, 0.0), Polynomial::monomial(vec![1, 0], 0.0)]);
    family(
        build(base),
        vec![
            ParamSpec {
                name: "theta1".into(),
                field: ParamField::B,
                index: vec![0],
                exps: vec![0, 0],
            },
            ParamSpec {
                name: "theta2".into(),
                field: ParamField::B,
                index: vec![1],
                exps: vec![1, 0],
            },
        ],
        vec![[-0.4, 0.4], [-0.4, 0.4]],
    )
}

/// Constant `b = (θ, 0)` on flat α: every member is locally Minkowski.
pub fn minkowski_family() -> FamilySpec {
    family(
        minkowski_randers(),
        vec![ParamSpec {
            name: "theta".into(),
            field: ParamField::B,
            index: vec![0],
            exps: vec![0, 0],
        }],
        vec![[-0.5, 0.5]],
    )
}

/// All bundled metric specs by file stem.
pub fn bundled_specs() -> Vec<(&'static str, MetricSpec)> {
    vec![
        ("euclid2", euclidean(2)),
        ("riemannian", diagonal_riemannian(&[1.0, 4.0])),
        ("conformal", conformal_riemannian()),
        ("minkowski_randers", minkowski_randers()),
        ("randers_nonparallel", nonparallel_randers(0.2)),
    ]
}

pub fn bundled_curves() -> Vec<(&'static str, CurveSpec)> {
    vec![("line", line()), ("parabola", parabola())]
}

pub fn bundled_families() -> Vec<(&'static str, FamilySpec)> {
    vec![
        ("family_randers_1d", randers_family_1d()),
        ("family_randers_2d", randers_family_2d()),
        ("family_minkowski", minkowski_family()),
    ]
}

fn write(dir: &Path, stem: &str, text: String) -> Result<PathBuf> {
    let path = dir.join(format!("{stem}.json"));
    fs::write(&path, text + "\n").map_err(|source| FinslerError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Writes every bundled file into `dir`, returning the paths written.
pub fn bundle_examples(dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| FinslerError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for (stem, spec) in bundled_specs() {
        written.push(write(dir, stem, spec.to_json())?);
    }
    for (stem, curve) in bundled_curves() {
        written.push(write(dir, stem, curve.to_json())?);
    }
    for (stem, fam) in bundled_families() {
        written.push(write(dir, stem, fam.to_json())?);
    }
    Ok(written)
}
