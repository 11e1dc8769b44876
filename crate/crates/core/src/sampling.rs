//! Deterministic sample sets: fiber directions and chart points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::metric::MetricSpec;

const GOLDEN_FRACTION: f64 = 0.618_033_988_749_894_9;

/// Fraction of each domain interval, around its center, that chart points are
/// drawn from. Keeps difference stencils inside the validated box.
pub const INTERIOR_FRACTION: f64 = 0.9;

/// Euclidean unit vectors forming a low-discrepancy grid on `S^{n-1}`.
///
/// `n = 2`: equispaced angles; `n = 3`: spherical Fibonacci lattice. The seed
/// only rotates the grid.
pub fn fiber_directions(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let offset = (seed as f64 * GOLDEN_FRACTION).fract();
    match n {
        2 => (0..count)
            .map(|k| {
                let angle = std::f64::consts::TAU * (k as f64 + offset) / count as f64;
                vec![angle.cos(), angle.sin()]
            })
            .collect(),
        3 => (0..count)
            .map(|k| {
                let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let phi = std::f64::consts::TAU * (k as f64 * GOLDEN_FRACTION + offset).fract();
                vec![r * phi.cos(), r * phi.sin(), z]
            })
            .collect(),
        _ => panic!("unsupported dimension {n}"),
    }
}

/// Pseudo-random `(x, y)` pairs: `x` uniform in the interior of the domain box,
/// `y` uniform on the Euclidean unit sphere. Fixed by the seed.
pub fn chart_samples(spec: &MetricSpec, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.dim();
    (0..count)
        .map(|_| {
            let x = spec
                .domain()
                .iter()
                .map(|[lo, hi]| {
                    let mid = 0.5 * (lo + hi);
                    let half = 0.5 * (hi - lo) * INTERIOR_FRACTION;
                    mid + half * (2.0 * rng.random::<f64>() - 1.0)
                })
                .collect();
            let y = loop {
                let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|c: &f64| c * c).sum::<f64>().sqrt();
                if norm > 1e-6 {
                    break v.into_iter().map(|c| c / norm).collect();
                }
            };
            (x, y)
        })
        .collect()
}
