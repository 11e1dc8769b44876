use finsler::bundle::{self, bundled_families};
use finsler::search::{scan_grid, scan_to_csv, unicorn_candidates, ScanRow};
use finsler::{landscape_scan, nelder_mead, objective, FamilySpec, FdConfig, FinslerError, SearchConfig};
use proptest::prelude::*;

fn cfg() -> FdConfig {
    FdConfig::default()
}

fn best_row(rows: &[ScanRow]) -> &ScanRow {
    rows.iter()
        .filter(|r| r.landsberg_dev.is_some())
        .min_by(|a, b| a.landsberg_dev.unwrap().total_cmp(&b.landsberg_dev.unwrap()))
        .unwrap()
}

#[test]
fn objective_examples() {
    let fam = bundle::randers_family_1d();
    assert!(objective(&fam, &[0.0], 8, 0, &cfg()).unwrap() <= 1e-7);
    for seed in [0, 1, 2] {
        assert!(objective(&fam, &[0.2], 8, seed, &cfg()).unwrap() > 1e-3);
    }
    let a = objective(&fam, &[0.13], 8, 5, &cfg()).unwrap();
    let b = objective(&fam, &[0.13], 8, 5, &cfg()).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn out_of_bounds_members_are_invalid() {
    let fam = bundle::randers_family_1d();
    assert!(matches!(fam.instantiate(&[0.9]), Err(FinslerError::InvalidInstance { .. })));
    assert!(fam.instantiate(&[0.5]).is_ok());
}

#[test]
fn nelder_mead_finds_the_landsberg_locus() {
    let fam = bundle::randers_family_1d();
    let trace = nelder_mead(&fam, &[0.3], &SearchConfig::default(), &cfg()).unwrap();
    assert!(trace.best.theta[0].abs() < 1e-3, "{:?}", trace.best);
    assert!(trace.best.objective < 1e-5);
    assert!(trace.evals <= 200);

    // Best-so-far objective never increases.
    for pair in trace.iterates.windows(2) {
        assert!(pair[1].objective <= pair[0].objective);
    }

    // The 101-point scan puts its minimum at the grid point nearest 0.
    let rows = landscape_scan(&fam, 101, 8, 0, &cfg()).unwrap();
    let best = best_row(&rows);
    assert!(best.theta[0].abs() < 1e-12);
    assert!((trace.best.theta[0] - best.theta[0]).abs() < 0.5 / 100.0);
}

#[test]
fn flat_family_stops_immediately() {
    let fam = bundle::minkowski_family();
    let k = fam.num_params();
    let trace = nelder_mead(&fam, &[0.1], &SearchConfig::default(), &cfg()).unwrap();
    assert!(trace.converged);
    assert!(trace.evals <= (k + 1) + k + 2, "{}", trace.evals);
}

#[test]
fn two_parameter_search_lands_near_berwald() {
    let fam = bundle::randers_family_2d();
    let trace = nelder_mead(&fam, &[0.2, 0.3], &SearchConfig::default(), &cfg()).unwrap();
    if trace.best.landsberg_dev < 1e-4 {
        assert!(trace.best.berwald_dev < 1e-3, "{:?}", trace.best);
    }
    assert!(trace.best.landsberg_dev < trace.iterates[0].landsberg_dev);
}

#[test]
fn search_is_reproducible() {
    let fam = bundle::randers_family_2d();
    let search = SearchConfig {
        budget: 40,
        ..SearchConfig::default()
    };
    let a = nelder_mead(&fam, &[0.1, -0.2], &search, &cfg()).unwrap();
    let b = nelder_mead(&fam, &[0.1, -0.2], &search, &cfg()).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.evals <= 40);
}

#[test]
fn search_rejects_bad_inputs() {
    let fam = bundle::randers_family_1d();
    assert!(nelder_mead(&fam, &[0.7], &SearchConfig::default(), &cfg()).is_err());
    let tiny = SearchConfig {
        budget: 1,
        ..SearchConfig::default()
    };
    assert!(nelder_mead(&fam, &[0.1], &tiny, &cfg()).is_err());
}

#[test]
fn scan_is_symmetric_in_theta() {
    let fam = bundle::randers_family_1d();
    let rows = landscape_scan(&fam, 21, 8, 0, &cfg()).unwrap();
    for (r, mirror) in rows.iter().zip(rows.iter().rev()) {
        assert!((r.theta[0] + mirror.theta[0]).abs() < 1e-12);
        let (l, lm) = (r.landsberg_dev.unwrap(), mirror.landsberg_dev.unwrap());
        assert!((l - lm).abs() <= 1e-6, "{l} vs {lm}");
    }
}

#[test]
fn no_bundled_family_shows_a_unicorn() {
    for (name, fam) in bundled_families() {
        let resolution = if fam.num_params() == 1 { 101 } else { 21 };
        let rows = landscape_scan(&fam, resolution, 8, 0, &cfg()).unwrap();
        assert_eq!(rows.len(), resolution.pow(fam.num_params() as u32));
        assert!(unicorn_candidates(&rows, 1e-5, 1e-3).is_empty(), "{name}");
        for r in &rows {
            if let (Some(l), Some(b)) = (r.landsberg_dev, r.berwald_dev) {
                if l < 1e-5 {
                    assert!(b < 1e-4, "{name}: {r:?}");
                }
            }
        }
    }
}

#[test]
fn scan_grid_and_csv() {
    let fam = bundle::randers_family_2d();
    let grid = scan_grid(&fam, 3).unwrap();
    assert_eq!(grid.len(), 9);
    assert_eq!(grid[0], vec![-0.4, -0.4]);
    assert_eq!(grid[8], vec![0.4, 0.4]);
    assert!(scan_grid(&fam, 1).is_err());

    let rows = landscape_scan(&fam, 3, 4, 0, &cfg()).unwrap();
    let csv = scan_to_csv(&fam, &rows);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "theta1,theta2,landsberg_dev,berwald_dev,status");
    assert_eq!(lines.count(), 9);
}

#[test]
fn invalid_members_are_marked_in_scans() {
    // Widen the bounds beyond the valid region: b = (θ x², 0) with |θ| ≥ 1.
    let mut doc = bundle::randers_family_1d().doc().clone();
    doc.bounds = vec![[-1.5, 1.5]];
    let fam = FamilySpec::new(doc);
    // Construction samples the corners, so the family itself is rejected.
    assert!(fam.is_err());
}

#[test]
fn family_json_round_trip() {
    for (_, fam) in bundled_families() {
        let back = FamilySpec::from_json(&fam.to_json()).unwrap();
        assert_eq!(back.to_json(), fam.to_json());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn objective_is_nonnegative_and_even(theta in 0.0f64..0.5) {
        let fam = bundle::randers_family_1d();
        let plus = objective(&fam, &[theta], 4, 0, &cfg()).unwrap();
        let minus = objective(&fam, &[-theta], 4, 0, &cfg()).unwrap();
        prop_assert!(plus >= 0.0);
        prop_assert!((plus - minus).abs() <= 1e-6);
    }
}
