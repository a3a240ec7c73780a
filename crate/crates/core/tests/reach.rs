use std::f64::consts::FRAC_PI_2;

use impulse_qvi::catalog::{self, ConeCase, Scalar};
use impulse_qvi::cost::{brute_force_value, EnumerationBudget};
use impulse_qvi::geometry::CandidateSet;
use impulse_qvi::grid::SpatialGrid;
use impulse_qvi::io::read_csv_hash;
use impulse_qvi::reach::{
    compare_refinement, compute_reachable, reachable_at, refine_partition, uniform_partition, Reach, ReachOptions,
    ReachableMask,
};
use impulse_qvi::solver::{solve, SolveOptions};
use impulse_qvi::verify::{compare_mask_to_oracle, uncovered_finite_nodes, AnalyticOracle, OracleKind};
use impulse_qvi::Error;

fn line(cells: usize) -> SpatialGrid {
    SpatialGrid::new(vec![-2.0], vec![3.0], vec![cells]).unwrap()
}

fn square(cells: usize) -> SpatialGrid {
    SpatialGrid::new(vec![-3.0; 2], vec![3.0; 2], vec![cells; 2]).unwrap()
}

#[test]
fn forward_cone_masks_follow_the_half_lines() {
    let grid = line(100);
    let part = uniform_partition(0.0, 1.0, 10);
    for case in [ConeCase::ForwardUnit, ConeCase::ForwardNegative, ConeCase::BackwardUnit, ConeCase::ForwardPositive] {
        let spec = catalog::cone_case(case);
        let mask = compute_reachable(&spec, &grid, &part, &ReachOptions::default()).unwrap();
        let cmp = compare_mask_to_oracle(&mask, &AnalyticOracle::new(OracleKind::Domain(case)), 1.0);
        assert!(cmp.passed, "{case:?}: {cmp:?}");
    }
    let spec = catalog::cone_case(ConeCase::ForwardPositive);
    let mask = compute_reachable(&spec, &grid, &part, &ReachOptions::default()).unwrap();
    assert!((0..part.len()).all(|k| mask.is_full(k)));
}

#[test]
fn full_cone_reaches_everything() {
    let spec = catalog::benchmark(Scalar::ZeroCosts);
    let part = uniform_partition(0.0, 1.0, 5);
    let mask = compute_reachable(&spec, &line(80), &part, &ReachOptions::default()).unwrap();
    assert!((0..part.len()).all(|k| mask.is_full(k)));
}

#[test]
fn rotation_point_queries() {
    let spec = catalog::rotation_disk();
    let grid = square(60);
    let t = spec.horizon - FRAC_PI_2;
    let part = uniform_partition(t, spec.horizon, 12);
    assert_eq!(reachable_at(&spec, &grid, &part, t, &[0.0, 0.5]).unwrap(), Reach::Reachable);
    assert_eq!(reachable_at(&spec, &grid, &part, t, &[0.0, 2.5]).unwrap(), Reach::Unreachable);
    assert_eq!(reachable_at(&spec, &grid, &part, t, &[4.0, 0.0]).unwrap(), Reach::Unknown);

    let early = spec.horizon - FRAC_PI_2 - 0.3;
    let mask = compute_reachable(&spec, &grid, &uniform_partition(early, spec.horizon, 14), &ReachOptions::default()).unwrap();
    assert!(mask.is_full(0));
    assert_eq!(mask.reachable_at(early, &[2.0, 2.9]), Reach::Reachable);
    assert_eq!(mask.reachable_at(spec.horizon, &[0.3, 0.3]), Reach::Reachable);
}

#[test]
fn refining_the_partition_only_adds_points() {
    for (spec, grid) in [(catalog::rotation_disk(), square(40)), (catalog::cone_case(ConeCase::ForwardUnit), line(100))] {
        let coarse = uniform_partition(0.0, spec.horizon, 4);
        let fine = refine_partition(&coarse);
        let a = compute_reachable(&spec, &grid, &coarse, &ReachOptions::default()).unwrap();
        let b = compute_reachable(&spec, &grid, &fine, &ReachOptions::default()).unwrap();
        let r = compare_refinement(&a, &b);
        assert_eq!(r.times.len(), coarse.len());
        assert!(r.monotone(), "{r:?}");
        assert!(r.added_volume.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn mask_covers_every_finite_value() {
    let spec = catalog::benchmark(Scalar::OneSided);
    let grid = line(100);
    let vg = solve(&spec, &grid, &SolveOptions::new(20)).unwrap();
    let mask = compute_reachable(&spec, &grid, &vg.times, &ReachOptions::default()).unwrap();
    assert_eq!(uncovered_finite_nodes(&vg, &mask), 0);
}

#[test]
fn mask_agrees_with_exhaustive_search() {
    let spec = catalog::cone_case(ConeCase::ForwardUnit);
    let grid = line(100);
    let part = uniform_partition(0.0, 1.0, 10);
    let mask = compute_reachable(&spec, &grid, &part, &ReachOptions::default()).unwrap();
    let mut budget = EnumerationBudget::new(CandidateSet::for_spec(&spec, Some(0.05))).with_n_max(1);
    budget.interior_times = 2;
    budget.dt = Some(0.05);
    let mut agree = 0;
    for i in 0..grid.len() {
        let x = grid.node(i);
        let finite = brute_force_value(&spec, 0.0, &x, &budget).unwrap().value.is_finite();
        let marked = mask.slices[0][i];
        if finite == marked {
            agree += 1;
        } else {
            assert!((x[0] - 0.0).abs() <= grid.spacing()[0] + 1e-12, "disagreement away from the frontier at {x:?}");
        }
    }
    assert!(agree as f64 >= 0.99 * grid.len() as f64, "{agree}/{}", grid.len());
}

#[test]
fn partitions_must_end_at_the_horizon() {
    let spec = catalog::cone_case(ConeCase::ForwardUnit);
    for bad in [vec![0.0, 0.5], vec![0.5, 0.2, 1.0], vec![]] {
        assert!(matches!(
            compute_reachable(&spec, &line(10), &bad, &ReachOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
    }
}

#[test]
fn coarse_grids_warn_about_large_steps() {
    let spec = catalog::cone_case(ConeCase::ForwardUnit);
    let mask = compute_reachable(&spec, &line(100), &[0.0, 1.0], &ReachOptions::default()).unwrap();
    assert!(!mask.warnings.is_empty());
}

#[test]
fn mask_files_round_trip() {
    let spec = catalog::cone_case(ConeCase::BackwardUnit);
    let mask = compute_reachable(&spec, &line(20), &uniform_partition(0.0, 1.0, 2), &ReachOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("mask.json");
    mask.save(&json).unwrap();
    assert_eq!(ReachableMask::load(&json).unwrap(), mask);
    let csv = dir.path().join("mask.csv");
    mask.write_csv(&csv).unwrap();
    assert_eq!(read_csv_hash(&csv).unwrap(), Some(spec.hash()));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().nth(1), Some("t,x1,reachable"));
    assert_eq!(text.lines().count(), 2 + 3 * 21);
}
