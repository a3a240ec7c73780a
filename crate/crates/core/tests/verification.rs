use impulse_qvi::catalog::{self, Scalar};
use impulse_qvi::cost::evaluate_cost;
use impulse_qvi::dynamics::ImpulseControl;
use impulse_qvi::geometry::{growth_chain_bound, min_impulse_to_target, CandidateSet};
use impulse_qvi::grid::SpatialGrid;
use impulse_qvi::linalg::norm;
use impulse_qvi::solver::{solve, SolveOptions, ValueGrid};
use impulse_qvi::verify::{
    compare_to_oracle, continuity_modulus, dpp_check, growth_bound_check, modulus_refinement, nu_constant, tol_acc,
    viscosity_residual, AnalyticOracle, ModulusStatus, OracleKind,
};
use impulse_qvi::ProblemSpec;

fn solve_on(v: Scalar, lower: f64, upper: f64, cells: usize, steps: usize) -> (ProblemSpec, ValueGrid) {
    let spec = catalog::benchmark(v);
    let grid = SpatialGrid::new(vec![lower], vec![upper], vec![cells]).unwrap();
    let vg = solve(&spec, &grid, &SolveOptions::new(steps)).unwrap();
    (spec, vg)
}

#[test]
fn oracle_breakpoints_behave_as_stated() {
    let v2 = AnalyticOracle::new(OracleKind::Value(Scalar::Quadratic));
    for b in [1.0 / 90.0, 71.0 / 90.0] {
        let l = v2.value(1.0, &[b - 1e-13]).unwrap();
        let r = v2.value(1.0, &[b + 1e-13]).unwrap();
        assert!((l - r).abs() < 1e-12, "{b}: {l} vs {r}");
    }
    let v1 = AnalyticOracle::new(OracleKind::Value(Scalar::ZeroCosts));
    let eps = 1e-13;
    assert!((v1.value(1.0, &[-eps]).unwrap() - v1.value(1.0, &[eps]).unwrap() - 1.0).abs() < 1e-12);
    assert!((v1.value(1.0, &[1.0 + eps]).unwrap() - v1.value(1.0, &[1.0 - eps]).unwrap() - 1.0).abs() < 1e-12);
    for name in AnalyticOracle::NAMES {
        let o = AnalyticOracle::from_name(name).unwrap();
        assert!(o.self_check().passed, "{name}");
    }
    assert!(AnalyticOracle::from_name("nope").is_none());
}

#[test]
fn breakpoint_nodes_are_excluded_not_failed() {
    // nodes at x = k/90 put breakpoints exactly on the grid
    let (_, vg) = solve_on(Scalar::Quadratic, -1.0, 2.0, 270, 90);
    let o = AnalyticOracle::new(OracleKind::Value(Scalar::Quadratic));
    for b in o.breakpoints() {
        assert!(o.breakpoint_distance(1.0, &[b]) < 1e-12);
    }
    let table = compare_to_oracle(&vg, &o, 2.0, tol_acc(&vg));
    assert!(table.passed && table.excluded > 0, "{table:?}");
}

#[test]
fn half_line_oracle_is_finite_and_matched() {
    let (_, vg) = solve_on(Scalar::HalfLine, -2.0, 3.0, 250, 100);
    let o = AnalyticOracle::new(OracleKind::Value(Scalar::HalfLine));
    let table = compare_to_oracle(&vg, &o, 2.0, tol_acc(&vg));
    assert!(table.passed && table.finiteness_mismatches == 0, "{table:?}");
    assert!(vg.values.iter().flatten().all(|v| v.is_finite()));
}

#[test]
fn residual_shrinks_under_refinement() {
    let o = AnalyticOracle::new(OracleKind::Value(Scalar::Quadratic));
    let residual = |cells: usize| {
        let (spec, vg) = solve_on(Scalar::Quadratic, -1.0, 2.0, cells, cells);
        let dx = vg.grid.spacing()[0];
        let away = |t: f64, x: &[f64]| o.breakpoint_distance(t, x) < 2.0 * dx;
        let r = viscosity_residual(&spec, &vg, Some(&away));
        assert!(r.evaluated > 0);
        r.max_residual
    };
    let (coarse, fine) = (residual(200), residual(400));
    assert!(coarse / fine >= 1.8, "{coarse} -> {fine}");
}

#[test]
fn residual_in_the_zero_band_and_the_jump_region() {
    let (spec, vg) = solve_on(Scalar::ZeroCosts, -2.0, 3.0, 250, 100);
    let dx = vg.grid.spacing()[0];
    let m = vg.steps();
    for k in 1..m {
        let t = vg.times[k];
        for i in 0..vg.grid.len() {
            let y = vg.grid.node(i)[0] + 1.0 - t;
            if (0.2..=0.8).contains(&y) {
                assert_eq!(vg.values[k][i], 0.0);
                assert!((vg.interventions[k][i] - 1.0).abs() < 1e-12);
            }
            if y > 1.0 + 3.0 * dx && y < 2.5 {
                assert!((vg.interventions[k][i] - vg.values[k][i]).abs() <= tol_acc(&vg), "t {t} y {y}");
            }
        }
    }
    let band = |t: f64, x: &[f64]| {
        let y = x[0] + 1.0 - t;
        !(0.2..=0.8).contains(&y)
    };
    let r = viscosity_residual(&spec, &vg, Some(&band));
    assert!(r.evaluated > 0);
    assert_eq!(r.max_residual, 0.0);
}

#[test]
fn modulus_is_stable_for_the_continuous_case() {
    let (spec, a) = solve_on(Scalar::Quadratic, -2.0, 3.0, 100, 40);
    let (_, b) = solve_on(Scalar::Quadratic, -2.0, 3.0, 200, 80);
    let r = modulus_refinement(&spec, &a, &b);
    assert_eq!(r.fine.status, ModulusStatus::Ok);
    assert!(!r.discontinuity_suspected && r.ratio < 2.0, "{r:?}");
}

#[test]
fn modulus_blows_up_for_the_discontinuous_case() {
    let (spec, a) = solve_on(Scalar::ZeroCosts, -2.0, 3.0, 100, 40);
    let (_, b) = solve_on(Scalar::ZeroCosts, -2.0, 3.0, 200, 80);
    let r = modulus_refinement(&spec, &a, &b);
    assert!(r.discontinuity_suspected, "{r:?}");
    assert!(r.fine.c_hat >= 1.0 / b.grid.spacing()[0] / 4.0);
}

#[test]
fn modulus_needs_enough_pairs() {
    let (spec, vg) = solve_on(Scalar::Quadratic, 0.0, 1.0, 4, 2);
    assert_eq!(continuity_modulus(&spec, &vg).status, ModulusStatus::InsufficientData);
}

#[test]
fn growth_bound_for_the_zero_cost_instance() {
    let (spec, vg) = solve_on(Scalar::ZeroCosts, -2.0, 3.0, 100, 40);
    let r = growth_bound_check(&spec, &vg);
    assert!(r.passed && r.checked > 0, "{r:?}");
    for (k, &t) in vg.times.iter().enumerate() {
        for i in 0..vg.grid.len() {
            let v = vg.values[k][i];
            let y: f64 = vg.grid.node(i)[0] + 1.0 - t;
            assert!(v <= 1.0 + y.abs() + tol_acc(&vg), "t {t} y {y}: {v}");
        }
    }
}

#[test]
fn growth_bound_on_a_conic_target() {
    // V is at most the cost of flowing and jumping once at T
    let spec = catalog::halfplane();
    let cands = CandidateSet::for_spec(&spec, Some(0.05));
    let c0 = nu_constant(&spec, &cands, &[0.0, 1.0, 2.0, 3.0]);
    assert!(c0 > 0.0 && c0 <= 1.0 + 1e-9, "{c0}");
    let jump = CandidateSet::for_spec(&spec, Some(0.01));
    for r in [1.0, 5.0, 10.0] {
        for x in [[-r, 0.0], [0.0, -r], [-r / 2f64.sqrt(), r / 2f64.sqrt()]] {
            let (xi, _) = min_impulse_to_target(&spec, &jump, &x).unwrap();
            let ctrl = if norm(&xi) == 0.0 { ImpulseControl::trivial() } else { ImpulseControl::single(1.0, xi) };
            let cost = evaluate_cost(&spec, 0.0, &x, &ctrl, 1e-2).unwrap().total;
            let bound = growth_chain_bound(&spec, 0.0, r, c0);
            assert!(cost <= bound, "x {x:?}: {cost} > {bound}");
        }
    }
}

#[test]
fn dpp_checks_rerun_identically_on_loaded_grids() {
    let (spec, vg) = solve_on(Scalar::Quadratic, -2.0, 3.0, 100, 40);
    let before = dpp_check(&spec, &vg);
    assert!(before.holds(1e-9), "{before:?}");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vg.json");
    vg.save(&path).unwrap();
    let loaded = ValueGrid::load(&path).unwrap();
    let after = dpp_check(&spec, &loaded);
    assert_eq!(serde_json::to_string(&before).unwrap(), serde_json::to_string(&after).unwrap());
}
