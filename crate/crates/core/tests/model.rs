use std::path::PathBuf;

use impulse_qvi::catalog::{self, Scalar};
use impulse_qvi::geometry::CandidateSet;
use impulse_qvi::model::validate::{boundary_samples, check_compatibility, validate_spec, SamplePlan};
use impulse_qvi::model::{ConeSpec, CostField, Dynamics, Target};
use impulse_qvi::{Error, ProblemSpec};
use proptest::prelude::*;

fn specs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs")
}

/// The files under `specs/` are the serialized catalog. Run with
/// `UPDATE_SPECS=1` to rewrite them.
#[test]
fn spec_files_match_the_catalog() {
    let dir = specs_dir();
    let update = std::env::var_os("UPDATE_SPECS").is_some();
    for name in catalog::NAMES {
        let spec = catalog::by_name(name).unwrap();
        let path = dir.join(format!("{name}.json"));
        if update {
            std::fs::create_dir_all(&dir).unwrap();
            spec.save(&path).unwrap();
        }
        let loaded = ProblemSpec::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(loaded, spec, "{name} is out of date; rerun with UPDATE_SPECS=1");
    }
}

#[test]
fn scalar_catalog_file_describes_the_drift_one_instance() {
    let spec = ProblemSpec::load(specs_dir().join("zero_costs.json")).unwrap();
    assert_eq!(spec.dimension, 1);
    assert_eq!(spec.dynamics.family, Dynamics::ConstantDrift { drift: vec![1.0] });
    assert_eq!(spec.cone, ConeSpec::full());
    assert_eq!(spec.target.family, Target::Box { lower: vec![Some(0.0)], upper: vec![Some(1.0)] });
    assert_eq!(spec.costs.h, CostField::Zero);
}

#[test]
fn empty_and_malformed_files_are_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    std::fs::write(&path, "").unwrap();
    assert!(matches!(ProblemSpec::load(&path), Err(Error::Parse { .. })));

    let mut value: serde_json::Value = serde_json::from_str(&catalog::halfplane().to_json()).unwrap();
    value["horizon"] = serde_json::json!("soon");
    match ProblemSpec::from_json(&value.to_string()) {
        Err(Error::Parse { path, .. }) => assert_eq!(path, "horizon"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn dimension_mismatch_is_a_hard_error() {
    let mut spec = catalog::halfplane();
    spec.dynamics.family = Dynamics::ConstantDrift { drift: vec![1.0] };
    assert!(matches!(validate_spec(&spec, &SamplePlan::from_spec(&spec)), Err(Error::InvalidSpec(_))));
    let mut spec = catalog::benchmark(Scalar::Quadratic);
    spec.horizon = 0.0;
    assert!(spec.check().is_err());
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for name in catalog::NAMES {
        let spec = catalog::by_name(name).unwrap();
        let path = dir.path().join("s.json");
        spec.save(&path).unwrap();
        let back = ProblemSpec::load(&path).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.hash(), spec.hash());
    }
}

#[test]
fn builtin_families_certify_their_constants() {
    for name in catalog::NAMES.iter().filter(|n| **n != "no_fixed_cost") {
        let spec = catalog::by_name(name).unwrap();
        let plan = SamplePlan::from_spec(&spec);
        assert!(plan.ts.len() >= 10 && plan.xs.len() >= 10);
        let report = validate_spec(&spec, &plan).unwrap();
        for check in ["lipschitz_f", "f_at_origin", "ell_bounds", "fixed_cost", "subadditivity", "ell_time_monotone", "cone_closure", "target_convex"] {
            let c = report.get(check).unwrap();
            assert!(c.passed, "{name}: {check} worst margin {}", c.worst_margin);
        }
        assert!(!report.has_fatal_failure());
    }
}

#[test]
fn unit_fixed_cost_has_subadditivity_margin_one() {
    let spec = catalog::benchmark(Scalar::ZeroCosts);
    let report = validate_spec(&spec, &SamplePlan::from_spec(&spec)).unwrap();
    let sub = report.get("subadditivity").unwrap();
    // reported relative to delta0 = 1; xi' = -xi attains it
    assert!(sub.passed && sub.worst_margin.abs() <= 1e-9, "{}", sub.worst_margin);
    let lip = report.get("lipschitz_f").unwrap();
    assert!(lip.passed);
}

#[test]
fn missing_fixed_cost_fails_with_zero_margin() {
    let spec = catalog::no_fixed_cost();
    let report = validate_spec(&spec, &SamplePlan::from_spec(&spec)).unwrap();
    let fixed = report.get("fixed_cost").unwrap();
    assert!(!fixed.passed);
    assert_eq!(fixed.worst_margin, 0.0);
    assert!(report.has_fatal_failure());
}

#[test]
fn compatibility_of_the_quadratic_terminal_cost() {
    let spec = catalog::benchmark(Scalar::Quadratic);
    let cands = CandidateSet::for_spec(&spec, Some(0.01));
    let r = check_compatibility(&spec, &cands, &[vec![0.0], vec![1.0]]);
    assert!(r.passed);
    let tol = 2.0 * cands.resolution;
    assert!((r.samples[0].best - 247.0 / 180.0).abs() <= tol, "{}", r.samples[0].best);
    assert!((r.samples[1].best - 283.0 / 180.0).abs() <= tol, "{}", r.samples[1].best);
    assert!((r.samples[0].h - 36.0 / 25.0).abs() < 1e-12);
}

#[test]
fn zero_terminal_cost_violates_compatibility_everywhere() {
    let spec = catalog::benchmark(Scalar::ZeroCosts);
    let cands = CandidateSet::for_spec(&spec, Some(0.01));
    let samples = boundary_samples(&spec, &SamplePlan::from_spec(&spec));
    assert!(!samples.is_empty());
    let r = check_compatibility(&spec, &cands, &samples);
    assert!(!r.passed);
    assert!(r.samples.iter().all(|s| !s.holds && s.best >= 1.0));
}

proptest! {
    #[test]
    fn unit_cost_subadditivity(a in -5.0..5.0f64, b in -5.0..5.0f64, t in 0.0..1.0f64, x in -3.0..3.0f64) {
        let spec = catalog::benchmark(Scalar::Quadratic);
        let l = |x: f64, xi: f64| spec.ell(t, &[x], &[xi]);
        let split = (l(x, a) + l(x + a, b)).min(l(x, b) + l(x + b, a));
        prop_assert!(split - l(x, a + b) >= spec.costs.l.delta0 - 1e-12);
    }

    #[test]
    fn unit_cost_is_nonincreasing_in_time(t in 0.0..1.0f64, dt in 0.0..1.0f64, xi in -5.0..5.0f64) {
        let spec = catalog::benchmark(Scalar::Quadratic);
        let t2 = (t + dt).min(1.0);
        let (a, b) = (spec.ell(t, &[0.0], &[xi]), spec.ell(t2, &[0.0], &[xi]));
        prop_assert!(b <= a && a - spec.dynamics.lipschitz * (t2 - t) <= b);
    }
}
