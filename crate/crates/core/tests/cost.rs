use impulse_qvi::catalog::{self, Scalar};
use impulse_qvi::cost::{brute_force_value, evaluate_cost, EnumerationBudget};
use impulse_qvi::dynamics::{Impulse, ImpulseControl};
use impulse_qvi::geometry::CandidateSet;
use impulse_qvi::Error;
use proptest::prelude::*;

const DT: f64 = 1e-3;

fn budget(spec: &impulse_qvi::ProblemSpec, step: f64, n_max: usize) -> EnumerationBudget {
    let mut b = EnumerationBudget::new(CandidateSet::for_spec(spec, Some(step))).with_n_max(n_max);
    b.dt = Some(0.01);
    b
}

#[test]
fn one_jump_down_from_above_the_target() {
    let spec = catalog::benchmark(Scalar::ZeroCosts);
    // y = x + T - t = 1.5
    for tau in [0.0, 0.3, 1.0] {
        let c = evaluate_cost(&spec, 0.0, &[0.5], &ImpulseControl::single(tau, vec![-0.5]), DT).unwrap();
        assert!(c.feasible);
        assert!((c.total - 1.5).abs() < 1e-12, "tau {tau}: {}", c.total);
        assert_eq!(c.per_impulse.len(), 1);
    }
}

#[test]
fn trivial_control_inside_costs_nothing() {
    let spec = catalog::benchmark(Scalar::ZeroCosts);
    let c = evaluate_cost(&spec, 0.2, &[0.0], &ImpulseControl::trivial(), DT).unwrap();
    assert_eq!((c.total, c.feasible), (0.0, true));
}

#[test]
fn terminal_jump_for_the_quadratic_cost() {
    let spec = catalog::benchmark(Scalar::Quadratic);
    let xi = 31.0 / 90.0;
    let c = evaluate_cost(&spec, 0.0, &[-1.0], &ImpulseControl::single(1.0, vec![xi]), DT).unwrap();
    assert!((c.total - 247.0 / 180.0).abs() < 1e-12, "{}", c.total);
    assert!((c.terminal - 9.0 * (xi - 0.4f64).powi(2)).abs() < 1e-12);
    assert!(c.per_impulse[0].pre[0].abs() < 1e-12);
}

#[test]
fn missing_the_target_is_infinite() {
    let spec = catalog::benchmark(Scalar::ZeroCosts);
    let c = evaluate_cost(&spec, 0.0, &[1.0], &ImpulseControl::trivial(), DT).unwrap();
    assert!(!c.feasible);
    assert_eq!(c.total, f64::INFINITY);
    let json = serde_json::to_value(&c).unwrap();
    assert_eq!(json["total"], "inf");
    assert_eq!(json["feasible"], false);
}

#[test]
fn brute_force_on_the_discontinuous_instance() {
    let spec = catalog::benchmark(Scalar::ZeroCosts);
    let b = budget(&spec, 0.01, 1);
    let below = brute_force_value(&spec, 0.0, &[-1.3], &b).unwrap();
    assert!((below.value - 1.3).abs() < 1e-9, "{}", below.value);
    assert_eq!(below.control.len(), 1);
    assert!((below.control.impulses[0].xi[0] - 0.3).abs() < 1e-9);
    let inside = brute_force_value(&spec, 0.0, &[-0.5], &b).unwrap();
    assert_eq!(inside.value, 0.0);
    assert!(inside.control.is_empty());
}

#[test]
fn larger_budgets_never_do_worse() {
    let spec = catalog::benchmark(Scalar::Quadratic);
    let x = [-1.4];
    let mut small = budget(&spec, 0.05, 1);
    small.interior_times = 4;
    let mut more_times = budget(&spec, 0.05, 1);
    more_times.interior_times = 9;
    let more_jumps = budget(&spec, 0.05, 2);
    let a = brute_force_value(&spec, 0.0, &x, &small).unwrap().value;
    let b = brute_force_value(&spec, 0.0, &x, &more_times).unwrap().value;
    let c = brute_force_value(&spec, 0.0, &x, &more_jumps).unwrap().value;
    assert!(b <= a && c <= b, "{a} {b} {c}");
    // a second impulse costs at least delta0 more than it saves here
    assert_eq!(c, b);
}

#[test]
fn enumeration_refuses_oversized_budgets() {
    let spec = catalog::benchmark(Scalar::Quadratic);
    let mut b = budget(&spec, 0.001, 3);
    b.limit = 1e6;
    assert!(matches!(brute_force_value(&spec, 0.0, &[0.0], &b), Err(Error::BudgetExceeded { .. })));
}

fn merged(spec: &impulse_qvi::ProblemSpec, x: f64, tau: f64, a: f64, b: f64) -> (f64, f64) {
    let split = ImpulseControl { impulses: vec![Impulse { tau, xi: vec![a] }, Impulse { tau, xi: vec![b] }] };
    let one = ImpulseControl::single(tau, vec![a + b]);
    let s = evaluate_cost(spec, 0.0, &[x], &split, 0.01).unwrap();
    let m = evaluate_cost(spec, 0.0, &[x], &one, 0.01).unwrap();
    assert_eq!(s.feasible, m.feasible);
    (s.total, m.total)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn merging_simultaneous_impulses_saves_delta0(x in -2.0..2.0f64, tau in 0.0..1.0f64, a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let spec = catalog::benchmark(Scalar::Quadratic);
        let (split, one) = merged(&spec, x, tau, a, b);
        if one.is_finite() {
            prop_assert!(split - one >= spec.costs.l.delta0 - 1e-9);
        } else {
            prop_assert_eq!(split, f64::INFINITY);
        }
    }

    #[test]
    fn impulse_total_covers_fixed_costs(x in -2.0..2.0f64, raw in prop::collection::vec((0.0..1.0f64, -1.0..1.0f64), 0..4)) {
        let spec = catalog::benchmark(Scalar::Quadratic);
        let mut impulses: Vec<Impulse> = raw.into_iter().map(|(t, xi)| Impulse { tau: t, xi: vec![xi] }).collect();
        impulses.sort_by(|a, b| a.tau.total_cmp(&b.tau));
        let n = impulses.len() as f64;
        let c = evaluate_cost(&spec, 0.0, &[x], &ImpulseControl { impulses }, 0.01).unwrap();
        prop_assert!(c.impulse_total >= n * spec.costs.l.l0);
        if c.feasible {
            prop_assert!((c.total - (c.running + c.terminal + c.impulse_total)).abs() < 1e-12);
        }
    }
}

#[test]
fn brute_force_values_are_nonnegative() {
    let spec = catalog::benchmark(Scalar::Quadratic);
    let b = budget(&spec, 0.05, 1);
    for x in [-2.0, -1.0, 0.0, 0.5, 1.5, 2.5] {
        let v = brute_force_value(&spec, 0.0, &[x], &b).unwrap().value;
        assert!(v >= 0.0, "{x}: {v}");
    }
}
