//! Sample-based certification of the structural hypotheses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{min_impulse_to_target, CandidateSet};
use crate::linalg::{add, dist, norm, scale};
use crate::model::ProblemSpec;

/// Finite sample sets in `t`, `x` and `xi` (the latter inside K).
#[derive(Debug, Clone, Serialize)]
pub struct SamplePlan {
    pub ts: Vec<f64>,
    pub xs: Vec<Vec<f64>>,
    pub xis: Vec<Vec<f64>>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

impl SamplePlan {
    /// The lattice described by `spec.validation`. In one dimension `x` is a
    /// uniform grid; otherwise points are drawn uniformly from the cube with
    /// the configured seed.
    pub fn from_spec(spec: &ProblemSpec) -> Self {
        let v = &spec.validation;
        let n = spec.dimension;
        let ts = linspace(0.0, spec.horizon, v.t_samples.max(2));
        let xs = if n == 1 {
            linspace(-v.x_radius, v.x_radius, v.x_samples.max(2)).into_iter().map(|x| vec![x]).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(v.seed);
            let mut xs = vec![vec![0.0; n]];
            while xs.len() < v.x_samples.max(2) {
                xs.push((0..n).map(|_| rng.random_range(-v.x_radius..=v.x_radius)).collect());
            }
            xs
        };
        let mags = linspace(0.0, v.xi_radius, v.xi_samples.max(2));
        let mut xis: Vec<Vec<f64>> = vec![vec![0.0; n]];
        for d in spec.cone.directions(n, 8) {
            for &r in mags.iter().skip(1) {
                xis.push(scale(&d, r));
            }
        }
        SamplePlan { ts, xs, xis }
    }
}

/// Outcome of one hypothesis probe. `worst_margin` is the smallest slack
/// observed; negative values are violations.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub worst_margin: f64,
    pub samples: usize,
    /// A failure of this check stops further processing.
    pub fatal: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn has_fatal_failure(&self) -> bool {
        self.checks.iter().any(|c| c.fatal && !c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let status = if c.passed { "PASS" } else if c.fatal { "FAIL (fatal)" } else { "WARN" };
            s += &format!("{:<22} {:<13} worst margin {:>12.4e}  ({} samples)", c.name, status, c.worst_margin, c.samples);
            if let Some(n) = &c.note {
                s += &format!("  {n}");
            }
            s.push('\n');
        }
        s
    }
}

struct Probe {
    worst: f64,
    count: usize,
}

impl Probe {
    fn new() -> Self {
        Probe { worst: f64::INFINITY, count: 0 }
    }
    fn push(&mut self, margin: f64) {
        self.count += 1;
        if margin < self.worst || margin.is_nan() {
            self.worst = margin;
        }
    }
    fn finish(self, name: &'static str, tol: f64) -> Check {
        let worst = if self.count == 0 { 0.0 } else { self.worst };
        Check { name, passed: worst >= -tol, worst_margin: worst, samples: self.count, fatal: false, note: None }
    }
}

fn holder_rhs(c: f64, mu: f64, delta: f64, x: &[f64], y: &[f64]) -> f64 {
    c * (1.0 + norm(x).powf(mu).max(norm(y).powf(mu))) * dist(x, y).powf(delta)
}

/// Probes every hypothesis on the sample plan. Only a negative
/// subadditivity margin is fatal; everything else is reported.
pub fn validate_spec(spec: &ProblemSpec, plan: &SamplePlan) -> Result<ValidationReport> {
    spec.check()?;
    for x in plan.xs.iter().chain(&plan.xis) {
        if x.len() != spec.dimension {
            return Err(Error::InvalidSpec(format!("sample {x:?} does not have dimension {}", spec.dimension)));
        }
    }
    let tol = spec.validation.tolerance;
    let lf = spec.dynamics.lipschitz;
    let lc = spec.cost_bound();
    let (mu, delta) = (spec.regularity.mu, spec.regularity.delta);
    let l = &spec.costs.l;
    let mut checks = Vec::new();

    let mut lip = Probe::new();
    let mut f0 = Probe::new();
    let zero = vec![0.0; spec.dimension];
    for &t in &plan.ts {
        f0.push(lf - norm(&spec.f(t, &zero)));
        for (i, x) in plan.xs.iter().enumerate() {
            let fx = spec.f(t, x);
            for y in &plan.xs[i + 1..] {
                let fy = spec.f(t, y);
                lip.push(lf * dist(x, y) - dist(&fx, &fy));
            }
        }
    }
    checks.push(lip.finish("lipschitz_f", tol));
    checks.push(f0.finish("f_at_origin", tol));

    let mut growth_g = Probe::new();
    let mut growth_h = Probe::new();
    let mut holder_g = Probe::new();
    let mut holder_h = Probe::new();
    for (i, x) in plan.xs.iter().enumerate() {
        let cap = lc * (1.0 + norm(x).powf(mu + delta));
        let hx = spec.h(x);
        growth_h.push(hx.min(cap - hx));
        for &t in &plan.ts {
            let gx = spec.g(t, x);
            growth_g.push(gx.min(cap - gx));
        }
        for y in &plan.xs[i + 1..] {
            let rhs = holder_rhs(lc, mu, delta, x, y);
            holder_h.push(rhs - (hx - spec.h(y)).abs());
            for &t in &plan.ts {
                holder_g.push(rhs - (spec.g(t, x) - spec.g(t, y)).abs());
            }
        }
    }
    checks.push(growth_g.finish("growth_g", tol));
    checks.push(growth_h.finish("growth_h", tol));
    checks.push(holder_g.finish("holder_g", tol));
    checks.push(holder_h.finish("holder_h", tol));

    let mut bounds = Probe::new();
    let mut fixed = Probe::new();
    let mut holder_l = Probe::new();
    let mut sub = Probe::new();
    let mut mono = Probe::new();
    for (ti, &t) in plan.ts.iter().enumerate() {
        let (a, a0) = (l.alpha.eval(t), l.alpha0.eval(t));
        for (i, x) in plan.xs.iter().enumerate() {
            for xi in &plan.xis {
                let r = norm(xi).powf(l.beta);
                let v = spec.ell(t, x, xi);
                bounds.push((v - l.l0 - a0 * r).min(lc + a * r - v));
                fixed.push(v - a0 * r);
                for y in &plan.xs[i + 1..] {
                    holder_l.push(holder_rhs(lc, mu, delta, x, y) - (v - spec.ell(t, y, xi)).abs());
                }
                for &t2 in &plan.ts[ti + 1..] {
                    let w = spec.ell(t2, x, xi);
                    mono.push((v - w).min(w - (v - lc * (t2 - t))));
                }
                for xi2 in &plan.xis {
                    let split = (v + spec.ell(t, &add(x, xi), xi2))
                        .min(spec.ell(t, x, xi2) + spec.ell(t, &add(x, xi2), xi));
                    sub.push(split - spec.ell(t, x, &add(xi, xi2)) - l.delta0);
                }
            }
        }
    }
    checks.push(bounds.finish("ell_bounds", tol));
    let mut fixed = fixed.finish("fixed_cost", tol);
    fixed.passed = fixed.worst_margin > tol;
    fixed.note = Some("min of l - alpha0 |xi|^beta must be strictly positive".into());
    checks.push(fixed);
    checks.push(holder_l.finish("holder_ell", tol));
    let mut sub = sub.finish("subadditivity", tol);
    sub.fatal = true;
    checks.push(sub);
    checks.push(mono.finish("ell_time_monotone", tol));

    let mut dec = Probe::new();
    for table in [&l.alpha, &l.alpha0] {
        let p = table.points();
        if p.iter().any(|&(_, v)| v <= 0.0) {
            dec.push(-1.0);
        }
        for w in p.windows(2) {
            dec.push(w[0].1 - w[1].1);
        }
        dec.push(0.0);
    }
    checks.push(dec.finish("alpha_decreasing", tol));

    // convexity of D via midpoints of sampled closure points
    let mut pts: Vec<Vec<f64>> = Vec::new();
    for x in &plan.xs {
        for xi in &plan.xis {
            let p = add(x, xi);
            if spec.target.in_closure(&p) {
                pts.push(p);
            }
        }
    }
    let mut conv = Probe::new();
    for (i, p) in pts.iter().enumerate().step_by(1 + pts.len() / 60) {
        for q in pts[i + 1..].iter().step_by(1 + pts.len() / 60) {
            let m = scale(&add(p, q), 0.5);
            conv.push(spec.target.margin(&m) + spec.target.eps());
        }
    }
    checks.push(conv.finish("target_convex", tol));

    let mut closure = Probe::new();
    for a in &plan.xis {
        for b in &plan.xis {
            let s = add(a, b);
            closure.push(if spec.cone.contains(&s, 1e-9) { 0.0 } else { -norm(&s) });
        }
    }
    checks.push(closure.finish("cone_closure", tol));

    let cands = CandidateSet::for_spec(spec, None);
    let mut reach = Probe::new();
    let mut bad = None;
    for x in &plan.xs {
        match min_impulse_to_target(spec, &cands, x) {
            Some(_) => reach.push(0.0),
            None => {
                reach.push(-1.0);
                bad.get_or_insert_with(|| x.clone());
            }
        }
    }
    let mut reach = reach.finish("target_reachable", tol);
    if let Some(x) = bad {
        reach.note = Some(format!("no impulse reaches the target from {x:?}"));
    }
    checks.push(reach);

    Ok(ValidationReport { checks })
}

/// Per-sample result of the compatibility probe.
#[derive(Debug, Clone, Serialize)]
pub struct CompatibilitySample {
    pub x: Vec<f64>,
    pub h: f64,
    /// Best `h(x + xi) + l(T, x, xi)` over candidates landing in D.
    pub best: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompatibilityReport {
    pub samples: Vec<CompatibilitySample>,
    pub passed: bool,
}

/// Checks that, at each sample on the boundary or outside of D, jumping into
/// the open target strictly beats the raw terminal cost.
pub fn check_compatibility(spec: &ProblemSpec, cands: &CandidateSet, samples: &[Vec<f64>]) -> CompatibilityReport {
    let tol = spec.validation.tolerance;
    let t = spec.horizon;
    let samples: Vec<CompatibilitySample> = samples
        .iter()
        .map(|x| {
            let mut best = f64::INFINITY;
            for (xi, r) in cands.iter() {
                if r == 0.0 {
                    continue;
                }
                if spec.costs.l.lower_bound(t, r) >= best {
                    break;
                }
                let y = add(x, xi);
                if spec.target.in_interior(&y) {
                    best = best.min(spec.h(&y) + spec.costs.l.eval_norm(t, x, r));
                }
            }
            let h = spec.h(x);
            CompatibilitySample { x: x.clone(), h, best, holds: best.is_finite() && best < h - tol }
        })
        .collect();
    let passed = samples.iter().all(|s| s.holds);
    CompatibilityReport { samples, passed }
}

/// Default compatibility samples: boundary points of D found by bisection
/// from an interior sample, plus the exterior lattice points.
pub fn boundary_samples(spec: &ProblemSpec, plan: &SamplePlan) -> Vec<Vec<f64>> {
    let d = &spec.target;
    let inside = plan
        .xs
        .iter()
        .flat_map(|x| plan.xis.iter().map(move |xi| add(x, xi)))
        .find(|p| d.in_interior(p));
    let mut out = Vec::new();
    for x in &plan.xs {
        if d.in_interior(x) {
            continue;
        }
        out.push(x.clone());
        if let Some(p) = &inside {
            let (mut a, mut b) = (p.clone(), x.clone());
            for _ in 0..80 {
                let m = scale(&add(&a, &b), 0.5);
                if d.margin(&m) > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            out.push(b);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, Scalar};

    #[test]
    fn unit_impulse_cost_certifies_delta0() {
        let spec = catalog::benchmark(Scalar::ZeroCosts);
        let r = validate_spec(&spec, &SamplePlan::from_spec(&spec)).unwrap();
        let sub = r.get("subadditivity").unwrap();
        assert!(sub.passed && sub.worst_margin >= -1e-9);
        assert!(r.get("lipschitz_f").unwrap().passed);
        assert!(r.get("fixed_cost").unwrap().passed);
        assert!(!r.has_fatal_failure());
    }

    #[test]
    fn missing_fixed_cost_is_reported_with_zero_margin() {
        let spec = catalog::no_fixed_cost();
        let r = validate_spec(&spec, &SamplePlan::from_spec(&spec)).unwrap();
        let c = r.get("fixed_cost").unwrap();
        assert!(!c.passed);
        assert_eq!(c.worst_margin, 0.0);
    }

    #[test]
    fn subadditivity_failure_is_fatal() {
        let mut spec = catalog::benchmark(Scalar::ZeroCosts);
        spec.costs.l.delta0 = 2.0;
        let r = validate_spec(&spec, &SamplePlan::from_spec(&spec)).unwrap();
        assert!(r.has_fatal_failure());
    }

    #[test]
    fn compatibility_of_modified_terminal_cost() {
        let spec = catalog::benchmark(Scalar::Quadratic);
        let cands = CandidateSet::for_spec(&spec, Some(1e-3));
        let r = check_compatibility(&spec, &cands, &[vec![0.0], vec![1.0]]);
        assert!(r.passed, "{r:?}");
        assert!((r.samples[0].best - 247.0 / 180.0).abs() < 2e-3);
        let zero_h = catalog::benchmark(Scalar::ZeroCosts);
        let r = check_compatibility(&zero_h, &cands, &[vec![0.0], vec![1.0], vec![2.0]]);
        assert!(r.samples.iter().all(|s| !s.holds));
    }
}
