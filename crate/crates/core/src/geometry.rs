//! Cone discretization, minimal impulses, the constrained intervention
//! operator at the terminal time and the terminal obstacle.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::SpatialGrid;
use crate::io::{axis_columns, fmt_f64, write_csv};
use crate::linalg::{add, norm, scale};
use crate::model::{CandidateConfig, ConeSpec, ProblemSpec};

/// Finite sample of the cone, sorted by norm and then lexicographically so
/// that the first minimizer found in a scan is the tie-break winner.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    dim: usize,
    coords: Vec<f64>,
    norms: Vec<f64>,
    dir_index: Vec<u32>,
    n_dirs: usize,
    /// Uniform magnitude step inside the dense radius.
    pub step: f64,
    /// Largest gap between consecutive magnitudes inside the dense radius.
    pub resolution: f64,
    pub dense_radius: f64,
    pub r_max: f64,
    rays: usize,
    levels: usize,
}

/// Everything needed to rebuild an identical candidate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateParams {
    pub rays: usize,
    pub levels: usize,
    pub step: f64,
    pub dense_radius: f64,
    pub r_max: f64,
}

impl CandidateSet {
    /// Candidates `r d` for every direction `d` from the cone and every
    /// magnitude `r`: zero, multiples of `step` up to `dense_radius`, and
    /// `levels` geometric levels from there up to `r_max`.
    pub fn build(cone: &ConeSpec, dim: usize, rays: usize, levels: usize, step: f64, dense_radius: f64, r_max: f64) -> Self {
        assert!(step > 0.0, "candidate step must be positive");
        let r_max = r_max.max(dense_radius);
        let mut mags = vec![0.0];
        let k_max = (dense_radius / step + 1e-9).floor() as usize;
        for k in 1..=k_max {
            mags.push(k as f64 * step);
        }
        let levels = levels.max(2);
        let r0 = dense_radius.max(step);
        if r_max > r0 {
            let q = (r_max / r0).powf(1.0 / levels as f64);
            for i in 1..=levels {
                mags.push(if i == levels { r_max } else { r0 * q.powi(i as i32) });
            }
        }
        mags.sort_by(f64::total_cmp);
        mags.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * (1.0 + b.abs()));
        let dense: Vec<f64> = mags.iter().copied().filter(|&r| r <= dense_radius + 1e-12).collect();
        let resolution = dense.windows(2).map(|w| w[1] - w[0]).fold(step, f64::max);

        let dirs = cone.directions(dim, rays);
        let mut items: Vec<(f64, Vec<f64>, u32)> = vec![(0.0, vec![0.0; dim], u32::MAX)];
        for &r in mags.iter().skip(1) {
            for (k, d) in dirs.iter().enumerate() {
                items.push((r, scale(d, r), k as u32));
            }
        }
        items.sort_by(|a, b| {
            a.0.total_cmp(&b.0).then_with(|| {
                a.1.iter()
                    .zip(&b.1)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        });
        let mut coords = Vec::with_capacity(items.len() * dim);
        let mut norms = Vec::with_capacity(items.len());
        let mut dir_index = Vec::with_capacity(items.len());
        for (r, v, k) in items {
            norms.push(r);
            coords.extend(v);
            dir_index.push(k);
        }
        CandidateSet {
            dim,
            coords,
            norms,
            dir_index,
            n_dirs: dirs.len(),
            step,
            resolution,
            dense_radius,
            r_max,
            rays,
            levels,
        }
    }

    /// Candidate set for a spec. `step` overrides the configured uniform
    /// step; radii default to the domain diameter plus the largest drift
    /// displacement over the horizon.
    pub fn for_spec(spec: &ProblemSpec, step: Option<f64>) -> Self {
        let cfg: &CandidateConfig = &spec.candidates;
        let (diam, far) = match &spec.domain {
            Some(b) => {
                let d = b.lower.iter().zip(&b.upper).map(|(a, c)| (c - a) * (c - a)).sum::<f64>().sqrt();
                let far = b.lower.iter().zip(&b.upper).map(|(a, c)| a.abs().max(c.abs()).powi(2)).sum::<f64>().sqrt();
                (d, far)
            }
            None => (2.0 * spec.validation.x_radius * (spec.dimension as f64).sqrt(), spec.validation.x_radius),
        };
        let step = step.or(cfg.step).unwrap_or(diam / 1000.0);
        let drift = max_drift(spec, far);
        let dense = cfg.dense_radius.unwrap_or(diam + drift * spec.horizon);
        let r_max = cfg.r_max.unwrap_or_else(|| {
            let l = &spec.costs.l;
            let a0 = l.alpha0.eval(spec.horizon).max(1e-12);
            let probe = CandidateSet::build(&spec.cone, spec.dimension, cfg.rays, cfg.levels, step.max(dense / 200.0), dense, 4.0 * dense);
            let nu = estimate_nu(spec, &probe, &[far]).rows[0].1;
            let bound = growth_chain_bound(spec, 0.0, far, nu / (1.0 + far));
            if bound.is_finite() {
                ((bound + 1.0) / a0).powf(1.0 / l.beta).max(dense)
            } else {
                4.0 * dense
            }
        });
        CandidateSet::build(&spec.cone, spec.dimension, cfg.rays, cfg.levels, step, dense, r_max)
    }

    pub fn params(&self) -> CandidateParams {
        CandidateParams {
            rays: self.rays,
            levels: self.levels,
            step: self.step,
            dense_radius: self.dense_radius,
            r_max: self.r_max,
        }
    }

    pub fn from_params(cone: &ConeSpec, dim: usize, p: &CandidateParams) -> Self {
        CandidateSet::build(cone, dim, p.rays, p.levels, p.step, p.dense_radius, p.r_max)
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of distinct directions.
    pub fn n_dirs(&self) -> usize {
        self.n_dirs
    }

    /// Direction index of candidate `i` (`u32::MAX` for the zero candidate).
    pub fn dir_of(&self, i: usize) -> u32 {
        self.dir_index[i]
    }

    pub fn get(&self, i: usize) -> (&[f64], f64) {
        (&self.coords[i * self.dim..(i + 1) * self.dim], self.norms[i])
    }

    /// Candidates in scan order with their norms.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.coords.chunks_exact(self.dim).zip(self.norms.iter().copied())
    }
}

/// Largest `|f|` over sample points of the ball of radius `far` and the horizon.
pub(crate) fn max_drift(spec: &ProblemSpec, far: f64) -> f64 {
    let n = spec.dimension;
    let mut m = 0.0f64;
    let dirs = ConeSpec::full().directions(n, 16);
    for k in 0..=8 {
        let t = spec.horizon * k as f64 / 8.0;
        m = m.max(norm(&spec.f(t, &vec![0.0; n])));
        for d in &dirs {
            for s in [0.5, 1.0] {
                m = m.max(norm(&spec.f(t, &scale(d, s * far))));
            }
        }
    }
    m
}

/// Smallest-norm candidate `xi` with `x + xi` in the closure of D.
pub fn min_impulse_to_target(spec: &ProblemSpec, cands: &CandidateSet, x: &[f64]) -> Option<(Vec<f64>, f64)> {
    let mut y = vec![0.0; x.len()];
    for (xi, r) in cands.iter() {
        for i in 0..x.len() {
            y[i] = x[i] + xi[i];
        }
        if spec.target.in_closure(&y) {
            return Some((xi.to_vec(), r));
        }
    }
    None
}

/// Sampled values of the minimal-impulse bound.
#[derive(Debug, Clone, Serialize)]
pub struct NuTable {
    /// `(r, nu(r))`, nondecreasing in `nu`.
    pub rows: Vec<(f64, f64)>,
    /// Sample points from which no candidate reaches the target.
    pub violations: Vec<Vec<f64>>,
}

fn sphere_samples(n: usize, r: f64) -> Vec<Vec<f64>> {
    if r == 0.0 {
        return vec![vec![0.0; n]];
    }
    ConeSpec::full().directions(n, 64).into_iter().map(|d| scale(&d, r)).collect()
}

/// For each radius, the largest minimal impulse norm over sampled points of
/// that norm, made nondecreasing by a running maximum.
pub fn estimate_nu(spec: &ProblemSpec, cands: &CandidateSet, radii: &[f64]) -> NuTable {
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    let mut running = 0.0f64;
    for &r in radii {
        let mut worst = 0.0f64;
        for x in sphere_samples(spec.dimension, r) {
            match min_impulse_to_target(spec, cands, &x) {
                Some((_, m)) => worst = worst.max(m),
                None => {
                    worst = f64::INFINITY;
                    violations.push(x);
                }
            }
        }
        running = running.max(worst);
        rows.push((r, running));
    }
    NuTable { rows, violations }
}

impl NuTable {
    /// CSV with columns `r, nu`.
    pub fn write_csv(&self, path: &Path, spec_hash: &str) -> Result<()> {
        let rows = self.rows.iter().map(|&(r, nu)| vec![fmt_f64(r), fmt_f64(nu)]);
        write_csv(path, spec_hash, &["r".into(), "nu".into()], rows)
    }
}

/// Minimum of a candidate scan together with its argmin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Intervention {
    pub value: f64,
    /// Minimizing impulse; `None` when no candidate is admissible.
    pub xi: Option<Vec<f64>>,
}

/// `min { h(x + xi) + l(T, x, xi) : xi in K \ {0}, x + xi in closure(D) }`,
/// `+inf` when no candidate lands in the target.
pub fn intervention_terminal(spec: &ProblemSpec, cands: &CandidateSet, x: &[f64]) -> Intervention {
    let t = spec.horizon;
    let l = &spec.costs.l;
    let mut best = Intervention { value: f64::INFINITY, xi: None };
    let mut y = vec![0.0; x.len()];
    for (xi, r) in cands.iter().skip(1) {
        if l.lower_bound(t, r) >= best.value {
            break;
        }
        for i in 0..x.len() {
            y[i] = x[i] + xi[i];
        }
        if !spec.target.in_closure(&y) {
            continue;
        }
        let v = spec.h(&y) + l.eval_norm(t, x, r);
        if v < best.value {
            best = Intervention { value: v, xi: Some(xi.to_vec()) };
        }
    }
    best
}

/// Which branch of the terminal obstacle attains the minimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Branch {
    NoImpulse,
    Impulse(Vec<f64>),
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Obstacle {
    pub value: f64,
    pub branch: Branch,
}

/// The effective terminal cost: `min(h, N^D[h])` on the closure of D and
/// `N^D[h]` outside it.
pub fn terminal_obstacle(spec: &ProblemSpec, cands: &CandidateSet, x: &[f64]) -> Obstacle {
    let n = intervention_terminal(spec, cands, x);
    let jump = |n: Intervention| match n.xi {
        Some(xi) => Obstacle { value: n.value, branch: Branch::Impulse(xi) },
        None => Obstacle { value: f64::INFINITY, branch: Branch::Infeasible },
    };
    if spec.target.in_closure(x) {
        let h = spec.h(x);
        if n.value < h {
            jump(n)
        } else {
            Obstacle { value: h, branch: Branch::NoImpulse }
        }
    } else {
        jump(n)
    }
}

/// CSV of the terminal obstacle at the grid nodes with columns
/// `x1..xn, hD, branch` (`none`, `impulse` or `infeasible`).
pub fn write_obstacle_csv(spec: &ProblemSpec, cands: &CandidateSet, grid: &SpatialGrid, path: &Path) -> Result<()> {
    let mut header = axis_columns("x", grid.dim());
    header.push("hD".into());
    header.push("branch".into());
    let rows = (0..grid.len()).map(|i| {
        let x = grid.node(i);
        let o = terminal_obstacle(spec, cands, &x);
        let mut row: Vec<String> = x.iter().map(|&v| fmt_f64(v)).collect();
        row.push(fmt_f64(o.value));
        row.push(match o.branch {
            Branch::NoImpulse => "none",
            Branch::Impulse(_) => "impulse",
            Branch::Infeasible => "infeasible",
        }.into());
        row
    });
    write_csv(path, &spec.hash(), &header, rows)
}

/// Outcome of the idempotence probe for the terminal obstacle.
#[derive(Debug, Clone, Serialize)]
pub struct IdempotenceReport {
    /// Largest `h^D(x) - min(h^D(x), min_xi h^D(x + xi) + l)` over the grid.
    pub identity_violation: f64,
    /// Smallest `N[N^D h](x) - N^D h(x) - delta0` over the grid.
    pub chain_margin: f64,
    /// Largest `N^D[h](x) - N[h](x)` outside the closure of D, where `N` does
    /// not restrict landings; positive values mean the cheapest landing is
    /// outside the target and the compatibility condition fails.
    pub landing_gap: f64,
    pub tolerance: f64,
    pub identity_holds: bool,
    pub chain_holds: bool,
    pub compatible: bool,
}

fn unconstrained_min(spec: &ProblemSpec, cands: &CandidateSet, x: &[f64], f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let t = spec.horizon;
    let l = &spec.costs.l;
    let mut best = f64::INFINITY;
    for (xi, r) in cands.iter().skip(1) {
        if l.lower_bound(t, r) >= best {
            break;
        }
        best = best.min(f(&add(x, xi)) + l.eval_norm(t, x, r));
    }
    best
}

/// Checks `min{h^D, N[h^D]} = h^D` on `grid_x` within twice the candidate
/// resolution, the gain of at least `delta0` from a second impulse, and that
/// unrestricted landings from outside D agree with the constrained ones.
pub fn check_idempotence(spec: &ProblemSpec, cands: &CandidateSet, grid_x: &[Vec<f64>]) -> IdempotenceReport {
    let tol = 2.0 * cands.resolution;
    let hd = |y: &[f64]| terminal_obstacle(spec, cands, y).value;
    let nd = |y: &[f64]| intervention_terminal(spec, cands, y).value;
    let mut identity_violation = 0.0f64;
    let mut chain_margin = f64::INFINITY;
    let mut landing_gap = f64::NEG_INFINITY;
    for x in grid_x {
        let h0 = hd(x);
        if h0.is_finite() {
            let lhs = h0.min(unconstrained_min(spec, cands, x, &hd));
            identity_violation = identity_violation.max(h0 - lhs);
        }
        let n0 = nd(x);
        if n0.is_finite() {
            let nn = unconstrained_min(spec, cands, x, &nd);
            chain_margin = chain_margin.min(nn - n0 - spec.costs.l.delta0);
        }
        if !spec.target.in_closure(x) && n0.is_finite() {
            let free = unconstrained_min(spec, cands, x, &|y| spec.h(y));
            landing_gap = landing_gap.max(n0 - free);
        }
    }
    IdempotenceReport {
        identity_violation,
        chain_margin,
        landing_gap,
        tolerance: tol,
        identity_holds: identity_violation <= tol,
        chain_holds: chain_margin >= -tol,
        compatible: landing_gap <= tol,
    }
}

/// Explicit upper bound on the value function obtained by running the
/// uncontrolled flow and paying one impulse at `T`, with the minimal impulse
/// bounded by `nu(r) = c0 (1 + r)`.
pub fn growth_chain_bound(spec: &ProblemSpec, t: f64, r: f64, c0: f64) -> f64 {
    let lf = spec.dynamics.lipschitz;
    let lc = spec.cost_bound();
    let p = spec.regularity.mu + spec.regularity.delta;
    let tau = spec.horizon - t;
    let big = (lf * tau).exp() * (1.0 + r);
    let nu = c0 * (1.0 + big);
    let a = spec.costs.l.alpha.eval(spec.horizon);
    tau * lc * (1.0 + big.powf(p)) + lc * (1.0 + (big + nu).powf(p)) + lc + a * nu.powf(spec.costs.l.beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, Scalar};

    #[test]
    fn candidates_start_at_zero_and_are_sorted() {
        let spec = catalog::benchmark(Scalar::Quadratic);
        let c = CandidateSet::for_spec(&spec, Some(0.01));
        assert_eq!(c.get(0).1, 0.0);
        let norms: Vec<f64> = c.iter().map(|(_, r)| r).collect();
        assert!(norms.windows(2).all(|w| w[0] <= w[1]));
        assert!((c.resolution - 0.01).abs() < 1e-12);
        // ties at equal norm: the negative direction comes first
        assert_eq!(c.get(1).0, &[-0.01]);
        assert_eq!(c.get(2).0, &[0.01]);
    }

    #[test]
    fn inside_target_needs_no_impulse() {
        let spec = catalog::halfplane();
        let c = CandidateSet::for_spec(&spec, Some(0.01));
        let (xi, r) = min_impulse_to_target(&spec, &c, &[0.5, 1.0]).unwrap();
        assert_eq!(r, 0.0);
        assert_eq!(xi, vec![0.0, 0.0]);
    }

    #[test]
    fn obstacle_inside_no_impulse_band() {
        let spec = catalog::benchmark(Scalar::Quadratic);
        let c = CandidateSet::for_spec(&spec, Some(1e-3));
        let o = terminal_obstacle(&spec, &c, &[0.5]);
        assert_eq!(o.branch, Branch::NoImpulse);
        assert!((o.value - 0.09).abs() < 1e-12);
    }

    #[test]
    fn pointing_away_cone_is_infeasible() {
        let spec = catalog::benchmark(Scalar::OneSided);
        let c = CandidateSet::for_spec(&spec, Some(1e-2));
        let n = intervention_terminal(&spec, &c, &[2.0]);
        assert!(n.value.is_infinite() && n.xi.is_none());
        assert_eq!(terminal_obstacle(&spec, &c, &[2.0]).branch, Branch::Infeasible);
    }
}
