//! Post-hoc checks on solver output: closed-form oracles, grid residuals of
//! the variational inequality, continuity moduli, growth bounds and the
//! discrete dynamic-programming inequalities.

use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::{ConeCase, Scalar};
use crate::geometry::{estimate_nu, growth_chain_bound, CandidateSet};
use crate::grid::{Outside, SpatialGrid, MAX_DIM};
use crate::linalg::norm;
use crate::model::ProblemSpec;
use crate::reach::ReachableMask;
use crate::solver::{Evaluator, Mode, ValueGrid, CONTINUE};

const A0: f64 = 1.0 / 90.0;
const A1: f64 = 71.0 / 90.0;

/// Which closed form an [`AnalyticOracle`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OracleKind {
    Value(Scalar),
    Domain(ConeCase),
    /// Reachable set of the rotation example.
    Rotation,
}

struct Piece {
    lo: f64,
    hi: f64,
    f: fn(f64) -> f64,
}

fn one_minus(y: f64) -> f64 {
    1.0 - y
}
fn zero(_: f64) -> f64 {
    0.0
}
fn ident(y: f64) -> f64 {
    y
}
fn quad(y: f64) -> f64 {
    9.0 * (y - 0.4) * (y - 0.4)
}
fn left_jump(y: f64) -> f64 {
    247.0 / 180.0 - y
}
fn right_jump(y: f64) -> f64 {
    103.0 / 180.0 + y
}
fn infinite(_: f64) -> f64 {
    f64::INFINITY
}

/// Closed-form value functions and reachable sets of the scalar and planar
/// examples, in terms of `y = x + T - t` where that applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticOracle {
    pub kind: OracleKind,
    pub horizon: f64,
}

impl AnalyticOracle {
    pub fn new(kind: OracleKind) -> Self {
        let horizon = if kind == OracleKind::Rotation { 2.0 } else { 1.0 };
        AnalyticOracle { kind, horizon }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let kind = match name {
            "zero_costs" => OracleKind::Value(Scalar::ZeroCosts),
            "quadratic" => OracleKind::Value(Scalar::Quadratic),
            "one_sided" => OracleKind::Value(Scalar::OneSided),
            "half_line" => OracleKind::Value(Scalar::HalfLine),
            "forward_unit" => OracleKind::Domain(ConeCase::ForwardUnit),
            "backward_unit" => OracleKind::Domain(ConeCase::BackwardUnit),
            "forward_positive" => OracleKind::Domain(ConeCase::ForwardPositive),
            "forward_negative" => OracleKind::Domain(ConeCase::ForwardNegative),
            "rotation_disk" => OracleKind::Rotation,
            _ => return None,
        };
        Some(Self::new(kind))
    }

    pub const NAMES: &'static [&'static str] =
        &["zero_costs", "quadratic", "one_sided", "half_line", "forward_unit", "backward_unit", "forward_positive", "forward_negative", "rotation_disk"];

    fn pieces(&self) -> Vec<Piece> {
        let p = |lo, hi, f| Piece { lo, hi, f };
        let (ninf, inf) = (f64::NEG_INFINITY, f64::INFINITY);
        match self.kind {
            OracleKind::Value(Scalar::ZeroCosts) => vec![p(ninf, 0.0, one_minus), p(0.0, 1.0, zero), p(1.0, inf, ident)],
            OracleKind::Value(Scalar::Quadratic) => vec![p(ninf, A0, left_jump), p(A0, A1, quad), p(A1, inf, right_jump)],
            OracleKind::Value(Scalar::OneSided) => vec![p(ninf, A0, left_jump), p(A0, 1.0, quad), p(1.0, inf, infinite)],
            OracleKind::Value(Scalar::HalfLine) => vec![p(ninf, A0, left_jump), p(A0, inf, quad)],
            _ => Vec::new(),
        }
    }

    fn y(&self, t: f64, x: &[f64]) -> f64 {
        x[0] + self.horizon - t
    }

    /// Closed-form value; `None` for set oracles.
    pub fn value(&self, t: f64, x: &[f64]) -> Option<f64> {
        let y = self.y(t, x);
        let pieces = self.pieces();
        if pieces.is_empty() {
            return None;
        }
        // the finite piece wins at a frontier shared with an infinite one
        for pc in &pieces {
            if y >= pc.lo && y <= pc.hi && (pc.f)(y).is_finite() {
                return Some((pc.f)(y));
            }
        }
        pieces.iter().find(|pc| y >= pc.lo && y <= pc.hi).map(|pc| (pc.f)(y))
    }

    /// Membership in the reachable set, where the closed form applies.
    pub fn reachable(&self, t: f64, x: &[f64]) -> Option<bool> {
        match self.kind {
            OracleKind::Value(_) => self.value(t, x).map(f64::is_finite),
            OracleKind::Domain(c) => {
                let y = self.y(t, x);
                Some(match c {
                    ConeCase::ForwardUnit => y <= 1.0,
                    ConeCase::BackwardUnit => y >= 0.0,
                    ConeCase::ForwardPositive => true,
                    ConeCase::ForwardNegative => y <= 0.0,
                })
            }
            OracleKind::Rotation => {
                let tau = self.horizon - t;
                let q = std::f64::consts::FRAC_PI_2;
                if (tau - q).abs() < 1e-9 {
                    Some(x[1] <= 1.0)
                } else if tau > q {
                    Some(true)
                } else {
                    None
                }
            }
        }
    }

    /// Breakpoints in `y` (scalar oracles).
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            OracleKind::Value(Scalar::ZeroCosts) => vec![0.0, 1.0],
            OracleKind::Value(Scalar::Quadratic) => vec![A0, A1],
            OracleKind::Value(Scalar::OneSided) => vec![A0, 1.0],
            OracleKind::Value(Scalar::HalfLine) => vec![A0],
            OracleKind::Domain(ConeCase::ForwardUnit) => vec![1.0],
            OracleKind::Domain(ConeCase::BackwardUnit | ConeCase::ForwardNegative) => vec![0.0],
            OracleKind::Domain(ConeCase::ForwardPositive) | OracleKind::Rotation => vec![],
        }
    }

    /// Distance from `x` to the nearest kink or frontier of the closed form.
    pub fn breakpoint_distance(&self, t: f64, x: &[f64]) -> f64 {
        if self.kind == OracleKind::Rotation {
            return match self.reachable(t, x) {
                Some(_) if (self.horizon - t - std::f64::consts::FRAC_PI_2).abs() < 1e-9 => (x[1] - 1.0).abs(),
                _ => f64::INFINITY,
            };
        }
        let y = self.y(t, x);
        self.breakpoints().iter().map(|b| (y - b).abs()).fold(f64::INFINITY, f64::min)
    }

    /// Continuity (or the expected jump) of the closed form at each
    /// breakpoint, from the two adjacent formulas.
    pub fn self_check(&self) -> OracleSelfCheck {
        let pieces = self.pieces();
        let mut jumps = Vec::new();
        for w in pieces.windows(2) {
            let b = w[0].hi;
            jumps.push((b, (w[0].f)(b), (w[1].f)(b)));
        }
        let passed = match self.kind {
            OracleKind::Value(Scalar::ZeroCosts) => {
                // outside minus inside at both ends
                jumps.len() == 2 && jumps[0].1 - jumps[0].2 == 1.0 && jumps[1].2 - jumps[1].1 == 1.0
            }
            OracleKind::Value(Scalar::OneSided) => {
                (jumps[0].1 - jumps[0].2).abs() < 1e-12 && jumps[1].2 == f64::INFINITY
            }
            OracleKind::Value(_) => jumps.iter().all(|j| (j.1 - j.2).abs() < 1e-12),
            _ => true,
        };
        OracleSelfCheck { jumps, passed }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSelfCheck {
    /// `(breakpoint, left formula, right formula)`.
    pub jumps: Vec<(f64, f64, f64)>,
    pub passed: bool,
}

/// Error of a value grid against a closed form.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorTable {
    pub max_abs: f64,
    pub mean_abs: f64,
    pub argmax: Option<(f64, Vec<f64>)>,
    pub compared: usize,
    pub excluded: usize,
    /// Nodes finite in one of the two but not the other.
    pub finiteness_mismatches: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Tolerance for comparisons against closed forms: `2 (dx + dt)`.
pub fn tol_acc(vg: &ValueGrid) -> f64 {
    2.0 * (vg.grid.min_spacing() + vg.dt())
}

/// Compares every slice against `oracle`, skipping nodes within
/// `band_cells` cells of a breakpoint.
pub fn compare_to_oracle(vg: &ValueGrid, oracle: &AnalyticOracle, band_cells: f64, tol: f64) -> ErrorTable {
    let band = band_cells * vg.grid.min_spacing();
    let mut t = ErrorTable {
        max_abs: 0.0,
        mean_abs: 0.0,
        argmax: None,
        compared: 0,
        excluded: 0,
        finiteness_mismatches: 0,
        tolerance: tol,
        passed: false,
    };
    let mut sum = 0.0;
    for (k, &tk) in vg.times.iter().enumerate() {
        for i in 0..vg.grid.len() {
            let x = vg.grid.node(i);
            if oracle.breakpoint_distance(tk, &x) <= band {
                t.excluded += 1;
                continue;
            }
            let Some(exact) = oracle.value(tk, &x) else { continue };
            let v = vg.values[k][i];
            match (v.is_finite(), exact.is_finite()) {
                (true, true) => {
                    let e = (v - exact).abs();
                    sum += e;
                    t.compared += 1;
                    if e > t.max_abs || t.argmax.is_none() {
                        t.max_abs = t.max_abs.max(e);
                        t.argmax = Some((tk, x));
                    }
                }
                (false, false) => t.compared += 1,
                _ => t.finiteness_mismatches += 1,
            }
        }
    }
    t.mean_abs = if t.compared > 0 { sum / t.compared as f64 } else { 0.0 };
    t.passed = t.compared > 0 && t.finiteness_mismatches == 0 && t.max_abs <= tol;
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct MaskComparison {
    pub times: Vec<f64>,
    /// Nodes farther than the allowance from the frontier where the mask
    /// and the closed form disagree, per compared time.
    pub mismatches: Vec<usize>,
    pub compared: usize,
    pub passed: bool,
}

/// Compares mask slices against a set oracle, ignoring nodes within
/// `cells` cells of the frontier.
pub fn compare_mask_to_oracle(mask: &ReachableMask, oracle: &AnalyticOracle, cells: f64) -> MaskComparison {
    let allowance = cells * mask.grid.spacing().iter().cloned().fold(0.0, f64::max) + 1e-9;
    let mut out = MaskComparison { times: vec![], mismatches: vec![], compared: 0, passed: true };
    for (k, &tk) in mask.partition.iter().enumerate() {
        let mut bad = 0;
        let mut any = false;
        for i in 0..mask.grid.len() {
            let x = mask.grid.node(i);
            let Some(truth) = oracle.reachable(tk, &x) else { continue };
            any = true;
            out.compared += 1;
            if truth != mask.slices[k][i] && oracle.breakpoint_distance(tk, &x) > allowance {
                bad += 1;
            }
        }
        if any {
            out.times.push(tk);
            out.mismatches.push(bad);
            out.passed &= bad == 0;
        }
    }
    out.passed &= out.compared > 0;
    out
}

/// Grid residual of `min{V_t + <V_x, f> + g, N[V] - V}`.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub mean_residual: f64,
    pub argmax: Option<(f64, Vec<f64>)>,
    pub evaluated: usize,
    pub excluded: usize,
    pub excluded_fraction: f64,
}

fn active(vg: &ValueGrid, k: usize, i: usize) -> Option<bool> {
    let v = vg.values[k][i];
    if !v.is_finite() {
        return None;
    }
    Some(vg.interventions[k][i] - v <= 1e-9 * (1.0 + v.abs()))
}

/// Nodes within `reach` cells (and one slice) of an active-set switch or
/// an infinite value.
fn near_switch(vg: &ValueGrid, k: usize, i: usize, reach: usize) -> bool {
    let g = &vg.grid;
    let n = g.dim();
    let m = g.multi_index(i);
    let me = active(vg, k, i);
    let lo = k.saturating_sub(1);
    let hi = (k + 1).min(vg.steps());
    let span = 2 * reach + 1;
    let total = span.pow(n as u32);
    for kk in lo..=hi {
        for c in 0..total {
            let mut q = [0usize; MAX_DIM];
            let mut rem = c;
            let mut inside = true;
            for a in 0..n {
                let off = (rem % span) as isize - reach as isize;
                rem /= span;
                let p = m[a] as isize + off;
                if p < 0 || p > g.cells()[a] as isize {
                    inside = false;
                    break;
                }
                q[a] = p as usize;
            }
            if !inside {
                continue;
            }
            let j = g.flat_index(&q[..n]);
            if active(vg, kk, j) != me {
                return true;
            }
        }
    }
    me.is_none()
}

/// Central-difference residual at interior finite nodes, skipping nodes
/// within two cells of an active-set switch, an infinite value, or a point
/// flagged by `exclude`.
pub fn viscosity_residual(spec: &ProblemSpec, vg: &ValueGrid, exclude: Option<&(dyn Fn(f64, &[f64]) -> bool + Sync)>) -> ResidualReport {
    let g = &vg.grid;
    let n = g.dim();
    let m = vg.steps();
    let dt = vg.dt();
    let per_slice: Vec<(f64, f64, Option<(f64, Vec<f64>)>, usize, usize)> = (1..m)
        .into_par_iter()
        .map(|k| {
            let t = vg.times[k];
            let (mut max, mut sum, mut arg, mut ev, mut ex) = (0.0f64, 0.0, None, 0usize, 0usize);
            let mut x = [0.0; MAX_DIM];
            let mut f = [0.0; MAX_DIM];
            'node: for i in 0..g.len() {
                let v = vg.values[k][i];
                if !v.is_finite() {
                    continue;
                }
                let mi = g.multi_index(i);
                if (0..n).any(|a| mi[a] == 0 || mi[a] == g.cells()[a]) {
                    continue;
                }
                g.node_into(i, &mut x[..n]);
                if near_switch(vg, k, i, 2) || exclude.is_some_and(|e| e(t, &x[..n])) {
                    ex += 1;
                    continue;
                }
                let (up, down) = (vg.values[k + 1][i], vg.values[k - 1][i]);
                if !up.is_finite() || !down.is_finite() {
                    ex += 1;
                    continue;
                }
                spec.dynamics.family.eval_into(t, &x[..n], &mut f[..n]);
                let mut cont = (up - down) / (2.0 * dt) + spec.g(t, &x[..n]);
                for a in 0..n {
                    let s = g.stride(a);
                    let (r, l) = (vg.values[k][i + s], vg.values[k][i - s]);
                    if !r.is_finite() || !l.is_finite() {
                        ex += 1;
                        continue 'node;
                    }
                    cont += f[a] * (r - l) / (2.0 * g.spacing()[a]);
                }
                let res = cont.min(vg.interventions[k][i] - v).abs();
                ev += 1;
                sum += res;
                if res > max || arg.is_none() {
                    max = max.max(res);
                    arg = Some((t, x[..n].to_vec()));
                }
            }
            (max, sum, arg, ev, ex)
        })
        .collect();
    let mut r = ResidualReport { max_residual: 0.0, mean_residual: 0.0, argmax: None, evaluated: 0, excluded: 0, excluded_fraction: 0.0 };
    let mut sum = 0.0;
    for (max, s, arg, ev, ex) in per_slice {
        if max > r.max_residual || (r.argmax.is_none() && arg.is_some()) {
            r.max_residual = r.max_residual.max(max);
            r.argmax = arg;
        }
        sum += s;
        r.evaluated += ev;
        r.excluded += ex;
    }
    r.mean_residual = if r.evaluated > 0 { sum / r.evaluated as f64 } else { 0.0 };
    let total = r.evaluated + r.excluded;
    r.excluded_fraction = if total > 0 { r.excluded as f64 / total as f64 } else { 0.0 };
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModulusStatus {
    Ok,
    InsufficientData,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulusReport {
    /// Smallest `C` with `|dV| <= C (1 + max(|x|, |x'|)^mu) (|dt| + |dx|^delta)`
    /// over adjacent finite node pairs.
    pub c_hat: f64,
    pub argmax: Option<(f64, Vec<f64>)>,
    pub pairs: usize,
    pub status: ModulusStatus,
}

/// Fits the continuity constant over pairs of adjacent nodes (in space
/// within a slice, and in time at a fixed node).
pub fn continuity_modulus(spec: &ProblemSpec, vg: &ValueGrid) -> ModulusReport {
    let g = &vg.grid;
    let n = g.dim();
    let (mu, delta) = (spec.regularity.mu, spec.regularity.delta);
    let m = vg.steps();
    let weight = |x: &[f64], y: &[f64]| 1.0 + norm(x).powf(mu).max(norm(y).powf(mu));
    let per: Vec<(f64, Option<(f64, Vec<f64>)>, usize)> = (0..=m)
        .into_par_iter()
        .map(|k| {
            let (mut c, mut arg, mut pairs) = (0.0f64, None, 0usize);
            for i in 0..g.len() {
                let v = vg.values[k][i];
                if !v.is_finite() {
                    continue;
                }
                let x = g.node(i);
                let mi = g.multi_index(i);
                let mut consider = |w: f64, y: &[f64], dt: f64, dx: f64| {
                    if !w.is_finite() {
                        return;
                    }
                    pairs += 1;
                    let q = (v - w).abs() / (weight(&x, y) * (dt + dx.powf(delta)));
                    if q > c || arg.is_none() {
                        c = c.max(q);
                        arg = Some((vg.times[k], x.clone()));
                    }
                };
                for a in 0..n {
                    if mi[a] < g.cells()[a] {
                        let j = i + g.stride(a);
                        consider(vg.values[k][j], &g.node(j), 0.0, g.spacing()[a]);
                    }
                }
                if k < m {
                    consider(vg.values[k + 1][i], &x, vg.times[k + 1] - vg.times[k], 0.0);
                }
            }
            (c, arg, pairs)
        })
        .collect();
    let mut r = ModulusReport { c_hat: 0.0, argmax: None, pairs: 0, status: ModulusStatus::Ok };
    for (c, arg, p) in per {
        if c > r.c_hat || (r.argmax.is_none() && arg.is_some()) {
            r.c_hat = r.c_hat.max(c);
            r.argmax = arg;
        }
        r.pairs += p;
    }
    if r.pairs < 100 {
        r.status = ModulusStatus::InsufficientData;
    }
    r
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulusRefinement {
    pub coarse: ModulusReport,
    pub fine: ModulusReport,
    pub ratio: f64,
    /// `C` at least doubled under refinement, up to rounding.
    pub discontinuity_suspected: bool,
}

pub fn modulus_refinement(spec: &ProblemSpec, coarse: &ValueGrid, fine: &ValueGrid) -> ModulusRefinement {
    let c = continuity_modulus(spec, coarse);
    let f = continuity_modulus(spec, fine);
    let ratio = if c.c_hat > 0.0 { f.c_hat / c.c_hat } else if f.c_hat > 0.0 { f64::INFINITY } else { 1.0 };
    ModulusRefinement { discontinuity_suspected: ratio >= 2.0 * (1.0 - 1e-9), coarse: c, fine: f, ratio }
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    /// Constant in `nu(r) <= c0 (1 + r)`, from sampled minimal impulses.
    pub c0: f64,
    /// Smallest `bound - V` over finite nodes.
    pub worst_slack: f64,
    pub argmin: Option<(f64, Vec<f64>)>,
    pub checked: usize,
    pub passed: bool,
}

/// `c0` for [`growth_chain_bound`]: the largest sampled `nu(r) / (1 + r)`.
pub fn nu_constant(spec: &ProblemSpec, cands: &CandidateSet, radii: &[f64]) -> f64 {
    estimate_nu(spec, cands, radii).rows.iter().map(|&(r, nu)| nu / (1.0 + r)).fold(0.0, f64::max)
}

/// Checks finite values against the explicit polynomial-plus-impulse bound.
pub fn growth_bound_check(spec: &ProblemSpec, vg: &ValueGrid) -> GrowthReport {
    let cands = vg.candidate_set(spec);
    let far = vg.grid.lower().iter().zip(vg.grid.upper()).map(|(l, u)| l.abs().max(u.abs()).powi(2)).sum::<f64>().sqrt();
    let radii: Vec<f64> = (0..=20).map(|k| far * k as f64 / 20.0).collect();
    let c0 = nu_constant(spec, &cands, &radii);
    let mut r = GrowthReport { c0, worst_slack: f64::INFINITY, argmin: None, checked: 0, passed: true };
    for (k, &t) in vg.times.iter().enumerate() {
        for i in 0..vg.grid.len() {
            let v = vg.values[k][i];
            if !v.is_finite() {
                continue;
            }
            let x = vg.grid.node(i);
            let slack = growth_chain_bound(spec, t, norm(&x), c0) - v;
            r.checked += 1;
            if slack < r.worst_slack {
                r.worst_slack = slack;
                r.argmin = Some((t, x));
            }
        }
    }
    r.passed = v_nonnegative(vg) && r.worst_slack >= 0.0;
    r
}

fn v_nonnegative(vg: &ValueGrid) -> bool {
    vg.values.iter().flatten().all(|&v| v >= 0.0)
}

/// Discrete dynamic-programming inequalities and the post-jump gap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DppReport {
    /// Largest `V - N[V]` over finite nodes, with `N` recomputed.
    pub intervention_violation: f64,
    /// Largest `V - (G + V(next, Phi x))` with the scheme's evaluator.
    pub continuation_violation: f64,
    /// Nodes where `V > g dt + interp(V_{k+1}, Phi x) + 1e-9`; informational,
    /// since the interpolant smears jumps that the scheme keeps sharp.
    pub interpolated_continuation_failures: usize,
    /// Largest `|V - C|` where `V < N - tie`.
    pub strict_branch_gap: f64,
    /// Smallest `N(x + xi*) - V(x + xi*)` over nodes that jump.
    pub post_jump_gap: f64,
    pub jump_nodes: usize,
    pub finite_nodes: usize,
}

impl DppReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.intervention_violation <= tol && self.continuation_violation <= tol
    }

    pub fn post_jump_ok(&self, delta0: f64, tol_acc: f64) -> bool {
        self.jump_nodes == 0 || self.post_jump_gap >= delta0 - 2.0 * tol_acc
    }
}

pub fn dpp_check(spec: &ProblemSpec, vg: &ValueGrid) -> DppReport {
    let cands = vg.candidate_set(spec);
    let ev = Evaluator::new(spec, vg, &cands);
    let g = &vg.grid;
    let n = g.dim();
    let m = vg.steps();
    let outside = if vg.mode == Mode::Constrained { Outside::Infinite } else { Outside::Clamp };
    let rows: Vec<DppReport> = (0..=m)
        .into_par_iter()
        .map(|k| {
            let t = vg.times[k];
            let mut r = DppReport {
                intervention_violation: f64::NEG_INFINITY,
                continuation_violation: f64::NEG_INFINITY,
                interpolated_continuation_failures: 0,
                strict_branch_gap: 0.0,
                post_jump_gap: f64::INFINITY,
                jump_nodes: 0,
                finite_nodes: 0,
            };
            let mut x = [0.0; MAX_DIM];
            let mut y = [0.0; MAX_DIM];
            for i in 0..g.len() {
                let v = vg.values[k][i];
                if !v.is_finite() {
                    continue;
                }
                r.finite_nodes += 1;
                g.node_into(i, &mut x[..n]);
                let (nv, _) = ev.intervention_on(&vg.values[k], t, &x[..n], outside);
                r.intervention_violation = r.intervention_violation.max(v - nv);
                if k < m {
                    let c = ev.continuation_at(k, &x[..n]);
                    r.continuation_violation = r.continuation_violation.max(v - c);
                    y[..n].copy_from_slice(&x[..n]);
                    let run = ev.step(k, &mut y[..n]);
                    let lit = run + g.interp(&vg.values[k + 1], &y[..n], outside);
                    if v > lit + 1e-9 {
                        r.interpolated_continuation_failures += 1;
                    }
                    if v < nv - vg.tie_tol {
                        r.strict_branch_gap = r.strict_branch_gap.max((v - c).abs());
                    }
                }
                let p = vg.policy[k][i];
                if p != CONTINUE {
                    r.jump_nodes += 1;
                    let xi = cands.get(p as usize).0;
                    for a in 0..n {
                        y[a] = x[a] + xi[a];
                    }
                    let gap = g.interp(&vg.interventions[k], &y[..n], outside) - g.interp(&vg.values[k], &y[..n], outside);
                    if !gap.is_nan() {
                        r.post_jump_gap = r.post_jump_gap.min(gap);
                    }
                }
            }
            r
        })
        .collect();
    rows.into_iter()
        .reduce(|a, b| DppReport {
            intervention_violation: a.intervention_violation.max(b.intervention_violation),
            continuation_violation: a.continuation_violation.max(b.continuation_violation),
            interpolated_continuation_failures: a.interpolated_continuation_failures + b.interpolated_continuation_failures,
            strict_branch_gap: a.strict_branch_gap.max(b.strict_branch_gap),
            post_jump_gap: a.post_jump_gap.min(b.post_jump_gap),
            jump_nodes: a.jump_nodes + b.jump_nodes,
            finite_nodes: a.finite_nodes + b.finite_nodes,
        })
        .expect("at least one slice")
}

/// Finite-valued nodes that the mask does not mark, counting a node as
/// covered when it or an axis neighbour is marked. Compares the slices at
/// times shared by the mask partition and the value grid.
pub fn uncovered_finite_nodes(vg: &ValueGrid, mask: &ReachableMask) -> usize {
    let g: &SpatialGrid = &vg.grid;
    let mut bad = 0;
    for (k, &t) in vg.times.iter().enumerate() {
        let Some(j) = mask.partition.iter().position(|&s| (s - t).abs() <= 1e-9) else { continue };
        for i in 0..g.len() {
            if vg.values[k][i].is_finite() && !mask.slices[j][i] && !g.neighbours(i).any(|q| mask.slices[j][q]) {
                bad += 1;
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_self_checks_pass() {
        for name in AnalyticOracle::NAMES {
            assert!(AnalyticOracle::from_name(name).unwrap().self_check().passed, "{name}");
        }
    }

    #[test]
    fn zero_cost_jumps_are_exactly_one() {
        let o = AnalyticOracle::new(OracleKind::Value(Scalar::ZeroCosts));
        let c = o.self_check();
        assert_eq!(c.jumps[0].1 - c.jumps[0].2, 1.0);
        assert_eq!(c.jumps[1].2 - c.jumps[1].1, 1.0);
    }

    #[test]
    fn closed_form_values() {
        let v2 = AnalyticOracle::new(OracleKind::Value(Scalar::Quadratic));
        assert!((v2.value(1.0, &[0.0]).unwrap() - 247.0 / 180.0).abs() < 1e-15);
        assert!((v2.value(1.0, &[0.9]).unwrap() - (103.0 / 180.0 + 0.9)).abs() < 1e-15);
        assert!(v2.value(1.0, &[0.4]).unwrap() < 1e-15);
        let v3 = AnalyticOracle::new(OracleKind::Value(Scalar::OneSided));
        assert!(v3.value(1.0, &[1.0]).unwrap().is_finite());
        assert_eq!(v3.value(1.0, &[1.0 + 1e-12]).unwrap(), f64::INFINITY);
        let v4 = AnalyticOracle::new(OracleKind::Value(Scalar::HalfLine));
        assert!((v4.value(0.0, &[5.0]).unwrap() - 9.0 * 5.6f64.powi(2)).abs() < 1e-9);
    }

    #[test]
    fn rotation_set_only_known_at_two_regimes() {
        let o = AnalyticOracle::new(OracleKind::Rotation);
        let t = 2.0 - std::f64::consts::FRAC_PI_2;
        assert_eq!(o.reachable(t, &[0.0, 0.5]), Some(true));
        assert_eq!(o.reachable(t, &[0.0, 1.5]), Some(false));
        assert_eq!(o.reachable(t - 0.3, &[0.0, 1.5]), Some(true));
        assert_eq!(o.reachable(1.9, &[0.0, 0.0]), None);
    }
}
