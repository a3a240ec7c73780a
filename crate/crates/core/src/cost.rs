//! The cost functional and an exhaustive-search reference value.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{default_step, integrate, Impulse, ImpulseControl, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{growth_chain_bound, estimate_nu, CandidateSet};
use crate::linalg::norm;
use crate::model::ProblemSpec;

/// Cost of one impulse with the state it was applied to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpulseCharge {
    pub tau: f64,
    pub pre: Vec<f64>,
    pub xi: Vec<f64>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub running: f64,
    pub terminal: f64,
    pub impulse_total: f64,
    pub per_impulse: Vec<ImpulseCharge>,
    /// Sum of the three parts, or `+inf` when `X(T)` misses the target.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub total: f64,
    pub feasible: bool,
}

/// Composite Simpson integral of `g` over the impulse-free segments.
pub fn running_cost(spec: &ProblemSpec, traj: &Trajectory) -> f64 {
    let mut total = 0.0;
    for seg in &traj.segments {
        let nodes = &traj.nodes[seg.clone()];
        let m = nodes.len() - 1;
        if m == 0 {
            continue;
        }
        let h = (nodes[m].s - nodes[0].s) / m as f64;
        let mut acc = 0.0;
        for (k, n) in nodes.iter().enumerate() {
            let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * spec.g(n.s, &n.x);
        }
        total += acc * h / 3.0;
    }
    total
}

/// Breakdown of the cost of `ctrl` from `(t, x)`.
pub fn evaluate_cost(spec: &ProblemSpec, t: f64, x: &[f64], ctrl: &ImpulseControl, dt: f64) -> Result<CostBreakdown> {
    let traj = integrate(spec, t, x, ctrl, dt)?;
    Ok(breakdown(spec, &traj))
}

pub(crate) fn breakdown(spec: &ProblemSpec, traj: &Trajectory) -> CostBreakdown {
    let running = running_cost(spec, traj);
    let per_impulse: Vec<ImpulseCharge> = traj
        .jumps
        .iter()
        .map(|j| ImpulseCharge { tau: j.tau, pre: j.pre.clone(), xi: j.xi.clone(), cost: spec.ell(j.tau, &j.pre, &j.xi) })
        .collect();
    let impulse_total = per_impulse.iter().map(|c| c.cost).sum();
    let terminal = spec.h(&traj.terminal);
    let feasible = spec.target.in_closure(&traj.terminal);
    let total = if feasible { running + terminal + impulse_total } else { f64::INFINITY };
    CostBreakdown { running, terminal, impulse_total, per_impulse, total, feasible }
}

/// Limits for [`brute_force_value`].
#[derive(Debug, Clone)]
pub struct EnumerationBudget {
    /// Maximum number of impulses; `None` uses the impulse-count bound.
    pub n_max: Option<usize>,
    /// Interior impulse times; `t` and `T` are always included.
    pub interior_times: usize,
    pub candidates: CandidateSet,
    /// Integration step for cost evaluation.
    pub dt: Option<f64>,
    /// Refuse when the estimated number of evaluations exceeds this.
    pub limit: f64,
}

impl EnumerationBudget {
    pub fn new(candidates: CandidateSet) -> Self {
        EnumerationBudget { n_max: None, interior_times: 9, candidates, dt: None, limit: 1e8 }
    }

    pub fn with_n_max(mut self, n: usize) -> Self {
        self.n_max = Some(n);
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BruteForce {
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub value: f64,
    pub control: ImpulseControl,
    pub evaluations: usize,
}

/// Upper bound on the number of impulses worth considering:
/// `floor((bound + 1) / l0)` with the explicit value bound at `(t, x)`.
pub fn impulse_count_bound(spec: &ProblemSpec, cands: &CandidateSet, t: f64, x: &[f64]) -> usize {
    let r = norm(x);
    let nu = estimate_nu(spec, cands, &[r]).rows[0].1;
    let c0 = if nu.is_finite() { nu / (1.0 + r) } else { 1.0 };
    let bound = growth_chain_bound(spec, t, r, c0);
    ((bound + 1.0) / spec.costs.l.l0).floor().max(1.0) as usize
}

fn estimate_evaluations(times: usize, cands: usize, n_max: usize) -> f64 {
    // multisets of k times, ordered candidate choices
    let mut total = 0.0;
    let mut multisets = 1.0;
    for k in 0..=n_max {
        if k > 0 {
            multisets *= (times + k - 1) as f64 / k as f64;
        }
        total += multisets * (cands as f64).powi(k as i32);
    }
    total
}

/// Exhaustive minimum of the cost over controls with at most `n_max`
/// impulses, times on a coarse grid and vectors from the candidate set.
pub fn brute_force_value(spec: &ProblemSpec, t: f64, x: &[f64], budget: &EnumerationBudget) -> Result<BruteForce> {
    let cands = &budget.candidates;
    let n_max = budget.n_max.unwrap_or_else(|| impulse_count_bound(spec, cands, t, x));
    let m = budget.interior_times + 2;
    let times: Vec<f64> = (0..m)
        .map(|i| if i + 1 == m { spec.horizon } else { t + (spec.horizon - t) * i as f64 / (m - 1) as f64 })
        .collect();
    let estimate = estimate_evaluations(m, cands.len() - 1, n_max);
    if estimate > budget.limit {
        return Err(Error::BudgetExceeded { estimate, limit: budget.limit });
    }
    let dt = budget.dt.unwrap_or_else(|| default_step(spec));
    let trivial = ImpulseControl::trivial();
    let base = evaluate_cost(spec, t, x, &trivial, dt)?.total;
    if n_max == 0 {
        return Ok(BruteForce { value: base, control: trivial, evaluations: 1 });
    }

    struct Search<'a> {
        spec: &'a ProblemSpec,
        cands: &'a CandidateSet,
        times: &'a [f64],
        t: f64,
        x: &'a [f64],
        dt: f64,
        n_max: usize,
        best: f64,
        control: ImpulseControl,
        evaluations: usize,
    }

    impl Search<'_> {
        fn dfs(&mut self, stack: &mut Vec<Impulse>, first_time: usize, lower: f64) -> Result<()> {
            if stack.len() == self.n_max {
                return Ok(());
            }
            for ti in first_time..self.times.len() {
                let tau = self.times[ti];
                for i in 1..self.cands.len() {
                    let (xi, r) = self.cands.get(i);
                    let lb = lower + self.spec.costs.l.lower_bound(tau, r);
                    if lb >= self.best {
                        break;
                    }
                    stack.push(Impulse { tau, xi: xi.to_vec() });
                    let ctrl = ImpulseControl { impulses: stack.clone() };
                    let c = evaluate_cost(self.spec, self.t, self.x, &ctrl, self.dt)?;
                    self.evaluations += 1;
                    if c.total < self.best {
                        self.best = c.total;
                        self.control = ctrl;
                    }
                    self.dfs(stack, ti, lb)?;
                    stack.pop();
                }
            }
            Ok(())
        }
    }

    // one stratum per time of the first impulse
    let strata: Vec<Result<(f64, ImpulseControl, usize)>> = (0..m)
        .into_par_iter()
        .map(|ti| {
            let mut s = Search {
                spec,
                cands,
                times: &times,
                t,
                x,
                dt,
                n_max,
                best: base,
                control: trivial.clone(),
                evaluations: 0,
            };
            let tau = times[ti];
            let mut stack = Vec::new();
            for i in 1..cands.len() {
                let (xi, r) = cands.get(i);
                let lb = spec.costs.l.lower_bound(tau, r);
                if lb >= s.best {
                    break;
                }
                stack.push(Impulse { tau, xi: xi.to_vec() });
                let ctrl = ImpulseControl { impulses: stack.clone() };
                let c = evaluate_cost(spec, t, x, &ctrl, dt)?;
                s.evaluations += 1;
                if c.total < s.best {
                    s.best = c.total;
                    s.control = ctrl;
                }
                s.dfs(&mut stack, ti, lb)?;
                stack.pop();
            }
            Ok((s.best, s.control, s.evaluations))
        })
        .collect();

    let mut out = BruteForce { value: base, control: trivial, evaluations: 1 };
    for r in strata {
        let (v, c, e) = r?;
        out.evaluations += e;
        if v < out.value {
            out.value = v;
            out.control = c;
        }
    }
    Ok(out)
}
