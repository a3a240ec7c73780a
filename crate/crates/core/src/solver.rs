//! Backward semi-Lagrangian solver for the quasi-variational inequality.
//!
//! Each slice stores the value `V_k`, the continuation value `C_k` and the
//! intervention value `N_k = N[V_k]` at the nodes. Continuation values are
//! evaluated by following the characteristic from the node through all later
//! slices, taking at slice `j` the option to intervene (`N_j`, interpolated)
//! and at `T` the terminal datum. Only the intervention slices are ever
//! interpolated, and those are continuous wherever the value function is
//! finite, so jumps of `V` stay sharp and smooth parts do not pick up
//! interpolation error at every step.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{default_step, ImpulseControl, Impulse};
use crate::error::{Error, Result};
use crate::geometry::{terminal_obstacle, Branch, CandidateParams, CandidateSet};
use crate::grid::{Outside, SpatialGrid, MAX_DIM};
use crate::io::{axis_columns, fmt_f64, inf_as_null, write_csv};
use crate::model::{Dynamics, ProblemSpec};

/// Policy marker for "no impulse".
pub const CONTINUE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Terminal constraint enforced; infeasible states have value `+inf`.
    Constrained,
    /// No terminal constraint; the terminal datum is the obstacle `h^D`.
    Unconstrained,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constrained" => Ok(Mode::Constrained),
            "unconstrained" => Ok(Mode::Unconstrained),
            _ => Err(Error::InvalidArgument(format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub mode: Mode,
    /// Number of time steps `M`.
    pub steps: usize,
    /// Uniform impulse magnitude step; defaults to the smallest grid spacing.
    pub candidate_step: Option<f64>,
    /// Runge-Kutta substep for the flow; defaults to `T / 1000`.
    pub flow_step: Option<f64>,
    /// Fixed-point tolerance; defaults to `1e-12 (1 + max |C|)`.
    pub tol_fp: Option<f64>,
    /// An impulse is only preferred when it beats waiting by this much.
    pub tie_tol: f64,
    /// Replaces the terminal slice at the nodes.
    pub terminal_override: Option<Vec<f64>>,
}

impl SolveOptions {
    pub fn new(steps: usize) -> Self {
        SolveOptions {
            mode: Mode::Constrained,
            steps,
            candidate_step: None,
            flow_step: None,
            tol_fp: None,
            tie_tol: 1e-6,
            terminal_override: None,
        }
    }

    pub fn mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }
}

/// Time-sliced node values with the winning branch at each node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueGrid {
    pub grid: SpatialGrid,
    pub times: Vec<f64>,
    pub mode: Mode,
    pub candidates: CandidateParams,
    pub flow_step: f64,
    pub tie_tol: f64,
    #[serde(with = "inf_as_null")]
    pub values: Vec<Vec<f64>>,
    #[serde(with = "inf_as_null")]
    pub continuation: Vec<Vec<f64>>,
    #[serde(with = "inf_as_null")]
    pub interventions: Vec<Vec<f64>>,
    /// Candidate index of the chosen impulse, or [`CONTINUE`].
    pub policy: Vec<Vec<u32>>,
    /// Obstacle sweeps per slice.
    pub sweeps: Vec<usize>,
    /// Slices whose obstacle iteration hit the impulse-count cap.
    pub flagged: Vec<usize>,
    pub spec_hash: String,
    /// Wall-clock time of the solve in milliseconds.
    pub elapsed_ms: f64,
}

impl ValueGrid {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Index of the slice closest to `t`.
    pub fn slice_index(&self, t: f64) -> usize {
        let m = self.steps();
        let dt = self.times[m] / m as f64;
        ((t / dt).round().max(0.0) as usize).min(m)
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn candidate_set(&self, spec: &ProblemSpec) -> CandidateSet {
        CandidateSet::from_params(&spec.cone, spec.dimension, &self.candidates)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Writes `(t, x1..xn, V, policy, xi1..xin)` for the chosen slices
    /// (all when `slices` is `None`).
    pub fn write_csv(&self, spec: &ProblemSpec, path: &Path, slices: Option<&[usize]>) -> Result<()> {
        let n = self.grid.dim();
        let cands = self.candidate_set(spec);
        let mut header = vec!["t".to_string()];
        header.extend(axis_columns("x", n));
        header.push("V".into());
        header.push("policy".into());
        header.extend(axis_columns("xi", n));
        let all: Vec<usize> = (0..self.times.len()).collect();
        let slices = slices.unwrap_or(&all);
        let rows = slices.iter().flat_map(|&k| {
            let cands = &cands;
            (0..self.grid.len()).map(move |i| {
                let mut row = vec![fmt_f64(self.times[k])];
                row.extend(self.grid.node(i).into_iter().map(fmt_f64));
                row.push(fmt_f64(self.values[k][i]));
                let p = self.policy[k][i];
                if p == CONTINUE {
                    row.push("continue".into());
                    row.extend(std::iter::repeat_n("0".to_string(), n));
                } else {
                    row.push("jump".into());
                    row.extend(cands.get(p as usize).0.iter().map(|&v| fmt_f64(v)));
                }
                row
            })
        });
        write_csv(path, &self.spec_hash, &header, rows)
    }
}

/// Evaluates the scheme's value at arbitrary points from stored slices.
pub struct Evaluator<'a> {
    spec: &'a ProblemSpec,
    vg: &'a ValueGrid,
    cands: &'a CandidateSet,
    outside: Outside,
    substeps: usize,
    g_zero: bool,
}

impl<'a> Evaluator<'a> {
    pub fn new(spec: &'a ProblemSpec, vg: &'a ValueGrid, cands: &'a CandidateSet) -> Self {
        let outside = match vg.mode {
            Mode::Constrained => Outside::Infinite,
            Mode::Unconstrained => Outside::Clamp,
        };
        let substeps = ((vg.dt() / vg.flow_step) - 1e-9).ceil().max(1.0) as usize;
        Evaluator { spec, vg, cands, outside, substeps, g_zero: spec.costs.g.is_zero() }
    }

    /// Advances `z` from slice `j` to `j + 1` without impulses and returns
    /// the running cost accrued.
    pub fn step(&self, j: usize, z: &mut [f64]) -> f64 {
        let n = z.len();
        let t0 = self.vg.times[j];
        let dt = self.vg.times[j + 1] - t0;
        if let (Dynamics::ConstantDrift { drift }, true) = (&self.spec.dynamics.family, self.g_zero) {
            for i in 0..n {
                z[i] += drift[i] * dt;
            }
            return 0.0;
        }
        let h = dt / self.substeps as f64;
        let f = &self.spec.dynamics.family;
        let mut cost = 0.0;
        let mut k = [[0.0f64; MAX_DIM]; 4];
        let mut kg = [0.0f64; 4];
        let mut tmp = [0.0f64; MAX_DIM];
        for s in 0..self.substeps {
            let t = t0 + s as f64 * h;
            let stages = [(0.0, 0usize), (0.5, 0), (0.5, 1), (1.0, 2)];
            for (st, &(c, prev)) in stages.iter().enumerate() {
                for i in 0..n {
                    tmp[i] = if st == 0 { z[i] } else { z[i] + c * h * k[prev][i] };
                }
                let ts = t + c * h;
                let (head, _) = k.split_at_mut(st + 1);
                f.eval_into(ts, &tmp[..n], &mut head[st][..n]);
                if !self.g_zero {
                    kg[st] = self.spec.g(ts, &tmp[..n]);
                }
            }
            for i in 0..n {
                z[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
            }
            cost += h / 6.0 * (kg[0] + 2.0 * kg[1] + 2.0 * kg[2] + kg[3]);
        }
        cost
    }

    /// Terminal datum: the terminal slice inside the box, the obstacle
    /// evaluated directly outside it.
    pub fn terminal_at(&self, z: &[f64]) -> f64 {
        let m = self.vg.steps();
        if self.vg.grid.contains(z) {
            self.vg.grid.interp(&self.vg.values[m], z, Outside::Infinite)
        } else {
            terminal_obstacle(self.spec, self.cands, z).value
        }
    }

    /// Value at slice `k` and point `z`, following the characteristic.
    pub fn value_at(&self, k: usize, z0: &[f64]) -> f64 {
        let n = z0.len();
        let m = self.vg.steps();
        if k == m {
            return self.terminal_at(z0);
        }
        let mut z = [0.0; MAX_DIM];
        z[..n].copy_from_slice(z0);
        let mut acc = 0.0;
        let mut best = f64::INFINITY;
        for j in k..m {
            let nj = self.vg.grid.interp(&self.vg.interventions[j], &z[..n], self.outside);
            best = best.min(acc + nj);
            // values and running costs are nonnegative
            if best <= acc {
                return best;
            }
            acc += self.step(j, &mut z[..n]);
            if z[..n].iter().any(|v| !v.is_finite()) {
                return best;
            }
        }
        best.min(acc + self.terminal_at(&z[..n]))
    }

    /// `C_k(x)`: running cost over one step plus the value at slice `k + 1`.
    pub fn continuation_at(&self, k: usize, x: &[f64]) -> f64 {
        let n = x.len();
        let mut z = [0.0; MAX_DIM];
        z[..n].copy_from_slice(x);
        let g = self.step(k, &mut z[..n]);
        g + self.value_at(k + 1, &z[..n])
    }

    /// `min_xi slice(x + xi) + l(t, x, xi)` over the candidates, with
    /// its argmin index. `x` must lie in the box.
    pub fn intervention_on(&self, slice: &[f64], t: f64, x: &[f64], outside: Outside) -> (f64, Option<usize>) {
        intervention_scan(self.spec, &self.vg.grid, self.cands, slice, t, x, outside)
    }
}

fn intervention_scan(
    spec: &ProblemSpec,
    grid: &SpatialGrid,
    cands: &CandidateSet,
    slice: &[f64],
    t: f64,
    x: &[f64],
    outside: Outside,
) -> (f64, Option<usize>) {
    let n = x.len();
    let l = &spec.costs.l;
    let mut exited = vec![false; cands.n_dirs()];
    let mut n_exited = 0;
    let mut best = f64::INFINITY;
    let mut arg = None;
    let mut y = [0.0; MAX_DIM];
    for i in 0..cands.len() {
        let (xi, r) = cands.get(i);
        if l.lower_bound(t, r) >= best {
            break;
        }
        // index 0 is the zero impulse, which has no direction
        let d = cands.dir_of(i) as usize;
        if i > 0 && exited[d] {
            continue;
        }
        for a in 0..n {
            y[a] = x[a] + xi[a];
        }
        if i > 0 && outside == Outside::Infinite && !grid.contains(&y[..n]) {
            // the box is convex, so the rest of this ray is outside too
            exited[d] = true;
            n_exited += 1;
            if n_exited == exited.len() {
                break;
            }
            continue;
        }
        let v = grid.interp(slice, &y[..n], outside);
        if v == f64::INFINITY {
            continue;
        }
        let c = v + l.eval_norm(t, x, r);
        if c < best {
            best = c;
            arg = Some(i);
        }
    }
    (best, arg)
}

/// Intervention operator applied to a slice of node values:
/// `min over candidates of interp(slice, x + xi) + l(t, x, xi)`, with `+inf`
/// outside the box in constrained mode.
pub fn intervention(
    spec: &ProblemSpec,
    grid: &SpatialGrid,
    cands: &CandidateSet,
    slice: &[f64],
    t: f64,
    x: &[f64],
    mode: Mode,
) -> (f64, Option<Vec<f64>>) {
    let outside = if mode == Mode::Constrained { Outside::Infinite } else { Outside::Clamp };
    let (v, arg) = intervention_scan(spec, grid, cands, slice, t, x, outside);
    (v, arg.map(|i| cands.get(i).0.to_vec()))
}

fn max_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&u, &v)| if u == v { 0.0 } else { (u - v).abs() })
        .fold(0.0, f64::max)
}

/// Terminal slice shared by both modes: `min(h^D, N[h^D])` at the nodes,
/// with landings restricted to the box. Returns `(h^D, N[h^D], slice, policy)`.
fn terminal_slice(
    spec: &ProblemSpec,
    grid: &SpatialGrid,
    cands: &CandidateSet,
    override_values: Option<&[f64]>,
    tie: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<u32>) {
    let big_t = spec.horizon;
    let n = grid.dim();
    let direct: Vec<(f64, u32)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            let o = terminal_obstacle(spec, cands, &x);
            let idx = match &o.branch {
                Branch::Impulse(xi) => (1..cands.len())
                    .find(|&j| cands.get(j).0 == xi.as_slice())
                    .map_or(CONTINUE, |j| j as u32),
                _ => CONTINUE,
            };
            (o.value, idx)
        })
        .collect();
    let hd: Vec<f64> = match override_values {
        Some(v) => v.to_vec(),
        None => direct.iter().map(|d| d.0).collect(),
    };
    let nt: Vec<(f64, Option<usize>)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut x = [0.0; MAX_DIM];
            grid.node_into(i, &mut x[..n]);
            intervention_scan(spec, grid, cands, &hd, big_t, &x[..n], Outside::Infinite)
        })
        .collect();
    let slice: Vec<f64> = hd.iter().zip(&nt).map(|(&h, &(v, _))| h.min(v)).collect();
    let policy: Vec<u32> = (0..grid.len())
        .map(|i| {
            if nt[i].0 < hd[i] - tie {
                nt[i].1.map_or(CONTINUE, |j| j as u32)
            } else if override_values.is_none() {
                direct[i].1
            } else {
                CONTINUE
            }
        })
        .collect();
    (hd, nt.into_iter().map(|p| p.0).collect(), slice, policy)
}

/// Solves backward from `T` on `grid` with `opts.steps` time steps.
pub fn solve(spec: &ProblemSpec, grid: &SpatialGrid, opts: &SolveOptions) -> Result<ValueGrid> {
    spec.check()?;
    if grid.dim() != spec.dimension {
        return Err(Error::InvalidArgument(format!("grid has {} axes, spec dimension is {}", grid.dim(), spec.dimension)));
    }
    if opts.steps == 0 {
        return Err(Error::InvalidArgument("at least one time step is needed".into()));
    }
    let started = Instant::now();
    let m = opts.steps;
    let n = grid.dim();
    let big_t = spec.horizon;
    let times: Vec<f64> = (0..=m).map(|k| if k == m { big_t } else { big_t * k as f64 / m as f64 }).collect();
    let cands = CandidateSet::for_spec(spec, Some(opts.candidate_step.unwrap_or(grid.min_spacing())));
    let flow_step = opts.flow_step.unwrap_or_else(|| default_step(spec));
    if let Some(o) = &opts.terminal_override {
        if o.len() != grid.len() {
            return Err(Error::InvalidArgument("terminal override has the wrong length".into()));
        }
    }
    log::info!(
        "solving on {:?} cells, {} steps, {} impulse candidates",
        grid.cells(),
        m,
        cands.len()
    );

    let (hd, nt, vt, pt) = terminal_slice(spec, grid, &cands, opts.terminal_override.as_deref(), opts.tie_tol);
    let nodes = grid.len();
    let mut vg = ValueGrid {
        grid: grid.clone(),
        times,
        mode: opts.mode,
        candidates: cands.params(),
        flow_step,
        tie_tol: opts.tie_tol,
        values: vec![Vec::new(); m + 1],
        continuation: vec![Vec::new(); m + 1],
        interventions: vec![Vec::new(); m + 1],
        policy: vec![Vec::new(); m + 1],
        sweeps: vec![0; m + 1],
        flagged: Vec::new(),
        spec_hash: spec.hash(),
        elapsed_ms: 0.0,
    };
    vg.values[m] = vt;
    vg.continuation[m] = hd;
    vg.interventions[m] = nt;
    vg.policy[m] = pt;
    let outside = match opts.mode {
        Mode::Constrained => Outside::Infinite,
        Mode::Unconstrained => Outside::Clamp,
    };
    let mut clamped = 0usize;

    for k in (0..m).rev() {
        let tk = vg.times[k];
        let (c, u, nk, args, sweeps, converged) = {
            let ev = Evaluator::new(spec, &vg, &cands);
            let c: Vec<f64> = (0..nodes)
                .into_par_iter()
                .map(|i| {
                    let mut x = [0.0; MAX_DIM];
                    grid.node_into(i, &mut x[..n]);
                    ev.continuation_at(k, &x[..n])
                })
                .collect();
            let scale = c.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
            let tol_fp = opts.tol_fp.unwrap_or(1e-12 * (1.0 + scale));
            let cap = ((scale + 1.0) / spec.costs.l.l0).ceil().max(1.0) as usize;
            let mut u = c.clone();
            let mut sweeps = 0;
            let mut converged = false;
            let (mut nk, mut args): (Vec<f64>, Vec<Option<usize>>);
            loop {
                let res: Vec<(f64, Option<usize>)> = (0..nodes)
                    .into_par_iter()
                    .map(|i| {
                        let mut x = [0.0; MAX_DIM];
                        grid.node_into(i, &mut x[..n]);
                        ev.intervention_on(&u, tk, &x[..n], outside)
                    })
                    .collect();
                nk = res.iter().map(|r| r.0).collect::<Vec<f64>>();
                args = res.into_iter().map(|r| r.1).collect::<Vec<_>>();
                let next: Vec<f64> = c.iter().zip(&nk).map(|(&a, &b)| a.min(b)).collect();
                let change = max_change(&next, &u);
                u = next;
                sweeps += 1;
                if change <= tol_fp {
                    converged = true;
                    break;
                }
                if sweeps > cap {
                    break;
                }
            }
            (c, u, nk, args, sweeps, converged)
        };
        if !converged {
            log::warn!("obstacle iteration at t = {tk} stopped at the impulse-count cap");
            vg.flagged.push(k);
        }
        if opts.mode == Mode::Unconstrained && k == 0 {
            let ev = Evaluator::new(spec, &vg, &cands);
            let mut z = vec![0.0; n];
            for i in 0..nodes {
                grid.node_into(i, &mut z);
                ev.step(0, &mut z);
                if !grid.contains(&z) {
                    clamped += 1;
                }
            }
        }
        vg.policy[k] = (0..nodes)
            .map(|i| match args[i] {
                Some(j) if nk[i] < c[i] - opts.tie_tol => j as u32,
                _ => CONTINUE,
            })
            .collect();
        vg.values[k] = u;
        vg.continuation[k] = c;
        vg.interventions[k] = nk;
        vg.sweeps[k] = sweeps;
    }
    if clamped > 0 {
        log::warn!("{clamped} characteristics leave the box; unconstrained values there use constant extrapolation");
    }
    vg.elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(vg)
}

/// Follows the stored policy from `(t, x)`: flow while waiting is at least
/// as good, jump with the scheme's argmin otherwise, and use the terminal
/// obstacle at `T`.
pub fn synthesize_control(spec: &ProblemSpec, vg: &ValueGrid, t: f64, x: &[f64]) -> Result<ImpulseControl> {
    let cands = vg.candidate_set(spec);
    let ev = Evaluator::new(spec, vg, &cands);
    let m = vg.steps();
    let outside = if vg.mode == Mode::Constrained { Outside::Infinite } else { Outside::Clamp };
    let mut k = vg.times.iter().position(|&tk| tk >= t - 1e-12).unwrap_or(m);
    let mut z = crate::dynamics::flow_no_impulse(spec, t, x, vg.times[k], vg.flow_step)?;
    if (vg.times[k] - t).abs() <= 1e-12 {
        z = x.to_vec();
    }
    let start_value = ev.value_at(k, &z);
    if !start_value.is_finite() {
        return Err(Error::SynthesisIncomplete { t, reason: "value is infinite".into(), partial: ImpulseControl::trivial() });
    }
    let cap = ((start_value + 1.0) / spec.costs.l.l0).ceil() as usize + 1;
    let mut ctrl = ImpulseControl::trivial();
    let incomplete = |t: f64, reason: &str, ctrl: &ImpulseControl| Error::SynthesisIncomplete {
        t,
        reason: reason.into(),
        partial: ctrl.clone(),
    };
    while k < m {
        let tk = vg.times[k];
        if !vg.grid.contains(&z) {
            return Err(incomplete(tk, "state left the grid", &ctrl));
        }
        for _ in 0..cap {
            let (nv, arg) = ev.intervention_on(&vg.values[k], tk, &z, outside);
            let cv = ev.continuation_at(k, &z);
            match arg {
                Some(i) if nv < cv - vg.tie_tol => {
                    let xi = cands.get(i).0.to_vec();
                    for (a, b) in z.iter_mut().zip(&xi) {
                        *a += b;
                    }
                    ctrl.impulses.push(Impulse { tau: tk, xi });
                }
                _ => break,
            }
        }
        ev.step(k, &mut z);
        k += 1;
    }
    match terminal_obstacle(spec, &cands, &z).branch {
        Branch::NoImpulse => {}
        Branch::Impulse(xi) => ctrl.impulses.push(Impulse { tau: spec.horizon, xi }),
        Branch::Infeasible => return Err(incomplete(spec.horizon, "terminal state cannot reach the target", &ctrl)),
    }
    Ok(ctrl)
}

/// Constrained versus unconstrained solve on the same grid.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    /// Terminal slices are bit-for-bit identical.
    pub terminal_bitwise_equal: bool,
    /// Largest `|V(T) - h^D|` at the nodes (the idempotence identity).
    pub terminal_obstacle_gap: f64,
    /// Largest `|V - V~|` over nodes finite in both solves.
    pub max_abs_diff: f64,
    /// `(t, x)` where the largest difference occurs.
    pub argmax: Option<(f64, Vec<f64>)>,
    /// Same, restricted to nodes whose characteristics cannot reach the
    /// edge of the box before `T`, where the two modes treat the outside
    /// differently.
    pub max_abs_diff_away_from_edge: f64,
    /// Nodes finite in both solves.
    pub both_finite: usize,
    /// Nodes where the two differ by more than `1e-9`.
    pub differing: usize,
    /// Nodes finite only in the unconstrained solve.
    pub finite_only_unconstrained: usize,
}

pub struct Comparison {
    pub report: ComparisonReport,
    pub constrained: ValueGrid,
    pub unconstrained: ValueGrid,
}

/// Solves in both modes and compares the value grids.
pub fn solve_unconstrained_compare(spec: &ProblemSpec, grid: &SpatialGrid, opts: &SolveOptions) -> Result<Comparison> {
    let v = solve(spec, grid, &opts.clone().mode(Mode::Constrained))?;
    let w = solve(spec, grid, &opts.clone().mode(Mode::Unconstrained))?;
    let m = v.steps();
    let terminal_bitwise_equal =
        v.values[m].iter().zip(&w.values[m]).all(|(a, b)| a.to_bits() == b.to_bits());
    let terminal_obstacle_gap = v.values[m]
        .iter()
        .zip(&v.continuation[m])
        .map(|(a, b)| if a == b { 0.0 } else { (a - b).abs() })
        .fold(0.0, f64::max);
    let mut report = ComparisonReport {
        terminal_bitwise_equal,
        terminal_obstacle_gap,
        max_abs_diff: 0.0,
        argmax: None,
        max_abs_diff_away_from_edge: 0.0,
        both_finite: 0,
        differing: 0,
        finite_only_unconstrained: 0,
    };
    let far = grid.lower().iter().zip(grid.upper()).map(|(l, u)| l.abs().max(u.abs()).powi(2)).sum::<f64>().sqrt();
    let drift = crate::geometry::max_drift(spec, far);
    for k in 0..=m {
        let margin = drift * (spec.horizon - v.times[k]) + 2.0 * grid.min_spacing();
        for i in 0..grid.len() {
            let x = grid.node(i);
            let away = (0..grid.dim()).all(|a| x[a] - grid.lower()[a] >= margin && grid.upper()[a] - x[a] >= margin);
            let (a, b) = (v.values[k][i], w.values[k][i]);
            match (a.is_finite(), b.is_finite()) {
                (true, true) => {
                    report.both_finite += 1;
                    let d = (a - b).abs();
                    if d > 1e-9 {
                        report.differing += 1;
                    }
                    if d > report.max_abs_diff {
                        report.max_abs_diff = d;
                        report.argmax = Some((v.times[k], x));
                    }
                    if away {
                        report.max_abs_diff_away_from_edge = report.max_abs_diff_away_from_edge.max(d);
                    }
                }
                (false, true) => report.finite_only_unconstrained += 1,
                _ => {}
            }
        }
    }
    Ok(Comparison { report, constrained: v, unconstrained: w })
}
