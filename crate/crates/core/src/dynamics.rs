//! Forward integration of the impulse-controlled state equation and the
//! impulse-free flow in both time directions.

use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{axis_columns, fmt_f64, write_csv};
use crate::linalg::{dist, norm};
use crate::model::{Dynamics, ProblemSpec};

/// One impulse: time and jump vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Impulse {
    pub tau: f64,
    pub xi: Vec<f64>,
}

/// Finite list of impulses with nondecreasing times. The empty list is the
/// trivial control.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImpulseControl {
    pub impulses: Vec<Impulse>,
}

impl ImpulseControl {
    pub fn trivial() -> Self {
        ImpulseControl::default()
    }

    pub fn single(tau: f64, xi: Vec<f64>) -> Self {
        ImpulseControl { impulses: vec![Impulse { tau, xi }] }
    }

    pub fn len(&self) -> usize {
        self.impulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.impulses.is_empty()
    }

    /// Checks ordering, time range, dimension and cone membership.
    pub fn validate(&self, spec: &ProblemSpec, t: f64) -> Result<()> {
        let eps = 1e-12 * (1.0 + spec.horizon);
        let mut prev = t;
        for (k, imp) in self.impulses.iter().enumerate() {
            if imp.xi.len() != spec.dimension {
                return Err(Error::InvalidControl(format!("impulse {k} has dimension {}", imp.xi.len())));
            }
            if imp.tau < prev - eps || imp.tau > spec.horizon + eps || imp.tau.is_nan() {
                return Err(Error::InvalidControl(format!(
                    "impulse {k} at time {} is out of order or outside [{t}, {}]",
                    imp.tau, spec.horizon
                )));
            }
            if !spec.cone.contains(&imp.xi, 1e-9) {
                return Err(Error::InvalidControl(format!("impulse {k} = {:?} is not in the cone", imp.xi)));
            }
            prev = imp.tau;
        }
        Ok(())
    }
}

/// A jump as it happened: the pre-state is the left limit after all earlier
/// impulses at the same time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpRecord {
    pub tau: f64,
    pub pre: Vec<f64>,
    pub xi: Vec<f64>,
    pub post: Vec<f64>,
}

/// A sample of the state path. Post-jump samples carry the jump vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajNode {
    pub s: f64,
    pub x: Vec<f64>,
    pub jump: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub nodes: Vec<TrajNode>,
    pub jumps: Vec<JumpRecord>,
    /// `X(T - 0)`.
    pub terminal_pre: Vec<f64>,
    /// `X(T)`, after impulses at `T`.
    pub terminal: Vec<f64>,
    /// Index ranges of `nodes` forming impulse-free segments on a uniform mesh
    /// with an even number of steps.
    pub segments: Vec<Range<usize>>,
}

impl Trajectory {
    /// CSV with columns `s, x1..xn, is_jump, xi1..xin`; the jump vector is
    /// empty on flow samples.
    pub fn write_csv(&self, path: &Path, spec_hash: &str) -> Result<()> {
        let n = self.terminal.len();
        let mut header = vec!["s".to_string()];
        header.extend(axis_columns("x", n));
        header.push("is_jump".into());
        header.extend(axis_columns("xi", n));
        let rows = self.nodes.iter().map(|node| {
            let mut row = vec![fmt_f64(node.s)];
            row.extend(node.x.iter().map(|&v| fmt_f64(v)));
            match &node.jump {
                Some(xi) => {
                    row.push("1".into());
                    row.extend(xi.iter().map(|&v| fmt_f64(v)));
                }
                None => {
                    row.push("0".into());
                    row.extend(std::iter::repeat_n(String::new(), n));
                }
            }
            row
        });
        write_csv(path, spec_hash, &header, rows)
    }
}

/// Classical fourth-order Runge-Kutta with reusable scratch space.
pub struct Rk4<'a> {
    f: &'a Dynamics,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'a> Rk4<'a> {
    pub fn new(f: &'a Dynamics, n: usize) -> Self {
        Rk4 { f, k: std::array::from_fn(|_| vec![0.0; n]), tmp: vec![0.0; n] }
    }

    /// One step of size `h` (negative `h` integrates backward).
    pub fn step(&mut self, t: f64, x: &mut [f64], h: f64) {
        let n = x.len();
        let [k1, k2, k3, k4] = &mut self.k;
        self.f.eval_into(t, x, k1);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        self.f.eval_into(t + 0.5 * h, &self.tmp, k2);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        self.f.eval_into(t + 0.5 * h, &self.tmp, k3);
        for i in 0..n {
            self.tmp[i] = x[i] + h * k3[i];
        }
        self.f.eval_into(t + h, &self.tmp, k4);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    /// Integrates from `t0` to `t1` in equal steps no longer than `max_step`.
    pub fn advance(&mut self, t0: f64, x: &mut [f64], t1: f64, max_step: f64) -> Result<()> {
        if t1 == t0 {
            return Ok(());
        }
        if let Dynamics::ConstantDrift { drift } = self.f {
            for (xi, d) in x.iter_mut().zip(drift) {
                *xi += d * (t1 - t0);
            }
            return Ok(());
        }
        let steps = ((t1 - t0).abs() / max_step - 1e-9).ceil().max(1.0) as usize;
        let h = (t1 - t0) / steps as f64;
        for k in 0..steps {
            let t = t0 + k as f64 * h;
            self.step(t, x, h);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Integration { t: t + h });
            }
        }
        Ok(())
    }
}

/// Default integration step: `T / 1000`.
pub fn default_step(spec: &ProblemSpec) -> f64 {
    spec.horizon / 1000.0
}

/// The impulse-free flow `X(t_hat; t, x)`.
pub fn flow_no_impulse(spec: &ProblemSpec, t: f64, x: &[f64], t_hat: f64, dt: f64) -> Result<Vec<f64>> {
    if t_hat < t {
        return Err(Error::InvalidArgument(format!("flow end {t_hat} precedes start {t}")));
    }
    let mut y = x.to_vec();
    Rk4::new(&spec.dynamics.family, x.len()).advance(t, &mut y, t_hat, dt)?;
    Ok(y)
}

/// Solution at time `t` of `Y' = f(s, Y)` with `Y(t_end) = zeta`, integrated
/// backward.
pub fn backward_flow(spec: &ProblemSpec, t_end: f64, zeta: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
    if t > t_end {
        return Err(Error::InvalidArgument(format!("backward flow target {t} is after {t_end}")));
    }
    let mut y = zeta.to_vec();
    Rk4::new(&spec.dynamics.family, zeta.len()).advance(t_end, &mut y, t, dt)?;
    Ok(y)
}

/// Integrates the controlled system from `(t, x)` up to `T`. Impulse times
/// are mesh nodes; simultaneous impulses are applied in list order.
pub fn integrate(spec: &ProblemSpec, t: f64, x: &[f64], ctrl: &ImpulseControl, dt: f64) -> Result<Trajectory> {
    if x.len() != spec.dimension {
        return Err(Error::InvalidArgument(format!("state has dimension {}", x.len())));
    }
    if !(t >= 0.0 && t < spec.horizon) {
        return Err(Error::InvalidArgument(format!("start time {t} outside [0, T)")));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("integration step must be positive".into()));
    }
    ctrl.validate(spec, t)?;
    let big_t = spec.horizon;
    let eps = 1e-12 * (1.0 + big_t);
    let mut rk = Rk4::new(&spec.dynamics.family, x.len());
    let mut state = x.to_vec();
    let mut nodes = vec![TrajNode { s: t, x: state.clone(), jump: None }];
    let mut jumps = Vec::new();
    let mut segments = Vec::new();
    let mut next = 0;
    let imps = &ctrl.impulses;

    let mut apply = |s: f64, upto: f64, state: &mut Vec<f64>, nodes: &mut Vec<TrajNode>, next: &mut usize| {
        while *next < imps.len() && imps[*next].tau <= upto + eps {
            let xi = &imps[*next].xi;
            let pre = state.clone();
            for (a, b) in state.iter_mut().zip(xi) {
                *a += b;
            }
            jumps.push(JumpRecord { tau: s, pre, xi: xi.clone(), post: state.clone() });
            nodes.push(TrajNode { s, x: state.clone(), jump: Some(xi.clone()) });
            *next += 1;
        }
    };

    apply(t, t, &mut state, &mut nodes, &mut next);
    let mut a = t;
    loop {
        let b = if next < imps.len() && imps[next].tau < big_t - eps { imps[next].tau } else { big_t };
        if b > a {
            let mut m = ((b - a) / dt - 1e-9).ceil().max(2.0) as usize;
            m += m % 2;
            let h = (b - a) / m as f64;
            let start = nodes.len() - 1;
            let origin = state.clone();
            for k in 0..m {
                let s = a + k as f64 * h;
                match &spec.dynamics.family {
                    // closed form, free of accumulated rounding
                    Dynamics::ConstantDrift { drift } => {
                        let s1 = if k + 1 == m { b } else { a + (k + 1) as f64 * h };
                        for i in 0..state.len() {
                            state[i] = origin[i] + drift[i] * (s1 - a);
                        }
                    }
                    _ => rk.step(s, &mut state, h),
                }
                if state.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Integration { t: s + h });
                }
                let s1 = if k + 1 == m { b } else { a + (k + 1) as f64 * h };
                nodes.push(TrajNode { s: s1, x: state.clone(), jump: None });
            }
            segments.push(start..nodes.len());
        }
        if b >= big_t {
            break;
        }
        apply(b, b, &mut state, &mut nodes, &mut next);
        a = b;
    }
    let terminal_pre = state.clone();
    apply(big_t, f64::INFINITY, &mut state, &mut nodes, &mut next);
    Ok(Trajectory { nodes, jumps, terminal_pre, terminal: state, segments })
}

/// Worst slacks of the trajectory estimates (negative means violated).
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    /// `min` over nodes of the norm bound minus `|X(s)|`.
    pub norm_slack: f64,
    /// `min` over sampled pairs of the modulus bound minus the increment.
    pub modulus_slack: f64,
    pub pairs_checked: usize,
    pub passed: bool,
}

/// Checks the growth bound on `|X(s)|` at every node and the increment bound
/// on sampled pairs of right limits.
pub fn check_trajectory_bounds(spec: &ProblemSpec, traj: &Trajectory, t: f64, x: &[f64], ctrl: &ImpulseControl) -> BoundReport {
    let l = spec.dynamics.lipschitz;
    let x0 = 1.0 + norm(x);
    let imps: Vec<(f64, f64)> = ctrl.impulses.iter().map(|i| (i.tau, norm(&i.xi))).collect();
    let mut norm_slack = f64::INFINITY;
    for node in &traj.nodes {
        let s = node.s;
        let mut bound = (l * (s - t)).exp() * x0;
        for &(tau, r) in &imps {
            if tau <= s {
                bound += (l * (s - tau)).exp() * r;
            }
        }
        norm_slack = norm_slack.min(bound - norm(&node.x));
    }

    // right limits X(s + 0): the last node at each time
    let mut right: Vec<(f64, &[f64])> = Vec::new();
    for node in &traj.nodes {
        match right.last_mut() {
            Some(last) if last.0 == node.s => last.1 = &node.x,
            _ => right.push((node.s, &node.x)),
        }
    }
    let stride = (right.len() / 60).max(1);
    let picked: Vec<usize> = (0..right.len()).filter(|i| i % stride == 0 || i + 1 == right.len()).collect();
    let mut modulus_slack = f64::INFINITY;
    let mut pairs = 0;
    let mut check = |i: usize, j: usize| {
        let (s, xs) = right[i];
        let (s2, xs2) = right[j];
        let mut coeff = (-l * t).exp() * x0;
        let mut inner = 0.0;
        for &(tau, r) in &imps {
            if tau <= s2 {
                coeff += r * (-l * tau).exp();
            }
            if tau > s && tau <= s2 {
                inner += r;
            }
        }
        let bound = l * (s2 - s) + coeff * ((l * s2).exp() - (l * s).exp()) + inner;
        modulus_slack = modulus_slack.min(bound - dist(xs, xs2));
        pairs += 1;
    };
    for (a, &i) in picked.iter().enumerate() {
        for &j in &picked[a + 1..] {
            check(i, j);
        }
    }
    for i in 0..right.len().saturating_sub(1) {
        check(i, i + 1);
    }
    let tol = 1e-9 * (1.0 + norm(x));
    BoundReport {
        norm_slack,
        modulus_slack,
        pairs_checked: pairs,
        passed: norm_slack >= -tol && modulus_slack >= -tol,
    }
}

/// Worst slack of `|X(s) - X_hat(s)| <= e^{L(s-t)} |x - x_hat|` over the
/// common mesh of two trajectories driven by the same control.
pub fn check_stability(spec: &ProblemSpec, t: f64, x: &[f64], x_hat: &[f64], ctrl: &ImpulseControl, dt: f64) -> Result<f64> {
    let a = integrate(spec, t, x, ctrl, dt)?;
    let b = integrate(spec, t, x_hat, ctrl, dt)?;
    let l = spec.dynamics.lipschitz;
    let d0 = dist(x, x_hat);
    Ok(a.nodes
        .iter()
        .zip(&b.nodes)
        .map(|(p, q)| (l * (p.s - t)).exp() * d0 - dist(&p.x, &q.x))
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, Scalar};
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn constant_drift_is_exact() {
        let spec = catalog::benchmark(Scalar::ZeroCosts);
        let tr = integrate(&spec, 0.0, &[0.0], &ImpulseControl::trivial(), 1e-3).unwrap();
        assert_eq!(tr.terminal, vec![1.0]);
        let y = flow_no_impulse(&spec, 0.25, &[0.5], 0.75, 1e-3).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-15);
        assert_eq!(flow_no_impulse(&spec, 0.3, &[0.5], 0.3, 1e-3).unwrap(), vec![0.5]);
        let z = backward_flow(&spec, 1.0, &[0.5], 0.25, 1e-3).unwrap();
        assert!((z[0] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn pure_jump_with_zero_drift() {
        let mut spec = catalog::benchmark(Scalar::ZeroCosts);
        spec.dynamics.family = Dynamics::ConstantDrift { drift: vec![0.0] };
        let ctrl = ImpulseControl::single(0.4, vec![0.7]);
        let tr = integrate(&spec, 0.0, &[0.2], &ctrl, 1e-2).unwrap();
        for n in &tr.nodes {
            let expect = if n.s < 0.4 || (n.s == 0.4 && n.jump.is_none()) { 0.2 } else { 0.9 };
            assert!((n.x[0] - expect).abs() < 1e-15, "{n:?}");
        }
        assert_eq!(tr.jumps.len(), 1);
        assert_eq!(tr.jumps[0].pre, vec![0.2]);
    }

    #[test]
    fn rotation_quarter_turn() {
        let spec = catalog::rotation_disk();
        let y = flow_no_impulse(&spec, 0.0, &[1.0, 0.0], FRAC_PI_2, 1e-3).unwrap();
        assert!((y[0]).abs() < 1e-6 && (y[1] + 1.0).abs() < 1e-6);
        let z = backward_flow(&spec, FRAC_PI_2, &[1.0, 0.0], 0.0, 1e-3).unwrap();
        assert!((z[0]).abs() < 1e-6 && (z[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn affine_half_turn() {
        let mut spec = catalog::rotation_disk();
        spec.horizon = 4.0;
        spec.dynamics.family = Dynamics::Affine { a: vec![vec![0.0, 1.0], vec![-1.0, 0.0]], b0: vec![0.0, 0.0], b1: None };
        let y = flow_no_impulse(&spec, 0.0, &[0.0, 1.0], PI, 1e-3).unwrap();
        assert!(y[0].abs() < 1e-6 && (y[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn simultaneous_impulses_chain_pre_states() {
        let spec = catalog::benchmark(Scalar::ZeroCosts);
        let ctrl = ImpulseControl {
            impulses: vec![Impulse { tau: 0.5, xi: vec![0.25] }, Impulse { tau: 0.5, xi: vec![-1.0] }],
        };
        let tr = integrate(&spec, 0.0, &[0.0], &ctrl, 1e-3).unwrap();
        assert_eq!(tr.jumps.len(), 2);
        assert_eq!(tr.jumps[1].pre[0], tr.jumps[0].pre[0] + 0.25);
        assert!((tr.terminal[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn impulse_at_horizon_only_moves_terminal() {
        let spec = catalog::benchmark(Scalar::ZeroCosts);
        let tr = integrate(&spec, 0.0, &[0.0], &ImpulseControl::single(1.0, vec![-0.5]), 1e-3).unwrap();
        assert_eq!(tr.terminal_pre, vec![1.0]);
        assert_eq!(tr.terminal, vec![0.5]);
    }

    #[test]
    fn rejects_bad_controls() {
        let spec = catalog::benchmark(Scalar::OneSided);
        let neg = ImpulseControl::single(0.5, vec![-1.0]);
        assert!(matches!(integrate(&spec, 0.0, &[0.0], &neg, 1e-3), Err(Error::InvalidControl(_))));
        let late = ImpulseControl::single(1.5, vec![1.0]);
        assert!(integrate(&spec, 0.0, &[0.0], &late, 1e-3).is_err());
    }

    #[test]
    fn blow_up_reports_time() {
        let mut spec = catalog::benchmark(Scalar::ZeroCosts);
        spec.dynamics.family = Dynamics::Polynomial {
            terms: vec![crate::model::PolyTerm { component: 0, coeff: 1.0, powers: vec![2] }],
        };
        let r = integrate(&spec, 0.0, &[1e200], &ImpulseControl::trivial(), 1e-2);
        assert!(matches!(r, Err(Error::Integration { .. })));
    }

    #[test]
    fn bounds_hold_for_drift_without_impulses() {
        let spec = catalog::benchmark(Scalar::ZeroCosts);
        let ctrl = ImpulseControl::trivial();
        let tr = integrate(&spec, 0.0, &[0.0], &ctrl, 1e-2).unwrap();
        let r = check_trajectory_bounds(&spec, &tr, 0.0, &[0.0], &ctrl);
        assert!(r.passed && r.norm_slack > 0.0, "{r:?}");
        let s = check_stability(&spec, 0.0, &[0.0], &[0.3], &ImpulseControl::single(0.2, vec![1.0]), 1e-2).unwrap();
        assert!(s >= -1e-12);
    }
}
