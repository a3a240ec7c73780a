//! Backward reachable sets on a grid.
//!
//! Sets are represented by level functions: `L <= thr` marks the set. The
//! terminal level is the negated target margin (signed, so interpolation
//! stays accurate across the boundary instead of eroding it), and each backward stage composes
//! with the flow and erodes by the cone (`min over xi in K of L(x + xi)`),
//! which is the level-set form of `Phi^-1(S) - K`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Rk4;
use crate::error::{Error, Result};
use crate::geometry::{max_drift, CandidateSet};
use crate::grid::{Outside, SpatialGrid, MAX_DIM};
use crate::io::{axis_columns, fmt_f64, write_csv};
use crate::model::{ConeSpec, ProblemSpec};

#[derive(Debug, Clone, Default)]
pub struct ReachOptions {
    /// Extra cells on every side of the grid; defaults to the distance the
    /// flow can travel over the partition.
    pub pad: Option<usize>,
    pub flow_step: Option<f64>,
    pub threshold: Option<f64>,
}

/// Tri-state membership answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Reach {
    Reachable,
    Unreachable,
    /// The point is outside the grid box.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachableMask {
    pub grid: SpatialGrid,
    pub partition: Vec<f64>,
    /// One boolean per node of `grid`, per partition time.
    pub slices: Vec<Vec<bool>>,
    pub pad: usize,
    pub warnings: Vec<String>,
    pub spec_hash: String,
}

impl ReachableMask {
    /// Index of the partition time closest to `t`.
    pub fn slice_index(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, &tk) in self.partition.iter().enumerate() {
            if (tk - t).abs() < (self.partition[best] - t).abs() {
                best = k;
            }
        }
        best
    }

    pub fn count(&self, k: usize) -> usize {
        self.slices[k].iter().filter(|&&b| b).count()
    }

    pub fn is_full(&self, k: usize) -> bool {
        self.slices[k].iter().all(|&b| b)
    }

    /// Reachable if any corner of the cell containing `x` is marked.
    pub fn reachable_at(&self, t: f64, x: &[f64]) -> Reach {
        let k = self.slice_index(t);
        match self.grid.cell_corners(x) {
            None => Reach::Unknown,
            Some(c) if c.iter().any(|&i| self.slices[k][i]) => Reach::Reachable,
            Some(_) => Reach::Unreachable,
        }
    }

    /// `(t, x1..xn, reachable)` for every slice.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let n = self.grid.dim();
        let mut header = vec!["t".to_string()];
        header.extend(axis_columns("x", n));
        header.push("reachable".into());
        let rows = self.slices.iter().zip(&self.partition).flat_map(|(s, &t)| {
            (0..self.grid.len()).map(move |i| {
                let mut row = vec![fmt_f64(t)];
                row.extend(self.grid.node(i).into_iter().map(fmt_f64));
                row.push(if s[i] { "1" } else { "0" }.into());
                row
            })
        });
        write_csv(path, &self.spec_hash, &header, rows)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// `n` equal steps from `t0` to `T`.
pub fn uniform_partition(t0: f64, big_t: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| if k == n { big_t } else { t0 + (big_t - t0) * k as f64 / n as f64 }).collect()
}

/// Inserts the midpoint of every interval.
pub fn refine_partition(p: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * p.len());
    for w in p.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.extend(p.last());
    out
}

fn axis_generators(cone: &ConeSpec) -> Option<Vec<(usize, bool)>> {
    cone.generators
        .iter()
        .map(|g| {
            let nz: Vec<usize> = (0..g.len()).filter(|&i| g[i] != 0.0).collect();
            (nz.len() == 1).then(|| (nz[0], g[nz[0]] > 0.0))
        })
        .collect()
}

/// `min over xi in K of v(x + xi)` on the grid, in place.
fn erode(grid: &SpatialGrid, cone: &ConeSpec, cands: &CandidateSet, v: &mut Vec<f64>) {
    if cone.full_space {
        let m = v.iter().copied().fold(f64::INFINITY, f64::min);
        v.fill(m);
        return;
    }
    if let Some(axes) = axis_generators(cone) {
        for (a, positive) in axes {
            let s = grid.stride(a);
            let last = grid.cells()[a];
            if positive {
                for i in (0..v.len()).rev() {
                    if grid.multi_index(i)[a] < last {
                        v[i] = v[i].min(v[i + s]);
                    }
                }
            } else {
                for i in 0..v.len() {
                    if grid.multi_index(i)[a] > 0 {
                        v[i] = v[i].min(v[i - s]);
                    }
                }
            }
        }
        return;
    }
    let n = grid.dim();
    let src = std::mem::take(v);
    *v = (0..src.len())
        .into_par_iter()
        .map(|i| {
            let mut x = [0.0; MAX_DIM];
            let mut y = [0.0; MAX_DIM];
            grid.node_into(i, &mut x[..n]);
            let mut best = src[i];
            for (xi, _) in cands.iter() {
                for a in 0..n {
                    y[a] = x[a] + xi[a];
                }
                best = best.min(grid.interp(&src, &y[..n], Outside::Infinite));
            }
            best
        })
        .collect();
}

/// Backward reachable masks `Y(t_k; partition)` for every partition time.
pub fn compute_reachable(spec: &ProblemSpec, grid: &SpatialGrid, partition: &[f64], opts: &ReachOptions) -> Result<ReachableMask> {
    spec.check()?;
    let n = spec.dimension;
    if grid.dim() != n {
        return Err(Error::InvalidArgument(format!("grid has {} axes, spec dimension is {n}", grid.dim())));
    }
    let big_t = spec.horizon;
    if partition.is_empty()
        || partition.windows(2).any(|w| w[1] <= w[0])
        || partition[0] < 0.0
        || (partition[partition.len() - 1] - big_t).abs() > 1e-9 * (1.0 + big_t)
    {
        return Err(Error::InvalidArgument("partition must increase strictly from t >= 0 to T".into()));
    }
    let mut partition = partition.to_vec();
    *partition.last_mut().unwrap() = big_t;

    let far = grid
        .lower()
        .iter()
        .zip(grid.upper())
        .map(|(l, u)| l.abs().max(u.abs()).powi(2))
        .sum::<f64>()
        .sqrt();
    let drift = max_drift(spec, far);
    let h = grid.min_spacing();
    let pad = opts
        .pad
        .unwrap_or_else(|| (drift * (big_t - partition[0]) / h).ceil() as usize + 2);
    let outer = grid.padded(pad);
    let flow_step = opts.flow_step.unwrap_or(big_t / 200.0);
    let thr = opts.threshold.unwrap_or_else(|| spec.target.eps());
    let cands = CandidateSet::for_spec(spec, Some(h));

    let mut warnings = Vec::new();
    for w in partition.windows(2) {
        let disp = drift * (w[1] - w[0]);
        if disp > 2.0 * h {
            let msg = format!(
                "flow moves up to {disp:.3} over [{:.4}, {:.4}], more than two cells ({:.3}); the mask may be coarse",
                w[0],
                w[1],
                2.0 * h
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    log::info!("reachability on {:?} cells with {pad} cells of padding", outer.cells());

    let inner_of: Vec<usize> = (0..grid.len())
        .map(|i| {
            let m = grid.multi_index(i);
            let mut o = [0usize; MAX_DIM];
            for a in 0..n {
                o[a] = m[a] + pad;
            }
            outer.flat_index(&o[..n])
        })
        .collect();
    let mask = |lv: &[f64]| -> Vec<bool> { inner_of.iter().map(|&j| lv[j] <= thr).collect() };

    let mut level: Vec<f64> = (0..outer.len())
        .into_par_iter()
        .map(|i| -spec.target.margin(&outer.node(i)))
        .collect();
    erode(&outer, &spec.cone, &cands, &mut level);
    let np = partition.len();
    let mut slices = vec![Vec::new(); np];
    slices[np - 1] = mask(&level);
    for k in (0..np - 1).rev() {
        let (t0, t1) = (partition[k], partition[k + 1]);
        let next = level;
        level = (0..outer.len())
            .into_par_iter()
            .map(|i| {
                let mut x = [0.0; MAX_DIM];
                outer.node_into(i, &mut x[..n]);
                let mut rk = Rk4::new(&spec.dynamics.family, n);
                if rk.advance(t0, &mut x[..n], t1, flow_step).is_err() {
                    return f64::INFINITY;
                }
                outer.interp(&next, &x[..n], Outside::Infinite)
            })
            .collect();
        erode(&outer, &spec.cone, &cands, &mut level);
        slices[k] = mask(&level);
    }
    Ok(ReachableMask { grid: grid.clone(), partition, slices, pad, warnings, spec_hash: spec.hash() })
}

/// Point query that builds the mask for `partition` first.
pub fn reachable_at(spec: &ProblemSpec, grid: &SpatialGrid, partition: &[f64], t: f64, x: &[f64]) -> Result<Reach> {
    if !grid.contains(x) {
        return Ok(Reach::Unknown);
    }
    let mut p: Vec<f64> = partition.iter().copied().filter(|&s| s > t).collect();
    p.insert(0, t);
    Ok(compute_reachable(spec, grid, &p, &ReachOptions::default())?.reachable_at(t, x))
}

/// Change between a mask and one computed on a refined partition, at the
/// times the two share.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementReport {
    pub times: Vec<f64>,
    pub added: Vec<usize>,
    /// Cells marked on the coarse partition but not the fine one; zero when
    /// refinement is monotone.
    pub removed: Vec<usize>,
    pub added_volume: Vec<f64>,
}

impl RefinementReport {
    pub fn monotone(&self) -> bool {
        self.removed.iter().all(|&r| r == 0)
    }
}

pub fn compare_refinement(coarse: &ReachableMask, fine: &ReachableMask) -> RefinementReport {
    let cell: f64 = coarse.grid.spacing().iter().product();
    let mut r = RefinementReport { times: vec![], added: vec![], removed: vec![], added_volume: vec![] };
    for (k, &t) in coarse.partition.iter().enumerate() {
        let Some(j) = fine.partition.iter().position(|&s| (s - t).abs() <= 1e-12 * (1.0 + t.abs())) else {
            continue;
        };
        let (a, b) = (&coarse.slices[k], &fine.slices[j]);
        let added = a.iter().zip(b).filter(|(x, y)| !**x && **y).count();
        let removed = a.iter().zip(b).filter(|(x, y)| **x && !**y).count();
        r.times.push(t);
        r.added.push(added);
        r.removed.push(removed);
        r.added_volume.push(added as f64 * cell);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, ConeCase};

    #[test]
    fn terminal_slice_is_target_minus_cone() {
        let spec = catalog::cone_case(ConeCase::ForwardUnit);
        let g = SpatialGrid::new(vec![-2.0], vec![3.0], vec![50]).unwrap();
        let m = compute_reachable(&spec, &g, &[0.5, 1.0], &ReachOptions::default()).unwrap();
        for i in 0..g.len() {
            assert_eq!(m.slices[1][i], g.node(i)[0] <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn full_cone_marks_everything() {
        let spec = catalog::benchmark(catalog::Scalar::ZeroCosts);
        let g = SpatialGrid::new(vec![-2.0], vec![3.0], vec![50]).unwrap();
        let m = compute_reachable(&spec, &g, &uniform_partition(0.0, 1.0, 4), &ReachOptions::default()).unwrap();
        assert!((0..5).all(|k| m.is_full(k)));
    }

    #[test]
    fn query_outside_the_box_is_unknown() {
        let spec = catalog::cone_case(ConeCase::ForwardUnit);
        let g = SpatialGrid::new(vec![-2.0], vec![3.0], vec![50]).unwrap();
        let m = compute_reachable(&spec, &g, &[0.0, 1.0], &ReachOptions::default()).unwrap();
        assert_eq!(m.reachable_at(0.0, &[5.0]), Reach::Unknown);
        assert_eq!(m.reachable_at(0.0, &[-1.0]), Reach::Reachable);
        assert_eq!(m.reachable_at(0.0, &[0.5]), Reach::Unreachable);
    }

    #[test]
    fn refined_partition_keeps_old_nodes() {
        let p = refine_partition(&[0.0, 1.0, 2.0]);
        assert_eq!(p, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn bad_partition_is_rejected() {
        let spec = catalog::cone_case(ConeCase::ForwardUnit);
        let g = SpatialGrid::new(vec![-2.0], vec![3.0], vec![10]).unwrap();
        assert!(compute_reachable(&spec, &g, &[0.5, 0.2, 1.0], &ReachOptions::default()).is_err());
        assert!(compute_reachable(&spec, &g, &[0.5, 0.9], &ReachOptions::default()).is_err());
    }
}
