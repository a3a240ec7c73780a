//! Uniform tensor grids and multilinear interpolation with strict `+inf`
//! propagation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported grid dimension.
pub const MAX_DIM: usize = 3;

/// Fractions this close to a node (in cell units) are snapped onto it.
const SNAP: f64 = 1e-9;

/// What interpolation returns for points outside the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outside {
    /// `+inf`.
    Infinite,
    /// The value at the nearest point of the box.
    Clamp,
}

/// Axis-aligned box with `cells[a]` equal cells along axis `a`; nodes are
/// stored with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct SpatialGrid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells: Vec<usize>,
}

impl TryFrom<GridRepr> for SpatialGrid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        SpatialGrid::new(r.lower, r.upper, r.cells)
    }
}

impl From<SpatialGrid> for GridRepr {
    fn from(g: SpatialGrid) -> Self {
        GridRepr { lower: g.lower, upper: g.upper, cells: g.cells }
    }
}

impl SpatialGrid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        let n = lower.len();
        if n == 0 || n > MAX_DIM || upper.len() != n || cells.len() != n {
            return Err(Error::InvalidArgument(format!("grids support 1 to {MAX_DIM} axes with matching bounds")));
        }
        if cells.iter().any(|&c| c == 0) || lower.iter().zip(&upper).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidArgument("grid needs at least one cell per axis and lower < upper".into()));
        }
        let mut g = SpatialGrid { lower, upper, cells, spacing: Vec::new(), strides: Vec::new() };
        g.finish();
        Ok(g)
    }

    fn finish(&mut self) {
        let n = self.lower.len();
        self.spacing = (0..n).map(|a| (self.upper[a] - self.lower[a]) / self.cells[a] as f64).collect();
        self.strides = vec![1; n];
        for a in (0..n.saturating_sub(1)).rev() {
            self.strides[a] = self.strides[a + 1] * (self.cells[a + 1] + 1);
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn len(&self) -> usize {
        self.cells.iter().map(|c| c + 1).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Per-axis node indices of the flat index `idx`.
    pub fn multi_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut m = [0; MAX_DIM];
        for a in 0..self.dim() {
            m[a] = idx / self.strides[a];
            idx %= self.strides[a];
        }
        m
    }

    pub fn flat_index(&self, m: &[usize]) -> usize {
        m.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn node_into(&self, idx: usize, out: &mut [f64]) {
        let m = self.multi_index(idx);
        for a in 0..self.dim() {
            out[a] = if m[a] == self.cells[a] { self.upper[a] } else { self.lower[a] + m[a] as f64 * self.spacing[a] };
        }
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.node_into(idx, &mut out);
        out
    }

    /// Membership in the closed box, with a snapping slack.
    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|a| {
            let p = (x[a] - self.lower[a]) / self.spacing[a];
            p >= -SNAP && p <= self.cells[a] as f64 + SNAP
        })
    }

    /// Grid enlarged by `pad` cells on every side with the same spacing.
    pub fn padded(&self, pad: usize) -> SpatialGrid {
        let lower = (0..self.dim()).map(|a| self.lower[a] - pad as f64 * self.spacing[a]).collect();
        let upper = (0..self.dim()).map(|a| self.upper[a] + pad as f64 * self.spacing[a]).collect();
        let cells = self.cells.iter().map(|c| c + 2 * pad).collect();
        SpatialGrid::new(lower, upper, cells).expect("padding keeps the grid valid")
    }

    /// Cell containing `x` (lower corner indices) and the local fractions,
    /// with clamping to the box. Returns `None` outside the box unless
    /// `clamp` is set.
    pub fn locate(&self, x: &[f64], clamp: bool) -> Option<([usize; MAX_DIM], [f64; MAX_DIM])> {
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for a in 0..self.dim() {
            let c = self.cells[a] as f64;
            let mut p = (x[a] - self.lower[a]) / self.spacing[a];
            if !(p >= -SNAP && p <= c + SNAP) {
                if !clamp || p.is_nan() {
                    return None;
                }
            }
            p = p.clamp(0.0, c);
            let mut i = p.floor();
            let mut f = p - i;
            if f < SNAP {
                f = 0.0;
            } else if f > 1.0 - SNAP {
                i += 1.0;
                f = 0.0;
            }
            if i >= c {
                i = c - 1.0;
                f = 1.0;
            }
            base[a] = i as usize;
            frac[a] = f;
        }
        Some((base, frac))
    }

    /// Multilinear interpolation of node values. Any corner with positive
    /// weight holding `+inf` makes the result `+inf`.
    pub fn interp(&self, v: &[f64], x: &[f64], outside: Outside) -> f64 {
        let Some((base, frac)) = self.locate(x, outside == Outside::Clamp) else {
            return f64::INFINITY;
        };
        let n = self.dim();
        let origin: usize = (0..n).map(|a| base[a] * self.strides[a]).sum();
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = origin;
            for a in 0..n {
                if corner >> a & 1 == 1 {
                    w *= frac[a];
                    idx += self.strides[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w == 0.0 {
                continue;
            }
            let val = v[idx];
            if val == f64::INFINITY {
                return f64::INFINITY;
            }
            acc += w * val;
        }
        acc
    }

    /// Flat indices of the corners of the cell containing `x`.
    pub fn cell_corners(&self, x: &[f64]) -> Option<Vec<usize>> {
        let (base, _) = self.locate(x, false)?;
        let n = self.dim();
        let origin: usize = (0..n).map(|a| base[a] * self.strides[a]).sum();
        Some(
            (0..(1usize << n))
                .map(|corner| origin + (0..n).filter(|a| corner >> a & 1 == 1).map(|a| self.strides[a]).sum::<usize>())
                .collect(),
        )
    }

    /// Flat indices of the axis neighbours of a node (up to `2 n`).
    pub fn neighbours(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let m = self.multi_index(idx);
        (0..self.dim()).flat_map(move |a| {
            let s = self.strides[a];
            let lo = (m[a] > 0).then(|| idx - s);
            let hi = (m[a] < self.cells[a]).then(|| idx + s);
            lo.into_iter().chain(hi)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_is_exact_for_affine_data() {
        let g = SpatialGrid::new(vec![0.0, -1.0], vec![1.0, 1.0], vec![4, 8]).unwrap();
        let v: Vec<f64> = (0..g.len()).map(|i| {
            let x = g.node(i);
            2.0 * x[0] - 3.0 * x[1] + 0.5
        }).collect();
        let x = [0.3, 0.17];
        assert!((g.interp(&v, &x, Outside::Infinite) - (0.6 - 0.51 + 0.5)).abs() < 1e-12);
        assert_eq!(g.interp(&v, &[1.2, 0.0], Outside::Infinite), f64::INFINITY);
        let c = g.interp(&v, &[1.2, 0.0], Outside::Clamp);
        assert!((c - 2.5).abs() < 1e-12);
    }

    #[test]
    fn infinite_corner_is_strict_but_zero_weights_are_ignored() {
        let g = SpatialGrid::new(vec![0.0], vec![1.0], vec![2]).unwrap();
        let v = [0.0, 1.0, f64::INFINITY];
        assert_eq!(g.interp(&v, &[0.75], Outside::Infinite), f64::INFINITY);
        assert_eq!(g.interp(&v, &[0.5], Outside::Infinite), 1.0);
        assert_eq!(g.interp(&v, &[0.5 - 1e-12], Outside::Infinite), 1.0);
        assert_eq!(g.interp(&v, &[0.25], Outside::Infinite), 0.5);
    }

    #[test]
    fn indices_round_trip() {
        let g = SpatialGrid::new(vec![0.0; 3], vec![1.0; 3], vec![2, 3, 4]).unwrap();
        for i in 0..g.len() {
            let m = g.multi_index(i);
            assert_eq!(g.flat_index(&m[..3]), i);
        }
        assert_eq!(g.neighbours(0).count(), 3);
        assert_eq!(g.padded(2).cells(), &[6, 7, 8]);
    }
}
