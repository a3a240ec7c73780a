//! The impulse cone K.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::linalg::{add, nnls, norm, scale};

/// Closed convex cone of admissible impulses: either the whole space or the
/// set of nonnegative combinations of `generators`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub generators: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub full_space: bool,
}

impl ConeSpec {
    pub fn full() -> Self {
        ConeSpec { generators: Vec::new(), full_space: true }
    }

    pub fn generated(generators: Vec<Vec<f64>>) -> Self {
        ConeSpec { generators, full_space: false }
    }

    pub(crate) fn check_dimension(&self, n: usize) -> Result<(), String> {
        if self.full_space && !self.generators.is_empty() {
            return Err("cone: give either `generators` or `full_space`, not both".into());
        }
        if !self.full_space && self.generators.is_empty() {
            return Err("cone: no generators".into());
        }
        for g in &self.generators {
            if g.len() != n {
                return Err(format!("cone generator {g:?} does not have dimension {n}"));
            }
            if norm(g) == 0.0 {
                return Err("cone generator is zero".into());
            }
        }
        Ok(())
    }

    fn unit_generators(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for g in &self.generators {
            let u = scale(g, 1.0 / norm(g));
            if !out.iter().any(|v| v.iter().zip(&u).all(|(a, b)| (a - b).abs() < 1e-12)) {
                out.push(u);
            }
        }
        out
    }

    /// Membership test with relative tolerance `tol`.
    pub fn contains(&self, xi: &[f64], tol: f64) -> bool {
        if self.full_space {
            return true;
        }
        let gens = self.unit_generators();
        let w = nnls(&gens, xi);
        let mut r = xi.to_vec();
        for (g, wg) in gens.iter().zip(&w) {
            for (ri, gi) in r.iter_mut().zip(g) {
                *ri -= wg * gi;
            }
        }
        norm(&r) <= tol * (1.0 + norm(xi))
    }

    /// Whether `-xi` belongs to K whenever `xi` does (a linear subspace).
    pub fn is_symmetric(&self) -> bool {
        self.full_space || self.unit_generators().iter().all(|g| self.contains(&scale(g, -1.0), 1e-9))
    }

    /// Finite set of unit directions in K: the generators plus evenly spread
    /// interior rays. `rays` controls the density.
    pub fn directions(&self, n: usize, rays: usize) -> Vec<Vec<f64>> {
        let rays = rays.max(4);
        let mut dirs = match (n, self.full_space) {
            (1, true) => vec![vec![1.0], vec![-1.0]],
            (1, false) => self.unit_generators(),
            (2, true) => circle(0.0, 2.0 * PI, rays.div_ceil(4) * 4, false),
            (2, false) => self.planar_directions(rays),
            (_, true) => {
                let mut d = Vec::new();
                for i in 0..n {
                    for s in [1.0, -1.0] {
                        let mut e = vec![0.0; n];
                        e[i] = s;
                        d.push(e);
                    }
                }
                if n == 3 {
                    d.extend(fibonacci_sphere(rays));
                }
                d
            }
            (_, false) => {
                let gens = self.unit_generators();
                let mut d = gens.clone();
                d.extend(simplex_rays(&gens, rays));
                d
            }
        };
        dedup_directions(&mut dirs);
        dirs
    }

    fn planar_directions(&self, rays: usize) -> Vec<Vec<f64>> {
        let gens = self.unit_generators();
        if gens.len() == 1 {
            return gens;
        }
        let mut ang: Vec<f64> = gens.iter().map(|g| g[1].atan2(g[0]).rem_euclid(2.0 * PI)).collect();
        ang.sort_by(f64::total_cmp);
        let mut best = (0.0, 0usize);
        for i in 0..ang.len() {
            let next = if i + 1 < ang.len() { ang[i + 1] } else { ang[0] + 2.0 * PI };
            let gap = next - ang[i];
            if gap > best.0 {
                best = (gap, i);
            }
        }
        let (gap, i) = best;
        if gap < PI - 1e-12 {
            return circle(0.0, 2.0 * PI, rays.div_ceil(4) * 4, false);
        }
        // the cone is the sector swept counterclockwise from the ray after the gap
        let start = ang[(i + 1) % ang.len()];
        let width = 2.0 * PI - gap;
        let mut d = circle(start, width, rays, true);
        d.extend(gens);
        d
    }
}

fn circle(start: f64, width: f64, count: usize, inclusive: bool) -> Vec<Vec<f64>> {
    let steps = if inclusive { count.max(2) - 1 } else { count };
    let n = if inclusive { steps + 1 } else { steps };
    (0..n)
        .map(|k| {
            let a = start + width * k as f64 / steps as f64;
            let (s, c) = a.sin_cos();
            vec![snap(c), snap(s)]
        })
        .collect()
}

fn snap(v: f64) -> f64 {
    if v.abs() < 1e-15 {
        0.0
    } else {
        v
    }
}

fn fibonacci_sphere(count: usize) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let th = golden * i as f64;
            vec![r * th.cos(), r * th.sin(), z]
        })
        .collect()
}

/// Normalized nonnegative combinations of the generators on a simplex lattice.
fn simplex_rays(gens: &[Vec<f64>], rays: usize) -> Vec<Vec<f64>> {
    let m = gens.len();
    if m < 2 {
        return Vec::new();
    }
    let mut q = 1;
    while binom(q + m - 1, m - 1) < rays && q < 64 {
        q += 1;
    }
    let mut out = Vec::new();
    let mut w = vec![0usize; m];
    compositions(q, 0, &mut w, &mut |w| {
        let mut v = vec![0.0; gens[0].len()];
        for (g, &k) in gens.iter().zip(w.iter()) {
            v = add(&v, &scale(g, k as f64));
        }
        let r = norm(&v);
        if r > 1e-12 {
            out.push(scale(&v, 1.0 / r));
        }
    });
    out
}

fn compositions(left: usize, i: usize, w: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if i + 1 == w.len() {
        w[i] = left;
        f(w);
        return;
    }
    for k in 0..=left {
        w[i] = k;
        compositions(left - k, i + 1, w, f);
    }
}

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

fn dedup_directions(d: &mut Vec<Vec<f64>>) {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(d.len());
    for v in d.drain(..) {
        if !out.iter().any(|u| u.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-12)) {
            out.push(v);
        }
    }
    *d = out;
}
