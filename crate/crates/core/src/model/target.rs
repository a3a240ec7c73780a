//! The convex target D.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, norm, sub};

/// Target families. Each is an open convex set; its closure is the
/// constraint set for the terminal state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Target {
    /// Product of open intervals; `null` bounds are infinite.
    Box { lower: Vec<Option<f64>>, upper: Vec<Option<f64>> },
    /// Open ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// `{ x : normal . x < offset }`.
    Halfspace { normal: Vec<f64>, offset: f64 },
    /// Open circular cone `{ x : angle(x - apex, axis) < half_angle }`.
    ConicWedge { apex: Vec<f64>, axis: Vec<f64>, half_angle: f64 },
    /// `{ x : normals[i] . x < offsets[i] for all i }`.
    Polyhedron { normals: Vec<Vec<f64>>, offsets: Vec<f64> },
    /// Planar set `{ x1 > exp(|x2|) - 1 }`.
    ExpEpigraph,
}

/// Target with its boundary tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    #[serde(flatten)]
    pub family: Target,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_tolerance: Option<f64>,
}

impl TargetSpec {
    pub fn new(family: Target) -> Self {
        TargetSpec { family, boundary_tolerance: None }
    }

    /// Boundary tolerance: the declared value or `1e-9 (1 + scale)`.
    pub fn eps(&self) -> f64 {
        self.boundary_tolerance.unwrap_or(1e-9 * (1.0 + self.family.scale()))
    }

    /// Signed margin: positive inside D, zero on the boundary, negative
    /// outside. Its magnitude is a distance (or a distance-like quantity for
    /// `exp_epigraph`).
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.family.margin(x)
    }

    /// Membership in the closure of D, with slack `eps`.
    pub fn in_closure(&self, x: &[f64]) -> bool {
        self.margin(x) >= -self.eps()
    }

    /// Membership in D itself: the margin must exceed `eps`.
    pub fn in_interior(&self, x: &[f64]) -> bool {
        self.margin(x) > self.eps()
    }

    /// Distance-like level: zero on the closure, growing outside.
    pub fn level(&self, x: &[f64]) -> f64 {
        (-self.margin(x)).max(0.0)
    }

    pub fn is_bounded(&self) -> bool {
        match &self.family {
            Target::Box { lower, upper } => lower.iter().chain(upper).all(Option::is_some),
            Target::Ball { .. } => true,
            _ => false,
        }
    }
}

impl Target {
    fn scale(&self) -> f64 {
        match self {
            Target::Box { lower, upper } => lower
                .iter()
                .chain(upper)
                .flatten()
                .fold(0.0f64, |m, v| m.max(v.abs())),
            Target::Ball { center, radius } => norm(center) + radius,
            Target::Halfspace { offset, normal } => offset.abs() / norm(normal),
            Target::ConicWedge { apex, .. } => norm(apex),
            Target::Polyhedron { normals, offsets } => normals
                .iter()
                .zip(offsets)
                .fold(0.0f64, |m, (a, c)| m.max(c.abs() / norm(a))),
            Target::ExpEpigraph => 1.0,
        }
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        match self {
            Target::Box { lower, upper } => {
                let mut m = f64::INFINITY;
                let mut out2 = 0.0;
                for (i, &xi) in x.iter().enumerate() {
                    let a = lower[i].map_or(f64::INFINITY, |l| xi - l);
                    let b = upper[i].map_or(f64::INFINITY, |u| u - xi);
                    let mi = a.min(b);
                    m = m.min(mi);
                    if mi < 0.0 {
                        out2 += mi * mi;
                    }
                }
                if out2 > 0.0 {
                    -out2.sqrt()
                } else {
                    m
                }
            }
            Target::Ball { center, radius } => radius - norm(&sub(x, center)),
            Target::Halfspace { normal, offset } => (offset - dot(normal, x)) / norm(normal),
            Target::ConicWedge { apex, axis, half_angle } => {
                let p = sub(x, apex);
                let u: Vec<f64> = axis.iter().map(|a| a / norm(axis)).collect();
                let a = dot(&p, &u);
                let r = (dot(&p, &p) - a * a).max(0.0).sqrt();
                let phi = r.atan2(a);
                let len = norm(&p);
                let d = phi - half_angle;
                if d < 0.0 {
                    len * (-d).min(std::f64::consts::FRAC_PI_2).sin()
                } else if d <= std::f64::consts::FRAC_PI_2 {
                    -len * d.sin()
                } else {
                    -len
                }
            }
            Target::Polyhedron { normals, offsets } => normals
                .iter()
                .zip(offsets)
                .map(|(a, c)| (c - dot(a, x)) / norm(a))
                .fold(f64::INFINITY, f64::min),
            Target::ExpEpigraph => x[0] - (x[1].abs().exp() - 1.0),
        }
    }

    pub(crate) fn check_dimension(&self, n: usize) -> Result<(), String> {
        let bad = |what: &str| Err(format!("target {what} does not match dimension {n}"));
        match self {
            Target::Box { lower, upper } if lower.len() != n || upper.len() != n => bad("box bounds"),
            Target::Box { lower, upper } => {
                for (l, u) in lower.iter().zip(upper) {
                    if let (Some(l), Some(u)) = (l, u) {
                        if l >= u {
                            return Err("target box has an empty side".into());
                        }
                    }
                }
                Ok(())
            }
            Target::Ball { center, radius } => {
                if center.len() != n {
                    return bad("ball center");
                }
                if *radius <= 0.0 {
                    return Err("target ball radius must be positive".into());
                }
                Ok(())
            }
            Target::Halfspace { normal, .. } if normal.len() != n || norm(normal) == 0.0 => bad("halfspace normal"),
            Target::ConicWedge { apex, axis, half_angle } => {
                if apex.len() != n || axis.len() != n || norm(axis) == 0.0 {
                    return bad("wedge apex/axis");
                }
                if !(*half_angle > 0.0 && *half_angle < std::f64::consts::FRAC_PI_2) {
                    return Err("wedge half_angle must lie in (0, pi/2)".into());
                }
                Ok(())
            }
            Target::Polyhedron { normals, offsets } => {
                if normals.len() != offsets.len() || normals.iter().any(|a| a.len() != n || norm(a) == 0.0) {
                    return bad("polyhedron normals");
                }
                Ok(())
            }
            Target::ExpEpigraph if n != 2 => bad("exp_epigraph"),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(a: f64, b: f64) -> TargetSpec {
        TargetSpec::new(Target::Box { lower: vec![Some(a)], upper: vec![Some(b)] })
    }

    #[test]
    fn interval_open_and_closed() {
        let d = interval(0.0, 1.0);
        assert!(d.in_closure(&[0.0]) && !d.in_interior(&[0.0]));
        assert!(d.in_interior(&[0.5]));
        assert!(!d.in_closure(&[1.0 + 1e-6]));
        assert!((d.level(&[1.25]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn wedge_margin_signs() {
        let w = TargetSpec::new(Target::ConicWedge {
            apex: vec![0.0, 0.0],
            axis: vec![1.0, 0.0],
            half_angle: std::f64::consts::FRAC_PI_4,
        });
        assert!(w.in_interior(&[1.0, 0.0]));
        assert!(w.in_closure(&[2.0, 2.0]));
        assert!(!w.in_closure(&[0.0, 2.0]));
        assert!((w.margin(&[0.0, 2.0]) + 2.0 * (std::f64::consts::FRAC_PI_4).sin()).abs() < 1e-12);
        assert!((w.margin(&[-1.0, 0.0]) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn halfspace_and_epigraph() {
        let h = TargetSpec::new(Target::Halfspace { normal: vec![-1.0, 0.0], offset: 0.0 });
        assert!(h.in_closure(&[0.0, 5.0]) && !h.in_closure(&[-0.1, 0.0]));
        let e = TargetSpec::new(Target::ExpEpigraph);
        assert!(e.in_interior(&[2.0, 1.0]) && !e.in_closure(&[1.0, 1.0]));
    }
}
