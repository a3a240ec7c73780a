//! Parametric function families for f, g, h and the impulse cost.

use serde::{Deserialize, Serialize};

use crate::linalg::norm;

/// Piecewise-linear function of time, constant outside its table.
///
/// Serializes either as a bare number or as a list of `[t, value]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "PwRepr", into = "PwRepr")]
pub struct PwLinear {
    points: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PwRepr {
    Constant(f64),
    Table(Vec<[f64; 2]>),
}

impl From<PwRepr> for PwLinear {
    fn from(r: PwRepr) -> Self {
        match r {
            PwRepr::Constant(v) => PwLinear::constant(v),
            PwRepr::Table(rows) => PwLinear::table(rows.iter().map(|r| (r[0], r[1])).collect()),
        }
    }
}

impl From<PwLinear> for PwRepr {
    fn from(p: PwLinear) -> Self {
        if p.points.len() == 1 {
            PwRepr::Constant(p.points[0].1)
        } else {
            PwRepr::Table(p.points.iter().map(|&(t, v)| [t, v]).collect())
        }
    }
}

impl PwLinear {
    pub fn constant(v: f64) -> Self {
        PwLinear { points: vec![(0.0, v)] }
    }

    /// Builds a table; points are sorted by time.
    pub fn table(mut points: Vec<(f64, f64)>) -> Self {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.is_empty() {
            points.push((0.0, 0.0));
        }
        PwLinear { points }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, t: f64) -> f64 {
        let p = &self.points;
        if t <= p[0].0 || p.len() == 1 {
            return p[0].1;
        }
        let last = p[p.len() - 1];
        if t >= last.0 {
            return last.1;
        }
        let i = p.partition_point(|q| q.0 <= t);
        let (t0, v0) = p[i - 1];
        let (t1, v1) = p[i];
        if t1 == t0 {
            return v1;
        }
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Smallest value over `[a, b]` (the table is piecewise linear, so the
    /// minimum sits at an endpoint or a breakpoint).
    pub fn min_on(&self, a: f64, b: f64) -> f64 {
        let mut m = self.eval(a).min(self.eval(b));
        for &(t, v) in &self.points {
            if t > a && t < b {
                m = m.min(v);
            }
        }
        m
    }
}

/// One monomial term `coeff * prod_j x_j^powers[j]` added to `f_component`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub component: usize,
    pub coeff: f64,
    pub powers: Vec<u32>,
}

/// Drift families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Dynamics {
    /// `f(t, x) = drift`.
    ConstantDrift { drift: Vec<f64> },
    /// `f(t, x) = A x + b0 + b1 t`.
    Affine {
        a: Vec<Vec<f64>>,
        b0: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b1: Option<Vec<f64>>,
    },
    /// Planar rotation `x1' = omega x2`, `x2' = -omega x1`.
    Rotation { omega: f64 },
    /// Sum of monomials per component.
    Polynomial { terms: Vec<PolyTerm> },
}

impl Dynamics {
    /// Writes `f(t, x)` into `out`.
    pub fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match self {
            Dynamics::ConstantDrift { drift } => out.copy_from_slice(drift),
            Dynamics::Affine { a, b0, b1 } => {
                for (i, row) in a.iter().enumerate() {
                    let mut s = b0[i];
                    if let Some(b1) = b1 {
                        s += b1[i] * t;
                    }
                    for (aij, xj) in row.iter().zip(x) {
                        s += aij * xj;
                    }
                    out[i] = s;
                }
            }
            Dynamics::Rotation { omega } => {
                out[0] = omega * x[1];
                out[1] = -omega * x[0];
            }
            Dynamics::Polynomial { terms } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for term in terms {
                    let mut m = term.coeff;
                    for (xj, &p) in x.iter().zip(&term.powers) {
                        m *= xj.powi(p as i32);
                    }
                    out[term.component] += m;
                }
            }
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.eval_into(t, x, &mut out);
        out
    }

    /// Dimension implied by the parameters, if any.
    pub(crate) fn implied_dimension(&self) -> Option<usize> {
        match self {
            Dynamics::ConstantDrift { drift } => Some(drift.len()),
            Dynamics::Affine { a, .. } => Some(a.len()),
            Dynamics::Rotation { .. } => Some(2),
            Dynamics::Polynomial { .. } => None,
        }
    }

    pub(crate) fn check_dimension(&self, n: usize) -> Result<(), String> {
        match self {
            Dynamics::ConstantDrift { drift } if drift.len() != n => {
                Err(format!("drift has length {}, expected {n}", drift.len()))
            }
            Dynamics::Affine { a, b0, b1 } => {
                if a.len() != n || a.iter().any(|r| r.len() != n) {
                    return Err(format!("matrix A must be {n}x{n}"));
                }
                if b0.len() != n || b1.as_ref().is_some_and(|b| b.len() != n) {
                    return Err(format!("affine offsets must have length {n}"));
                }
                Ok(())
            }
            Dynamics::Rotation { .. } if n != 2 => Err("rotation dynamics need dimension 2".into()),
            Dynamics::Polynomial { terms } => {
                for t in terms {
                    if t.component >= n || t.powers.len() != n {
                        return Err(format!("polynomial term {t:?} does not fit dimension {n}"));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Drift together with its declared Lipschitz constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSpec {
    #[serde(flatten)]
    pub family: Dynamics,
    #[serde(rename = "L")]
    pub lipschitz: f64,
}

/// Running and terminal cost families; all are nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum CostField {
    Zero,
    Constant { value: f64 },
    /// `weight * |x - center|^2`.
    Quadratic { center: Vec<f64>, weight: f64 },
    /// `weight * |x - center|^power`; `center` defaults to the origin.
    NormPower {
        weight: f64,
        power: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
}

impl CostField {
    pub fn eval(&self, _t: f64, x: &[f64]) -> f64 {
        match self {
            CostField::Zero => 0.0,
            CostField::Constant { value } => *value,
            CostField::Quadratic { center, weight } => {
                weight * x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>()
            }
            CostField::NormPower { weight, power, center } => {
                let r = match center {
                    Some(c) => x.iter().zip(c).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt(),
                    None => norm(x),
                };
                weight * r.powf(*power)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            CostField::Zero => true,
            CostField::Constant { value } => *value == 0.0,
            CostField::Quadratic { weight, .. } | CostField::NormPower { weight, .. } => *weight == 0.0,
        }
    }

    pub(crate) fn check_dimension(&self, n: usize) -> Result<(), String> {
        let c = match self {
            CostField::Quadratic { center, .. } => Some(center),
            CostField::NormPower { center, .. } => center.as_ref(),
            _ => None,
        };
        match c {
            Some(c) if c.len() != n => Err(format!("cost center has length {}, expected {n}", c.len())),
            _ => Ok(()),
        }
    }
}

/// Impulse cost families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum ImpulseFamily {
    /// `c0 + alpha(t) |xi|^beta`.
    AffineNorm { c0: f64 },
    /// `c0 + kappa (1 - exp(-|x|)) + alpha(t) |xi|^beta`.
    AffineNormXdep { c0: f64, kappa: f64 },
}

/// Impulse cost with the constants of its structural hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseCostSpec {
    #[serde(flatten)]
    pub family: ImpulseFamily,
    /// Declared fixed-cost lower bound.
    pub l0: f64,
    /// Declared subadditivity margin.
    pub delta0: f64,
    pub beta: f64,
    pub alpha: PwLinear,
    pub alpha0: PwLinear,
}

impl ImpulseCostSpec {
    pub fn eval(&self, t: f64, x: &[f64], xi: &[f64]) -> f64 {
        self.eval_norm(t, x, norm(xi))
    }

    /// Cost of an impulse of norm `r` from `x` (every family depends on `xi`
    /// only through its norm).
    pub fn eval_norm(&self, t: f64, x: &[f64], r: f64) -> f64 {
        let base = match self.family {
            ImpulseFamily::AffineNorm { c0 } => c0,
            ImpulseFamily::AffineNormXdep { c0, kappa } => c0 + kappa * (1.0 - (-norm(x)).exp()),
        };
        base + self.alpha.eval(t) * r.powf(self.beta)
    }

    /// A lower bound on `l(t, x, xi)` over all `x` with `|xi| = r`, taken from
    /// the family itself rather than the declared constants so that search
    /// pruning stays exact even when the declarations are wrong.
    pub fn lower_bound(&self, t: f64, r: f64) -> f64 {
        let base = match self.family {
            ImpulseFamily::AffineNorm { c0 } => c0,
            ImpulseFamily::AffineNormXdep { c0, kappa } => c0 + kappa.min(0.0),
        };
        base + self.alpha.eval(t) * r.powf(self.beta)
    }
}
