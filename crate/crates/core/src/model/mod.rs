//! Problem data: dynamics, costs, cone, target and horizon.

mod cone;
mod functions;
mod target;
pub mod validate;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cone::ConeSpec;
pub use functions::{CostField, Dynamics, DynamicsSpec, ImpulseCostSpec, ImpulseFamily, PolyTerm, PwLinear};
pub use target::{Target, TargetSpec};

use crate::error::{Error, Result};

/// The cost triple `(g, h, l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Costs {
    pub g: CostField,
    pub h: CostField,
    pub l: ImpulseCostSpec,
}

/// Growth and Hölder exponents, plus the constant bounding `g`, `h` and `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regularity {
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "one")]
    pub delta: f64,
    /// Constant in the growth bounds of the costs; defaults to the dynamics `L`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_bound: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for Regularity {
    fn default() -> Self {
        Regularity { mu: 1.0, delta: 1.0, cost_bound: None }
    }
}

/// Axis-aligned computational box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Sample lattice used by hypothesis checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationConfig {
    pub t_samples: usize,
    pub x_samples: usize,
    pub xi_samples: usize,
    /// Radius of the x sample region.
    pub x_radius: f64,
    /// Radius of the impulse sample region.
    pub xi_radius: f64,
    /// Slack allowed in margin arithmetic.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            t_samples: 10,
            x_samples: 10,
            xi_samples: 10,
            x_radius: 3.0,
            xi_radius: 3.0,
            tolerance: 1e-9,
            seed: 0,
        }
    }
}

/// Discretization of the impulse cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CandidateConfig {
    /// Number of interior ray samples (n >= 2).
    pub rays: usize,
    /// Number of geometric magnitude levels.
    pub levels: usize,
    /// Uniform magnitude step; `None` lets the caller choose.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    /// Radius covered by the uniform magnitudes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dense_radius: Option<f64>,
    /// Largest magnitude.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        CandidateConfig { rays: 32, levels: 64, step: None, dense_radius: None, r_max: None }
    }
}

/// Full problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub dimension: usize,
    pub horizon: f64,
    pub dynamics: DynamicsSpec,
    pub cone: ConeSpec,
    pub target: TargetSpec,
    pub costs: Costs,
    #[serde(default)]
    pub regularity: Regularity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainBox>,
    #[serde(default)]
    pub candidates: CandidateConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
}

impl ProblemSpec {
    /// Structural checks: positive horizon and consistent dimensions.
    pub fn check(&self) -> Result<()> {
        let n = self.dimension;
        let err = |m: String| Err(Error::InvalidSpec(m));
        if n == 0 {
            return err("dimension must be positive".into());
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return err(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.dynamics.lipschitz > 0.0) {
            return err("dynamics L must be positive".into());
        }
        if let Some(d) = self.dynamics.family.implied_dimension() {
            if d != n {
                return err(format!("dynamics have dimension {d}, spec says {n}"));
            }
        }
        let checks = [
            self.dynamics.family.check_dimension(n),
            self.cone.check_dimension(n),
            self.target.family.check_dimension(n),
            self.costs.g.check_dimension(n),
            self.costs.h.check_dimension(n),
        ];
        for c in checks {
            if let Err(m) = c {
                return err(m);
            }
        }
        let l = &self.costs.l;
        if !(l.beta > 0.0 && l.beta <= 1.0) {
            return err(format!("impulse cost beta must lie in (0, 1], got {}", l.beta));
        }
        if !(l.l0 > 0.0) || !(l.delta0 > 0.0) {
            return err("impulse cost l0 and delta0 must be positive".into());
        }
        if let Some(b) = &self.domain {
            if b.lower.len() != n || b.upper.len() != n || b.lower.iter().zip(&b.upper).any(|(a, b)| a >= b) {
                return err("domain box does not match the dimension or is empty".into());
            }
        }
        Ok(())
    }

    /// Constant used in the cost growth bounds.
    pub fn cost_bound(&self) -> f64 {
        self.regularity.cost_bound.unwrap_or(self.dynamics.lipschitz)
    }

    pub fn f(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.dynamics.family.eval(t, x)
    }

    pub fn g(&self, t: f64, x: &[f64]) -> f64 {
        self.costs.g.eval(t, x)
    }

    pub fn h(&self, x: &[f64]) -> f64 {
        self.costs.h.eval(self.horizon, x)
    }

    pub fn ell(&self, t: f64, x: &[f64], xi: &[f64]) -> f64 {
        self.costs.l.eval(t, x, xi)
    }

    /// Parses a spec from JSON text; errors carry the field path and position.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: ProblemSpec = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        spec.check()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    /// SHA-256 of the compact canonical serialization, as hex.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("spec serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn json_round_trip() {
        let spec = catalog::benchmark(catalog::Scalar::Quadratic);
        let back = ProblemSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(spec, back);
        assert_eq!(spec.hash(), back.hash());
    }

    #[test]
    fn empty_text_is_a_parse_error() {
        assert!(matches!(ProblemSpec::from_json(""), Err(Error::Parse { .. })));
    }

    #[test]
    fn parse_error_names_the_field() {
        let mut v: serde_json::Value = serde_json::from_str(&catalog::benchmark(catalog::Scalar::ZeroCosts).to_json()).unwrap();
        v["costs"]["l"]["beta"] = serde_json::json!("one");
        match ProblemSpec::from_json(&v.to_string()) {
            Err(Error::Parse { path, .. }) => assert!(path.contains("costs"), "{path}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut spec = catalog::benchmark(catalog::Scalar::ZeroCosts);
        spec.cone = ConeSpec::generated(vec![vec![1.0, 0.0]]);
        assert!(matches!(spec.check(), Err(Error::InvalidSpec(_))));
    }
}
