//! Built-in problem instances.
//!
//! The one-dimensional instances share `f = 1`, `l = 1 + |xi|` and `T = 1`,
//! so their value functions depend on `(t, x)` only through `y = x + T - t`.

use std::f64::consts::FRAC_PI_4;

use crate::model::{
    CandidateConfig, ConeSpec, CostField, Costs, DomainBox, Dynamics, DynamicsSpec, ImpulseCostSpec, ImpulseFamily,
    ProblemSpec, PwLinear, Regularity, Target, TargetSpec, ValidationConfig,
};

/// Variants of the scalar benchmark with `l = 1 + |xi|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Scalar {
    /// `g = h = 0`, `K = R`, `D = (0, 1)`.
    ZeroCosts,
    /// `h = 9 (x - 2/5)^2`, `K = R`, `D = (0, 1)`.
    Quadratic,
    /// `h = 9 (x - 2/5)^2`, `K = [0, inf)`, `D = (0, 1)`.
    OneSided,
    /// `h = 9 (x - 2/5)^2`, `K = [0, inf)`, `D = (0, inf)`.
    HalfLine,
}

/// One-sided cone and half-line targets with `g = h = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ConeCase {
    /// `K = [0, inf)`, `D = (0, 1)`.
    ForwardUnit,
    /// `K = (-inf, 0]`, `D = (0, 1)`.
    BackwardUnit,
    /// `K = [0, inf)`, `D = (0, inf)`.
    ForwardPositive,
    /// `K = [0, inf)`, `D = (-inf, 0)`.
    ForwardNegative,
}

pub fn unit_impulse_cost() -> ImpulseCostSpec {
    ImpulseCostSpec {
        family: ImpulseFamily::AffineNorm { c0: 1.0 },
        l0: 1.0,
        delta0: 1.0,
        beta: 1.0,
        alpha: PwLinear::constant(1.0),
        alpha0: PwLinear::constant(1.0),
    }
}

fn interval(lo: Option<f64>, hi: Option<f64>) -> TargetSpec {
    TargetSpec::new(Target::Box { lower: vec![lo], upper: vec![hi] })
}

fn scalar(cone: ConeSpec, target: TargetSpec, h: CostField, cost_bound: Option<f64>) -> ProblemSpec {
    ProblemSpec {
        dimension: 1,
        horizon: 1.0,
        dynamics: DynamicsSpec { family: Dynamics::ConstantDrift { drift: vec![1.0] }, lipschitz: 1.0 },
        cone,
        target,
        costs: Costs { g: CostField::Zero, h, l: unit_impulse_cost() },
        regularity: Regularity { mu: 1.0, delta: 1.0, cost_bound },
        domain: Some(DomainBox { lower: vec![-2.0], upper: vec![3.0] }),
        candidates: CandidateConfig::default(),
        validation: ValidationConfig::default(),
    }
}

/// `9 (x - 2/5)^2`.
pub fn quadratic_h() -> CostField {
    CostField::Quadratic { center: vec![0.4], weight: 9.0 }
}

pub fn benchmark(v: Scalar) -> ProblemSpec {
    let pos = ConeSpec::generated(vec![vec![1.0]]);
    match v {
        Scalar::ZeroCosts => scalar(ConeSpec::full(), interval(Some(0.0), Some(1.0)), CostField::Zero, None),
        Scalar::Quadratic => scalar(ConeSpec::full(), interval(Some(0.0), Some(1.0)), quadratic_h(), Some(20.0)),
        Scalar::OneSided => scalar(pos, interval(Some(0.0), Some(1.0)), quadratic_h(), Some(20.0)),
        Scalar::HalfLine => scalar(pos, interval(Some(0.0), None), quadratic_h(), Some(20.0)),
    }
}

pub fn cone_case(case: ConeCase) -> ProblemSpec {
    let pos = ConeSpec::generated(vec![vec![1.0]]);
    let neg = ConeSpec::generated(vec![vec![-1.0]]);
    let (k, d) = match case {
        ConeCase::ForwardUnit => (pos, interval(Some(0.0), Some(1.0))),
        ConeCase::BackwardUnit => (neg, interval(Some(0.0), Some(1.0))),
        ConeCase::ForwardPositive => (pos, interval(Some(0.0), None)),
        ConeCase::ForwardNegative => (pos, interval(None, Some(0.0))),
    };
    scalar(k, d, CostField::Zero, None)
}

fn planar(dynamics: Dynamics, cone: ConeSpec, target: TargetSpec, horizon: f64, half_width: f64) -> ProblemSpec {
    ProblemSpec {
        dimension: 2,
        horizon,
        dynamics: DynamicsSpec { family: dynamics, lipschitz: 1.0 },
        cone,
        target,
        costs: Costs { g: CostField::Zero, h: CostField::Zero, l: unit_impulse_cost() },
        regularity: Regularity::default(),
        domain: Some(DomainBox { lower: vec![-half_width; 2], upper: vec![half_width; 2] }),
        candidates: CandidateConfig::default(),
        validation: ValidationConfig::default(),
    }
}

fn quadrant() -> ConeSpec {
    ConeSpec::generated(vec![vec![1.0, 0.0], vec![0.0, 1.0]])
}

/// Rotation `x1' = x2, x2' = -x1` with the unit disk as target and the
/// closed first quadrant as cone; `T = 2`.
pub fn rotation_disk() -> ProblemSpec {
    planar(
        Dynamics::Rotation { omega: 1.0 },
        quadrant(),
        TargetSpec::new(Target::Ball { center: vec![0.0, 0.0], radius: 1.0 }),
        2.0,
        3.0,
    )
}

/// Target `{x1 > e^|x2| - 1}` with the first quadrant as cone.
pub fn exp_epigraph() -> ProblemSpec {
    planar(
        Dynamics::ConstantDrift { drift: vec![0.0, 0.0] },
        quadrant(),
        TargetSpec::new(Target::ExpEpigraph),
        1.0,
        3.0,
    )
}

/// `K = R^2`, `D = {x1 > 0}`.
pub fn halfplane() -> ProblemSpec {
    planar(
        Dynamics::ConstantDrift { drift: vec![0.0, 0.0] },
        ConeSpec::full(),
        TargetSpec::new(Target::Halfspace { normal: vec![-1.0, 0.0], offset: 0.0 }),
        1.0,
        3.0,
    )
}

/// Quarter-turn wedge around the `x1` axis, impulses along `(1, 0)` only.
pub fn wedge() -> ProblemSpec {
    planar(
        Dynamics::ConstantDrift { drift: vec![0.0, 0.0] },
        ConeSpec::generated(vec![vec![1.0, 0.0]]),
        TargetSpec::new(Target::ConicWedge { apex: vec![0.0, 0.0], axis: vec![1.0, 0.0], half_angle: FRAC_PI_4 }),
        1.0,
        3.0,
    )
}

/// Bounded target `ball(0, radius)` with `K = R^2`.
pub fn ball(radius: f64) -> ProblemSpec {
    planar(
        Dynamics::ConstantDrift { drift: vec![0.0, 0.0] },
        ConeSpec::full(),
        TargetSpec::new(Target::Ball { center: vec![0.0, 0.0], radius }),
        1.0,
        3.0,
    )
}

/// Scalar instance whose impulse cost `|xi|` has no fixed part.
pub fn no_fixed_cost() -> ProblemSpec {
    let mut s = benchmark(Scalar::ZeroCosts);
    s.costs.l.family = ImpulseFamily::AffineNorm { c0: 0.0 };
    s
}

/// Names accepted by [`by_name`].
pub const NAMES: &[&str] = &[
    "zero_costs", "quadratic", "one_sided", "half_line", "forward_unit", "backward_unit", "forward_positive", "forward_negative", "rotation_disk",
    "exp_epigraph", "halfplane", "wedge", "ball", "no_fixed_cost",
];

pub fn by_name(name: &str) -> Option<ProblemSpec> {
    Some(match name {
        "zero_costs" => benchmark(Scalar::ZeroCosts),
        "quadratic" => benchmark(Scalar::Quadratic),
        "one_sided" => benchmark(Scalar::OneSided),
        "half_line" => benchmark(Scalar::HalfLine),
        "forward_unit" => cone_case(ConeCase::ForwardUnit),
        "backward_unit" => cone_case(ConeCase::BackwardUnit),
        "forward_positive" => cone_case(ConeCase::ForwardPositive),
        "forward_negative" => cone_case(ConeCase::ForwardNegative),
        "rotation_disk" => rotation_disk(),
        "exp_epigraph" => exp_epigraph(),
        "halfplane" => halfplane(),
        "wedge" => wedge(),
        "ball" => ball(1.5),
        "no_fixed_cost" => no_fixed_cost(),
        _ => return None,
    })
}
