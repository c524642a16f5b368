//! JSON descriptions of the built-in targets.
//!
//! A description is an object with a `kind` field:
//!
//! ```json
//! {"kind": "trigonometric", "dim": 1, "amplitude": 0.1013, "omega": 3.1416, "beta": 2}
//! {"kind": "sine_horizon", "dim": 2, "amplitude": 0.2, "frequency": 1, "beta": 2}
//! {"kind": "half_cube", "dim": 2}
//! {"kind": "piecewise", "factor": {...}, "region": {...}}
//! {"kind": "multiplication", "bound": 2}
//! ```
//!
//! Smooth kinds (`polynomial`, `trigonometric`) go through
//! [`approximate_smooth`], horizon kinds (`constant_horizon`,
//! `sine_horizon`) through [`approximate_horizon`], `half_cube` (the
//! indicator of `{x₁ ≥ 0}`) through [`approximate_indicator`], `piecewise`
//! through [`approximate_piecewise_smooth`] and `composite` (an outer target
//! composed with a coordinate selection) through [`approximate_composite`].
//! The kinds `multiplication`, `heaviside`, `sawtooth` and `identity` build
//! the corresponding primitive networks.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::approximators::{
    approximate_composite, approximate_horizon, approximate_indicator, approximate_piecewise_smooth,
    approximate_smooth,
};
use crate::calculus::identity_network;
use crate::error::{check_eps, check_p, Error, Result};
use crate::network::Network;
use crate::primitives::{heaviside_network, multiplication_network, sawtooth_network};
use crate::targets::{CompositeTarget, FeatureMap, HorizonTarget, Oracle, PiecewiseTarget, SmoothTarget};

fn default_beta() -> f64 {
    2.0
}

fn default_kappa() -> f64 {
    1.0
}

/// A built-in target and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// `Σ c_α x^α`; `terms` holds `(α, c_α)` pairs.
    Polynomial { dim: usize, terms: Vec<(Vec<u32>, f64)>, beta: f64, bound: f64 },
    /// `a·sin(ω x_j + φ)`.
    Trigonometric {
        dim: usize,
        #[serde(default)]
        coord: usize,
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
        beta: f64,
    },
    /// `H(y₁ + c)` with `y = x∘π`.
    ConstantHorizon {
        dim: usize,
        offset: f64,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default)]
        permutation: Option<Vec<usize>>,
    },
    /// `H(y₁ + a·sin(2π f y₂))` with `y = x∘π`.
    SineHorizon {
        dim: usize,
        amplitude: f64,
        frequency: f64,
        beta: f64,
        #[serde(default)]
        permutation: Option<Vec<usize>>,
    },
    /// `χ_{x₁ ≥ 0}` on the cube.
    HalfCube {
        dim: usize,
        #[serde(default = "default_beta")]
        beta: f64,
    },
    /// `g·χ_K` with a smooth `factor` and a horizon or half-cube `region`
    /// repeated on every dyadic cell of side `2^{−r}`.
    Piecewise {
        factor: Box<TargetSpec>,
        region: Box<TargetSpec>,
        #[serde(default)]
        r: u32,
    },
    /// `outer(x_{coords})` on `[−½, ½]^{input_dim}`.
    Composite {
        input_dim: usize,
        coords: Vec<usize>,
        outer: Box<TargetSpec>,
        #[serde(default = "default_kappa")]
        kappa: f64,
    },
    /// `xy` on `[−bound, bound]²`; the depth parameter sets the number of
    /// squaring blocks.
    Multiplication { bound: f64 },
    /// Heaviside ramp of width `ε` in the first coordinate.
    Heaviside { dim: usize },
    /// `t`-fold tent map.
    Sawtooth { t: u32 },
    /// Two-layer identity on `ℝ^dim`.
    Identity { dim: usize },
}

const KINDS: [&str; 11] = [
    "polynomial",
    "trigonometric",
    "constant_horizon",
    "sine_horizon",
    "half_cube",
    "piecewise",
    "composite",
    "multiplication",
    "heaviside",
    "sawtooth",
    "identity",
];

impl TargetSpec {
    pub fn from_json(s: &str) -> Result<TargetSpec> {
        let v: serde_json::Value = serde_json::from_str(s).map_err(|e| Error::Target(e.to_string()))?;
        check_kinds(&v)?;
        serde_json::from_value(v).map_err(|e| Error::Target(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("target descriptions serialize")
    }

    /// The `kind` tag.
    pub fn name(&self) -> &'static str {
        match self {
            TargetSpec::Polynomial { .. } => "polynomial",
            TargetSpec::Trigonometric { .. } => "trigonometric",
            TargetSpec::ConstantHorizon { .. } => "constant_horizon",
            TargetSpec::SineHorizon { .. } => "sine_horizon",
            TargetSpec::HalfCube { .. } => "half_cube",
            TargetSpec::Piecewise { .. } => "piecewise",
            TargetSpec::Composite { .. } => "composite",
            TargetSpec::Multiplication { .. } => "multiplication",
            TargetSpec::Heaviside { .. } => "heaviside",
            TargetSpec::Sawtooth { .. } => "sawtooth",
            TargetSpec::Identity { .. } => "identity",
        }
    }

    /// Input dimension of the built network.
    pub fn dim(&self) -> usize {
        match self {
            TargetSpec::Polynomial { dim, .. }
            | TargetSpec::Trigonometric { dim, .. }
            | TargetSpec::ConstantHorizon { dim, .. }
            | TargetSpec::SineHorizon { dim, .. }
            | TargetSpec::HalfCube { dim, .. }
            | TargetSpec::Heaviside { dim }
            | TargetSpec::Identity { dim } => *dim,
            TargetSpec::Piecewise { factor, .. } => factor.dim(),
            TargetSpec::Composite { input_dim, .. } => *input_dim,
            TargetSpec::Multiplication { .. } => 2,
            TargetSpec::Sawtooth { .. } => 1,
        }
    }

    /// The smooth target of a `polynomial` or `trigonometric` description.
    pub fn smooth(&self) -> Result<SmoothTarget> {
        match self {
            TargetSpec::Polynomial { dim, terms, beta, bound } => {
                SmoothTarget::polynomial(*dim, terms.clone(), *beta, *bound)
            }
            TargetSpec::Trigonometric { dim, coord, amplitude, omega, phase, beta } => {
                SmoothTarget::sine(*dim, *coord, *amplitude, *omega, *phase, *beta)
            }
            other => Err(Error::Target(format!("'{}' is not a smooth target", other.name()))),
        }
    }

    /// The horizon function of a horizon or `half_cube` description.
    pub fn horizon(&self) -> Result<HorizonTarget> {
        let with_perm = |gamma: SmoothTarget, perm: &Option<Vec<usize>>| match perm {
            Some(p) => HorizonTarget::new(gamma, p.clone()),
            None => Ok(HorizonTarget::graph(gamma)),
        };
        match self {
            TargetSpec::ConstantHorizon { dim, offset, beta, permutation } => {
                with_perm(SmoothTarget::constant(gamma_dim(*dim)?, *offset, *beta)?, permutation)
            }
            TargetSpec::SineHorizon { dim, amplitude, frequency, beta, permutation } => with_perm(
                SmoothTarget::sine(gamma_dim(*dim)?, 0, *amplitude, 2.0 * PI * frequency, 0.0, *beta)?,
                permutation,
            ),
            TargetSpec::HalfCube { dim, beta } => {
                Ok(HorizonTarget::graph(SmoothTarget::constant(gamma_dim(*dim)?, 0.0, *beta)?))
            }
            other => Err(Error::Target(format!("'{}' is not a horizon target", other.name()))),
        }
    }

    /// The cellwise target of a `piecewise` or region description.
    pub fn piecewise(&self) -> Result<PiecewiseTarget> {
        match self {
            TargetSpec::Piecewise { factor, region, r } => {
                let g = factor.smooth()?;
                let h = region.horizon()?;
                if g.dim != h.dim() {
                    return Err(Error::Target("factor and region dimensions differ".into()));
                }
                PiecewiseTarget::uniform(*r, h, Some(g))
            }
            other => PiecewiseTarget::uniform(0, other.horizon()?, None),
        }
    }

    pub fn composite(&self) -> Result<CompositeTarget> {
        match self {
            TargetSpec::Composite { input_dim, coords, outer, kappa } => {
                if coords.iter().any(|&c| c >= *input_dim) {
                    return Err(Error::Target("composite coordinate out of range".into()));
                }
                CompositeTarget::new(outer.piecewise()?, FeatureMap::projection(*input_dim, coords), *kappa)
            }
            other => Err(Error::Target(format!("'{}' is not a composite target", other.name()))),
        }
    }

    /// Builds the network for accuracy `eps` in `L^p`. `depth_param` is
    /// only used by `multiplication`. The primitives `heaviside`,
    /// `sawtooth` and `identity` accept any positive `eps`; all other kinds
    /// need `eps ∈ (0, ½)`.
    pub fn build(&self, eps: f64, p: f64, depth_param: u32) -> Result<Network> {
        check_p(p)?;
        match self {
            TargetSpec::Heaviside { .. } | TargetSpec::Sawtooth { .. } | TargetSpec::Identity { .. } => {
                if !(eps > 0.0) || !eps.is_finite() {
                    return Err(Error::InvalidArgument("eps must be positive".into()));
                }
            }
            _ => check_eps(eps)?,
        }
        match self {
            TargetSpec::Polynomial { .. } | TargetSpec::Trigonometric { .. } => {
                approximate_smooth(&self.smooth()?, eps, p)
            }
            TargetSpec::ConstantHorizon { .. } | TargetSpec::SineHorizon { .. } => {
                approximate_horizon(&self.horizon()?, eps, p)
            }
            TargetSpec::HalfCube { .. } => approximate_indicator(&self.piecewise()?, eps, p),
            TargetSpec::Piecewise { .. } => approximate_piecewise_smooth(&self.piecewise()?, eps, p),
            TargetSpec::Composite { .. } => approximate_composite(&self.composite()?, eps, p),
            TargetSpec::Multiplication { bound } => multiplication_network(*bound, eps, depth_param),
            TargetSpec::Heaviside { dim } => heaviside_network(*dim, eps),
            TargetSpec::Sawtooth { t } => sawtooth_network(*t, None),
            TargetSpec::Identity { dim } => identity_network(*dim, 2),
        }
    }

    /// Pointwise oracle of the target on the cube, for scalar kinds.
    pub fn oracle(&self) -> Result<Oracle> {
        match self {
            TargetSpec::Polynomial { .. } | TargetSpec::Trigonometric { .. } => {
                let f = self.smooth()?;
                Ok(Arc::new(move |x| f.eval(x)))
            }
            TargetSpec::ConstantHorizon { .. } | TargetSpec::SineHorizon { .. } => {
                let h = self.horizon()?;
                Ok(Arc::new(move |x| h.eval(x)))
            }
            TargetSpec::HalfCube { .. } | TargetSpec::Piecewise { .. } => {
                let g = self.piecewise()?;
                Ok(Arc::new(move |x| g.eval(x)))
            }
            TargetSpec::Composite { .. } => {
                let g = self.composite()?;
                Ok(Arc::new(move |x| g.eval(x)))
            }
            TargetSpec::Multiplication { .. } => Ok(Arc::new(|x| x[0] * x[1])),
            TargetSpec::Heaviside { .. } => Ok(Arc::new(|x| if x[0] >= 0.0 { 1.0 } else { 0.0 })),
            other => Err(Error::Target(format!("'{}' has no scalar oracle", other.name()))),
        }
    }

    /// Exponent `r` of the weight count `ε^{−r}`: `d/β` for smooth
    /// targets, `p(d−1)/β` for horizons and indicators, the larger of the
    /// two for piecewise smooth targets. `None` for the primitives.
    pub fn theoretical_rate(&self, p: f64) -> Option<f64> {
        match self {
            TargetSpec::Polynomial { dim, beta, .. } | TargetSpec::Trigonometric { dim, beta, .. } => {
                Some(*dim as f64 / beta)
            }
            TargetSpec::ConstantHorizon { dim, beta, .. }
            | TargetSpec::SineHorizon { dim, beta, .. }
            | TargetSpec::HalfCube { dim, beta } => Some(p * (*dim as f64 - 1.0) / beta),
            TargetSpec::Piecewise { factor, .. } => {
                let beta = self.piecewise().ok()?.beta();
                let d = factor.dim() as f64;
                Some((d / beta).max(p * (d - 1.0) / beta))
            }
            TargetSpec::Composite { outer, .. } => outer.theoretical_rate(p),
            _ => None,
        }
    }
}

fn gamma_dim(d: usize) -> Result<usize> {
    if d < 2 {
        return Err(Error::Target("horizon targets need dimension at least 2".into()));
    }
    Ok(d - 1)
}

fn check_kinds(v: &serde_json::Value) -> Result<()> {
    let Some(obj) = v.as_object() else { return Ok(()) };
    if let Some(kind) = obj.get("kind") {
        let k = kind.as_str().unwrap_or_default();
        if !KINDS.contains(&k) {
            return Err(Error::Target(format!("unknown target kind '{k}'")));
        }
    }
    for child in obj.values() {
        if child.is_object() {
            check_kinds(child)?;
        }
    }
    Ok(())
}
