//! Target function descriptors: smooth functions with derivative oracles,
//! horizon functions, piecewise smooth functions on dyadic cells and
//! compositions with feature maps.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::multiindex::{factorial, order, MultiIndex};

/// Point evaluation oracle.
pub type Oracle = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Partial derivative oracle `(α, x) ↦ ∂^α f(x)`.
pub type DerivativeOracle = Arc<dyn Fn(&[u32], &[f64]) -> f64 + Send + Sync>;

/// A function on `[−½, ½]^d` of smoothness `β = n + σ` (`n ∈ ℕ₀`,
/// `σ ∈ (0, 1]`) whose Hölder norm is assumed to be at most `bound`.
#[derive(Clone)]
pub struct SmoothTarget {
    pub name: String,
    pub dim: usize,
    pub beta: f64,
    pub bound: f64,
    /// Highest derivative order the oracle supports.
    pub max_order: u32,
    eval: Oracle,
    derivative: DerivativeOracle,
}

impl fmt::Debug for SmoothTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothTarget")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("beta", &self.beta)
            .field("bound", &self.bound)
            .finish()
    }
}

impl SmoothTarget {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        beta: f64,
        bound: f64,
        max_order: u32,
        eval: Oracle,
        derivative: DerivativeOracle,
    ) -> Result<SmoothTarget> {
        if dim == 0 {
            return Err(invalid("target dimension must be positive"));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(invalid("beta must be positive"));
        }
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(invalid("target bound must be positive"));
        }
        let t = SmoothTarget { name: name.into(), dim, beta, bound, max_order, eval, derivative };
        if t.n() > max_order {
            return Err(Error::Target(format!(
                "derivative oracle of order {max_order} cannot support beta = {beta}"
            )));
        }
        Ok(t)
    }

    /// `n = ⌈β⌉ − 1`, the Taylor degree.
    pub fn n(&self) -> u32 {
        self.beta.ceil() as u32 - 1
    }

    /// `σ = β − n ∈ (0, 1]`.
    pub fn sigma(&self) -> f64 {
        self.beta - self.n() as f64
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn derivative(&self, alpha: &[u32], x: &[f64]) -> Result<f64> {
        if alpha.len() != self.dim {
            return Err(invalid("multi-index dimension does not match the target"));
        }
        if order(alpha) > self.max_order {
            return Err(Error::Target(format!(
                "derivative of order {} requested, oracle supports {}",
                order(alpha),
                self.max_order
            )));
        }
        Ok((self.derivative)(alpha, x))
    }

    /// Returns a copy with a different smoothness index; the bound is kept.
    pub fn with_beta(&self, beta: f64) -> Result<SmoothTarget> {
        SmoothTarget::new(
            self.name.clone(),
            self.dim,
            beta,
            self.bound,
            self.max_order,
            self.eval.clone(),
            self.derivative.clone(),
        )
    }

    /// The constant `c` (with `bound = max(|c|, tiny)`).
    pub fn constant(dim: usize, c: f64, beta: f64) -> Result<SmoothTarget> {
        let bound = c.abs().max(1e-12);
        SmoothTarget::new(
            format!("constant({c})"),
            dim,
            beta,
            bound,
            u32::MAX,
            Arc::new(move |_| c),
            Arc::new(move |a, _| if order(a) == 0 { c } else { 0.0 }),
        )
    }

    /// `x ↦ a·sin(ω x_j + φ)`. The bound is `a·max(1, ω)^β·2^{1−σ}`, which
    /// dominates every derivative up to order `n` and the `σ`-Hölder
    /// seminorm of the `n`-th derivatives.
    pub fn sine(dim: usize, coord: usize, amplitude: f64, omega: f64, phase: f64, beta: f64) -> Result<SmoothTarget> {
        if coord >= dim {
            return Err(invalid("sine coordinate out of range"));
        }
        let n = beta.ceil() - 1.0;
        let sigma = beta - n;
        let bound = (amplitude.abs() * omega.abs().max(1.0).powf(beta) * (1.0 - sigma).exp2()).max(1e-12);
        SmoothTarget::new(
            format!("sine({amplitude}*sin({omega}*x{} + {phase}))", coord + 1),
            dim,
            beta,
            bound,
            u32::MAX,
            Arc::new(move |x| amplitude * (omega * x[coord] + phase).sin()),
            Arc::new(move |a, x| {
                let k = a[coord];
                if a.iter().enumerate().any(|(i, &v)| i != coord && v != 0) {
                    return 0.0;
                }
                amplitude * omega.powi(k as i32) * (omega * x[coord] + phase + k as f64 * std::f64::consts::FRAC_PI_2).sin()
            }),
        )
    }

    /// `x ↦ Σ c_α x^α` with a caller-supplied Hölder bound.
    pub fn polynomial(dim: usize, terms: Vec<(MultiIndex, f64)>, beta: f64, bound: f64) -> Result<SmoothTarget> {
        if terms.iter().any(|(a, _)| a.len() != dim) {
            return Err(invalid("polynomial term dimension does not match"));
        }
        let terms = Arc::new(terms);
        let t2 = terms.clone();
        SmoothTarget::new(
            "polynomial",
            dim,
            beta,
            bound,
            u32::MAX,
            Arc::new(move |x| terms.iter().map(|(a, c)| c * crate::multiindex::power(x, a)).sum()),
            Arc::new(move |g, x| {
                t2.iter()
                    .filter(|(a, _)| crate::multiindex::leq(g, a))
                    .map(|(a, c)| {
                        let diff: Vec<u32> = a.iter().zip(g).map(|(p, q)| p - q).collect();
                        c * factorial(a) / factorial(&diff) * crate::multiindex::power(x, &diff)
                    })
                    .sum()
            }),
        )
    }
}

/// `x ↦ H(y₁ + γ(y₂, …, y_d))` with `yᵢ = x_{π(i)}` and `H = χ_{[0,∞)}`.
#[derive(Debug, Clone)]
pub struct HorizonTarget {
    pub gamma: SmoothTarget,
    /// `permutation[i]` is the input coordinate placed at position `i`.
    pub permutation: Vec<usize>,
}

impl HorizonTarget {
    pub fn new(gamma: SmoothTarget, permutation: Vec<usize>) -> Result<HorizonTarget> {
        let d = gamma.dim + 1;
        let mut seen = vec![false; d];
        if permutation.len() != d {
            return Err(invalid(format!("permutation of length {} for dimension {d}", permutation.len())));
        }
        for &p in &permutation {
            if p >= d || seen[p] {
                return Err(invalid("permutation is not a bijection"));
            }
            seen[p] = true;
        }
        Ok(HorizonTarget { gamma, permutation })
    }

    /// Horizon with the identity permutation.
    pub fn graph(gamma: SmoothTarget) -> HorizonTarget {
        let d = gamma.dim + 1;
        HorizonTarget { gamma, permutation: (0..d).collect() }
    }

    pub fn dim(&self) -> usize {
        self.gamma.dim + 1
    }

    /// Whether both descriptors share the same oracles, parameters and
    /// permutation (true for clones).
    pub fn same_as(&self, other: &HorizonTarget) -> bool {
        let (a, b) = (&self.gamma, &other.gamma);
        Arc::ptr_eq(&a.eval, &b.eval)
            && Arc::ptr_eq(&a.derivative, &b.derivative)
            && a.beta == b.beta
            && a.bound == b.bound
            && a.dim == b.dim
            && self.permutation == other.permutation
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = self.permutation.iter().map(|&i| x[i]).collect();
        if y[0] + self.gamma.eval(&y[1..]) >= 0.0 {
            1.0
        } else {
            0.0
        }
    }
}

/// A function `g·χ_K` (or `χ_K` alone) where `K` agrees on every dyadic
/// cell `I_λ` of side `2^{−r}` with a horizon function `f_λ`.
#[derive(Debug, Clone)]
pub struct PiecewiseTarget {
    pub dim: usize,
    pub r: u32,
    /// Keys are 1-based cell indices `λ ∈ {1, …, 2^r}^d`.
    pub cells: BTreeMap<Vec<u32>, HorizonTarget>,
    pub smooth_factor: Option<SmoothTarget>,
}

impl PiecewiseTarget {
    /// Uses the same horizon on every cell.
    pub fn uniform(r: u32, horizon: HorizonTarget, smooth_factor: Option<SmoothTarget>) -> Result<PiecewiseTarget> {
        let d = horizon.dim();
        let cells = all_cells(d, r).into_iter().map(|l| (l, horizon.clone())).collect();
        PiecewiseTarget::new(d, r, cells, smooth_factor)
    }

    pub fn new(
        dim: usize,
        r: u32,
        cells: BTreeMap<Vec<u32>, HorizonTarget>,
        smooth_factor: Option<SmoothTarget>,
    ) -> Result<PiecewiseTarget> {
        if r > 8 {
            return Err(invalid("dyadic scale r too large"));
        }
        for (k, h) in &cells {
            if k.len() != dim || h.dim() != dim {
                return Err(invalid("cell descriptor dimension mismatch"));
            }
        }
        if let Some(g) = &smooth_factor {
            if g.dim != dim {
                return Err(invalid("smooth factor dimension mismatch"));
            }
        }
        Ok(PiecewiseTarget { dim, r, cells, smooth_factor })
    }

    /// The horizon smoothness `β`, the smallest over the cells.
    pub fn beta(&self) -> f64 {
        self.cells.values().map(|h| h.gamma.beta).fold(f64::INFINITY, f64::min)
    }

    /// Bound of the smooth factor (1 when absent).
    pub fn bound(&self) -> f64 {
        self.smooth_factor.as_ref().map_or(1.0, |g| g.bound)
    }

    /// Index of the cell containing `x` (boundary points go to the lower cell).
    pub fn cell_of(&self, x: &[f64]) -> Vec<u32> {
        let k = 1u32 << self.r;
        x.iter()
            .map(|&v| (((v + 0.5) * k as f64).ceil() as i64).clamp(1, k as i64) as u32)
            .collect()
    }

    pub fn indicator(&self, x: &[f64]) -> f64 {
        self.cells.get(&self.cell_of(x)).map_or(0.0, |h| h.eval(x))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let chi = self.indicator(x);
        match &self.smooth_factor {
            Some(g) if chi != 0.0 => chi * g.eval(x),
            Some(_) => 0.0,
            None => chi,
        }
    }
}

/// All cell indices `{1, …, 2^r}^d` in lexicographic order.
pub fn all_cells(d: usize, r: u32) -> Vec<Vec<u32>> {
    let k = 1u32 << r;
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p: Vec<u32>| {
                (1..=k).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    out
}

/// The inner map of a composite target.
#[derive(Debug, Clone)]
pub enum FeatureMap {
    /// `x ↦ A x + b`, represented exactly.
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    /// One smooth coordinate function per output.
    Smooth(Vec<SmoothTarget>),
}

impl FeatureMap {
    /// Selection of input coordinates `idx` of `ℝ^D`.
    pub fn projection(big_d: usize, idx: &[usize]) -> FeatureMap {
        let matrix = idx
            .iter()
            .map(|&j| (0..big_d).map(|k| if k == j { 1.0 } else { 0.0 }).collect())
            .collect();
        FeatureMap::Affine { matrix, offset: vec![0.0; idx.len()] }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            FeatureMap::Affine { matrix, .. } => matrix.first().map_or(0, Vec::len),
            FeatureMap::Smooth(c) => c.first().map_or(0, |t| t.dim),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            FeatureMap::Affine { matrix, .. } => matrix.len(),
            FeatureMap::Smooth(c) => c.len(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FeatureMap::Affine { matrix, offset } => matrix
                .iter()
                .zip(offset)
                .map(|(row, b)| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)
                .collect(),
            FeatureMap::Smooth(c) => c.iter().map(|t| t.eval(x)).collect(),
        }
    }
}

/// `f = g ∘ τ` for a piecewise smooth `g` on `ℝ^d` and a feature map
/// `τ : [−½, ½]^D → [−½, ½]^d`; `kappa` bounds `‖h∘τ‖_{L^p} ≤ κ‖h‖_{L^p}`.
#[derive(Debug, Clone)]
pub struct CompositeTarget {
    pub outer: PiecewiseTarget,
    pub feature_map: FeatureMap,
    pub kappa: f64,
}

impl CompositeTarget {
    pub fn new(outer: PiecewiseTarget, feature_map: FeatureMap, kappa: f64) -> Result<CompositeTarget> {
        if feature_map.output_dim() != outer.dim {
            return Err(invalid("feature map output dimension does not match the outer target"));
        }
        if feature_map.input_dim() == 0 {
            return Err(invalid("feature map needs a positive input dimension"));
        }
        if !(kappa >= 1.0) || !kappa.is_finite() {
            return Err(invalid("kappa must be at least 1"));
        }
        Ok(CompositeTarget { outer, feature_map, kappa })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.outer.eval(&self.feature_map.eval(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_derivatives_match_finite_differences() {
        let f = SmoothTarget::sine(2, 1, 0.2, 2.0 * std::f64::consts::PI, 0.0, 2.0).unwrap();
        let x = [0.1, 0.17];
        let h = 1e-6;
        let fd = (f.eval(&[0.1, 0.17 + h]) - f.eval(&[0.1, 0.17 - h])) / (2.0 * h);
        assert!((f.derivative(&[0, 1], &x).unwrap() - fd).abs() < 1e-6);
        assert_eq!(f.derivative(&[1, 0], &x).unwrap(), 0.0);
        assert!((f.bound - 0.8 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn polynomial_derivatives() {
        let f = SmoothTarget::polynomial(2, vec![(vec![2, 1], 3.0)], 4.0, 10.0).unwrap();
        assert_eq!(f.eval(&[2.0, 1.0]), 12.0);
        assert_eq!(f.derivative(&[1, 1], &[2.0, 5.0]).unwrap(), 12.0);
        assert_eq!(f.derivative(&[0, 2], &[2.0, 5.0]).unwrap(), 0.0);
    }

    #[test]
    fn horizon_and_cells() {
        let g = SmoothTarget::constant(1, 0.25, 2.0).unwrap();
        let h = HorizonTarget::graph(g.clone());
        assert_eq!(h.eval(&[-0.3, 0.0]), 0.0);
        assert_eq!(h.eval(&[-0.2, 0.0]), 1.0);
        let swapped = HorizonTarget::new(g, vec![1, 0]).unwrap();
        assert_eq!(swapped.eval(&[0.0, -0.2]), 1.0);
        assert!(HorizonTarget::new(SmoothTarget::constant(1, 0.0, 1.0).unwrap(), vec![0, 0]).is_err());
        assert_eq!(all_cells(2, 1), vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![2, 2]]);
        let k = PiecewiseTarget::uniform(1, h, None).unwrap();
        assert_eq!(k.cell_of(&[-0.5, 0.3]), vec![1, 2]);
        assert_eq!(k.cell_of(&[0.0, 0.5]), vec![1, 2]);
    }
}
