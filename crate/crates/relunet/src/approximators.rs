//! Approximation pipelines for smooth, horizon, piecewise smooth and
//! composite targets.

use std::collections::BTreeMap;

use crate::calculus::{
    clamp_network, concatenate, identity_network, linear_form, parallelize_many, projection, sparse_concatenate,
};
use crate::error::{check_eps, check_p, invalid, Error, Result};
use crate::multiindex::{all_up_to, factorial, MultiIndex};
use crate::network::{Layer, Network};
use crate::primitives::{cutoff_array, heaviside_network, multiplication_network, polynomial_unit, AxisBox};
use crate::targets::{all_cells, CompositeTarget, FeatureMap, HorizonTarget, PiecewiseTarget, SmoothTarget};

/// Largest grid the smooth pipeline will build, counted in cells.
const MAX_CELLS: usize = 4_000_000;

/// `q = max{1, 1/p}`, the exponent of the quasi-triangle constant `2^{q−1}`.
pub fn quasi_exponent(p: f64) -> f64 {
    1f64.max(1.0 / p)
}

/// Taylor coefficients `c_α = ∂^α f(x₀)/α!` for `|α| ≤ n`.
pub fn taylor_coefficients(f: &SmoothTarget, x0: &[f64], n: u32) -> Result<BTreeMap<MultiIndex, f64>> {
    if x0.len() != f.dim {
        return Err(invalid("expansion point dimension does not match the target"));
    }
    all_up_to(f.dim, n)
        .into_iter()
        .map(|a| {
            let v = f.derivative(&a, x0)? / factorial(&a);
            Ok((a, v))
        })
        .collect()
}

/// Cells per axis used by [`approximate_smooth`]:
/// `N = ⌈(ε/(4CBd^β))^{−1/β}⌉` with `C = d^n`.
pub fn smooth_grid_size(f: &SmoothTarget, eps: f64) -> usize {
    let d = f.dim as f64;
    let c = d.powi(f.n() as i32);
    let n = (eps / (4.0 * c * f.bound * d.powf(f.beta))).powf(-1.0 / f.beta).ceil();
    n.max(1.0) as usize
}

/// The `N^d` cells `Π [(λᵢ−1)/N − ½, λᵢ/N − ½]` in lexicographic order.
fn uniform_cells(d: usize, n: usize) -> Result<Vec<AxisBox>> {
    let total = n.checked_pow(d as u32).filter(|&t| t <= MAX_CELLS).ok_or_else(|| {
        Error::Budget(format!("{n}^{d} cells exceed the construction limit of {MAX_CELLS}"))
    })?;
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let lo = idx.iter().map(|&i| i as f64 / n as f64 - 0.5).collect();
        let hi = idx.iter().map(|&i| (i + 1) as f64 / n as f64 - 0.5).collect();
        out.push(AxisBox::new(lo, hi)?);
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(out)
}

/// Network approximating a smooth target within `ε` in `L^p([−½, ½]^d)`,
/// with output bounded by `⌈B⌉` and depth independent of `ε`.
///
/// Local Taylor polynomials at the centers of `N^d` cells are computed by a
/// shared polynomial unit (accuracy `ε/4`), clamped to
/// `B₁ = ⌈(1 + Cd^β)B⌉`, localized by a cutoff array (accuracy `ε/2`) and
/// clamped to `⌈B⌉`.
pub fn approximate_smooth(f: &SmoothTarget, eps: f64, p: f64) -> Result<Network> {
    check_eps(eps)?;
    check_p(p)?;
    let d = f.dim;
    let n = f.n();
    let cells = uniform_cells(d, smooth_grid_size(f, eps))?;
    let mut coeffs = Vec::with_capacity(cells.len());
    let mut centers = Vec::with_capacity(cells.len());
    for cell in &cells {
        let c: Vec<f64> = cell.lo().iter().zip(cell.hi()).map(|(a, b)| (a + b) / 2.0).collect();
        coeffs.push(taylor_coefficients(f, &c, n)?);
        centers.push(c);
    }
    let poly = polynomial_unit(&coeffs, &centers, eps / 4.0, f.beta, f.bound)?;
    let df = d as f64;
    let b1 = ((1.0 + df.powi(n as i32) * df.powf(f.beta)) * f.bound).ceil();
    let clamped = clamp_network(&poly, b1)?;
    let cut = cutoff_array(&clamped, &cells, b1, eps / 2.0, p)?;
    clamp_network(&cut, f.bound)
}

/// Heaviside ramp width `ε′`: the largest power of two not above
/// `½(ε/4)^p`.
pub fn horizon_ramp(eps: f64, p: f64) -> f64 {
    (0.5 * (eps / 4.0).powf(p)).log2().floor().exp2()
}

/// Network approximating a horizon function within `ε` in `L^p`, with
/// realization in `[0, 1]` on all of `ℝ^d`.
///
/// `γ` is approximated in `L¹` to `½(ε/4)^p`; the shifted first coordinate
/// `y₁ + γ(ŷ)` feeds a Heaviside ramp of width [`horizon_ramp`]; the
/// coordinate permutation is folded into the first layer.
pub fn approximate_horizon(hf: &HorizonTarget, eps: f64, p: f64) -> Result<Network> {
    check_eps(eps)?;
    check_p(p)?;
    let d = hf.dim();
    if d < 2 {
        return Err(invalid("horizon functions need dimension at least 2"));
    }
    let tol = 0.5 * (eps / 4.0).powf(p);
    let gamma = approximate_smooth(&hf.gamma, tol, 1.0)?;
    let rest: Vec<usize> = (1..d).collect();
    let gamma_part = concatenate(&gamma, &projection(d, &rest))?;
    let carry = concatenate(&identity_network(1, gamma.depth())?, &projection(d, &[0]))?;
    let shift = concatenate(&linear_form(&[1.0, 1.0], 0.0), &parallelize_many(&[carry, gamma_part])?)?;
    let step = sparse_concatenate(&heaviside_network(1, horizon_ramp(eps, p))?, &shift)?;
    concatenate(&step, &projection(d, &hf.permutation))
}

/// Network approximating `χ_K` within `ε` in `L^p`, with realization in
/// `[0, 1]`.
///
/// Each dyadic cell's horizon is approximated to `ε/2^{1+q+rdq}`, the
/// results are localized to their cells by a cutoff array at `ε/2^{1+q}`
/// and the sum is clamped.
pub fn approximate_indicator(k: &PiecewiseTarget, eps: f64, p: f64) -> Result<Network> {
    check_eps(eps)?;
    check_p(p)?;
    let d = k.dim;
    let q = quasi_exponent(p);
    let cell_eps = eps / (1.0 + q + (k.r as f64) * (d as f64) * q).exp2();
    let side = 1usize << k.r;
    let mut unique: Vec<&HorizonTarget> = Vec::new();
    let mut select = Vec::new();
    let mut boxes = Vec::new();
    for lambda in all_cells(d, k.r) {
        let h = k
            .cells
            .get(&lambda)
            .ok_or_else(|| Error::Target(format!("missing cell descriptor for cell {lambda:?}")))?;
        let j = match unique.iter().position(|u| u.same_as(h)) {
            Some(j) => j,
            None => {
                unique.push(h);
                unique.len() - 1
            }
        };
        select.push((select.len(), j, 1.0));
        let lo = lambda.iter().map(|&l| (l - 1) as f64 / side as f64 - 0.5).collect();
        let hi = lambda.iter().map(|&l| l as f64 / side as f64 - 0.5).collect();
        boxes.push(AxisBox::new(lo, hi)?);
    }
    // one subnetwork per distinct descriptor, fanned out to the cells in its last layer
    let nets: Vec<Network> = unique.iter().map(|h| approximate_horizon(h, cell_eps, p)).collect::<Result<_>>()?;
    let fan = Network::affine(Layer::from_triplets(boxes.len(), nets.len(), select, []));
    let all = concatenate(&fan, &parallelize_many(&nets)?)?;
    let cut = cutoff_array(&all, &boxes, 1.0, eps / (1.0 + q).exp2(), p)?;
    clamp_network(&cut, 1.0)
}

/// Network approximating `g·χ_K` within `ε` in `L^p`, bounded by `⌈B⌉`.
///
/// The indicator is built at `ε/(3·4^q·B)`, the smooth factor at
/// `ε/(3·4^q)`, and both are multiplied by a product network with bound
/// `⌈B⌉` at `ε/(3·2^q)`.
pub fn approximate_piecewise_smooth(f: &PiecewiseTarget, eps: f64, p: f64) -> Result<Network> {
    check_eps(eps)?;
    check_p(p)?;
    let g = f
        .smooth_factor
        .as_ref()
        .ok_or_else(|| Error::Target("piecewise smooth target needs a smooth factor".into()))?;
    let d = f.dim as f64;
    let q = quasi_exponent(p);
    let b = g.bound.max(1.0);
    let beta = f.beta();
    let beta_prime = d * beta / (p * (d - 1.0));
    let beta0 = beta.max(beta_prime);
    let ind = approximate_indicator(f, eps / (3.0 * 4f64.powf(q) * b), p)?;
    let smooth = approximate_smooth(g, eps / (3.0 * 4f64.powf(q)), p)?;
    let l3 = 1 + (beta0 / (2.0 * d)).floor() as u32;
    let times = multiplication_network(b.ceil(), eps / (3.0 * q.exp2()), l3)?;
    let prod = sparse_concatenate(&times, &parallelize_many(&[ind, smooth])?)?;
    clamp_network(&prod, g.bound)
}

/// `log₂` of the product of the `∞`-operator norms of the weight matrices,
/// an upper bound for the Lipschitz constant of the realization in the
/// maximum norm.
pub fn lipschitz_bound_log2(net: &Network) -> f64 {
    net.layers()
        .iter()
        .map(|l| {
            let mut rows = vec![0.0f64; l.rows()];
            for e in l.entries() {
                rows[e.row as usize] += e.value.abs();
            }
            rows.into_iter().fold(0.0, f64::max).log2()
        })
        .sum()
}

/// Accuracy split for a composition `g ∘ τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositionBudget {
    /// Least `T ≥ 0` with Lipschitz bound `≤ ε^{−T}`.
    pub t: u32,
    /// Accuracy of the outer approximation, `ε/(2^q κ)`.
    pub outer: f64,
    /// Accuracy of the full inner map, `ε^{T+1}/2^q`.
    pub inner: f64,
    /// Accuracy of each of the `d` inner coordinates, `ε^{T+1}/(2d)^q`.
    pub inner_coordinate: f64,
}

pub fn composition_budget(eps: f64, p: f64, kappa: f64, d: usize, lipschitz_log2: f64) -> CompositionBudget {
    let q = quasi_exponent(p);
    let per = (1.0 / eps).log2();
    let t = if lipschitz_log2 <= 0.0 { 0 } else { (lipschitz_log2 / per).ceil() as u32 };
    let tail = eps.powi(t as i32 + 1);
    CompositionBudget {
        t,
        outer: eps / (q.exp2() * kappa),
        inner: tail / q.exp2(),
        inner_coordinate: tail / (2.0 * d as f64).powf(q),
    }
}

/// Network approximating `g ∘ τ` within `ε` in `L^p([−½, ½]^D)`.
///
/// The outer target is approximated at `ε/(2^q κ)`. An affine feature map
/// is folded in exactly; a smooth one is approximated coordinatewise at
/// `ε^{T+1}/(2d)^q` with smoothness `⌈βD(T+1)/(p(d−1))⌉`.
pub fn approximate_composite(f: &CompositeTarget, eps: f64, p: f64) -> Result<Network> {
    check_eps(eps)?;
    check_p(p)?;
    let d = f.outer.dim;
    let big_d = f.feature_map.input_dim();
    let q = quasi_exponent(p);
    let outer_eps = eps / (q.exp2() * f.kappa);
    let outer = if f.outer.smooth_factor.is_some() {
        approximate_piecewise_smooth(&f.outer, outer_eps, p)?
    } else {
        approximate_indicator(&f.outer, outer_eps, p)?
    };
    match &f.feature_map {
        FeatureMap::Affine { matrix, offset } => {
            let mut trip = Vec::new();
            for (i, row) in matrix.iter().enumerate() {
                if row.len() != big_d {
                    return Err(invalid("feature map rows have different lengths"));
                }
                trip.extend(row.iter().enumerate().map(|(j, &v)| (i, j, v)));
            }
            let inner = Network::affine(Layer::from_triplets(d, big_d, trip, offset.iter().copied().enumerate()));
            concatenate(&outer, &inner)
        }
        FeatureMap::Smooth(coords) => {
            if d < 2 {
                return Err(invalid("smooth feature maps need an outer dimension of at least 2"));
            }
            let budget = composition_budget(eps, p, f.kappa, d, lipschitz_bound_log2(&outer));
            let beta0 = (f.outer.beta() * big_d as f64 * (budget.t + 1) as f64 / (p * (d as f64 - 1.0))).ceil();
            let tol = budget.inner_coordinate;
            if !(tol >= f64::EPSILON) {
                return Err(Error::Budget(format!(
                    "inner accuracy {tol:e} (Lipschitz exponent T = {}) is below double precision",
                    budget.t
                )));
            }
            let mut nets = Vec::with_capacity(coords.len());
            for c in coords {
                if (c.max_order as f64) < beta0 {
                    return Err(Error::Target(format!(
                        "feature coordinate '{}' provides derivatives up to order {}, {} needed",
                        c.name, c.max_order, beta0
                    )));
                }
                let net = approximate_smooth(&c.with_beta(beta0)?, tol, p)
                    .map_err(|e| Error::Budget(format!("feature coordinate '{}' at accuracy {tol:e}: {e}", c.name)))?;
                nets.push(net);
            }
            sparse_concatenate(&outer, &parallelize_many(&nets)?)
        }
    }
}
