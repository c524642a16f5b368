use std::collections::BTreeMap;

use super::arithmetic::multiplication_network;
use crate::calculus::{parallelize_many, projection, sparse_concatenate};
use crate::error::{check_eps, invalid, Result};
use crate::multiindex::{all_up_to, binomial, leq, order, power, MultiIndex};
use crate::network::{Layer, Network};
use crate::quantization::ceil_log2_inv;

/// Coefficients `c_{ℓ,α}` of the polynomials `Σ_α c_{ℓ,α}(x − x_ℓ)^α`, one
/// map per output `ℓ`. Missing multi-indices are zero.
pub type PolynomialCoefficients = Vec<BTreeMap<MultiIndex, f64>>;

/// Network approximating `x ↦ x^α` within `ε` uniformly on `[−½, ½]^d`.
///
/// `α = 0` gives the constant one and `α = e_j` the projection onto `x_j`,
/// both exact. Otherwise `α` is split as `α⁽¹⁾ + α⁽²⁾` with
/// `|α⁽²⁾| = 2^{⌈log₂|α|⌉−1}`, both halves are built recursively at
/// accuracy `ε/6` and multiplied by [`multiplication_network`] with bound 2
/// and depth parameter `1 + ⌊ℓ/(2d)⌋`.
pub fn monomial_network(alpha: &[u32], eps: f64, ell: u32) -> Result<Network> {
    check_eps(eps)?;
    let d = alpha.len();
    if d == 0 {
        return Err(invalid("multi-index must have at least one component"));
    }
    if ell == 0 {
        return Err(invalid("ell must be positive"));
    }
    let k = order(alpha);
    if k == 0 {
        return Ok(Network::affine(Layer::from_triplets(1, d, [], [(0, 1.0)])));
    }
    if k == 1 {
        let j = alpha.iter().position(|&a| a == 1).unwrap();
        return Ok(projection(d, &[j]));
    }
    let mut take = 1u32 << (k.next_power_of_two().trailing_zeros() - 1);
    let mut second = vec![0u32; d];
    for (s, &a) in second.iter_mut().zip(alpha) {
        let t = a.min(take);
        *s = t;
        take -= t;
    }
    let first: Vec<u32> = alpha.iter().zip(&second).map(|(a, b)| a - b).collect();
    let sub = eps / 6.0;
    let pair = parallelize_many(&[monomial_network(&first, sub, ell)?, monomial_network(&second, sub, ell)?])?;
    let l = 1 + ell / (2 * d as u32);
    let times = multiplication_network(2.0, sub, l)?;
    sparse_concatenate(&times, &pair)
}

/// Network with `m` outputs, output `ℓ` approximating the polynomial
/// `Σ_{|α|<β} c_{ℓ,α}(x − x_ℓ)^α` within `ε` on `[−½, ½]^d`.
///
/// The polynomials are re-expanded around the origin, their coefficients
/// rounded to a dyadic grid, and one shared bank of monomial networks is
/// combined by a single linear layer.
pub fn polynomial_unit(
    coeffs: &PolynomialCoefficients,
    base_points: &[Vec<f64>],
    eps: f64,
    beta: f64,
    bound: f64,
) -> Result<Network> {
    check_eps(eps)?;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(invalid("beta must be positive"));
    }
    if !(bound > 0.0) || !bound.is_finite() {
        return Err(invalid("coefficient bound must be positive"));
    }
    let m = base_points.len();
    if m == 0 {
        return Err(invalid("polynomial unit needs at least one base point"));
    }
    if coeffs.len() != m {
        return Err(invalid(format!("{} coefficient maps for {} base points", coeffs.len(), m)));
    }
    let d = base_points[0].len();
    if d == 0 || base_points.iter().any(|x| x.len() != d) {
        return Err(invalid("base points must share a positive dimension"));
    }
    if base_points.iter().flatten().any(|v| !(v.abs() <= 0.5)) {
        return Err(invalid("base points must lie in [-1/2, 1/2]^d"));
    }
    let n = beta.ceil() as u32 - 1;
    for c in coeffs {
        for (alpha, &v) in c {
            if alpha.len() != d {
                return Err(invalid("multi-index dimension does not match the base points"));
            }
            if order(alpha) > n {
                return Err(invalid(format!("multi-index of order {} exceeds {n}", order(alpha))));
            }
            if !(v.abs() <= bound) {
                return Err(invalid(format!("coefficient {v} outside [-{bound}, {bound}]")));
            }
        }
    }

    let gammas = all_up_to(d, n);
    let ng = gammas.len();
    // coefficients of the same polynomials in powers of x
    let centered: Vec<Vec<f64>> = coeffs
        .iter()
        .zip(base_points)
        .map(|(c, x0)| {
            let neg: Vec<f64> = x0.iter().map(|v| -v).collect();
            gammas
                .iter()
                .map(|g| {
                    c.iter()
                        .filter(|(a, _)| leq(g, a))
                        .map(|(a, &v)| {
                            let diff: Vec<u32> = a.iter().zip(g).map(|(x, y)| x - y).collect();
                            v * binomial(a, g) * power(&neg, &diff)
                        })
                        .sum()
                })
                .collect()
        })
        .collect();
    // worst case of |c̃_γ| over all base points in the cube, so that the
    // bank does not depend on where or how many base points there are
    let c_max = gammas
        .iter()
        .map(|g| {
            gammas
                .iter()
                .filter(|a| leq(g, a))
                .map(|a| bound * binomial(a, g) * (-((order(a) - order(g)) as f64)).exp2())
                .sum::<f64>()
        })
        .fold(1.0f64, f64::max);

    let k = ceil_log2_inv(eps);
    let mut s1 = 1u32;
    while !((-((s1 * k) as f64)).exp2() < eps / ng as f64 && eps.powi(-(s1 as i32)) >= c_max + 1.0) {
        s1 += 1;
    }
    let scale = ((s1 * k) as f64).exp2();

    let delta = eps / (4.0 * c_max * ng as f64);
    let bank: Vec<Network> =
        gammas.iter().map(|g| monomial_network(g, delta, n + 1)).collect::<Result<_>>()?;
    let bank = parallelize_many(&bank)?;
    let mut trip = Vec::new();
    for (l, row) in centered.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            trip.push((l, j, (v * scale).round() / scale));
        }
    }
    let combine = Network::affine(Layer::from_triplets(m, ng, trip, []));
    sparse_concatenate(&combine, &bank)
}
