use crate::calculus::{identity_network, pad_depth, parallelize_many, parallelize_separate, sparse_concatenate};
use crate::error::{check_eps, invalid, Result};
use crate::network::{Layer, Network};

/// Two-layer ramp `x ↦ ϱ(x₁/ε) − ϱ(x₁/ε − 1)` on `ℝ^d`: zero for `x₁ < 0`,
/// linear on `[0, ε]`, one for `x₁ > ε`. Five nonzero weights.
pub fn heaviside_network(d: usize, eps: f64) -> Result<Network> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid("eps must be positive"));
    }
    if d == 0 {
        return Err(invalid("dimension must be positive"));
    }
    let s = 1.0 / eps;
    let l1 = Layer::from_triplets(2, d, [(0, 0, s), (1, 0, s)], [(1, -1.0)]);
    let l2 = Layer::from_triplets(1, 2, [(0, 0, 1.0), (0, 1, -1.0)], []);
    Ok(Network::from_layers(d, vec![l1, l2]))
}

/// The two-layer form of the sawtooth `g_t`, `t ≥ 1`: one ReLU at zero,
/// one at every peak `(2ℓ−1)/2^t` and one at every interior trough `2k/2^t`.
fn sawtooth_two_layer(t: u32) -> Network {
    let half = 1usize << (t - 1);
    let scale = (t as f64).exp2();
    let step = 1.0 / scale;
    let mut trip = vec![(0, 0, 1.0)];
    let mut bias = Vec::new();
    let mut out = vec![(0, 0, scale)];
    let mut row = 1;
    for k in 1..half {
        trip.push((row, 0, 1.0));
        bias.push((row, -((2 * k) as f64) * step));
        out.push((0, row, 2.0 * scale));
        row += 1;
    }
    for l in 1..=half {
        trip.push((row, 0, 1.0));
        bias.push((row, -((2 * l - 1) as f64) * step));
        out.push((0, row, -2.0 * scale));
        row += 1;
    }
    let l1 = Layer::from_triplets(row, 1, trip, bias);
    let l2 = Layer::from_triplets(1, row, out, []);
    Network::from_layers(1, vec![l1, l2])
}

/// Network realizing the `t`-fold tent map `g_t` on `[0, 1]`, where
/// `g(x) = 2x` for `x < ½` and `2(1 − x)` otherwise; `g₀` is the identity.
///
/// With `block = Some(n)` and `t > n`, `g_t` is built as
/// `g_n ⊙ ⋯ ⊙ g_n ⊙ g_r` from two-layer blocks (`t = kn + r`); otherwise
/// the two-layer form is returned.
pub fn sawtooth_network(t: u32, block: Option<u32>) -> Result<Network> {
    if t == 0 {
        return identity_network(1, 2);
    }
    let n = match block {
        Some(0) => return Err(invalid("sawtooth block size must be positive")),
        Some(n) if t > n => n,
        _ => return Ok(sawtooth_two_layer(t)),
    };
    if t >= 31 {
        return Err(invalid("sawtooth order too large"));
    }
    let (k, r) = (t / n, t % n);
    let g_n = sawtooth_two_layer(n);
    let mut net = if r == 0 { g_n.clone() } else { sawtooth_two_layer(r) };
    let extra = if r == 0 { k - 1 } else { k };
    for _ in 0..extra {
        net = sparse_concatenate(&g_n, &net)?;
    }
    Ok(net)
}

/// Network with `2L + 4` layers realizing
/// `f_m(x) = x − Σ_{t=1}^m g_t(x)/4^t` on `[0, 1]`, so that
/// `|f_m(x) − x²| ≤ 2^{−2−2m}` there. The sawtooth factors use blocks of
/// size `⌈m/L⌉`.
pub fn square_network(m: u32, l: u32) -> Result<Network> {
    if m == 0 || l == 0 {
        return Err(invalid("square network needs positive m and L"));
    }
    if m > 500 {
        return Err(invalid("square network order too large"));
    }
    let n = m.div_ceil(l);
    let inner = 2 * l as usize + 3;
    let mut parts = vec![identity_network(1, inner)?];
    for t in 1..=m {
        parts.push(pad_depth(&sawtooth_network(t, Some(n))?, inner)?);
    }
    let psi = parallelize_many(&parts)?;
    let weights: Vec<(usize, usize, f64)> = std::iter::once((0, 0, 1.0))
        .chain((1..=m).map(|t| (0, t as usize, -(-2.0 * t as f64).exp2())))
        .collect();
    let sum = Network::affine(Layer::from_triplets(1, m as usize + 1, weights, []));
    sparse_concatenate(&sum, &psi)
}

/// Internal parameters of the multiplication network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplicationParams {
    /// `s₀ = 1 + ⌈log₂ M⌉`.
    pub s0: u32,
    /// `M₀ = 2^{s₀}`, the rescaling that maps `|x + y|` into `[0, 1]`.
    pub m0: f64,
    /// Number of squaring terms `m = s₀ + ⌈log₂(1/ε)/2⌉`.
    pub m: u32,
    /// Sawtooth block size `⌈m/L⌉`.
    pub block: u32,
}

pub fn multiplication_params(m_bound: f64, eps: f64, l: u32) -> Result<MultiplicationParams> {
    check_eps(eps)?;
    if !(m_bound >= 1.0) || !m_bound.is_finite() {
        return Err(invalid("multiplication bound must be at least 1"));
    }
    if l == 0 {
        return Err(invalid("depth parameter L must be positive"));
    }
    let s0 = 1 + m_bound.log2().ceil() as u32;
    let m = s0 + ((1.0 / eps).log2() / 2.0).ceil() as u32;
    Ok(MultiplicationParams { s0, m0: (s0 as f64).exp2(), m, block: m.div_ceil(l) })
}

/// Network with exactly `2L + 8` layers whose realization `r` satisfies
/// `|xy − r(x, y)| ≤ ε` on `[−M, M]²` and `r(x, y) = 0` whenever `xy = 0`.
///
/// Uses polarization `xy = ½(|x+y|² − |x|² − |y|²)` with each square
/// computed by [`square_network`] on the rescaled magnitude.
pub fn multiplication_network(m_bound: f64, eps: f64, l: u32) -> Result<Network> {
    let prm = multiplication_params(m_bound, eps, l)?;
    let lin = Network::affine(Layer::from_triplets(3, 2, [(0, 0, 1.0), (1, 1, 1.0), (2, 0, 1.0), (2, 1, 1.0)], []));
    let abs = Network::from_layers(
        3,
        vec![
            Layer::from_triplets(6, 3, (0..3).flat_map(|i| [(i, i, 1.0), (3 + i, i, -1.0)]), []),
            Layer::from_triplets(3, 6, (0..3).flat_map(|i| [(i, i, 1.0 / prm.m0), (i, 3 + i, 1.0 / prm.m0)]), []),
        ],
    );
    let sq = square_network(prm.m, l)?;
    let squares = parallelize_separate(&[sq.clone(), sq.clone(), sq])?;
    let w = prm.m0 * prm.m0 / 2.0;
    let sum = Network::affine(Layer::from_triplets(1, 3, [(0, 0, -w), (0, 1, -w), (0, 2, w)], []));
    let front = sparse_concatenate(&abs, &lin)?;
    let mid = sparse_concatenate(&squares, &front)?;
    sparse_concatenate(&sum, &mid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(net: &Network, x: &[f64]) -> f64 {
        net.eval_scalar(x).unwrap()
    }

    #[test]
    fn heaviside_regimes() {
        let h = heaviside_network(2, 0.5).unwrap();
        assert_eq!(h.depth(), 2);
        assert_eq!(h.num_weights(), 5);
        assert_eq!(eval(&h, &[-0.1, 0.3]), 0.0);
        assert_eq!(eval(&h, &[0.25, 0.0]), 0.5);
        assert_eq!(eval(&h, &[0.6, -0.4]), 1.0);
        assert!(heaviside_network(2, 0.0).is_err());
    }

    #[test]
    fn sawtooth_values() {
        let g = sawtooth_network(1, None).unwrap();
        assert_eq!(eval(&g, &[0.25]), 0.5);
        assert_eq!(eval(&g, &[0.5]), 1.0);
        assert_eq!(eval(&g, &[0.75]), 0.5);
        let g2 = sawtooth_network(2, None).unwrap();
        assert_eq!(eval(&g2, &[0.25]), 1.0);
        assert_eq!(eval(&sawtooth_network(0, None).unwrap(), &[0.3]), 0.3);
        for t in 1..=6 {
            assert!(sawtooth_network(t, None).unwrap().num_weights() <= 4 << t);
        }
    }

    #[test]
    fn composed_sawtooth_matches_two_layer() {
        for t in 1..=7 {
            let a = sawtooth_network(t, None).unwrap();
            let b = sawtooth_network(t, Some(2)).unwrap();
            for i in 0..=256 {
                let x = i as f64 / 256.0;
                assert!((eval(&a, &[x]) - eval(&b, &[x])).abs() < 1e-12, "t={t} x={x}");
            }
        }
    }

    #[test]
    fn square_values() {
        let f1 = square_network(1, 1).unwrap();
        assert_eq!(eval(&f1, &[0.5]), 0.25);
        assert_eq!(eval(&f1, &[0.0]), 0.0);
        for (m, l) in [(3, 1), (3, 2), (5, 3)] {
            let f = square_network(m, l).unwrap();
            assert_eq!(f.depth(), 2 * l as usize + 4);
            let bound = (-2.0 - 2.0 * m as f64).exp2();
            for i in 0..=1000 {
                let x = i as f64 / 1000.0;
                assert!((eval(&f, &[x]) - x * x).abs() <= bound + 1e-15);
            }
        }
    }

    #[test]
    fn multiplication_examples() {
        let net = multiplication_network(2.0, 0.01, 2).unwrap();
        assert_eq!(net.depth(), 12);
        assert!((eval(&net, &[0.5, 0.5]) - 0.25).abs() <= 0.01);
        for x in [-1.0, 0.7, 2.0] {
            assert_eq!(eval(&net, &[x, 0.0]), 0.0);
            assert_eq!(eval(&net, &[0.0, x]), 0.0);
        }
        let fine = multiplication_network(2.0, 0.001, 2).unwrap();
        assert!((eval(&fine, &[-1.3, 1.7]) + 2.21).abs() <= 0.001);
        assert!(multiplication_network(2.0, 0.5, 2).is_err());
    }
}
