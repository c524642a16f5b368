//! Multi-indices `α ∈ ℕ₀^d` and the combinatorics used by polynomial
//! constructions.

/// A multi-index; `alpha[i]` is the exponent of `x_i`.
pub type MultiIndex = Vec<u32>;

/// `|α| = Σ αᵢ`.
pub fn order(alpha: &[u32]) -> u32 {
    alpha.iter().sum()
}

/// All multi-indices of dimension `d` with `|α| ≤ n`, sorted by order and
/// then lexicographically (descending in the first coordinate).
pub fn all_up_to(d: usize, n: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for k in 0..=n {
        let mut cur = vec![0u32; d];
        with_order(d, k, 0, &mut cur, &mut out);
    }
    out
}

fn with_order(d: usize, remaining: u32, pos: usize, cur: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
    if pos + 1 == d {
        cur[pos] = remaining;
        out.push(cur.clone());
        return;
    }
    for a in (0..=remaining).rev() {
        cur[pos] = a;
        with_order(d, remaining - a, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// `γ ≤ α` componentwise.
pub fn leq(gamma: &[u32], alpha: &[u32]) -> bool {
    gamma.iter().zip(alpha).all(|(g, a)| g <= a)
}

/// `α! = Π αᵢ!`.
pub fn factorial(alpha: &[u32]) -> f64 {
    alpha.iter().map(|&a| (1..=a).map(f64::from).product::<f64>()).product()
}

/// `binom(α, γ) = Π binom(αᵢ, γᵢ)`.
pub fn binomial(alpha: &[u32], gamma: &[u32]) -> f64 {
    alpha
        .iter()
        .zip(gamma)
        .map(|(&a, &g)| {
            let mut r = 1.0;
            for j in 0..g {
                r = r * f64::from(a - j) / f64::from(j + 1);
            }
            r
        })
        .product()
}

/// `x^α`.
pub fn power(x: &[f64], alpha: &[u32]) -> f64 {
    x.iter().zip(alpha).map(|(&xi, &a)| xi.powi(a as i32)).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_counts() {
        // number of α ∈ ℕ₀^d with |α| ≤ n is binom(n+d, d)
        assert_eq!(all_up_to(2, 2).len(), 6);
        assert_eq!(all_up_to(3, 3).len(), 20);
        assert_eq!(all_up_to(1, 4), vec![vec![0], vec![1], vec![2], vec![3], vec![4]]);
        assert_eq!(all_up_to(2, 1), vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn combinatorics() {
        assert_eq!(factorial(&[3, 2]), 12.0);
        assert_eq!(binomial(&[4, 2], &[2, 1]), 12.0);
        assert_eq!(power(&[2.0, 3.0], &[2, 1]), 12.0);
        assert!(leq(&[1, 0], &[1, 2]));
        assert!(!leq(&[2, 0], &[1, 2]));
    }
}
