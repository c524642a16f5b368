//! Measurement tools: `L^p` error estimates, rate fits, slice piece counts,
//! the horizon distance identity, best affine fits and reference bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_p, invalid, Result};
use crate::network::{Layer, Network};

/// Points evaluated per parallel work item.
const CHUNK: usize = 4096;

/// How sample points are placed in `[−½, ½]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Midpoint tensor grid with `resolution` points per axis.
    Grid,
    /// `resolution` uniform points from a seeded generator.
    MonteCarlo,
}

impl Method {
    /// Tensor grid up to dimension 3, Monte Carlo above.
    pub fn auto(d: usize) -> Method {
        if d <= 3 {
            Method::Grid
        } else {
            Method::MonteCarlo
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorEstimate {
    pub value: f64,
    pub method: Method,
    pub resolution: usize,
    /// Only meaningful for Monte Carlo.
    pub seed: u64,
}

/// Sample points, row-major.
pub fn sample_points(d: usize, method: Method, resolution: usize, seed: u64) -> Vec<f64> {
    match method {
        Method::Grid => {
            let total = resolution.pow(d as u32);
            let mut out = Vec::with_capacity(total * d);
            let mut idx = vec![0usize; d];
            for _ in 0..total {
                out.extend(idx.iter().map(|&i| (i as f64 + 0.5) / resolution as f64 - 0.5));
                for k in (0..d).rev() {
                    idx[k] += 1;
                    if idx[k] < resolution {
                        break;
                    }
                    idx[k] = 0;
                }
            }
            out
        }
        Method::MonteCarlo => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..resolution * d).map(|_| rng.gen::<f64>() - 0.5).collect()
        }
    }
}

/// `(mean |a − b|^p)^{1/p}` over paired values, summed chunkwise in a fixed
/// order.
fn mean_power(a: &[f64], b: &[f64], p: f64) -> f64 {
    let sums: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs().powf(p)).sum::<f64>())
        .collect();
    (sums.iter().sum::<f64>() / a.len().max(1) as f64).powf(1.0 / p)
}

/// Evaluates a scalar oracle at row-major points.
pub fn eval_oracle(f: &(dyn Fn(&[f64]) -> f64 + Sync), points: &[f64], d: usize) -> Vec<f64> {
    points.par_chunks(d * CHUNK).flat_map_iter(|c| c.chunks(d).map(f).collect::<Vec<_>>()).collect()
}

/// Evaluates a scalar-output network at row-major points.
pub fn eval_network(net: &Network, points: &[f64]) -> Result<Vec<f64>> {
    let d = net.input_dim();
    let parts: Vec<Result<Vec<f64>>> = points.par_chunks(d * CHUNK).map(|c| net.realize_batch(c)).collect();
    let mut out = Vec::with_capacity(points.len() / d);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Estimates `‖f − g‖_{L^p([−½, ½]^d)}`.
pub fn lp_error(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    g: &(dyn Fn(&[f64]) -> f64 + Sync),
    p: f64,
    d: usize,
    method: Method,
    resolution: usize,
    seed: u64,
) -> Result<ErrorEstimate> {
    check_p(p)?;
    let pts = sample_points(d, method, resolution, seed);
    let value = mean_power(&eval_oracle(f, &pts, d), &eval_oracle(g, &pts, d), p);
    Ok(ErrorEstimate { value, method, resolution, seed })
}

/// Estimates `‖R(net) − f‖_{L^p([−½, ½]^d)}` for a scalar network.
pub fn network_lp_error(
    net: &Network,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    p: f64,
    method: Method,
    resolution: usize,
    seed: u64,
) -> Result<ErrorEstimate> {
    check_p(p)?;
    if net.output_dim() != 1 {
        return Err(invalid("error estimates need a scalar-output network"));
    }
    let d = net.input_dim();
    let pts = sample_points(d, method, resolution, seed);
    let value = mean_power(&eval_network(net, &pts)?, &eval_oracle(f, &pts, d), p);
    Ok(ErrorEstimate { value, method, resolution, seed })
}

/// Number of affine pieces of `t ↦ R(net)(x₀ + t v)` on `[t_lo, t_hi]`
/// detected from slope jumps on a uniform grid of `resolution` intervals.
///
/// A jump is flagged when consecutive slopes differ by more than
/// `tol·max(1, |s|)`; adjacent flags are one breakpoint. Pieces shorter than
/// the grid spacing can be missed, never invented.
pub fn count_slice_pieces(
    net: &Network,
    x0: &[f64],
    v: &[f64],
    interval: (f64, f64),
    resolution: usize,
    tol: f64,
) -> Result<usize> {
    let d = net.input_dim();
    if x0.len() != d || v.len() != d {
        return Err(invalid("slice point and direction must match the input dimension"));
    }
    if net.output_dim() != 1 {
        return Err(invalid("piece counting needs a scalar-output network"));
    }
    let (lo, hi) = interval;
    if !(hi > lo) || resolution < 2 {
        return Err(invalid("piece counting needs a nondegenerate interval and resolution ≥ 2"));
    }
    let h = (hi - lo) / resolution as f64;
    let mut pts = Vec::with_capacity((resolution + 1) * d);
    for i in 0..=resolution {
        let t = lo + i as f64 * h;
        pts.extend(x0.iter().zip(v).map(|(a, b)| a + t * b));
    }
    let y = net.realize_batch(&pts)?;
    let slopes: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let mut pieces = 1;
    let mut in_run = false;
    for w in slopes.windows(2) {
        let scale = 1f64.max(w[0].abs()).max(w[1].abs());
        let jump = (w[1] - w[0]).abs() > tol * scale;
        if jump && !in_run {
            pieces += 1;
        }
        in_run = jump;
    }
    Ok(pieces)
}

/// `(2/L)^L·(N − 1)^L`, an upper bound on the pieces of any slice of a
/// depth-`L` network with `N` neurons.
pub fn piece_bound(net: &Network) -> f64 {
    let l = net.depth() as f64;
    let n = net.num_neurons() as f64;
    (2.0 / l).powf(l) * (n - 1.0).powf(l)
}

/// `1/(2θ)`: the least asymptotic depth of networks reaching error `ε` with
/// `O(ε^{−θ})` weights for the hardest targets.
pub fn depth_lower_bound(theta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(invalid("theta must be positive"));
    }
    Ok(1.0 / (2.0 * theta))
}

/// Monte Carlo estimates of both sides of
/// `‖H(x₁ + γ) − H(x₁ + ψ)‖_{L^p} = ‖γ − ψ‖_{L¹}^{1/p}` on `[−½, ½]^d`,
/// using the same `samples` points for both.
pub fn hf_distance_check(
    gamma: &(dyn Fn(&[f64]) -> f64 + Sync),
    psi: &(dyn Fn(&[f64]) -> f64 + Sync),
    p: f64,
    d: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_p(p)?;
    if d < 2 {
        return Err(invalid("horizon functions need dimension at least 2"));
    }
    let pts = sample_points(d, Method::MonteCarlo, samples, seed);
    let sums: Vec<(f64, f64)> = pts
        .par_chunks(d * CHUNK)
        .map(|c| {
            c.chunks(d).fold((0.0, 0.0), |(a, b), x| {
                let (g, s) = (gamma(&x[1..]), psi(&x[1..]));
                let jump = ((x[0] + g >= 0.0) != (x[0] + s >= 0.0)) as u8 as f64;
                (a + jump, b + (g - s).abs())
            })
        })
        .collect();
    let (a, b) = sums.iter().fold((0.0, 0.0), |(x, y), (u, v)| (x + u, y + v));
    let n = samples.max(1) as f64;
    Ok(((a / n).powf(1.0 / p), (b / n).powf(1.0 / p)))
}

/// `inf_{s,c} ‖f − (s·x + c)‖_{L^p([a, b])}` on a midpoint grid.
///
/// Least squares for `p = 2`; otherwise Nelder–Mead on `(s, c)` started from
/// the least-squares fit.
pub fn best_affine_error(f: &dyn Fn(f64) -> f64, a: f64, b: f64, p: f64, resolution: usize) -> Result<f64> {
    check_p(p)?;
    if !(b > a) || resolution == 0 {
        return Err(invalid("best affine error needs a < b and a positive resolution"));
    }
    let h = (b - a) / resolution as f64;
    let xs: Vec<f64> = (0..resolution).map(|i| a + (i as f64 + 0.5) * h).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let n = resolution as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let start = [slope, my - slope * mx];
    let err = |q: &[f64; 2]| -> f64 {
        let s: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - q[0] * x - q[1]).abs().powf(p)).sum();
        (s * h).powf(1.0 / p)
    };
    if p == 2.0 {
        return Ok(err(&start));
    }
    let scale = (ys.iter().fold(0.0f64, |m, y| m.max(y.abs())) + 1.0) * 0.1;
    Ok(nelder_mead(&err, start, scale, 1e-6 * scale.min(1.0), 2000))
}

/// Minimizes a function of two variables with the Nelder–Mead simplex
/// method; stops when the objective spread drops below `ftol`.
fn nelder_mead(f: &dyn Fn(&[f64; 2]) -> f64, x0: [f64; 2], step: f64, ftol: f64, max_iter: usize) -> f64 {
    let mut s = [x0, [x0[0] + step, x0[1]], [x0[0], x0[1] + step]];
    let mut v = s.map(|x| f(&x));
    let comb = |a: &[f64; 2], b: &[f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    for _ in 0..max_iter {
        let mut order = [0, 1, 2];
        order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        s = order.map(|i| s[i]);
        v = order.map(|i| v[i]);
        if v[2] - v[0] < ftol {
            break;
        }
        let c = [(s[0][0] + s[1][0]) / 2.0, (s[0][1] + s[1][1]) / 2.0];
        let r = comb(&c, &s[2], -1.0);
        let fr = f(&r);
        if fr < v[0] {
            let e = comb(&c, &s[2], -2.0);
            let fe = f(&e);
            if fe < fr {
                s[2] = e;
                v[2] = fe;
            } else {
                s[2] = r;
                v[2] = fr;
            }
        } else if fr < v[1] {
            s[2] = r;
            v[2] = fr;
        } else {
            let k = comb(&c, &s[2], 0.5);
            let fk = f(&k);
            if fk < v[2] {
                s[2] = k;
                v[2] = fk;
            } else {
                for i in 1..3 {
                    s[i] = comb(&s[0], &s[i], 0.5);
                    v[i] = f(&s[i]);
                }
            }
        }
    }
    v.into_iter().fold(f64::INFINITY, f64::min)
}

/// Least-squares slope of `log M` against `log(1/ε)`.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(invalid("need ≥3 points"));
    }
    if points.iter().any(|&(e, m)| !(e > 0.0) || !(m > 0.0)) {
        return Err(invalid("rate fit needs positive eps and counts"));
    }
    let xs: Vec<f64> = points.iter().map(|p| (1.0 / p.0).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(invalid("rate fit needs distinct eps values"));
    }
    Ok(sxy / sxx)
}

/// One row of a sweep report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub target_name: String,
    pub eps: f64,
    pub p: f64,
    pub depth: usize,
    #[serde(rename = "M")]
    pub weights: usize,
    #[serde(rename = "N")]
    pub neurons: usize,
    pub measured_error: f64,
    pub theoretical_rate: Option<f64>,
    pub fitted_slope: Option<f64>,
}

/// A random network with the given layer widths (`widths[0]` is the input
/// dimension); each weight is present with probability `density` and drawn
/// by `value`.
pub fn random_network(
    rng: &mut impl Rng,
    widths: &[usize],
    density: f64,
    mut value: impl FnMut(&mut dyn rand::RngCore) -> f64,
) -> Network {
    assert!(widths.len() >= 2 && widths.iter().all(|&w| w > 0));
    let mut layers = Vec::with_capacity(widths.len() - 1);
    for w in widths.windows(2) {
        let (cols, rows) = (w[0], w[1]);
        let mut trip = Vec::new();
        let mut bias = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                if rng.gen::<f64>() < density {
                    trip.push((i, j, value(rng)));
                }
            }
            if rng.gen::<f64>() < density {
                bias.push((i, value(rng)));
            }
        }
        layers.push(Layer::from_triplets(rows, cols, trip, bias));
    }
    Network::from_layers(widths[0], layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_examples() {
        let one = |_: &[f64]| 1.0;
        let zero = |_: &[f64]| 0.0;
        assert_eq!(lp_error(&one, &one, 2.0, 2, Method::Grid, 10, 0).unwrap().value, 0.0);
        assert!((lp_error(&one, &zero, 3.0, 2, Method::Grid, 10, 0).unwrap().value - 1.0).abs() < 1e-12);
        let x = |v: &[f64]| v[0];
        let e = lp_error(&x, &zero, 2.0, 1, Method::Grid, 10_000, 0).unwrap().value;
        assert!((e - (1.0f64 / 12.0).sqrt()).abs() < 1e-3);
    }

    #[test]
    fn monte_carlo_is_seeded() {
        assert_eq!(sample_points(5, Method::MonteCarlo, 10, 7), sample_points(5, Method::MonteCarlo, 10, 7));
        assert_ne!(sample_points(5, Method::MonteCarlo, 10, 7), sample_points(5, Method::MonteCarlo, 10, 8));
    }

    #[test]
    fn rate_examples() {
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.01].iter().map(|&e: &f64| (e, e.powi(-2))).collect();
        assert!((rate_fit(&pts).unwrap() - 2.0).abs() < 1e-9);
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.01].iter().map(|&e: &f64| (e, 7.0 * e.powf(-1.5))).collect();
        assert!((rate_fit(&pts).unwrap() - 1.5).abs() < 1e-9);
        assert_eq!(rate_fit(&pts[..1]).unwrap_err().to_string(), "need ≥3 points");
    }

    #[test]
    fn reference_bounds() {
        assert_eq!(depth_lower_bound(1.0).unwrap(), 0.5);
        assert_eq!(depth_lower_bound(2.0 * 1.0 / 4.0).unwrap(), 1.0);
        let relu = Network::new(1, vec![Layer::from_triplets(1, 1, [(0, 0, 1.0)], []), Layer::identity(1)]).unwrap();
        assert_eq!(count_slice_pieces(&relu, &[0.0], &[1.0], (-1.0, 1.0), 1000, 1e-6).unwrap(), 2);
        let affine = Network::affine(Layer::from_triplets(1, 2, [(0, 0, 2.0), (0, 1, -1.0)], [(0, 0.3)]));
        assert_eq!(count_slice_pieces(&affine, &[0.0, 0.0], &[0.3, 1.0], (-1.0, 1.0), 1000, 1e-6).unwrap(), 1);
        assert_eq!(piece_bound(&affine), 2.0 * 2.0);
    }

    #[test]
    fn affine_fit_examples() {
        let e = best_affine_error(&|x| x * x, 0.0, 1.0, 2.0, 100_000).unwrap();
        assert!((e - 1.0 / (6.0 * 5f64.sqrt())).abs() < 1e-3);
        assert!(best_affine_error(&|x| 3.0 * x - 1.0, -1.0, 2.0, 1.0, 1000).unwrap() < 1e-5);
        assert!(best_affine_error(&|x| x, 1.0, 1.0, 2.0, 10).is_err());
    }

    #[test]
    fn horizon_distance_examples() {
        let (l, r) = hf_distance_check(&|_| 0.25, &|_| -0.25, 2.0, 2, 100_000, 1).unwrap();
        assert!((l - 0.5f64.sqrt()).abs() < 0.01 && (r - 0.5f64.sqrt()).abs() < 1e-12);
        let (l, r) = hf_distance_check(&|x| 0.1 * x[0], &|_| 0.0, 1.0, 2, 100_000, 2).unwrap();
        assert!((l - 0.025).abs() < 0.01 && (r - 0.025).abs() < 0.01);
    }
}
