use crate::calculus::{identity_network, pad_depth, parallelize_many, projection, sparse_concatenate};
use crate::error::{check_eps, check_p, invalid, Error, Result};
use crate::network::{Layer, Network};

/// A closed axis-parallel box `Π [aᵢ, bᵢ] ⊂ [−½, ½]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<AxisBox> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(invalid("box needs matching, nonempty endpoint lists"));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(-0.5 <= *a && a <= b && *b <= 0.5) {
                return Err(invalid(format!("box interval [{a}, {b}] not inside [-1/2, 1/2]")));
            }
        }
        Ok(AxisBox { lo, hi })
    }

    /// The full cube `[−½, ½]^d`.
    pub fn cube(d: usize) -> AxisBox {
        AxisBox { lo: vec![-0.5; d], hi: vec![0.5; d] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| a <= v && v <= b)
    }
}

/// Derived quantities of a cutoff network.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffParams {
    /// Ramp width `ε̃`, a power of two.
    pub ramp: f64,
    /// Endpoints rounded to multiples of the ramp width.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Output scale `B₀ = 2^{⌈log₂B⌉}`.
    pub scale: f64,
}

impl CutoffParams {
    /// Whether some rounded interval is shorter than two ramp widths.
    pub fn degenerate(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(a, b)| b - a < 2.0 * self.ramp)
    }
}

/// Smallest admissible ramp width. Below it, `(x − ã)/ε̃` exceeds `2^{53}`
/// for inputs of moderate size and the trapezoids lose exactness.
const MIN_RAMP_LOG2: i32 = -50;

/// Measure bound of the set where the cutoff of `bx` with ramp `r` differs
/// from `χ_box·y`: the box grown by `r/2` minus the box shrunk by `3r/2`.
fn strip_measure(bx: &AxisBox, r: f64) -> f64 {
    let widths = bx.lo.iter().zip(&bx.hi).map(|(a, b)| b - a);
    let outer: f64 = widths.clone().map(|w| w + r).product();
    let inner: f64 = widths.map(|w| (w - 3.0 * r).max(0.0)).product();
    outer - inner
}

/// Upper bound on how many of the grown boxes `Π[aᵢ − g, bᵢ + g]` share a
/// point: one plus the largest number of neighbours of a single box.
fn overlap_bound(boxes: &[AxisBox], g: f64) -> usize {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| boxes[i].lo[0].total_cmp(&boxes[j].lo[0]));
    let mut nbrs = vec![0usize; boxes.len()];
    for (k, &i) in order.iter().enumerate() {
        let a = &boxes[i];
        for &j in &order[k + 1..] {
            let b = &boxes[j];
            if b.lo[0] > a.hi[0] + 2.0 * g {
                break;
            }
            let meet = (1..a.dim()).all(|c| b.lo[c] <= a.hi[c] + 2.0 * g && a.lo[c] <= b.hi[c] + 2.0 * g);
            if meet {
                nbrs[i] += 1;
                nbrs[j] += 1;
            }
        }
    }
    1 + nbrs.into_iter().max().unwrap_or(0)
}

/// Largest power-of-two ramp `ε̃` for which the summed cutoffs of `boxes`
/// stay within `ε` of `Σ χ_box·y_box` in `L^p`, for `|y| ≤ B`.
///
/// The error of each cutoff lives on its strip `S` (see [`strip_measure`])
/// and is at most `B` there. With `K` strips meeting in a point,
/// `‖error‖_p^p ≤ B^p K^{max(p,1)−1} Σ|S|`, and `ε̃` is the largest power
/// of two making this at most `ε^p`. It never exceeds an eighth of the
/// shortest positive side.
pub fn cutoff_ramp(boxes: &[AxisBox], bound: f64, eps: f64, p: f64) -> Result<f64> {
    check_eps(eps)?;
    check_p(p)?;
    if !(bound >= 1.0) || !bound.is_finite() {
        return Err(invalid("cutoff bound must be at least 1"));
    }
    let shortest = boxes
        .iter()
        .flat_map(|b| b.lo.iter().zip(&b.hi).map(|(a, c)| c - a))
        .filter(|w| *w > 0.0)
        .fold(0.25f64, f64::min);
    let top = ((shortest / 8.0).log2().floor() as i32).min(-2);
    let k = if p > 1.0 && boxes.len() > 1 { overlap_bound(boxes, (top as f64).exp2()) } else { 1 };
    let budget = (eps / bound).powf(p) / (k as f64).powf(p.max(1.0) - 1.0);
    for e in (MIN_RAMP_LOG2..=top).rev() {
        let r = (e as f64).exp2();
        if boxes.iter().map(|b| strip_measure(b, r)).sum::<f64>() <= budget {
            return Ok(r);
        }
    }
    Err(Error::Budget(format!(
        "cutoff ramp below 2^{MIN_RAMP_LOG2} needed for eps = {eps}, p = {p} with {} boxes; \
         double precision cannot resolve it",
        boxes.len()
    )))
}

fn params_with_ramp(bx: &AxisBox, bound: f64, ramp: f64) -> CutoffParams {
    let round = |v: &f64| (v / ramp).round() * ramp;
    CutoffParams {
        ramp,
        lo: bx.lo.iter().map(round).collect(),
        hi: bx.hi.iter().map(round).collect(),
        scale: bound.log2().ceil().exp2(),
    }
}

/// Parameters of a single cutoff: the ramp from [`cutoff_ramp`], endpoints
/// rounded to the nearest multiple of it and the output scale.
pub fn cutoff_params(bx: &AxisBox, bound: f64, eps: f64, p: f64) -> Result<CutoffParams> {
    let ramp = cutoff_ramp(std::slice::from_ref(bx), bound, eps, p)?;
    Ok(params_with_ramp(bx, bound, ramp))
}

/// Four-layer network on `ℝ^{d+1}` realizing `(x, y) ↦ n(x, y)` with
/// `n = y` on the box shrunk by one ramp width, `n = 0` outside the
/// rounded box and `|n| ≤ |y|` everywhere, for `|y| ≤ B`.
///
/// Each coordinate contributes a trapezoid `φᵢ ∈ [0, 1]`; the product with
/// `y` is `B₀(ϱ(Σφᵢ − d + y⁺/B₀) − ϱ(Σφᵢ − d + y⁻/B₀))`. A box that
/// collapses after rounding gives the zero network.
pub fn cutoff_network(bx: &AxisBox, bound: f64, eps: f64, p: f64) -> Result<Network> {
    Ok(cutoff_from_params(&cutoff_params(bx, bound, eps, p)?))
}

fn cutoff_from_params(prm: &CutoffParams) -> Network {
    let d = prm.lo.len();
    if prm.degenerate() {
        let mut layers = vec![Layer::zero(1, d + 1)];
        layers.extend((0..3).map(|_| Layer::zero(1, 1)));
        return Network::from_layers(d + 1, layers);
    }
    let inv = 1.0 / prm.ramp;
    let mut trip = Vec::new();
    let mut bias = Vec::new();
    for i in 0..d {
        let (a, b) = (prm.lo[i] * inv, prm.hi[i] * inv);
        let r = 4 * i;
        trip.extend([(r, i, inv), (r + 1, i, inv), (r + 2, i, -inv), (r + 3, i, -inv)]);
        bias.extend([(r, -a), (r + 1, -a - 1.0), (r + 2, b), (r + 3, b - 1.0)]);
    }
    let y = 4 * d;
    trip.extend([(y, d, 1.0 / prm.scale), (y + 1, d, -1.0 / prm.scale)]);
    let l1 = Layer::from_triplets(4 * d + 2, d + 1, trip, bias);

    let mut trip = Vec::new();
    for row in 0..2 {
        for i in 0..d {
            let r = 4 * i;
            trip.extend([(row, r, 1.0), (row, r + 1, -1.0), (row, r + 2, 1.0), (row, r + 3, -1.0)]);
        }
        trip.push((row, y + row, 1.0));
    }
    let shift = -2.0 * d as f64;
    let l2 = Layer::from_triplets(2, 4 * d + 2, trip, [(0, shift), (1, shift)]);
    let l3 = Layer::from_triplets(1, 2, [(0, 0, prm.scale), (0, 1, -prm.scale)], []);
    pad_depth(&Network::from_layers(d + 1, vec![l1, l2, l3]), 4).expect("padding to a larger depth")
}

/// Network with `6 + L(Φ)` layers approximating `x ↦ Σ_ℓ χ_{box_ℓ}(x)·R(Φ)_ℓ(x)`
/// within `ε` in `L^p([−½, ½]^d)`, given `|R(Φ)_ℓ| ≤ B` on the cube. All
/// cutoffs share the ramp chosen by [`cutoff_ramp`] for the whole family.
pub fn cutoff_array(phi: &Network, boxes: &[AxisBox], bound: f64, eps: f64, p: f64) -> Result<Network> {
    check_eps(eps)?;
    check_p(p)?;
    let m = boxes.len();
    let d = phi.input_dim();
    if m == 0 || phi.output_dim() != m {
        return Err(Error::Dimension {
            layer: phi.depth(),
            detail: format!("network has {} outputs for {} boxes", phi.output_dim(), m),
        });
    }
    if let Some(b) = boxes.iter().find(|b| b.dim() != d) {
        return Err(Error::Dimension {
            layer: 0,
            detail: format!("box of dimension {} for input dimension {d}", b.dim()),
        });
    }
    let ramp = cutoff_ramp(boxes, bound, eps, p)?;
    let carry = parallelize_many(&[identity_network(d, phi.depth())?, phi.clone()])?;
    let pieces: Vec<Network> = boxes
        .iter()
        .enumerate()
        .map(|(l, bx)| {
            let idx: Vec<usize> = (0..d).chain([d + l]).collect();
            let lam = cutoff_from_params(&params_with_ramp(bx, bound, ramp));
            sparse_concatenate(&lam, &projection(d + m, &idx))
        })
        .collect::<Result<_>>()?;
    let cut = parallelize_many(&pieces)?;
    let sum = Network::affine(Layer::from_triplets(1, m, (0..m).map(|j| (0, j, 1.0)), []));
    sparse_concatenate(&sum, &sparse_concatenate(&cut, &carry)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::linear_form;

    #[test]
    fn cutoff_regimes() {
        let bx = AxisBox::new(vec![-0.25, -0.25], vec![0.25, 0.25]).unwrap();
        let net = cutoff_network(&bx, 1.0, 0.1, 2.0).unwrap();
        assert_eq!(net.depth(), 4);
        assert_eq!(net.eval_scalar(&[0.0, 0.1, 0.7]).unwrap(), 0.7);
        assert_eq!(net.eval_scalar(&[0.0, 0.1, -0.7]).unwrap(), -0.7);
        assert_eq!(net.eval_scalar(&[0.4, 0.1, 0.7]).unwrap(), 0.0);
        assert_eq!(net.eval_scalar(&[0.0, -0.3, 0.7]).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_box_is_zero() {
        let bx = AxisBox::new(vec![0.1], vec![0.1]).unwrap();
        let net = cutoff_network(&bx, 1.0, 0.1, 1.0).unwrap();
        assert_eq!(net.depth(), 4);
        assert_eq!(net.num_weights(), 0);
    }

    #[test]
    fn invalid_box() {
        assert!(AxisBox::new(vec![-0.6], vec![0.0]).is_err());
        assert!(AxisBox::new(vec![0.2], vec![0.1]).is_err());
    }

    #[test]
    fn two_boxes_with_opposite_constants() {
        let phi = crate::calculus::parallelize(&linear_form(&[0.0, 0.0], 1.0), &linear_form(&[0.0, 0.0], -1.0)).unwrap();
        let boxes = [
            AxisBox::new(vec![-0.5, -0.5], vec![0.0, 0.5]).unwrap(),
            AxisBox::new(vec![0.0, -0.5], vec![0.5, 0.5]).unwrap(),
        ];
        let net = cutoff_array(&phi, &boxes, 1.0, 0.1, 2.0).unwrap();
        assert_eq!(net.depth(), 6 + phi.depth());
        assert_eq!(net.eval_scalar(&[-0.25, 0.0]).unwrap(), 1.0);
        assert_eq!(net.eval_scalar(&[0.25, 0.0]).unwrap(), -1.0);
        assert_eq!(net.eval_scalar(&[2.0, 0.0]).unwrap(), 0.0);
    }
}
