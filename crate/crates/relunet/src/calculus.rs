//! Operations that build networks out of networks while tracking depth and
//! weight counts: concatenation, sparse concatenation, parallelization,
//! identity networks, depth padding and output clamping.

use crate::error::{invalid, Error, Result};
use crate::network::{Layer, Network};

/// Composition of two affine maps: `x ↦ a(b x + β) + α`.
pub(crate) fn compose_affine(a: &Layer, b: &Layer) -> Layer {
    debug_assert_eq!(a.cols(), b.rows());
    let ranges = b.row_ranges();
    let be = b.entries();
    let mut trip = Vec::new();
    for e in a.entries() {
        for f in &be[ranges[e.col as usize].clone()] {
            trip.push((e.row as usize, f.col as usize, e.value * f.value));
        }
    }
    let mut bias: Vec<(usize, f64)> = a.bias().iter().map(|&(i, v)| (i as usize, v)).collect();
    let mut bdense = vec![0.0; b.rows()];
    for &(j, v) in b.bias() {
        bdense[j as usize] = v;
    }
    for e in a.entries() {
        let bj = bdense[e.col as usize];
        if bj != 0.0 {
            bias.push((e.row as usize, e.value * bj));
        }
    }
    Layer::from_triplets(a.rows(), b.cols(), trip, bias)
}

fn check_chain(first: &Network, second: &Network) -> Result<()> {
    if second.output_dim() != first.input_dim() {
        return Err(Error::Dimension {
            layer: 1,
            detail: format!(
                "second network outputs {} values, first network expects {}",
                second.output_dim(),
                first.input_dim()
            ),
        });
    }
    Ok(())
}

/// Concatenation: `L₁+L₂−1` layers realizing `R(first) ∘ R(second)`, with
/// the last layer of `second` merged into the first layer of `first`.
pub fn concatenate(first: &Network, second: &Network) -> Result<Network> {
    check_chain(first, second)?;
    let (l1, l2) = (first.layers(), second.layers());
    let mut layers = Vec::with_capacity(l1.len() + l2.len() - 1);
    layers.extend_from_slice(&l2[..l2.len() - 1]);
    layers.push(compose_affine(&l1[0], &l2[l2.len() - 1]));
    layers.extend_from_slice(&l1[1..]);
    Ok(Network::from_layers(second.input_dim(), layers))
}

/// The identity on `ℝ^d` as an `L`-layer network with `{±1}` weights.
pub fn identity_network(d: usize, l: usize) -> Result<Network> {
    if d == 0 || l == 0 {
        return Err(invalid("identity network needs positive dimension and depth"));
    }
    if l == 1 {
        return Ok(Network::affine(Layer::identity(d)));
    }
    let mut layers = Vec::with_capacity(l);
    layers.push(Layer::from_triplets(
        2 * d,
        d,
        (0..d).flat_map(|i| [(i, i, 1.0), (d + i, i, -1.0)]),
        [],
    ));
    for _ in 0..l - 2 {
        layers.push(Layer::identity(2 * d));
    }
    layers.push(Layer::from_triplets(
        d,
        2 * d,
        (0..d).flat_map(|i| [(i, i, 1.0), (i, d + i, -1.0)]),
        [],
    ));
    Ok(Network::from_layers(d, layers))
}

/// Sparse concatenation: `L₁+L₂` layers realizing `R(first) ∘ R(second)`,
/// routing the intermediate value through `ϱ(z) − ϱ(−z)`.
pub fn sparse_concatenate(first: &Network, second: &Network) -> Result<Network> {
    check_chain(first, second)?;
    let (l1, l2) = (first.layers(), second.layers());
    let last = &l2[l2.len() - 1];
    let k = last.rows();
    let mut layers = Vec::with_capacity(l1.len() + l2.len());
    layers.extend_from_slice(&l2[..l2.len() - 1]);
    let e = last.entries();
    let dup = Layer::from_triplets(
        2 * k,
        last.cols(),
        e.iter()
            .map(|x| (x.row as usize, x.col as usize, x.value))
            .chain(e.iter().map(|x| (k + x.row as usize, x.col as usize, -x.value))),
        last.bias()
            .iter()
            .map(|&(i, v)| (i as usize, v))
            .chain(last.bias().iter().map(|&(i, v)| (k + i as usize, -v))),
    );
    layers.push(dup);
    let f = &l1[0];
    let split = Layer::from_triplets(
        f.rows(),
        2 * k,
        f.entries()
            .iter()
            .map(|x| (x.row as usize, x.col as usize, x.value))
            .chain(f.entries().iter().map(|x| (x.row as usize, k + x.col as usize, -x.value))),
        f.bias().iter().map(|&(i, v)| (i as usize, v)),
    );
    layers.push(split);
    layers.extend_from_slice(&l1[1..]);
    Ok(Network::from_layers(second.input_dim(), layers))
}

/// Pads `net` to `target` layers by `Φ^Id ⊙ net` (identity on the output
/// side); the realization is unchanged.
pub fn pad_depth(net: &Network, target: usize) -> Result<Network> {
    let l = net.depth();
    if target < l {
        return Err(invalid(format!("cannot pad a depth-{l} network to depth {target}")));
    }
    if target == l {
        return Ok(net.clone());
    }
    sparse_concatenate(&identity_network(net.output_dim(), target - l)?, net)
}

/// Parallelization of two networks on a shared input.
pub fn parallelize(first: &Network, second: &Network) -> Result<Network> {
    parallelize_many(&[first.clone(), second.clone()])
}

/// Parallelization of many networks on a shared input; outputs are
/// concatenated in order. Shallower networks are padded first. The result
/// equals the right-nested fold `P(Φ₁, P(Φ₂, …))`.
pub fn parallelize_many(nets: &[Network]) -> Result<Network> {
    let first = nets.first().ok_or_else(|| invalid("parallelization needs at least one network"))?;
    let d = first.input_dim();
    for (k, n) in nets.iter().enumerate() {
        if n.input_dim() != d {
            return Err(Error::Dimension {
                layer: 0,
                detail: format!("network {k} has input dimension {}, expected {d}", n.input_dim()),
            });
        }
    }
    if nets.len() == 1 {
        return Ok(first.clone());
    }
    let depth = nets.iter().map(Network::depth).max().unwrap();
    let padded: Vec<Network> = nets.iter().map(|n| pad_depth(n, depth)).collect::<Result<_>>()?;
    Ok(stack(&padded, true))
}

/// Parallelization with separate inputs: the input is the concatenation of
/// the nets' inputs and every layer is block diagonal.
pub fn parallelize_separate(nets: &[Network]) -> Result<Network> {
    if nets.is_empty() {
        return Err(invalid("parallelization needs at least one network"));
    }
    let depth = nets.iter().map(Network::depth).max().unwrap();
    let padded: Vec<Network> = nets.iter().map(|n| pad_depth(n, depth)).collect::<Result<_>>()?;
    Ok(stack(&padded, false))
}

/// Block-stacks equal-depth networks. With `shared_input` the first layers
/// are stacked vertically on a common input; otherwise every layer is block
/// diagonal.
fn stack(nets: &[Network], shared_input: bool) -> Network {
    let depth = nets[0].depth();
    let input_dim = if shared_input {
        nets[0].input_dim()
    } else {
        nets.iter().map(Network::input_dim).sum()
    };
    let mut layers = Vec::with_capacity(depth);
    for li in 0..depth {
        let rows: usize = nets.iter().map(|n| n.layers()[li].rows()).sum();
        let cols = if li == 0 && shared_input {
            input_dim
        } else {
            nets.iter().map(|n| n.layers()[li].cols()).sum()
        };
        let mut trip = Vec::new();
        let mut bias = Vec::new();
        let (mut r0, mut c0) = (0usize, 0usize);
        for n in nets {
            let l = &n.layers()[li];
            let coff = if li == 0 && shared_input { 0 } else { c0 };
            trip.extend(l.entries().iter().map(|e| (r0 + e.row as usize, coff + e.col as usize, e.value)));
            bias.extend(l.bias().iter().map(|&(i, v)| (r0 + i as usize, v)));
            r0 += l.rows();
            c0 += l.cols();
        }
        layers.push(Layer::from_triplets(rows, cols, trip, bias));
    }
    Network::from_layers(input_dim, layers)
}

/// Realizes `τ_B ∘ R(net)` componentwise with `τ_B(y) = sign(y)·min{|y|, ⌈B⌉}`;
/// adds two layers.
pub fn clamp_network(net: &Network, b: f64) -> Result<Network> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(invalid("clamp bound must be positive"));
    }
    let c = b.ceil();
    let k = net.output_dim();
    let l1 = Layer::from_triplets(
        2 * k,
        k,
        (0..k).flat_map(|i| [(2 * i, i, 1.0), (2 * i + 1, i, 1.0)]),
        (0..k).flat_map(|i| [(2 * i, c), (2 * i + 1, -c)]),
    );
    let l2 = Layer::from_triplets(
        k,
        2 * k,
        (0..k).flat_map(|i| [(i, 2 * i, 1.0), (i, 2 * i + 1, -1.0)]),
        (0..k).map(|i| (i, -c)),
    );
    let clamp = Network::from_layers(k, vec![l1, l2]);
    sparse_concatenate(&clamp, net)
}

/// The scalar clamp `τ_B` itself.
pub fn clamp_value(y: f64, b: f64) -> f64 {
    let c = b.ceil();
    y.clamp(-c, c)
}

/// One-layer network selecting the coordinates `idx` of `ℝ^d`.
pub fn projection(d: usize, idx: &[usize]) -> Network {
    Network::affine(Layer::from_triplets(idx.len(), d, idx.iter().enumerate().map(|(r, &c)| (r, c, 1.0)), []))
}

/// One-layer network `x ↦ Σ wᵢ xᵢ + c`.
pub fn linear_form(weights: &[f64], c: f64) -> Network {
    Network::affine(Layer::from_triplets(
        1,
        weights.len(),
        weights.iter().enumerate().map(|(j, &w)| (0, j, w)),
        [(0, c)],
    ))
}
