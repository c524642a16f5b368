//! Sparse ReLU networks: storage, realization and complexity counts.
//!
//! A network is a sequence of affine layers `x ↦ A x + b`. The ReLU
//! `ϱ(t) = max{0, t}` is applied componentwise after every layer except the
//! last. Matrices and biases hold only their nonzero entries, sorted by
//! position, so the number of weights is a length query.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One stored matrix entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub row: u32,
    pub col: u32,
    pub value: f64,
}

/// An affine layer with a sparse `rows × cols` matrix and a sparse bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    rows: usize,
    cols: usize,
    entries: Vec<Entry>,
    bias: Vec<(u32, f64)>,
}

impl Layer {
    /// Builds a normalized layer: duplicates are summed, exact zeros dropped.
    ///
    /// Panics if an index is out of range; constructors inside the crate
    /// only produce in-range indices.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
        bias: impl IntoIterator<Item = (usize, f64)>,
    ) -> Layer {
        let mut e: Vec<Entry> = entries
            .into_iter()
            .map(|(i, j, v)| {
                assert!(i < rows && j < cols, "entry ({i},{j}) outside {rows}x{cols}");
                Entry { row: i as u32, col: j as u32, value: v }
            })
            .collect();
        e.sort_by_key(|x| (x.row, x.col));
        let mut entries: Vec<Entry> = Vec::with_capacity(e.len());
        for x in e {
            match entries.last_mut() {
                Some(last) if last.row == x.row && last.col == x.col => last.value += x.value,
                _ => entries.push(x),
            }
        }
        entries.retain(|x| x.value != 0.0);

        let mut b: Vec<(u32, f64)> = bias
            .into_iter()
            .map(|(i, v)| {
                assert!(i < rows, "bias index {i} outside {rows}");
                (i as u32, v)
            })
            .collect();
        b.sort_by_key(|x| x.0);
        let mut bias: Vec<(u32, f64)> = Vec::with_capacity(b.len());
        for x in b {
            match bias.last_mut() {
                Some(last) if last.0 == x.0 => last.1 += x.1,
                _ => bias.push(x),
            }
        }
        bias.retain(|x| x.1 != 0.0);
        Layer { rows, cols, entries, bias }
    }

    /// Builds a layer from already sorted entries without normalizing.
    /// The result may violate invariants; use [`Network::validate`].
    pub fn from_raw(rows: usize, cols: usize, entries: Vec<Entry>, bias: Vec<(u32, f64)>) -> Layer {
        Layer { rows, cols, entries, bias }
    }

    /// The all-zero `rows × cols` layer.
    pub fn zero(rows: usize, cols: usize) -> Layer {
        Layer { rows, cols, entries: Vec::new(), bias: Vec::new() }
    }

    /// `(Id, 0)` on `ℝ^n`.
    pub fn identity(n: usize) -> Layer {
        Layer::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)), [])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn bias(&self) -> &[(u32, f64)] {
        &self.bias
    }

    /// Nonzero count of the matrix plus nonzero count of the bias.
    pub fn num_weights(&self) -> usize {
        self.entries.len() + self.bias.len()
    }

    /// Bias value at row `i` (zero if not stored).
    pub fn bias_at(&self, i: usize) -> f64 {
        match self.bias.binary_search_by_key(&(i as u32), |b| b.0) {
            Ok(k) => self.bias[k].1,
            Err(_) => 0.0,
        }
    }

    /// Applies `f` to every stored value, dropping results that are zero.
    pub fn map_values(&self, mut f: impl FnMut(f64) -> f64) -> Layer {
        let mut entries = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let v = f(e.value);
            if v != 0.0 {
                entries.push(Entry { value: v, ..*e });
            }
        }
        let mut bias = Vec::with_capacity(self.bias.len());
        for &(i, b) in &self.bias {
            let v = f(b);
            if v != 0.0 {
                bias.push((i, v));
            }
        }
        Layer { rows: self.rows, cols: self.cols, entries, bias }
    }

    /// Index ranges of the entries of each row (entries are row-sorted).
    pub(crate) fn row_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = vec![0..0; self.rows];
        let mut k = 0;
        while k < self.entries.len() {
            let r = self.entries[k].row as usize;
            let start = k;
            while k < self.entries.len() && self.entries[k].row as usize == r {
                k += 1;
            }
            out[r] = start..k;
        }
        out
    }
}

/// A structural invariant violation reported by [`Network::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// 1-based layer index; 0 for network-level problems.
    pub layer: usize,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "layer {}: {}", self.layer, self.message)
    }
}

/// A ReLU network `((A₁,b₁),…,(A_L,b_L))` with input dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
}

/// Number of points evaluated together in [`Network::realize_batch`].
const BATCH: usize = 64;

impl Network {
    /// Validating constructor.
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Network> {
        let net = Network { input_dim, layers };
        match net.validate() {
            Ok(()) => Ok(net),
            Err(v) => Err(Error::InvalidNetwork(join_violations(&v))),
        }
    }

    /// Constructor for layers that are known to chain correctly.
    pub(crate) fn from_layers(input_dim: usize, layers: Vec<Layer>) -> Network {
        debug_assert!(Network { input_dim, layers: layers.clone() }.validate().is_ok());
        Network { input_dim, layers }
    }

    /// The single-layer network `((0_{k×d}, 0))`.
    pub fn zero(input_dim: usize, output_dim: usize) -> Network {
        Network { input_dim, layers: vec![Layer::zero(output_dim, input_dim)] }
    }

    /// A single affine layer as a network.
    pub fn affine(layer: Layer) -> Network {
        Network { input_dim: layer.cols, layers: vec![layer] }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.rows)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    /// Number of layers `L(Φ)`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Number of nonzero weights `M(Φ)`, biases included.
    pub fn num_weights(&self) -> usize {
        self.layers.iter().map(Layer::num_weights).sum()
    }

    /// Number of neurons `N(Φ) = d + Σ N_ℓ`.
    pub fn num_neurons(&self) -> usize {
        self.input_dim + self.layers.iter().map(|l| l.rows).sum::<usize>()
    }

    /// Every stored value (matrices, then biases, layer by layer).
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.entries.iter().map(|e| e.value).chain(l.bias.iter().map(|b| b.1)))
    }

    /// Largest absolute stored value (0 for the zero network).
    pub fn max_abs_weight(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Checks every structural invariant and lists all violations.
    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        if self.input_dim == 0 {
            out.push(Violation { layer: 0, message: "input dimension must be positive".into() });
        }
        if self.layers.is_empty() {
            out.push(Violation { layer: 0, message: "network has no layers".into() });
        }
        let mut prev = self.input_dim;
        for (k, l) in self.layers.iter().enumerate() {
            let layer = k + 1;
            let mut push = |m: String| out.push(Violation { layer, message: m });
            if l.rows == 0 {
                push("layer has zero rows".into());
            }
            if l.cols != prev {
                push(format!("matrix has {} columns, expected {}", l.cols, prev));
            }
            let mut last: Option<(u32, u32)> = None;
            for e in &l.entries {
                if e.row as usize >= l.rows || e.col as usize >= l.cols {
                    push(format!("entry ({},{}) outside {}x{}", e.row, e.col, l.rows, l.cols));
                }
                if e.value == 0.0 {
                    push(format!("explicit zero stored at ({},{})", e.row, e.col));
                }
                if !e.value.is_finite() {
                    push(format!("non-finite value at ({},{})", e.row, e.col));
                }
                if let Some(p) = last {
                    if p >= (e.row, e.col) {
                        push(format!("entries not strictly sorted at ({},{})", e.row, e.col));
                    }
                }
                last = Some((e.row, e.col));
            }
            let mut last_b: Option<u32> = None;
            for &(i, v) in &l.bias {
                if i as usize >= l.rows {
                    push(format!("bias index {} outside length {}", i, l.rows));
                }
                if v == 0.0 {
                    push(format!("explicit zero stored in bias at {i}"));
                }
                if !v.is_finite() {
                    push(format!("non-finite bias at {i}"));
                }
                if let Some(p) = last_b {
                    if p >= i {
                        push(format!("bias entries not strictly sorted at {i}"));
                    }
                }
                last_b = Some(i);
            }
            prev = l.rows;
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    /// Evaluates the realization at one point.
    pub fn realize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension {
                layer: 0,
                detail: format!("point has length {}, expected {}", x.len(), self.input_dim),
            });
        }
        self.realize_batch(x)
    }

    /// Evaluates the realization at many points stored row-major
    /// (`points.len()` a multiple of the input dimension); returns outputs
    /// row-major.
    pub fn realize_batch(&self, points: &[f64]) -> Result<Vec<f64>> {
        let d = self.input_dim;
        if d == 0 || points.len() % d != 0 {
            return Err(Error::Dimension {
                layer: 0,
                detail: format!("input of length {} does not match input dimension {}", points.len(), d),
            });
        }
        let mut prev = d;
        for (k, l) in self.layers.iter().enumerate() {
            if l.cols != prev {
                return Err(Error::Dimension {
                    layer: k + 1,
                    detail: format!("matrix has {} columns, expected {}", l.cols, prev),
                });
            }
            prev = l.rows;
        }
        let n = points.len() / d;
        let k = self.output_dim();
        let mut out = vec![0.0; n * k];
        for start in (0..n).step_by(BATCH) {
            let w = BATCH.min(n - start);
            self.eval_chunk(&points[start * d..(start + w) * d], w, &mut out[start * k..(start + w) * k]);
        }
        Ok(out)
    }

    fn eval_chunk(&self, pts: &[f64], w: usize, out: &mut [f64]) {
        let d = self.input_dim;
        // unit-major buffer: value of unit u at point q is cur[u * w + q]
        let mut cur = vec![0.0; d * w];
        for q in 0..w {
            for u in 0..d {
                cur[u * w + q] = pts[q * d + u];
            }
        }
        let last = self.layers.len() - 1;
        let mut next = Vec::new();
        let mut active = Vec::new();
        for (li, l) in self.layers.iter().enumerate() {
            // units that vanish on the whole chunk contribute nothing
            active.clear();
            active.extend(cur.chunks_exact(w).map(|c| c.iter().any(|&v| v != 0.0)));
            next.clear();
            next.resize(l.rows * w, 0.0);
            for &(i, b) in &l.bias {
                next[i as usize * w..(i as usize + 1) * w].iter_mut().for_each(|t| *t = b);
            }
            for e in &l.entries {
                if !active[e.col as usize] {
                    continue;
                }
                let src = &cur[e.col as usize * w..(e.col as usize + 1) * w];
                let dst = &mut next[e.row as usize * w..(e.row as usize + 1) * w];
                let v = e.value;
                for (t, s) in dst.iter_mut().zip(src) {
                    *t += v * s;
                }
            }
            if li != last {
                next.iter_mut().for_each(|t| *t = t.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        let k = self.output_dim();
        for q in 0..w {
            for u in 0..k {
                out[q * k + u] = cur[u * w + q];
            }
        }
    }

    /// Evaluates a scalar-output network at one point.
    pub fn eval_scalar(&self, x: &[f64]) -> Result<f64> {
        if self.output_dim() != 1 {
            return Err(invalid_output(self.output_dim()));
        }
        Ok(self.realize(x)?[0])
    }
}

fn invalid_output(k: usize) -> Error {
    Error::InvalidArgument(format!("expected scalar output, network has output dimension {k}"))
}

pub(crate) fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Serialize, Deserialize)]
struct LayerJson {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
    bias: Vec<(usize, f64)>,
}

#[derive(Serialize, Deserialize)]
struct NetworkJson {
    input_dim: usize,
    layers: Vec<LayerJson>,
}

impl Network {
    /// Serializes to the JSON interchange format.
    pub fn to_json(&self) -> String {
        let j = NetworkJson {
            input_dim: self.input_dim,
            layers: self
                .layers
                .iter()
                .map(|l| LayerJson {
                    rows: l.rows,
                    cols: l.cols,
                    entries: l.entries.iter().map(|e| (e.row as usize, e.col as usize, e.value)).collect(),
                    bias: l.bias.iter().map(|&(i, v)| (i as usize, v)).collect(),
                })
                .collect(),
        };
        serde_json::to_string(&j).expect("network serialization cannot fail")
    }

    /// Parses the JSON interchange format and validates the result.
    pub fn from_json(s: &str) -> Result<Network> {
        let j: NetworkJson = serde_json::from_str(s)?;
        let layers = j
            .layers
            .into_iter()
            .map(|l| {
                let entries = l
                    .entries
                    .into_iter()
                    .map(|(i, c, v)| Entry { row: to_u32(i), col: to_u32(c), value: v })
                    .collect();
                let bias = l.bias.into_iter().map(|(i, v)| (to_u32(i), v)).collect();
                Layer::from_raw(l.rows, l.cols, entries, bias)
            })
            .collect();
        Network::new(j.input_dim, layers)
    }
}

fn to_u32(i: usize) -> u32 {
    u32::try_from(i).unwrap_or(u32::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relu_net() -> Network {
        Network::new(
            1,
            vec![Layer::from_triplets(1, 1, [(0, 0, 1.0)], []), Layer::from_triplets(1, 1, [(0, 0, 1.0)], [])],
        )
        .unwrap()
    }

    #[test]
    fn single_affine_layer_has_no_relu() {
        let net = Network::affine(Layer::identity(2));
        assert_eq!(net.realize(&[3.0, -4.0]).unwrap(), vec![3.0, -4.0]);
        assert_eq!(net.num_neurons(), 4);
    }

    #[test]
    fn relu_two_layers() {
        let net = relu_net();
        assert_eq!(net.eval_scalar(&[-3.0]).unwrap(), 0.0);
        assert_eq!(net.eval_scalar(&[2.0]).unwrap(), 2.0);
    }

    #[test]
    fn counts() {
        let net = Network::zero(2, 1);
        assert_eq!(net.num_weights(), 0);
        assert_eq!(net.num_neurons(), 3);
        assert_eq!(net.depth(), 1);
    }

    #[test]
    fn normalization_sums_duplicates_and_drops_zeros() {
        let l = Layer::from_triplets(2, 2, [(0, 0, 1.0), (0, 0, -1.0), (1, 1, 2.0), (1, 0, 0.0)], [(0, 0.0)]);
        assert_eq!(l.num_weights(), 1);
        assert_eq!(l.entries()[0], Entry { row: 1, col: 1, value: 2.0 });
    }

    #[test]
    fn validate_reports_wrong_columns_at_layer_two() {
        let net = Network {
            input_dim: 2,
            layers: vec![Layer::zero(3, 2), Layer::zero(1, 2)],
        };
        let v = net.validate().unwrap_err();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].layer, 2);
    }

    #[test]
    fn validate_reports_explicit_zero() {
        let l = Layer::from_raw(1, 1, vec![Entry { row: 0, col: 0, value: 0.0 }], vec![]);
        let v = Network { input_dim: 1, layers: vec![l] }.validate().unwrap_err();
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("zero"));
    }

    #[test]
    fn realize_rejects_wrong_input_length() {
        let net = relu_net();
        assert!(matches!(net.realize(&[1.0, 2.0]), Err(Error::Dimension { layer: 0, .. })));
        let net2 = Network::affine(Layer::identity(2));
        assert!(matches!(net2.realize(&[1.0, 2.0, 3.0]), Err(Error::Dimension { layer: 0, .. })));
    }

    #[test]
    fn json_roundtrip() {
        let net = relu_net();
        let back = Network::from_json(&net.to_json()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn batch_matches_pointwise() {
        let l1 = Layer::from_triplets(3, 2, [(0, 0, 1.5), (1, 1, -2.0), (2, 0, 0.5), (2, 1, 0.25)], [(1, 0.3)]);
        let l2 = Layer::from_triplets(1, 3, [(0, 0, 1.0), (0, 1, -1.0), (0, 2, 2.0)], [(0, -0.1)]);
        let net = Network::new(2, vec![l1, l2]).unwrap();
        let pts: Vec<f64> = (0..300).map(|i| ((i * 37 % 101) as f64) / 50.0 - 1.0).collect();
        let batch = net.realize_batch(&pts).unwrap();
        for q in 0..150 {
            assert_eq!(batch[q], net.realize(&pts[2 * q..2 * q + 2]).unwrap()[0]);
        }
    }
}
