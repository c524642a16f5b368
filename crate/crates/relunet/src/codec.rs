//! Bit-exact encoding of scalar-output networks and the dead-neuron
//! simplification that bounds their neuron count.
//!
//! # Code layout
//!
//! All fields are unsigned and written most significant bit first. With
//! `T = 3dM`, `w = ⌈log₂T⌉`:
//!
//! | field                         | bits                 |
//! |-------------------------------|----------------------|
//! | `L − 1`                       | `⌈log₂(M+1)⌉`        |
//! | per layer: `rows − 1`         | `w`                  |
//! | per layer: `cols − 1`         | `w`                  |
//! | per layer: matrix entry count | `⌈log₂(T²+1)⌉`       |
//! | per entry: row, column, value | `w`, `w`, `K`        |
//! | per layer: bias entry count   | `⌈log₂(T+1)⌉`        |
//! | per bias entry: index, value  | `w`, `K`             |
//!
//! Entries appear in row-major order, bias entries by index. The result is
//! zero-padded to exactly `C·M·(K + ⌈log₂M⌉)` bits with
//! `C = 21 + 14⌈log₂(3d)⌉`.
//!
//! A value code is a sign bit followed by a `(K−1)`-bit magnitude `m`,
//! standing for `±(m + 1)·2^{−f}`; zero-extending the magnitude embeds the
//! `K`-bit values into the `(K+1)`-bit ones.
//!
//! # File format
//!
//! A `.nnc` file holds the magic bytes `NNC1`, then `M`, `K`, `d` and `f` as
//! big-endian `u32`, then the code bits packed most significant bit first
//! and zero-padded to a byte boundary.

use bitvec::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::network::{Entry, Layer, Network};

/// A fixed-point coding scheme for nonzero reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodingScheme {
    /// Bits per value `K ≥ 1`.
    pub bits: u32,
    /// The value grid is `2^{−frac_bits}ℤ`.
    pub frac_bits: u32,
}

impl CodingScheme {
    pub fn new(bits: u32, frac_bits: u32) -> Result<CodingScheme> {
        if bits == 0 || bits > 64 {
            return Err(invalid("bits per weight must be in 1..=64"));
        }
        if frac_bits > 1000 {
            return Err(invalid("fractional bits must be at most 1000"));
        }
        Ok(CodingScheme { bits, frac_bits })
    }

    fn step(&self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    /// Largest representable magnitude `2^{K−1}·2^{−f}`.
    pub fn max_value(&self) -> f64 {
        ((self.bits - 1) as f64).exp2() * self.step()
    }

    pub fn encode(&self, v: f64) -> Result<u64> {
        let unrepresentable = || Error::Unrepresentable { value: v, bits: self.bits, frac_bits: self.frac_bits };
        let a = v.abs() / self.step();
        if !(a >= 1.0) || a.fract() != 0.0 || a > ((self.bits - 1) as f64).exp2() {
            return Err(unrepresentable());
        }
        let m = a as u64 - 1;
        let sign = u64::from(v < 0.0);
        Ok((sign << (self.bits - 1)) | m)
    }

    pub fn decode(&self, code: u64) -> f64 {
        let half = 1u64 << (self.bits - 1);
        let m = code & (half - 1);
        let v = (m + 1) as f64 * self.step();
        if code & half != 0 {
            -v
        } else {
            v
        }
    }
}

/// Smallest `f` such that every value is a multiple of `2^{−f}`, or `None`
/// if some value is not dyadic within 1000 bits.
pub fn required_frac_bits(net: &Network) -> Option<u32> {
    let mut f = 0u32;
    for v in net.values() {
        while f <= 1000 && (v * (f as f64).exp2()).fract() != 0.0 {
            f += 1;
        }
        if f > 1000 {
            return None;
        }
    }
    Some(f)
}

/// Code parameters: weight budget `M`, bits per value `K`, input
/// dimension `d` and the scheme's fractional bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeParams {
    pub m: u32,
    pub k: u32,
    pub d: u32,
    pub frac_bits: u32,
}

impl CodeParams {
    pub fn scheme(&self) -> Result<CodingScheme> {
        CodingScheme::new(self.k, self.frac_bits)
    }

    fn check(&self) -> Result<()> {
        if self.m == 0 || self.d == 0 {
            return Err(invalid("M and d must be positive"));
        }
        self.scheme().map(|_| ())
    }

    fn t(&self) -> u64 {
        3 * self.d as u64 * self.m as u64
    }

    fn index_bits(&self) -> usize {
        ceil_log2(self.t())
    }
}

/// `⌈log₂ n⌉` for `n ≥ 1`.
fn ceil_log2(n: u64) -> usize {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros() as usize
    }
}

/// The layout constant `C(d) = 21 + 14⌈log₂(3d)⌉`.
pub fn length_constant(d: u32) -> u64 {
    21 + 14 * ceil_log2(3 * d as u64) as u64
}

/// Code length `C·M·(K + ⌈log₂M⌉)` in bits.
pub fn code_length(params: &CodeParams) -> usize {
    let m = params.m as u64;
    (length_constant(params.d) * m * (params.k as u64 + ceil_log2(m) as u64)) as usize
}

/// An encoded network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitCode {
    pub bits: BitVec<u8, Msb0>,
    pub params: CodeParams,
}

fn push(bits: &mut BitVec<u8, Msb0>, value: u64, width: usize) {
    for i in (0..width).rev() {
        bits.push((value >> i) & 1 == 1);
    }
}

/// Encodes a simplified scalar network (see [`simplify_network`]) with at
/// most `M` weights.
pub fn encode_network(net: &Network, params: CodeParams) -> Result<BitCode> {
    params.check()?;
    let scheme = params.scheme()?;
    let d = net.input_dim();
    if d != params.d as usize {
        return Err(invalid(format!("network input dimension {d} differs from d = {}", params.d)));
    }
    if net.output_dim() != 1 {
        return Err(invalid("only scalar-output networks can be encoded"));
    }
    let m = params.m as usize;
    if net.num_weights() > m {
        return Err(Error::Budget(format!("network has {} weights, budget M = {m}", net.num_weights())));
    }
    if net.depth() > m + 1 {
        return Err(Error::Budget(format!("network has {} layers, at most M + 1 = {} allowed", net.depth(), m + 1)));
    }
    if let Err(v) = net.validate() {
        return Err(Error::InvalidNetwork(crate::network::join_violations(&v)));
    }
    if simplify_network(net)? != *net {
        return Err(invalid("network has dead neurons; simplify it before encoding"));
    }
    let t = params.t();
    let w = params.index_bits();
    let mut bits = BitVec::<u8, Msb0>::new();
    push(&mut bits, net.depth() as u64 - 1, ceil_log2(m as u64 + 1));
    for l in net.layers() {
        if l.rows() as u64 > t || l.cols() as u64 > t {
            return Err(Error::Budget(format!("layer of size {}x{} exceeds T = {t}", l.rows(), l.cols())));
        }
        push(&mut bits, l.rows() as u64 - 1, w);
        push(&mut bits, l.cols() as u64 - 1, w);
        push(&mut bits, l.entries().len() as u64, ceil_log2(t * t + 1));
        for e in l.entries() {
            push(&mut bits, e.row as u64, w);
            push(&mut bits, e.col as u64, w);
            push(&mut bits, scheme.encode(e.value)?, params.k as usize);
        }
        push(&mut bits, l.bias().len() as u64, ceil_log2(t + 1));
        for &(i, v) in l.bias() {
            push(&mut bits, i as u64, w);
            push(&mut bits, scheme.encode(v)?, params.k as usize);
        }
    }
    let total = code_length(&params);
    if bits.len() > total {
        return Err(Error::Budget(format!("code needs {} bits, bound is {total}", bits.len())));
    }
    bits.resize(total, false);
    Ok(BitCode { bits, params })
}

struct Reader<'a> {
    bits: &'a BitSlice<u8, Msb0>,
    pos: usize,
}

impl Reader<'_> {
    fn read(&mut self, width: usize) -> Result<u64> {
        if self.pos + width > self.bits.len() {
            return Err(Error::Decode { offset: self.pos, detail: "unexpected end of code".into() });
        }
        let mut v = 0u64;
        for b in &self.bits[self.pos..self.pos + width] {
            v = (v << 1) | u64::from(*b);
        }
        self.pos += width;
        Ok(v)
    }

    fn fail<T>(&self, at: usize, detail: impl Into<String>) -> Result<T> {
        Err(Error::Decode { offset: at, detail: detail.into() })
    }
}

/// Inverse of [`encode_network`]. Streams that do not describe a
/// simplified network are rejected.
pub fn decode_network(code: &BitCode) -> Result<Network> {
    let params = code.params;
    params.check()?;
    let scheme = params.scheme()?;
    let total = code_length(&params);
    if code.bits.len() != total {
        return Err(Error::Decode { offset: code.bits.len(), detail: format!("code length must be {total}") });
    }
    let t = params.t();
    let w = params.index_bits();
    let k = params.k as usize;
    let mut r = Reader { bits: &code.bits, pos: 0 };
    let depth = r.read(ceil_log2(params.m as u64 + 1))? as usize + 1;
    let mut layers = Vec::with_capacity(depth);
    let mut prev = params.d as usize;
    for li in 0..depth {
        let at = r.pos;
        let rows = r.read(w)? as usize + 1;
        let cols = r.read(w)? as usize + 1;
        if cols != prev {
            return r.fail(at, format!("layer {} has {cols} columns, expected {prev}", li + 1));
        }
        let at = r.pos;
        let count = r.read(ceil_log2(t * t + 1))? as usize;
        if count > rows * cols {
            return r.fail(at, format!("{count} entries in a {rows}x{cols} matrix"));
        }
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let at = r.pos;
            let (row, col) = (r.read(w)? as usize, r.read(w)? as usize);
            if row >= rows || col >= cols {
                return r.fail(at, format!("entry ({row},{col}) outside {rows}x{cols}"));
            }
            if let Some(last) = entries.last() {
                let last: &Entry = last;
                if (last.row as usize, last.col as usize) >= (row, col) {
                    return r.fail(at, "matrix entries out of order");
                }
            }
            entries.push(Entry { row: row as u32, col: col as u32, value: scheme.decode(r.read(k)?) });
        }
        let at = r.pos;
        let nb = r.read(ceil_log2(t + 1))? as usize;
        if nb > rows {
            return r.fail(at, format!("{nb} bias entries for {rows} rows"));
        }
        let mut bias: Vec<(u32, f64)> = Vec::with_capacity(nb);
        for _ in 0..nb {
            let at = r.pos;
            let i = r.read(w)? as usize;
            if i >= rows {
                return r.fail(at, format!("bias index {i} outside {rows}"));
            }
            if bias.last().is_some_and(|&(j, _)| j as usize >= i) {
                return r.fail(at, "bias entries out of order");
            }
            bias.push((i as u32, scheme.decode(r.read(k)?)));
        }
        layers.push(Layer::from_raw(rows, cols, entries, bias));
        prev = rows;
    }
    if prev != 1 {
        return r.fail(r.pos, format!("output dimension {prev}, expected 1"));
    }
    if let Some(i) = code.bits[r.pos..].first_one() {
        return r.fail(r.pos + i, "nonzero padding");
    }
    let net = Network::new(params.d as usize, layers)?;
    // the encoder only emits simplified networks, so anything else is corrupt
    if simplify_network(&net)? != net {
        return r.fail(r.pos, "decoded network has dead neurons");
    }
    Ok(net)
}

const MAGIC: &[u8; 4] = b"NNC1";

/// Serializes a code to the `.nnc` byte format.
pub fn write_nnc(code: &BitCode) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    for v in [code.params.m, code.params.k, code.params.d, code.params.frac_bits] {
        out.extend(v.to_be_bytes());
    }
    out.extend(code.bits.as_raw_slice());
    out
}

/// Parses the `.nnc` byte format.
pub fn read_nnc(bytes: &[u8]) -> Result<BitCode> {
    if bytes.len() < 20 || &bytes[..4] != MAGIC {
        return Err(Error::Decode { offset: 0, detail: "missing NNC1 header".into() });
    }
    let field = |i: usize| u32::from_be_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let params = CodeParams { m: field(0), k: field(1), d: field(2), frac_bits: field(3) };
    params.check()?;
    let total = code_length(&params);
    let payload = &bytes[20..];
    if payload.len() != total.div_ceil(8) {
        return Err(Error::Decode {
            offset: 160 + payload.len() * 8,
            detail: format!("payload has {} bytes, expected {}", payload.len(), total.div_ceil(8)),
        });
    }
    let mut bits = BitVec::<u8, Msb0>::from_slice(payload);
    if let Some(i) = bits[total..].first_one() {
        return Err(Error::Decode { offset: 160 + total + i, detail: "nonzero byte padding".into() });
    }
    bits.truncate(total);
    Ok(BitCode { bits, params })
}

/// Removes dead neurons (rows of `[A_ℓ | b_ℓ]` that are entirely zero)
/// without changing the realization.
///
/// The deepest such row is handled first. A dead neuron in a layer with
/// other neurons is deleted together with its column in the next layer. A
/// layer consisting of one dead neuron makes everything before it constant
/// zero, so those layers collapse into `((0_{1×d}, 0))`. The result
/// satisfies `N ≤ M + d + 1`.
pub fn simplify_network(net: &Network) -> Result<Network> {
    if net.output_dim() != 1 {
        return Err(invalid("simplification needs a scalar-output network"));
    }
    let d = net.input_dim();
    let mut layers: Vec<Layer> = net.layers().to_vec();
    loop {
        let depth = layers.len();
        let mut found = None;
        for li in (0..depth).rev() {
            let l = &layers[li];
            // a single dead neuron in the first layer is already collapsed
            if l.rows() == 1 && li == 0 {
                continue;
            }
            if let Some(i) = dead_row(l) {
                found = Some((li, i));
                break;
            }
        }
        let Some((li, i)) = found else { break };
        if layers[li].rows() > 1 {
            layers[li] = remove_row(&layers[li], i);
            layers[li + 1] = remove_col(&layers[li + 1], i);
        } else {
            let mut rest = vec![Layer::zero(1, d)];
            rest.extend_from_slice(&layers[li + 1..]);
            layers = rest;
        }
    }
    Ok(Network::from_layers(d, layers))
}

fn dead_row(l: &Layer) -> Option<usize> {
    let mut live = vec![false; l.rows()];
    for e in l.entries() {
        live[e.row as usize] = true;
    }
    for &(i, _) in l.bias() {
        live[i as usize] = true;
    }
    live.iter().position(|x| !x)
}

fn remove_row(l: &Layer, i: usize) -> Layer {
    let shift = |r: u32| if r as usize > i { r - 1 } else { r };
    let entries = l.entries().iter().map(|e| Entry { row: shift(e.row), ..*e }).collect();
    let bias = l.bias().iter().map(|&(r, v)| (shift(r), v)).collect();
    Layer::from_raw(l.rows() - 1, l.cols(), entries, bias)
}

fn remove_col(l: &Layer, j: usize) -> Layer {
    let entries = l
        .entries()
        .iter()
        .filter(|e| e.col as usize != j)
        .map(|e| Entry { col: if e.col as usize > j { e.col - 1 } else { e.col }, ..*e })
        .collect();
    Layer::from_raw(l.rows(), l.cols() - 1, entries, l.bias().to_vec())
}
