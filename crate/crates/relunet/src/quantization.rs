//! The `(s, ε)` weight grid `[−ε^{−s}, ε^{−s}] ∩ 2^{−s⌈log₂(1/ε)⌉}ℤ`.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::network::Network;

/// Grid parameters `(s, ε)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationSpec {
    pub s: u32,
    pub eps: f64,
}

impl QuantizationSpec {
    pub fn new(s: u32, eps: f64) -> Result<Self> {
        if s == 0 {
            return Err(invalid("s must be a positive integer"));
        }
        if !(eps > 0.0 && eps < 0.5) {
            return Err(invalid("eps must be in (0, 0.5)"));
        }
        let spec = QuantizationSpec { s, eps };
        if spec.step_exponent() > 1022 {
            return Err(invalid("grid step underflows double precision"));
        }
        Ok(spec)
    }

    /// `⌈log₂(1/ε)⌉`.
    pub fn log_inv_eps(&self) -> u32 {
        ceil_log2_inv(self.eps)
    }

    /// `s⌈log₂(1/ε)⌉`, so that the step is `2^{−step_exponent}`.
    pub fn step_exponent(&self) -> u32 {
        self.s * self.log_inv_eps()
    }

    pub fn step(&self) -> f64 {
        (-(self.step_exponent() as f64)).exp2()
    }

    /// `ε^{−s}`.
    pub fn range(&self) -> f64 {
        self.eps.powi(-(self.s as i32))
    }

    /// Largest grid point not exceeding the range bound.
    fn max_grid(&self) -> f64 {
        let step = self.step();
        (self.range() / step).floor() * step
    }
}

/// `⌈log₂(1/ε)⌉` computed exactly for powers of two.
pub fn ceil_log2_inv(eps: f64) -> u32 {
    let t = (1.0 / eps).log2();
    let r = t.round();
    // 1/ε is exact for dyadic ε; guard against log2 rounding just above an integer
    if (r - t).abs() < 1e-12 && (r as i32 >= 0) && (-r).exp2() == eps {
        r as u32
    } else {
        t.ceil().max(0.0) as u32
    }
}

/// Nearest grid point (ties toward zero), then clamped into the range.
pub fn quantize_value(x: f64, spec: &QuantizationSpec) -> f64 {
    let e = spec.step_exponent() as i32;
    let y = scale2(x.abs(), e);
    let mut n = y.floor();
    if y - n > 0.5 {
        n += 1.0;
    }
    let v = scale2(n, -e).min(spec.max_grid());
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// Exact membership in the clamped grid.
pub fn on_grid(v: f64, spec: &QuantizationSpec) -> bool {
    if !v.is_finite() || v.abs() > spec.range() {
        return false;
    }
    let y = scale2(v, spec.step_exponent() as i32);
    y.is_finite() && y.fract() == 0.0
}

/// Whether every stored weight lies on the grid.
pub fn is_quantized(net: &Network, spec: &QuantizationSpec) -> bool {
    net.values().all(|v| on_grid(v, spec))
}

/// Replaces every weight by its quantized value; zeros produced are dropped.
pub fn quantize_network(net: &Network, spec: &QuantizationSpec) -> Network {
    let layers = net.layers().iter().map(|l| l.map_values(|v| quantize_value(v, spec))).collect();
    Network::from_layers(net.input_dim(), layers)
}

/// `s̃ = ⌈qs + s·log₂C⌉ + s`: `(s, ε^q/C)`-quantized weights are
/// `(s̃, ε)`-quantized.
pub fn convert_quantization(s: u32, q: f64, c: f64) -> u32 {
    let s_f = s as f64;
    // tolerate log₂ rounding for exact powers of two
    let raw = q * s_f + s_f * c.log2();
    let r = raw.round();
    let up = if (raw - r).abs() < 1e-9 { r } else { raw.ceil() };
    up as u32 + s
}

/// Smallest `s ≤ max_s` for which the network is `(s, ε)`-quantized.
pub fn required_s(net: &Network, eps: f64, max_s: u32) -> Option<u32> {
    (1..=max_s).find(|&s| match QuantizationSpec::new(s, eps) {
        Ok(spec) => is_quantized(net, &spec),
        Err(_) => false,
    })
}

/// Complexity summary of a constructed network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NetworkReport {
    pub depth: usize,
    #[serde(rename = "M")]
    pub weights: usize,
    #[serde(rename = "N")]
    pub neurons: usize,
    /// Smallest `s ≤ 64` for which the weights are `(s, ε)`-quantized.
    pub s: Option<u32>,
}

pub fn report(net: &Network, eps: f64) -> NetworkReport {
    NetworkReport {
        depth: net.depth(),
        weights: net.num_weights(),
        neurons: net.num_neurons(),
        s: required_s(net, eps, 64),
    }
}

/// `x · 2^e` without intermediate overflow for moderate `e`.
fn scale2(x: f64, e: i32) -> f64 {
    if e.abs() <= 1000 {
        x * (e as f64).exp2()
    } else {
        let h = e / 2;
        x * (h as f64).exp2() * ((e - h) as f64).exp2()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        let spec = QuantizationSpec::new(1, 0.25).unwrap();
        assert_eq!(spec.step(), 0.25);
        assert_eq!(quantize_value(0.3, &spec), 0.25);
        assert_eq!(quantize_value(100.0, &spec), 4.0);
        assert_eq!(quantize_value(-100.0, &spec), -4.0);
        assert_eq!(quantize_value(0.75, &spec), 0.75);
        // tie toward zero
        assert_eq!(quantize_value(0.375, &spec), 0.25);
        assert_eq!(quantize_value(-0.375, &spec), -0.25);
    }

    #[test]
    fn non_dyadic_weight_is_off_grid() {
        let spec = QuantizationSpec::new(3, 0.125).unwrap();
        assert!(!on_grid(1.0 / 3.0, &spec));
        assert!(on_grid(0.5, &spec));
    }

    #[test]
    fn convert_examples() {
        assert_eq!(convert_quantization(3, 1.0, 1.0), 6);
        assert_eq!(convert_quantization(2, 2.0, 4.0), 10);
        assert!(convert_quantization(2, 1.5, 3.0) <= convert_quantization(2, 2.5, 3.0));
    }

    #[test]
    fn ceil_log2() {
        assert_eq!(ceil_log2_inv(0.25), 2);
        assert_eq!(ceil_log2_inv(0.2), 3);
        assert_eq!(ceil_log2_inv(2f64.powi(-40)), 40);
    }

    #[test]
    fn spec_validation() {
        assert!(QuantizationSpec::new(0, 0.1).is_err());
        assert!(QuantizationSpec::new(1, 0.5).is_err());
    }
}
