use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relunet::analysis::{network_lp_error, Method};
use relunet::approximators::{
    approximate_composite, approximate_horizon, approximate_indicator, approximate_piecewise_smooth,
    approximate_smooth, taylor_coefficients,
};
use relunet::multiindex::{all_up_to, order, power};
use relunet::quantization::report;
use relunet::targets::{CompositeTarget, FeatureMap, HorizonTarget, PiecewiseTarget, SmoothTarget};
use relunet::Network;

fn l2(net: &Network, f: impl Fn(&[f64]) -> f64 + Sync, res: usize) -> f64 {
    network_lp_error(net, &f, 2.0, Method::Grid, res, 0).unwrap().value
}

fn scaled_sine(d: usize) -> SmoothTarget {
    let pi = std::f64::consts::PI;
    SmoothTarget::sine(d, 0, 1.0 / (pi * pi), pi, 0.0, 2.0).unwrap()
}

fn half_cube(r: u32) -> PiecewiseTarget {
    let gamma = SmoothTarget::constant(1, 0.0, 2.0).unwrap();
    PiecewiseTarget::uniform(r, HorizonTarget::graph(gamma), None).unwrap()
}

fn constant_region(c: f64) -> PiecewiseTarget {
    let gamma = SmoothTarget::constant(1, c, 2.0).unwrap();
    PiecewiseTarget::uniform(0, HorizonTarget::graph(gamma), None).unwrap()
}

fn sine_horizon() -> HorizonTarget {
    let tau = 2.0 * std::f64::consts::PI;
    HorizonTarget::graph(SmoothTarget::sine(1, 0, 0.2, tau, 0.0, 2.0).unwrap())
}

#[test]
fn zero_function_is_exact() {
    let f = SmoothTarget::constant(2, 0.0, 2.0).unwrap();
    let net = approximate_smooth(&f, 0.1, 2.0).unwrap();
    assert_eq!(l2(&net, |_| 0.0, 64), 0.0);
}

#[test]
fn identity_with_loose_bound() {
    let f = SmoothTarget::polynomial(1, vec![(vec![1], 1.0)], 2.0, 2.0).unwrap();
    for eps in [0.1, 0.05] {
        let net = approximate_smooth(&f, eps, 2.0).unwrap();
        assert!(l2(&net, |x| x[0], 4096) <= eps);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            let v = net.eval_scalar(&[rng.gen_range(-3.0..3.0)]).unwrap();
            assert!(v.abs() <= 2.0);
        }
    }
}

#[test]
fn smooth_depth_ignores_accuracy() {
    let f = scaled_sine(1);
    let depths: Vec<usize> = (2..=8).map(|k| approximate_smooth(&f, (-(k as f64)).exp2(), 2.0).unwrap().depth()).collect();
    assert!(depths.windows(2).all(|w| w[0] == w[1]), "{depths:?}");
    let a = approximate_smooth(&f, 0.1, 2.0).unwrap().depth();
    let b = approximate_smooth(&f, 0.001, 2.0).unwrap().depth();
    assert_eq!(a, b);
    assert!(a as f64 <= 11.0 + 2.0 * (11.0 + 2.0));
}

#[test]
fn smooth_weights_are_quantized() {
    let f = scaled_sine(1);
    let s: Vec<Option<u32>> = (3..=7)
        .map(|k| {
            let eps = (-(k as f64)).exp2();
            report(&approximate_smooth(&f, eps, 2.0).unwrap(), eps).s
        })
        .collect();
    assert!(s.iter().all(Option::is_some), "{s:?}");
}

#[test]
fn taylor_remainder_bound() {
    let f = scaled_sine(2);
    let n = 1;
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..200 {
        let x0: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.45..0.45)).collect();
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let c = taylor_coefficients(&f, &x0, n).unwrap();
        let h: Vec<f64> = x.iter().zip(&x0).map(|(a, b)| a - b).collect();
        let poly: f64 = c.iter().map(|(a, v)| v * power(&h, a)).sum();
        let dist = h.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bound = 2f64.powi(n as i32) * f.bound * dist.powf(f.beta);
        assert!((f.eval(&x) - poly).abs() <= bound + 1e-15);
    }
}

#[test]
fn derivative_oracle_matches_finite_differences() {
    let f = SmoothTarget::sine(2, 1, 0.7, 3.0, 0.4, 3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let h = 1e-5;
    for _ in 0..50 {
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.4..0.4)).collect();
        for a in all_up_to(2, 1).into_iter().filter(|a| order(a) == 1) {
            let j = a.iter().position(|&v| v == 1).unwrap();
            let mut up = x.clone();
            let mut dn = x.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (f.eval(&up) - f.eval(&dn)) / (2.0 * h);
            assert!((f.derivative(&a, &x).unwrap() - fd).abs() < 1e-6);
        }
    }
}

#[test]
fn horizon_regimes_and_error() {
    let flat = HorizonTarget::graph(SmoothTarget::constant(1, 0.0, 2.0).unwrap());
    let net = approximate_horizon(&flat, 0.1, 2.0).unwrap();
    for y in [-0.4, 0.0, 0.35] {
        assert_eq!(net.eval_scalar(&[0.3, y]).unwrap(), 1.0);
        assert_eq!(net.eval_scalar(&[-0.3, y]).unwrap(), 0.0);
    }
    let h = sine_horizon();
    let net = approximate_horizon(&h, 0.1, 2.0).unwrap();
    assert!(l2(&net, |x| h.eval(x), 128) < 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for _ in 0..10_000 {
        let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let v = net.eval_scalar(&x).unwrap();
        assert!((0.0..=1.0).contains(&v), "{v} at {x:?}");
    }
    assert!(approximate_horizon(&h, 0.5, 2.0).is_err());
}

#[test]
fn permuted_horizon() {
    let gamma = SmoothTarget::constant(1, 0.1, 2.0).unwrap();
    let h = HorizonTarget::new(gamma, vec![1, 0]).unwrap();
    let net = approximate_horizon(&h, 0.1, 1.0).unwrap();
    assert_eq!(net.eval_scalar(&[0.3, 0.2]).unwrap(), 1.0);
    assert_eq!(net.eval_scalar(&[0.3, -0.3]).unwrap(), 0.0);
    assert!(network_lp_error(&net, &|x| h.eval(x), 1.0, Method::Grid, 128, 0).unwrap().value < 0.1);
}

#[test]
fn half_cube_indicator() {
    let k = half_cube(1);
    let net = approximate_indicator(&k, 0.1, 2.0).unwrap();
    assert!(l2(&net, |x| k.eval(x), 64) <= 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    for _ in 0..2000 {
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        assert!((0.0..=1.0).contains(&net.eval_scalar(&x).unwrap()));
    }
}

#[test]
fn full_and_empty_cubes() {
    let full = approximate_indicator(&constant_region(0.5), 0.1, 2.0).unwrap();
    assert_eq!(full.eval_scalar(&[0.1, -0.2]).unwrap(), 1.0);
    assert!(l2(&full, |_| 1.0, 64) <= 0.1);
    let empty = approximate_indicator(&constant_region(-0.5), 0.1, 2.0).unwrap();
    assert!(l2(&empty, |_| 0.0, 64) <= 0.1);
}

#[test]
fn piecewise_with_unit_factor_matches_indicator() {
    let one = SmoothTarget::constant(2, 1.0, 2.0).unwrap();
    let mut k = half_cube(0);
    let ind = approximate_indicator(&k, 0.1, 2.0).unwrap();
    k.smooth_factor = Some(one);
    let net = approximate_piecewise_smooth(&k, 0.1, 2.0).unwrap();
    let e = l2(&net, |x| k.eval(x), 64);
    assert!(e <= 0.1, "{e}");
    assert!(l2(&ind, |x| k.indicator(x), 64) <= 0.1);
}

#[test]
fn piecewise_on_full_cube_is_smooth_approximation() {
    let mut k = constant_region(0.5);
    let g = scaled_sine(2);
    k.smooth_factor = Some(g.clone());
    let net = approximate_piecewise_smooth(&k, 0.1, 2.0).unwrap();
    assert!(l2(&net, |x| g.eval(x), 64) <= 0.1);
}

#[test]
fn piecewise_linear_factor_on_half_cube() {
    let g = SmoothTarget::polynomial(2, vec![(vec![1, 0], 1.0), (vec![0, 0], 0.3)], 2.0, 1.0).unwrap();
    let mut k = half_cube(0);
    k.smooth_factor = Some(g);
    let net = approximate_piecewise_smooth(&k, 0.1, 2.0).unwrap();
    assert!(l2(&net, |x| k.eval(x), 64) <= 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    for _ in 0..1000 {
        let x = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
        assert!(net.eval_scalar(&x).unwrap().abs() <= 1.0);
    }
    k.smooth_factor = None;
    assert!(approximate_piecewise_smooth(&k, 0.1, 2.0).is_err());
}

#[test]
fn composite_with_projection() {
    let g = scaled_sine(2);
    let mut outer = constant_region(0.5);
    outer.smooth_factor = Some(g.clone());
    let f = CompositeTarget::new(outer, FeatureMap::projection(3, &[2, 0]), 1.0).unwrap();
    let net = approximate_composite(&f, 0.2, 2.0).unwrap();
    assert_eq!(net.input_dim(), 3);
    let e = l2(&net, |x| f.eval(x), 12);
    assert!(e <= 0.1, "{e}");
}

#[test]
fn composite_with_smooth_feature_map() {
    let mut outer = constant_region(0.5);
    outer.smooth_factor = Some(scaled_sine(2));
    let coords = vec![
        SmoothTarget::sine(2, 0, 0.4, 1.0, 0.0, 2.0).unwrap(),
        SmoothTarget::sine(2, 1, 0.4, 1.0, 0.0, 2.0).unwrap(),
    ];
    let f = CompositeTarget::new(outer, FeatureMap::Smooth(coords), 1.0).unwrap();
    match approximate_composite(&f, 0.2, 2.0) {
        Ok(net) => assert!(l2(&net, |x| f.eval(x), 48) < 0.2),
        Err(e) => assert!(matches!(e, relunet::Error::Budget(_)), "{e}"),
    }
}

#[test]
fn oracles_are_shareable_across_threads() {
    let h = Arc::new(sine_horizon());
    let handles: Vec<_> = (0..4)
        .map(|i| {
            let h = h.clone();
            std::thread::spawn(move || h.eval(&[0.1 * i as f64 - 0.2, 0.25]))
        })
        .collect();
    for t in handles {
        t.join().unwrap();
    }
}
