use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relunet::analysis::random_network;
use relunet::codec::{
    code_length, decode_network, encode_network, length_constant, read_nnc, simplify_network, write_nnc,
    BitCode, CodeParams,
};
use relunet::primitives::{heaviside_network, multiplication_network};
use relunet::quantization::{quantize_network, QuantizationSpec};
use relunet::Network;

const K: u32 = 8;
const FRAC: u32 = 3;

fn dyadic(r: &mut dyn rand::RngCore) -> f64 {
    let n = r.gen_range(1..=40) as f64 / 8.0;
    if r.gen::<bool>() {
        n
    } else {
        -n
    }
}

fn random_scalar_net(rng: &mut ChaCha8Rng) -> Network {
    let d = rng.gen_range(1..=3);
    let depth = rng.gen_range(1..=4);
    let mut widths = vec![d];
    widths.extend((1..depth).map(|_| rng.gen_range(1..=4)));
    widths.push(1);
    let density = rng.gen_range(0.3..0.9);
    random_network(rng, &widths, density, dyadic)
}

fn params_for(net: &Network, slack: u32) -> CodeParams {
    CodeParams { m: net.num_weights().max(1) as u32 + slack, k: K, d: net.input_dim() as u32, frac_bits: FRAC }
}

fn point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn corpus(n: usize, seed: u64) -> Vec<(Network, Network)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let raw = random_scalar_net(&mut rng);
            let simple = simplify_network(&raw).unwrap();
            (raw, simple)
        })
        .collect()
}

#[test]
fn simplify_preserves_realization_and_bounds_neurons() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for (raw, simple) in corpus(500, 40) {
        assert!(simple.num_weights() <= raw.num_weights());
        assert!(simple.depth() <= raw.depth());
        assert!(simple.num_neurons() <= simple.num_weights() + simple.input_dim() + 1);
        let values: HashSet<u64> = raw.values().map(f64::to_bits).collect();
        assert!(simple.values().all(|v| values.contains(&v.to_bits())));
        for _ in 0..50 {
            let x = point(&mut rng, raw.input_dim());
            let (a, b) = (raw.eval_scalar(&x).unwrap(), simple.eval_scalar(&x).unwrap());
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
        }
        assert_eq!(simplify_network(&simple).unwrap(), simple);
    }
}

#[test]
fn corpus_roundtrip_and_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let c = length_constant(3);
    for (_, net) in corpus(500, 40) {
        let params = params_for(&net, rng.gen_range(0..4));
        let code = encode_network(&net, params).unwrap();
        assert_eq!(decode_network(&code).unwrap(), net);
        let m = params.m as u64;
        let log_m = (64 - (m - 1).leading_zeros()) as u64;
        assert!(code.bits.len() as u64 <= length_constant(params.d) * m * (K as u64 + log_m));
        assert!(length_constant(params.d) <= c);
        assert_eq!(code.bits.len(), code_length(&params));
        let file = write_nnc(&code);
        assert_eq!(read_nnc(&file).unwrap(), code);
    }
}

#[test]
fn codes_are_injective() {
    let nets: Vec<Network> = corpus(500, 43).into_iter().map(|(_, s)| s).collect();
    // group by (M, d) so that all codes in a group share parameters
    let mut groups: HashMap<(u32, u32), Vec<&Network>> = HashMap::new();
    for n in &nets {
        groups.entry((n.num_weights().max(1) as u32 + 3, n.input_dim() as u32)).or_default().push(n);
    }
    let mut checked = 0;
    for ((m, d), members) in &groups {
        let params = CodeParams { m: *m.max(&8), k: K, d: *d, frac_bits: FRAC };
        let mut seen: HashMap<Vec<u8>, &Network> = HashMap::new();
        for n in members {
            let Ok(code) = encode_network(n, params) else { continue };
            let key = write_nnc(&code);
            if let Some(prev) = seen.insert(key, n) {
                assert_eq!(prev, *n, "two networks share a code");
            }
            checked += 1;
        }
    }
    assert!(checked >= 400, "{checked}");

    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut pairs = 0;
    while pairs < 100 {
        let a = &nets[rng.gen_range(0..nets.len())];
        let b = &nets[rng.gen_range(0..nets.len())];
        if a.input_dim() != b.input_dim() {
            continue;
        }
        let x = point(&mut rng, a.input_dim());
        if a.eval_scalar(&x).unwrap() == b.eval_scalar(&x).unwrap() {
            continue;
        }
        let m = a.num_weights().max(b.num_weights()).max(1) as u32;
        let params = CodeParams { m, k: K, d: a.input_dim() as u32, frac_bits: FRAC };
        let (ca, cb) = (encode_network(a, params).unwrap(), encode_network(b, params).unwrap());
        assert_ne!(ca.bits, cb.bits);
        pairs += 1;
    }
}

#[test]
fn single_bit_flips_never_misparse() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let nets: Vec<Network> = corpus(100, 46).into_iter().map(|(_, s)| s).collect();
    let (mut errors, mut valid) = (0, 0);
    for i in 0..1000 {
        let net = &nets[i % nets.len()];
        let code = encode_network(net, params_for(net, 2)).unwrap();
        let header = (64 - (code.params.m as u64).leading_zeros()) as usize;
        let at = rng.gen_range(0..code.bits.len());
        let mut bits = code.bits.clone();
        let old = bits[at];
        bits.set(at, !old);
        let flipped = BitCode { bits, params: code.params };
        match decode_network(&flipped) {
            Err(_) => errors += 1,
            Ok(other) => {
                assert!(at >= header, "depth header flip at bit {at} parsed as a valid network");
                assert_ne!(&other, net);
                // the decoder only accepts canonical streams
                assert_eq!(encode_network(&other, code.params).unwrap().bits, flipped.bits);
                valid += 1;
            }
        }
    }
    assert_eq!(errors + valid, 1000);
    assert!(errors > 0);
}

#[test]
fn primitive_roundtrips() {
    let h = heaviside_network(2, 0.125).unwrap();
    let params = CodeParams { m: 5, k: 6, d: 2, frac_bits: 0 };
    assert_eq!(decode_network(&encode_network(&h, params).unwrap()).unwrap(), h);

    let eps = 0.125;
    let spec = QuantizationSpec::new(3, eps).unwrap();
    let mult = simplify_network(&quantize_network(&multiplication_network(1.0, eps, 1).unwrap(), &spec)).unwrap();
    let params = CodeParams { m: mult.num_weights() as u32, k: 24, d: 2, frac_bits: spec.step_exponent() };
    let code = encode_network(&mult, params).unwrap();
    let back = decode_network(&code).unwrap();
    assert_eq!(back, mult);
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for _ in 0..50 {
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        assert_eq!(back.eval_scalar(&x).unwrap(), mult.eval_scalar(&x).unwrap());
    }
}

#[test]
fn encoder_rejects_bad_inputs() {
    let h = heaviside_network(2, 0.125).unwrap();
    let small = CodeParams { m: 4, k: 6, d: 2, frac_bits: 0 };
    assert!(encode_network(&h, small).is_err());
    let narrow = CodeParams { m: 5, k: 3, d: 2, frac_bits: 0 };
    assert!(encode_network(&h, narrow).is_err());
    let coarse = CodeParams { m: 5, k: 8, d: 2, frac_bits: 0 };
    let third = Network::affine(relunet::Layer::from_triplets(1, 2, [(0, 0, 1.0 / 3.0)], []));
    assert!(encode_network(&third, coarse).is_err());
}
