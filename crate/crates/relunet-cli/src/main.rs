use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relunet::analysis::{count_slice_pieces, network_lp_error, piece_bound, rate_fit, Method, SweepRow};
use relunet::codec::{
    code_length, decode_network, encode_network, length_constant, read_nnc, required_frac_bits, simplify_network,
    write_nnc, CodeParams,
};
use relunet::quantization::report;
use relunet::target_spec::TargetSpec;
use relunet::Network;
use serde_json::json;

/// Build, evaluate, sweep, encode and probe explicit ReLU networks.
#[derive(Parser)]
#[command(name = "relunet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct the network for a target description and write it as JSON.
    Build {
        /// Target description file.
        #[arg(long)]
        target: PathBuf,
        /// Target accuracy in the L^p norm.
        #[arg(long, value_parser = parse_eps)]
        eps: f64,
        #[command(flatten)]
        common: BuildArgs,
        /// Output network file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a network at one point.
    Eval {
        #[arg(long)]
        net: PathBuf,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
        point: Vec<f64>,
    },
    /// Build a target for several accuracies and report error and size as CSV.
    Sweep {
        #[arg(long)]
        target: PathBuf,
        /// Comma-separated accuracies, at least three.
        #[arg(long, value_delimiter = ',', value_parser = parse_eps)]
        eps: Vec<f64>,
        #[command(flatten)]
        common: BuildArgs,
        /// Grid points per axis (d ≤ 3) or Monte Carlo samples; defaults to
        /// about 4096 points in total.
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simplify a scalar network and write its bit code as a .nnc file.
    Encode {
        #[arg(long)]
        net: PathBuf,
        /// Weight budget; defaults to the simplified network's weight count.
        #[arg(long)]
        m: Option<u32>,
        /// Bits per weight.
        #[arg(long)]
        k: u32,
        /// Value grid 2^-f; defaults to the smallest grid holding every weight.
        #[arg(long)]
        frac_bits: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a .nnc file back to network JSON.
    Decode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count affine pieces along random lines and compare with the bound.
    Pieces {
        #[arg(long)]
        net: PathBuf,
        #[arg(long, default_value_t = 10)]
        slices: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Grid intervals per slice.
        #[arg(long, default_value_t = 4096)]
        resolution: usize,
        /// Lines are clipped to the box [lo, hi]^d.
        #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
        hi: f64,
    },
}

#[derive(Args)]
struct BuildArgs {
    /// Exponent of the L^p error.
    #[arg(long, default_value_t = 2.0, value_parser = parse_p)]
    p: f64,
    /// Number of squaring blocks of a multiplication network.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    depth_param: u32,
}

/// Only positivity is checked here; the target decides the admissible range.
fn parse_eps(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err("eps must be positive".into()),
    }
}

fn parse_p(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err("p must be positive".into()),
    }
}

fn read_text(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), String> {
    fs::write(path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), String> {
    match out {
        Some(p) => write_bytes(p, text.as_bytes()),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_target(path: &Path) -> Result<TargetSpec, String> {
    TargetSpec::from_json(&read_text(path)?).map_err(|e| e.to_string())
}

fn load_net(path: &Path) -> Result<Network, String> {
    Network::from_json(&read_text(path)?).map_err(|e| e.to_string())
}

fn default_resolution(method: Method, d: usize) -> usize {
    match method {
        Method::Grid => (4096f64.powf(1.0 / d as f64).round() as usize).max(2),
        Method::MonteCarlo => 4096,
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Build { target, eps, common, out } => {
            let spec = load_target(&target)?;
            let net = spec.build(eps, common.p, common.depth_param).map_err(|e| e.to_string())?;
            if out.is_some() {
                emit(out.as_deref(), &net.to_json())?;
            }
            println!("{}", serde_json::to_string(&report(&net, eps)).unwrap());
            if out.is_none() {
                println!("{}", net.to_json());
            }
            Ok(())
        }
        Command::Eval { net, point } => {
            let net = load_net(&net)?;
            let y = net.realize(&point).map_err(|e| e.to_string())?;
            println!("{}", serde_json::to_string(&y).unwrap());
            Ok(())
        }
        Command::Sweep { target, eps, common, resolution, seed, out } => {
            if eps.len() < 3 {
                return Err("need ≥3 points".into());
            }
            let spec = load_target(&target)?;
            let oracle = spec.oracle().map_err(|e| e.to_string())?;
            let d = spec.dim();
            let method = Method::auto(d);
            let resolution = resolution.unwrap_or_else(|| default_resolution(method, d));
            let rate = spec.theoretical_rate(common.p);
            let mut rows = Vec::with_capacity(eps.len());
            for &e in &eps {
                let net = spec.build(e, common.p, common.depth_param).map_err(|e| e.to_string())?;
                let err = network_lp_error(&net, &*oracle, common.p, method, resolution, seed)
                    .map_err(|e| e.to_string())?;
                rows.push(SweepRow {
                    target_name: spec.name().to_string(),
                    eps: e,
                    p: common.p,
                    depth: net.depth(),
                    weights: net.num_weights(),
                    neurons: net.num_neurons(),
                    measured_error: err.value,
                    theoretical_rate: rate,
                    fitted_slope: None,
                });
            }
            let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, r.weights as f64)).collect();
            let slope = rate_fit(&pts).map_err(|e| e.to_string())?;
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.serialize(r).map_err(|e| e.to_string())?;
            }
            let rate_field = rate.map(|r| r.to_string()).unwrap_or_default();
            w.write_record([spec.name(), "", "", "", "", "", "", &rate_field, &slope.to_string()])
                .map_err(|e| e.to_string())?;
            let bytes = w.into_inner().map_err(|e| e.to_string())?;
            let text = String::from_utf8(bytes).map_err(|e| e.to_string())?;
            emit(out.as_deref(), text.trim_end())
        }
        Command::Encode { net, m, k, frac_bits, out } => {
            let net = load_net(&net)?;
            let simple = simplify_network(&net).map_err(|e| e.to_string())?;
            let frac_bits = match frac_bits {
                Some(f) => f,
                None => required_frac_bits(&simple).ok_or("weights are not dyadic rationals")?,
            };
            let m = m.unwrap_or(simple.num_weights().max(1) as u32);
            let params = CodeParams { m, k, d: simple.input_dim() as u32, frac_bits };
            let code = encode_network(&simple, params).map_err(|e| e.to_string())?;
            write_bytes(&out, &write_nnc(&code))?;
            let summary = json!({
                "bits": code.bits.len(),
                "bound": code_length(&params),
                "C": length_constant(params.d),
                "M": m,
                "K": k,
                "d": params.d,
                "frac_bits": frac_bits,
                "depth": simple.depth(),
                "N": simple.num_neurons(),
            });
            println!("{summary}");
            Ok(())
        }
        Command::Decode { input, out } => {
            let bytes = fs::read(&input).map_err(|e| format!("cannot read {}: {e}", input.display()))?;
            let code = read_nnc(&bytes).map_err(|e| e.to_string())?;
            let net = decode_network(&code).map_err(|e| e.to_string())?;
            emit(out.as_deref(), &net.to_json())
        }
        Command::Pieces { net, slices, seed, resolution, lo, hi } => {
            if !(hi > lo) {
                return Err("need lo < hi".into());
            }
            let net = load_net(&net)?;
            if net.output_dim() != 1 {
                return Err("piece counting needs a scalar-output network".into());
            }
            let d = net.input_dim();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut max = 0;
            for _ in 0..slices {
                let x0: Vec<f64> = (0..d).map(|_| rng.gen_range(lo..hi)).collect();
                let v = random_direction(&mut rng, d);
                let (t0, t1) = clip_line(&x0, &v, lo, hi);
                let n = count_slice_pieces(&net, &x0, &v, (t0, t1), resolution, 1e-6).map_err(|e| e.to_string())?;
                max = max.max(n);
            }
            println!("{}", json!({ "max_pieces": max, "bound": piece_bound(&net), "slices": slices }));
            Ok(())
        }
    }
}

fn random_direction(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            return v.into_iter().map(|a| a / n).collect();
        }
    }
}

/// Parameter range of `x₀ + t v` inside `[lo, hi]^d`.
fn clip_line(x0: &[f64], v: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for (x, dir) in x0.iter().zip(v) {
        if dir.abs() < 1e-300 {
            continue;
        }
        let (a, b) = ((lo - x) / dir, (hi - x) / dir);
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    (t0, t1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let line = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", line.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("{}", msg.replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
