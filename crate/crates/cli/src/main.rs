//! Command-line toolkit for the randomness amplification pipeline.
//!
//! Exit code 0 on success (aborted protocol runs included); nonzero only
//! on errors.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use randamp_core::bitstore::{
    read_bits_file, read_trials_file, write_bits_file, xor_pad, BitString,
};
use randamp_core::entropy::{implied_eta, output_length, EtaStrategy, SecurityParams};
use randamp_core::extractor::{extract_fast, extract_naive, ShiftExtractorSpec};
use randamp_core::inequality::{
    block_series, chsh_observed, s_mu_observed, tally, write_block_series_csv, MdlParams,
};
use randamp_core::pipeline::{
    dry_run, run_protocol, simulate_trials, tradeoff_sweep, write_sweep_csv, ProtocolConfig,
};
use randamp_core::source::{bias_audit, sv_minentropy_bound};
use randamp_core::stats::test_battery;
use randamp_core::timing::{
    jitter_free_window, limiting_jitter_free_window, verify_locality, DriftTable, TimingDoc,
};

#[derive(Parser)]
#[command(
    name = "randamp",
    version,
    about = "Randomness amplification toolkit: simulate, estimate, extract, certify"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EtaArgs {
    /// Entropy-rate strategy: constant | affine
    #[arg(long, default_value = "constant")]
    eta_kind: String,
    /// Rate for the constant strategy (bits/trial)
    #[arg(long, default_value_t = 0.134294)]
    eta_rate: f64,
    /// Slope for the affine strategy
    #[arg(long, default_value_t = 60.0)]
    eta_alpha: f64,
    /// Violation offset for the affine strategy
    #[arg(long, default_value_t = 0.0)]
    eta_s0: f64,
    /// Finite-size coefficient (beta/sqrt(n)) for the affine strategy
    #[arg(long, default_value_t = 0.0)]
    eta_beta: f64,
}

impl EtaArgs {
    fn build(&self) -> Result<EtaStrategy<f64>> {
        match self.eta_kind.as_str() {
            "constant" => Ok(EtaStrategy::Constant { rate: self.eta_rate }),
            "affine" => Ok(EtaStrategy::Affine {
                alpha: self.eta_alpha,
                s0: self.eta_s0,
                beta: self.eta_beta,
            }),
            other => bail!("unknown eta strategy '{other}' (use constant | affine)"),
        }
    }
}

#[derive(Args)]
struct SecurityArgs {
    /// Final security parameter
    #[arg(long, default_value_t = 1e-12)]
    epsilon: f64,
    /// Smoothing parameter (default epsilon/12)
    #[arg(long)]
    epsilon_s: Option<f64>,
}

impl SecurityArgs {
    fn params(&self, mu: f64, n: u64) -> SecurityParams<f64> {
        let mut p = SecurityParams::with_default_smoothing(self.epsilon, mu, n);
        if let Some(es) = self.epsilon_s {
            p.epsilon_s = es;
        }
        p
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate device trials and write the trial file (no extraction)
    Simulate {
        /// Protocol configuration (TOML)
        #[arg(long)]
        config: PathBuf,
    },
    /// Estimate S and S_mu from a trial file
    Estimate {
        /// Trial file (RATRIAL1)
        #[arg(long)]
        trials: PathBuf,
        /// Assumed source bias
        #[arg(long)]
        mu: f64,
        /// Write a per-block CSV series to this path
        #[arg(long)]
        series: Option<PathBuf>,
        /// Trials per series block
        #[arg(long, default_value_t = 1 << 22)]
        series_chunk: u64,
    },
    /// Security calculus: output length, implied eta, bit accounting
    Params {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        mu: f64,
        #[command(flatten)]
        security: SecurityArgs,
        #[command(flatten)]
        eta: EtaArgs,
        /// Violation level for the output-length computation
        #[arg(long)]
        s_mu: Option<f64>,
        /// Invert the calculus: rate required for this output length
        #[arg(long)]
        m: Option<u64>,
    },
    /// Apply the two-source extractor: K = Ext(AB, Z)
    Extract {
        /// Device-output string AB (RABITS01)
        #[arg(long)]
        ab: PathBuf,
        /// SV seed string Z (RABITS01); occupies the strong slot
        #[arg(long)]
        seed: PathBuf,
        /// Output length in bits
        #[arg(short, long)]
        m: u64,
        /// Destination for K (RABITS01)
        #[arg(short, long)]
        output: PathBuf,
        /// Engine: fast | naive
        #[arg(long, default_value = "fast")]
        mode: String,
    },
    /// Run the full protocol: simulate, estimate, abort decision, extract
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Report parameters and bit accounting only; generate nothing
        #[arg(long)]
        dry_run: bool,
    },
    /// Trade-off sweep: minimal n vs CHSH value for a target output
    Sweep {
        /// Target output length in bits
        #[arg(long)]
        target_m: u64,
        #[arg(long)]
        mu: f64,
        #[command(flatten)]
        security: SecurityArgs,
        #[command(flatten)]
        eta: EtaArgs,
        /// Grid start (CHSH value)
        #[arg(long, default_value_t = 2.05)]
        s_from: f64,
        /// Grid end
        #[arg(long, default_value_t = 2.82)]
        s_to: f64,
        /// Grid points
        #[arg(long, default_value_t = 16)]
        steps: usize,
        /// CSV destination (stdout when omitted)
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Locality-loophole budget check from a timing document
    Timing {
        /// Timing document (TOML; keys carry units)
        #[arg(long)]
        table: PathBuf,
        /// Override the Bell distance in meters
        #[arg(long)]
        distance: Option<f64>,
    },
    /// Statistical test battery on a bit file
    Stats {
        /// Bit file (RABITS01)
        #[arg(long)]
        bits: PathBuf,
        /// Also audit the empirical bias against this envelope
        #[arg(long)]
        audit_mu: Option<f64>,
    },
    /// One-time-pad a file with a bit-file pad (apply twice to undo)
    Pad {
        /// Input file (raw bytes by default)
        #[arg(long)]
        input: PathBuf,
        /// Pad (RABITS01), at least as long as the input
        #[arg(long)]
        pad: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Treat the input as a RABITS01 bit file instead of raw bytes
        #[arg(long)]
        bits: bool,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    println!("{text}");
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { config } => {
            let config = ProtocolConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            let report = simulate_trials(&config)?;
            print_json(&report)?;
        }
        Command::Estimate { trials, mu, series, series_chunk } => {
            let set = read_trials_file(&trials)
                .with_context(|| format!("reading {}", trials.display()))?;
            let params = MdlParams::<f64>::new(mu).map_err(anyhow::Error::from)?;
            let counts = tally(&set)?;
            let (s_mu, abort) = s_mu_observed(&counts, &params)?;
            let s = chsh_observed::<f64>(&counts).ok();
            if let Some(path) = series {
                let points = block_series(&set, series_chunk, &params)?;
                let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
                write_block_series_csv(&points, &mut w)?;
                w.flush()?;
            }
            print_json(&serde_json::json!({
                "trials": set.n(),
                "s_obs": s,
                "s_mu_obs": s_mu,
                "abort": abort,
            }))?;
        }
        Command::Params { n, mu, security, eta, s_mu, m } => {
            let params = security.params(mu, n);
            let eta = eta.build()?;
            let mut out = serde_json::json!({
                "n": n,
                "mu": mu,
                "epsilon": params.epsilon,
                "epsilon_s": params.epsilon_s,
                "consumed_sv_bits": 4u64.checked_mul(n)
                    .context("n too large for 64-bit bit accounting")?,
                "extractor_input_bits": 2 * n,
                "seed_minentropy_bits": sv_minentropy_bound(2 * n, mu)?,
            });
            if let Some(s_mu) = s_mu {
                out["m"] = serde_json::json!(output_length(s_mu, &eta, &params)?);
                out["s_mu"] = serde_json::json!(s_mu);
            }
            if let Some(m) = m {
                out["implied_eta"] = serde_json::json!(implied_eta(m, &params)?);
                out["target_m"] = serde_json::json!(m);
            }
            print_json(&out)?;
        }
        Command::Extract { ab, seed, m, output, mode } => {
            let ab_bits = read_bits_file(&ab)
                .with_context(|| format!("reading {}", ab.display()))?;
            let z_bits = read_bits_file(&seed)
                .with_context(|| format!("reading {}", seed.display()))?;
            if ab_bits.len() != z_bits.len() {
                bail!(
                    "AB has {} bits but Z has {}; the extractor needs equal lengths",
                    ab_bits.len(),
                    z_bits.len()
                );
            }
            let spec = ShiftExtractorSpec::new(ab_bits.len(), m)?;
            // K = Ext(AB, Z): the seed Z goes into the strong first slot
            let key = match mode.as_str() {
                "fast" => extract_fast(&spec, &z_bits, &ab_bits)?,
                "naive" => extract_naive(&spec, &z_bits, &ab_bits)?,
                other => bail!("unknown mode '{other}' (use fast | naive)"),
            };
            write_bits_file(&key, &output)?;
            print_json(&serde_json::json!({
                "input_bits": ab_bits.len(),
                "output_bits": key.len(),
                "output": output,
            }))?;
        }
        Command::Run { config, dry_run: dry } => {
            let config = ProtocolConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            if dry {
                print_json(&dry_run(&config)?)?;
            } else {
                let report = run_protocol(&config)?;
                print_json(&report)?;
            }
        }
        Command::Sweep { target_m, mu, security, eta, s_from, s_to, steps, output } => {
            if steps < 2 || s_to <= s_from {
                bail!("need steps >= 2 and s_to > s_from");
            }
            let grid: Vec<f64> = (0..steps)
                .map(|i| s_from + (s_to - s_from) * i as f64 / (steps - 1) as f64)
                .collect();
            let rows = tradeoff_sweep(target_m, mu, &eta.build()?, &security.params(mu, 1), &grid)?;
            match output {
                Some(path) => {
                    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
                    write_sweep_csv(&rows, &mut w)?;
                    w.flush()?;
                }
                None => {
                    let mut buf = Vec::new();
                    write_sweep_csv(&rows, &mut buf)?;
                    print!("{}", String::from_utf8(buf)?);
                }
            }
        }
        Command::Timing { table, distance } => {
            let doc = TimingDoc::<f64>::load(&table)
                .with_context(|| format!("loading {}", table.display()))?;
            let distance = distance
                .or(doc.distance_m)
                .context("no distance: set distance_m in the table or pass --distance")?;
            let locality = verify_locality(&doc.segments, distance)?;
            let windows: Vec<serde_json::Value> = doc
                .drift
                .iter()
                .map(|e| -> Result<serde_json::Value> {
                    let hours = jitter_free_window(e.granularity_ns, e.drift_ps_per_hr)?;
                    Ok(serde_json::json!({
                        "device": e.device,
                        "jitter_free_hours": hours,
                        "jitter_free_days": hours / 24.0,
                    }))
                })
                .collect::<Result<_>>()?;
            let limiting = limiting_jitter_free_window(&DriftTable { entries: doc.drift.clone() })?;
            print_json(&serde_json::json!({
                "locality": locality,
                "jitter_free_windows": windows,
                "limiting_device": limiting.map(|(d, h)| serde_json::json!({
                    "device": d, "hours": h,
                })),
            }))?;
        }
        Command::Stats { bits, audit_mu } => {
            let bit_string = read_bits_file(&bits)
                .with_context(|| format!("reading {}", bits.display()))?;
            let battery = test_battery(&bit_string)?;
            let audit = match audit_mu {
                Some(mu) => Some(bias_audit(&bit_string, mu)?),
                None => None,
            };
            print_json(&serde_json::json!({
                "battery": battery,
                "bias_audit": audit,
            }))?;
        }
        Command::Pad { input, pad, output, bits } => {
            let pad_bits = read_bits_file(&pad)
                .with_context(|| format!("reading {}", pad.display()))?;
            if bits {
                let data = read_bits_file(&input)?;
                let padded = xor_pad(&data, &pad_bits)?;
                write_bits_file(&padded, &output)?;
            } else {
                let raw = std::fs::read(&input)?;
                let data = BitString::from_bytes(8 * raw.len() as u64, &raw)?;
                let padded = xor_pad(&data, &pad_bits)?;
                std::fs::write(&output, padded.to_bytes())?;
            }
            println!("padded {} -> {}", input.display(), output.display());
        }
    }
    Ok(())
}
