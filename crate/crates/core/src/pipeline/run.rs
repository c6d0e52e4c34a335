//! End-to-end protocol execution over the simulator.
//!
//! Structural guarantee: the source sampler never sees device outputs —
//! inputs for trial i are fixed by the source stream (or, for an LHV
//! device, by the device's own correlated input model) before the outcome
//! is drawn, and the extractor seed is drawn from the source alone.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bitstore::{write_bits_file, BitString, Trial, TrialRecordSet};
use crate::device::{LhvSampler, QuantumTrialSampler};
use crate::entropy::{adaptive_output_length, eat_minentropy_bound, output_length, ExtractorParams};
use crate::error::{Error, Result};
use crate::extractor::{extract_fast, extract_naive, ShiftExtractorSpec};
use crate::inequality::{
    block_series, chsh_observed, input_bias_warnings, s_mu_observed, tally,
    write_block_series_csv, MdlParams,
};
use crate::source::SvSampler;
use crate::stats::{test_battery, BatteryReport};

use super::config::{DeviceConfig, ExtractorMode, ProtocolConfig, SizingMode};

const SCHEMA_VERSION: u32 = 1;
const MIN_BATTERY_BITS: u64 = 10_000;

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timings {
    pub simulate_s: f64,
    pub estimate_s: f64,
    pub extract_s: f64,
    pub total_s: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct OutputFiles {
    pub trials: Option<PathBuf>,
    pub key: Option<PathBuf>,
    pub series: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProtocolReport {
    pub schema_version: u32,
    pub generated_unix_time: u64,
    pub n: u64,
    pub blocks: u64,
    pub block_size: u64,
    pub mu: f64,
    /// CHSH estimate; absent when some input pair never occurred.
    pub s_obs: Option<f64>,
    pub s_mu_obs: f64,
    pub abort: bool,
    pub m: u64,
    /// Violation level the output sizing actually used.
    pub s_mu_used: f64,
    /// Final security parameter (grid_steps * epsilon under adaptive sizing).
    pub security: f64,
    pub consumed_sv_bits: u64,
    /// True when inputs came from the LHV model's correlated source.
    pub inputs_device_correlated: bool,
    pub extractor: ExtractorMode,
    /// Operating point of the extraction step, when it ran.
    pub extractor_params: Option<ExtractorParams<f64>>,
    pub timings: Timings,
    pub warnings: Vec<String>,
    pub battery: Option<BatteryReport>,
    pub outputs: OutputFiles,
    pub config: ProtocolConfig,
}

/// Packed-nibble lookup: trial byte -> 4 interleaved (a, b) bits.
fn ab_nibble_table() -> [u8; 256] {
    let mut table = [0u8; 256];
    for (v, slot) in table.iter_mut().enumerate() {
        let lo = Trial::unpack((v & 0x0F) as u8);
        let hi = Trial::unpack((v >> 4) as u8);
        *slot = lo.a as u8
            | (lo.b as u8) << 1
            | (hi.a as u8) << 2
            | (hi.b as u8) << 3;
    }
    table
}

/// AB string interleaved a_1 b_1 a_2 b_2 ... from the packed records.
fn ab_bits(trials: &TrialRecordSet) -> BitString {
    let table = ab_nibble_table();
    let packed = trials.packed_bytes();
    let n_bits = 2 * trials.n();
    let mut bytes = vec![0u8; n_bits.div_ceil(8) as usize];
    for (j, slot) in bytes.iter_mut().enumerate() {
        let lo = packed.get(2 * j).map_or(0, |&b| table[b as usize]);
        let hi = packed.get(2 * j + 1).map_or(0, |&b| table[b as usize]);
        *slot = lo | hi << 4;
    }
    BitString::from_bytes(n_bits, &bytes).expect("pad nibbles are zero")
}

enum DeviceSampler {
    Quantum(QuantumTrialSampler),
    Lhv(LhvSampler),
}

/// Fill packed trial bytes for trials [lo, hi) of the run; `chunk` starts
/// at trial `first` (even).
fn fill_chunk(
    chunk: &mut [u8],
    first: u64,
    block_end: u64,
    xy: Option<&BitString>,
    device: &DeviceSampler,
) {
    match device {
        DeviceSampler::Quantum(sampler) => {
            let xy = xy.expect("quantum runs use the source stream");
            let mut rng = sampler.rng();
            rng.set_word_pos(QuantumTrialSampler::WORDS_PER_TRIAL * first as u128);
            let make = |i: u64, rng: &mut rand_chacha::ChaCha8Rng| {
                let x = xy.get(2 * i);
                let y = xy.get(2 * i + 1);
                let (a, b) = sampler
                    .outcome_from_draw(rand::RngCore::next_u64(rng), x, y);
                Trial { x, y, a, b }.pack()
            };
            for (k, byte) in chunk.iter_mut().enumerate() {
                let i0 = first + 2 * k as u64;
                let lo = make(i0, &mut rng);
                let hi = if i0 + 1 < block_end { make(i0 + 1, &mut rng) } else { 0 };
                *byte = lo | hi << 4;
            }
        }
        DeviceSampler::Lhv(sampler) => {
            let mut rng = sampler.rng();
            rng.set_word_pos(LhvSampler::WORDS_PER_TRIAL * first as u128);
            let make = |rng: &mut rand_chacha::ChaCha8Rng| {
                let dl = rand::RngCore::next_u64(rng);
                let dxy = rand::RngCore::next_u64(rng);
                sampler.joint_from_draws(dl, dxy).pack()
            };
            for (k, byte) in chunk.iter_mut().enumerate() {
                let i0 = first + 2 * k as u64;
                let lo = make(&mut rng);
                let hi = if i0 + 1 < block_end { make(&mut rng) } else { 0 };
                *byte = lo | hi << 4;
            }
        }
    }
}

const GEN_CHUNK_BYTES: usize = 1 << 15; // 2^16 trials per work item

fn generate_trials(
    config: &ProtocolConfig,
    xy: Option<&BitString>,
    trials_path: Option<&PathBuf>,
) -> Result<TrialRecordSet> {
    let n = config.protocol.n;
    let block_size = config.protocol.block_size;
    let seed = config.protocol.seed;
    let mut packed = vec![0u8; n.div_ceil(2) as usize];

    let mut writer = match trials_path {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            w.write_all(crate::bitstore::TRIALS_MAGIC)?;
            w.write_all(&n.to_le_bytes())?;
            Some(w)
        }
        None => None,
    };

    let drift = config.device.drift_per_block();
    let blocks = n.div_ceil(block_size);
    for b in 0..blocks {
        let lo = b * block_size;
        let hi = ((b + 1) * block_size).min(n);
        // per-block device sampler (the drift hook shifts V each block)
        let device = match &config.device {
            DeviceConfig::Quantum { .. } => {
                let mut model = config.device.quantum_model(seed).unwrap();
                if let Some(d) = drift {
                    model.visibility = (model.visibility + d * b as f64).clamp(0.0, 1.0);
                }
                DeviceSampler::Quantum(QuantumTrialSampler::new(&model)?)
            }
            DeviceConfig::Lhv { .. } => {
                DeviceSampler::Lhv(LhvSampler::new(&config.device.lhv_model(seed).unwrap())?)
            }
        };

        let byte_lo = (lo / 2) as usize;
        let byte_hi = hi.div_ceil(2) as usize;
        let block_bytes = &mut packed[byte_lo..byte_hi];
        block_bytes
            .par_chunks_mut(GEN_CHUNK_BYTES)
            .enumerate()
            .for_each(|(ci, chunk)| {
                let first = lo + 2 * (ci * GEN_CHUNK_BYTES) as u64;
                fill_chunk(chunk, first, hi, xy, &device);
            });
        if let Some(w) = writer.as_mut() {
            w.write_all(&packed[byte_lo..byte_hi])?;
        }
    }
    if let Some(mut w) = writer {
        w.flush()?;
    }
    TrialRecordSet::from_packed(n, packed)
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Default adaptive cap: the configured device's analytic expectation.
fn expected_s_mu_cap(device: &DeviceConfig, mu: f64) -> Result<f64> {
    match device.quantum_model(0) {
        Some(model) => {
            let (_, s_mu) = crate::device::expected_values(&model, mu)?;
            if s_mu > 0.0 {
                Ok(s_mu)
            } else {
                Err(Error::config(
                    "device's expected S_mu is nonpositive; set s_mu_max explicitly",
                ))
            }
        }
        None => Err(Error::config(
            "adaptive sizing with an LHV device requires explicit s_mu_max",
        )),
    }
}

/// Run the full protocol: simulate trials, estimate the violation, decide
/// abort, and (when not aborted) extract the output string. Abort is a
/// normal outcome, not an error.
pub fn run_protocol(config: &ProtocolConfig) -> Result<ProtocolReport> {
    config.validate()?;
    let threads = config.protocol.threads;
    if threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
        pool.install(|| run_protocol_inner(config))
    } else {
        run_protocol_inner(config)
    }
}

struct MeasuredData {
    trials: TrialRecordSet,
    source: SvSampler<f64>,
    s_obs: Option<f64>,
    s_mu_obs: f64,
    abort: bool,
    warnings: Vec<String>,
    outputs: OutputFiles,
    simulate_s: f64,
    estimate_s: f64,
    is_lhv: bool,
}

/// Protocol steps 1 and 2: sample trials (streamed to disk block-wise)
/// and estimate the observed violation.
fn measure(config: &ProtocolConfig) -> Result<MeasuredData> {
    let n = config.protocol.n;
    let mu = config.protocol.mu;
    let block_size = config.protocol.block_size;
    if n > block_size && !block_size.is_multiple_of(2) {
        return Err(Error::config(
            "block_size must be even when the run spans multiple blocks",
        ));
    }
    std::fs::create_dir_all(&config.output.dir)?;
    let mut warnings = Vec::new();
    let mut outputs = OutputFiles::default();

    let is_lhv = matches!(config.device, DeviceConfig::Lhv { .. });
    let mut source = SvSampler::new(config.source.build(mu, config.protocol.seed))?;

    let t0 = Instant::now();
    let xy = if is_lhv {
        // inputs come from the LHV model's correlated source; the MDL
        // envelope of that model is checked against the declared mu
        let model = config.device.lhv_model(config.protocol.seed).unwrap();
        if let Err(e) = model.validate_envelope(mu) {
            warnings.push(format!("LHV input model leaves the declared envelope: {e}"));
        }
        None
    } else {
        Some(source.sample_bits(2 * n)?)
    };
    let trials_path = config.output.write_trials.then(|| config.output.dir.join("trials.ratrial"));
    let trials = generate_trials(config, xy.as_ref(), trials_path.as_ref())?;
    outputs.trials = trials_path;
    let simulate_s = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let params = MdlParams::<f64>::new(mu)?;
    let counts = tally(&trials)?;
    let (s_mu_obs, abort) = s_mu_observed(&counts, &params)?;
    let s_obs = match chsh_observed::<f64>(&counts) {
        Ok(s) => Some(s),
        Err(e) => {
            warnings.push(format!("CHSH not estimable: {e}"));
            None
        }
    };
    warnings.extend(input_bias_warnings(&counts, &params, 5.0));

    if config.output.write_series {
        match block_series(&trials, config.protocol.series_chunk, &params) {
            Ok(points) => {
                let path = config.output.dir.join("series.csv");
                let mut w = BufWriter::new(File::create(&path)?);
                write_block_series_csv(&points, &mut w)?;
                w.flush()?;
                outputs.series = Some(path);
            }
            Err(e) => warnings.push(format!("block series skipped: {e}")),
        }
    }
    let estimate_s = t0.elapsed().as_secs_f64();

    Ok(MeasuredData {
        trials,
        source,
        s_obs,
        s_mu_obs,
        abort,
        warnings,
        outputs,
        simulate_s,
        estimate_s,
        is_lhv,
    })
}

fn run_protocol_inner(config: &ProtocolConfig) -> Result<ProtocolReport> {
    let t_start = Instant::now();
    let n = config.protocol.n;
    let mu = config.protocol.mu;
    let block_size = config.protocol.block_size;
    let MeasuredData {
        trials,
        mut source,
        s_obs,
        s_mu_obs,
        abort,
        mut warnings,
        mut outputs,
        simulate_s,
        estimate_s,
        is_lhv,
    } = measure(config)?;

    // --- randomness extraction ---
    let t0 = Instant::now();
    let sec = config.security.params(mu, n);
    let mut m = 0u64;
    let mut s_mu_used = 0.0f64;
    let mut security = sec.epsilon;
    let mut battery = None;
    let mut extractor_params: Option<ExtractorParams<f64>> = None;

    if !abort {
        let sized = match config.security.sizing {
            SizingMode::Adaptive => {
                let s_mu_max = match config.security.s_mu_max {
                    Some(v) => v,
                    None => expected_s_mu_cap(&config.device, mu)?,
                };
                let out = adaptive_output_length(
                    s_mu_obs,
                    s_mu_max,
                    config.security.grid_steps,
                    &config.eta,
                    &sec,
                )?;
                security = out.security;
                s_mu_used = out.s_mu_used;
                out.m
            }
            SizingMode::Fixed => {
                let level = config
                    .security
                    .s_mu_fixed
                    .or(config.security.s_mu_max)
                    .ok_or_else(|| {
                        Error::config("fixed sizing requires s_mu_fixed (or s_mu_max)")
                    })?;
                s_mu_used = level;
                output_length(level, &config.eta, &sec)?
            }
        };
        m = sized;
        if m > 2 * n {
            warnings.push(format!(
                "calculus certified {m} bits, capped at the extractor input length {}",
                2 * n
            ));
            m = 2 * n;
        }
        if m > 0 {
            let z = source.sample_bits(2 * n)?;
            let ab = ab_bits(&trials);
            let spec = ShiftExtractorSpec::new(2 * n, m)?;
            // k1: SV bound on the seed; k2: accumulated bound on AB
            extractor_params = Some(ExtractorParams::new(
                2 * n,
                m,
                crate::source::sv_minentropy_bound(2 * n, mu)?,
                eat_minentropy_bound(&config.eta, s_mu_used, &sec)?,
            )?);
            // interface notation is K = Ext(AB, Z); the seed Z occupies the
            // strong first slot internally
            let key = match config.protocol.extractor {
                ExtractorMode::Fast => extract_fast(&spec, &z, &ab)?,
                ExtractorMode::Naive => extract_naive(&spec, &z, &ab)?,
            };
            let key_path = config.output.dir.join("output.rabits");
            write_bits_file(&key, &key_path)?;
            outputs.key = Some(key_path);

            if config.output.run_battery {
                if key.len() >= MIN_BATTERY_BITS {
                    battery = Some(test_battery(&key)?);
                } else {
                    warnings.push(format!(
                        "output of {} bits is below the battery minimum of {MIN_BATTERY_BITS}",
                        key.len()
                    ));
                }
            }
        } else {
            warnings.push("certified output length is 0: no output file written".into());
        }
    }
    let extract_s = t0.elapsed().as_secs_f64();

    // Z is always budgeted even when extraction is skipped: the protocol
    // reserves 2n input bits and 2n seed bits.
    let consumed_sv_bits = 4 * n;

    let report_path = config.output.dir.join("report.json");
    outputs.report = Some(report_path.clone());
    let report = ProtocolReport {
        schema_version: SCHEMA_VERSION,
        generated_unix_time: now_unix(),
        n,
        blocks: n.div_ceil(block_size),
        block_size,
        mu,
        s_obs,
        s_mu_obs,
        abort,
        m,
        s_mu_used,
        security,
        consumed_sv_bits,
        inputs_device_correlated: is_lhv,
        extractor: config.protocol.extractor,
        extractor_params,
        timings: Timings {
            simulate_s,
            estimate_s,
            extract_s,
            total_s: t_start.elapsed().as_secs_f64(),
        },
        warnings,
        battery,
        outputs,
        config: config.clone(),
    };

    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::config(format!("report serialization: {e}")))?;
    std::fs::write(&report_path, json)?;
    Ok(report)
}

/// Measurement and estimation only: trials are generated and written, the
/// violation is estimated, but no extraction takes place.
#[derive(Clone, Debug, Serialize)]
pub struct SimulateReport {
    pub n: u64,
    pub blocks: u64,
    pub s_obs: Option<f64>,
    pub s_mu_obs: f64,
    pub abort: bool,
    pub warnings: Vec<String>,
    pub outputs: OutputFiles,
    pub simulate_s: f64,
    pub estimate_s: f64,
}

pub fn simulate_trials(config: &ProtocolConfig) -> Result<SimulateReport> {
    config.validate()?;
    let inner = || -> Result<SimulateReport> {
        let data = measure(config)?;
        Ok(SimulateReport {
            n: config.protocol.n,
            blocks: config.protocol.n.div_ceil(config.protocol.block_size),
            s_obs: data.s_obs,
            s_mu_obs: data.s_mu_obs,
            abort: data.abort,
            warnings: data.warnings,
            outputs: data.outputs,
            simulate_s: data.simulate_s,
            estimate_s: data.estimate_s,
        })
    };
    let threads = config.protocol.threads;
    if threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
        pool.install(inner)
    } else {
        inner()
    }
}

/// Parameter-only projection: no data generation, exact bit accounting.
#[derive(Clone, Debug, Serialize)]
pub struct DryRunReport {
    pub n: u64,
    pub blocks: u64,
    /// Total weak-source consumption: 2n input bits + 2n seed bits.
    pub consumed_sv_bits: u64,
    pub extractor_input_bits: u64,
    pub expected_s: Option<f64>,
    pub expected_s_mu: Option<f64>,
    /// Output length at the expected violation under the configured sizing.
    pub m_projection: Option<u64>,
    pub security: f64,
}

pub fn dry_run(config: &ProtocolConfig) -> Result<DryRunReport> {
    config.validate()?;
    let n = config.protocol.n;
    let mu = config.protocol.mu;
    if n > u64::MAX / 4 {
        return Err(Error::config("n too large for 64-bit bit accounting"));
    }
    let sec = config.security.params(mu, n);
    let (expected_s, expected_s_mu) = match config.device.quantum_model(config.protocol.seed) {
        Some(model) => {
            let (s, s_mu) = crate::device::expected_values(&model, mu)?;
            (Some(s), Some(s_mu))
        }
        None => (None, None),
    };
    let mut security = sec.epsilon;
    let m_projection = match expected_s_mu {
        Some(s_mu) if s_mu > 0.0 => match config.security.sizing {
            SizingMode::Adaptive => {
                let s_mu_max = config.security.s_mu_max.unwrap_or(s_mu);
                let out = adaptive_output_length(
                    s_mu,
                    s_mu_max,
                    config.security.grid_steps,
                    &config.eta,
                    &sec,
                )?;
                security = out.security;
                Some(out.m)
            }
            SizingMode::Fixed => {
                let level = config.security.s_mu_fixed.or(config.security.s_mu_max).unwrap_or(s_mu);
                Some(output_length(level, &config.eta, &sec)?)
            }
        },
        _ => None,
    };
    Ok(DryRunReport {
        n,
        blocks: n.div_ceil(config.protocol.block_size),
        consumed_sv_bits: 4 * n,
        extractor_input_bits: 2 * n,
        expected_s,
        expected_s_mu,
        m_projection,
        security,
    })
}
