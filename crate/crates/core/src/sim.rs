//! Monte-Carlo BER/FER sweeps.
//!
//! Frames run in fixed-size batches on the current rayon pool. Each frame
//! draws from its own `(seed, point, frame)` stream and batches are merged in
//! frame order, so results do not depend on the number of workers.

use crate::channel::{bpsk_awgn, frame_rng, noise_variance, symbol_likelihoods, symbols_to_bits};
use crate::code::{CodeError, CodeParams, ConvCode};
use crate::decoder::{decode_block, decode_sliding_window, DecodeError};
use crate::encoder::{encode, EncodeError};
use crate::gf::{Field, Symbol};
use crate::rate::{PuncturePattern, RateError, RatePlan, RepetitionPlan};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Frames decoded between two evaluations of the stop rule.
pub const BATCH: u64 = 32;

pub const CSV_HEADER: &str = "ebn0_db,frames,bit_errors,frame_errors,ber,fer,mean_iters";

/// Transmission scheme on top of the mother code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct RateSpec {
    /// Keep flags per (time in period, stream); `None` keeps everything.
    #[serde(default)]
    pub keep: Option<Vec<Vec<bool>>>,
    /// Seed of the repetition coefficients; `None` disables repetition.
    #[serde(default)]
    pub repeat_seed: Option<u64>,
}

impl RateSpec {
    pub fn mother() -> Self {
        RateSpec::default()
    }

    /// One of the tabulated punctured rates 3/4, 5/6, 7/8 (or 1/2).
    pub fn punctured(num: u64, den: u64) -> Result<Self, SimError> {
        let pattern = PuncturePattern::for_rate(num, den)
            .ok_or_else(|| SimError::Config(format!("no puncture pattern for rate {num}/{den}")))?;
        let keep = (0..pattern.period()).map(|t| (0..pattern.width()).map(|j| pattern.keeps(t, j)).collect()).collect();
        Ok(RateSpec { keep: Some(keep), repeat_seed: None })
    }

    /// Every symbol sent twice, rate 1/4.
    pub fn repeated(seed: u64) -> Self {
        RateSpec { keep: None, repeat_seed: Some(seed) }
    }

    pub fn plan(&self, field: &Field, times: usize, width: usize) -> Result<RatePlan, SimError> {
        let pattern = match &self.keep {
            None => PuncturePattern::mother(width),
            Some(k) => PuncturePattern::new(k.clone())?,
        };
        if pattern.width() != width {
            return Err(SimError::Config(format!("pattern width {} for {width} streams", pattern.width())));
        }
        let repetition = match self.repeat_seed {
            None => None,
            Some(s) => Some(RepetitionPlan::full(field, times, width, s)?),
        };
        Ok(RatePlan { pattern, repetition })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderMode {
    Block,
    /// Window of `stages * (m_s + 1)` time units.
    Window { stages: usize, iters_per_step: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRule {
    pub min_frame_errors: u64,
    pub max_info_bits: u64,
    #[serde(default)]
    pub max_frames: Option<u64>,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { min_frame_errors: 100, max_info_bits: 10_000_000, max_frames: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub m_s: usize,
    pub j: usize,
    pub k: usize,
    pub p: u32,
    /// Code construction seeds; sweeps use the first.
    pub seeds: Vec<u64>,
    /// Information time units per frame.
    pub n: usize,
    /// Termination time units.
    pub z: usize,
    #[serde(default)]
    pub rate: RateSpec,
    pub ebn0_db: Vec<f64>,
    pub max_iter: usize,
    pub decoder: DecoderMode,
    #[serde(default)]
    pub stop: StopRule,
    /// Seed of the information and noise streams.
    pub sim_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.into()));
        if self.ebn0_db.is_empty() {
            return bad("empty Eb/N0 grid");
        }
        if self.seeds.is_empty() {
            return bad("no code seeds");
        }
        if self.stop.min_frame_errors == 0 {
            return bad("stop rule needs at least one error event");
        }
        if self.n == 0 {
            return bad("N must be positive");
        }
        if self.z < self.m_s {
            return bad("termination shorter than the memory");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        if let DecoderMode::Window { stages, iters_per_step } = self.decoder {
            if stages == 0 || iters_per_step == 0 {
                return bad("window needs positive stages and iterations");
            }
        }
        Ok(())
    }

    pub fn code_params(&self, seed: u64) -> CodeParams {
        CodeParams::new(self.m_s, self.j, self.k, self.p, seed)
    }

    pub fn to_json(&self) -> Result<String, SimError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub ebn0_db: f64,
    pub frames: u64,
    pub bit_errors: u64,
    pub symbol_errors: u64,
    pub frame_errors: u64,
    pub ber: f64,
    pub fer: f64,
    pub mean_iters: f64,
    /// Fewer frame errors than the stop rule asked for.
    pub censored: bool,
}

impl BerRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:.6e},{:.6e},{:.3}",
            self.ebn0_db, self.frames, self.bit_errors, self.frame_errors, self.ber, self.fer, self.mean_iters
        )
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct FrameResult {
    bit_errors: u64,
    symbol_errors: u64,
    iterations: u64,
}

/// A code together with everything needed to push frames through it.
pub struct Link {
    pub code: ConvCode,
    pub plan: RatePlan,
    pub n: usize,
    pub z: usize,
    pub decoder: DecoderMode,
    pub max_iter: usize,
}

impl Link {
    pub fn new(cfg: &ExperimentConfig, code: ConvCode) -> Result<Self, SimError> {
        let plan = cfg.rate.plan(code.field(), cfg.n + cfg.z, code.c())?;
        Ok(Link { code, plan, n: cfg.n, z: cfg.z, decoder: cfg.decoder, max_iter: cfg.max_iter })
    }

    pub fn info_symbols(&self) -> usize {
        self.n * self.code.b()
    }

    pub fn info_bits(&self) -> u64 {
        (self.info_symbols() * self.code.p() as usize) as u64
    }

    /// Overall transmitted rate, termination included.
    pub fn rate(&self) -> f64 {
        let r = self.plan.rate(self.info_symbols(), self.n + self.z);
        *r.numer() as f64 / *r.denom() as f64
    }

    fn frame(&self, ebn0_db: f64, seed: u64, stream: u64) -> Result<FrameResult, SimError> {
        let code = &self.code;
        let (b, c, p) = (code.b(), code.c(), code.p());
        let times = self.n + self.z;
        let mut rng = frame_rng(seed, stream);
        let q = code.field().size() as Symbol;
        let info: Vec<Symbol> = (0..self.info_symbols()).map(|_| rng.random_range(0..q)).collect();
        let v = encode(code, &info, self.n, self.z)?;
        let tx = self.plan.transmit(&v.symbols, code.field());
        let rate = self.rate();
        let obs = bpsk_awgn(&symbols_to_bits(&tx, p), ebn0_db, rate, &mut rng);
        let rx = symbol_likelihoods(&obs, p, noise_variance(ebn0_db, rate));
        let mut lik = self.plan.receive(&rx, code.field(), times)?;
        for t in self.n..times {
            for j in 0..b {
                lik.set_known(t * c + j, 0);
            }
        }
        let (decided, iterations) = match self.decoder {
            DecoderMode::Block => {
                let out = decode_block(code, &lik, self.max_iter)?;
                (out.symbols, out.iterations as u64)
            }
            DecoderMode::Window { stages, iters_per_step } => {
                let out = decode_sliding_window(code, &lik, stages, iters_per_step)?;
                // per-symbol average of the iterations it took part in
                (out.symbols, out.iterations / times as u64)
            }
        };
        let mut res = FrameResult { iterations, ..Default::default() };
        for t in 0..self.n {
            for j in 0..b {
                let diff = decided[t * c + j] ^ info[t * b + j];
                res.bit_errors += diff.count_ones() as u64;
                res.symbol_errors += (diff != 0) as u64;
            }
        }
        Ok(res)
    }

    /// Simulates one Eb/N0 point until the stop rule fires.
    pub fn run_point(&self, ebn0_db: f64, stop: &StopRule, seed: u64, point: u64) -> Result<BerRecord, SimError> {
        let info_bits = self.info_bits();
        let mut frames = 0u64;
        let (mut bit_errors, mut symbol_errors, mut frame_errors, mut iters) = (0u64, 0u64, 0u64, 0u64);
        let done = |frames: u64, frame_errors: u64| {
            frame_errors >= stop.min_frame_errors
                || frames * info_bits >= stop.max_info_bits
                || stop.max_frames.is_some_and(|m| frames >= m)
        };
        while !done(frames, frame_errors) {
            let results: Vec<FrameResult> = (frames..frames + BATCH)
                .into_par_iter()
                .map(|f| self.frame(ebn0_db, seed, point << 40 | f))
                .collect::<Result<_, _>>()?;
            for r in results {
                frames += 1;
                bit_errors += r.bit_errors;
                symbol_errors += r.symbol_errors;
                frame_errors += (r.symbol_errors > 0) as u64;
                iters += r.iterations;
                if done(frames, frame_errors) {
                    break;
                }
            }
        }
        Ok(BerRecord {
            ebn0_db,
            frames,
            bit_errors,
            symbol_errors,
            frame_errors,
            ber: bit_errors as f64 / (frames * info_bits) as f64,
            fer: frame_errors as f64 / frames as f64,
            mean_iters: iters as f64 / frames as f64,
            censored: frame_errors < stop.min_frame_errors,
        })
    }

    pub fn sweep(&self, cfg: &ExperimentConfig) -> Result<Vec<BerRecord>, SimError> {
        cfg.ebn0_db
            .iter()
            .enumerate()
            .map(|(i, &db)| self.run_point(db, &cfg.stop, cfg.sim_seed, i as u64))
            .collect()
    }
}

/// BER sweep of the code built from the first seed.
pub fn run_ber_sweep(cfg: &ExperimentConfig) -> Result<Vec<BerRecord>, SimError> {
    cfg.validate()?;
    let code = ConvCode::build(cfg.code_params(cfg.seeds[0]))?;
    Link::new(cfg, code)?.sweep(cfg)
}

/// Per-instance curves and their pointwise average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceStudy {
    pub per_seed: Vec<(u64, Vec<BerRecord>)>,
    /// Counts are summed; `ber`, `fer` and `mean_iters` are means of the
    /// per-instance values.
    pub average: Vec<BerRecord>,
}

pub fn run_instance_study(cfg: &ExperimentConfig) -> Result<InstanceStudy, SimError> {
    cfg.validate()?;
    if cfg.seeds.len() < 2 {
        return Err(SimError::Config("instance study needs at least two seeds".into()));
    }
    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let code = ConvCode::build(cfg.code_params(seed))?;
        per_seed.push((seed, Link::new(cfg, code)?.sweep(cfg)?));
    }
    let m = per_seed.len() as f64;
    let average = (0..cfg.ebn0_db.len())
        .map(|i| {
            let pts: Vec<&BerRecord> = per_seed.iter().map(|(_, r)| &r[i]).collect();
            BerRecord {
                ebn0_db: cfg.ebn0_db[i],
                frames: pts.iter().map(|r| r.frames).sum(),
                bit_errors: pts.iter().map(|r| r.bit_errors).sum(),
                symbol_errors: pts.iter().map(|r| r.symbol_errors).sum(),
                frame_errors: pts.iter().map(|r| r.frame_errors).sum(),
                ber: pts.iter().map(|r| r.ber).sum::<f64>() / m,
                fer: pts.iter().map(|r| r.fer).sum::<f64>() / m,
                mean_iters: pts.iter().map(|r| r.mean_iters).sum::<f64>() / m,
                censored: pts.iter().any(|r| r.censored),
            }
        })
        .collect();
    Ok(InstanceStudy { per_seed, average })
}

/// One sweep per syndrome-former memory; `z` grows to the memory if needed.
pub fn run_ms_sweep(cfg: &ExperimentConfig, memories: &[usize]) -> Result<Vec<(usize, Vec<BerRecord>)>, SimError> {
    if memories.is_empty() {
        return Err(SimError::Config("empty memory grid".into()));
    }
    memories
        .iter()
        .map(|&m_s| {
            let c = ExperimentConfig { m_s, z: cfg.z.max(m_s), ..cfg.clone() };
            Ok((m_s, run_ber_sweep(&c)?))
        })
        .collect()
}

/// Eb/N0 at which a curve first drops to `target`, interpolated in log BER.
pub fn crossing(records: &[BerRecord], target: f64) -> Option<f64> {
    let first = records.first()?;
    if first.ber <= target {
        return Some(first.ebn0_db);
    }
    records.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        if a.ber > target && b.ber <= target {
            if b.ber == 0.0 {
                return Some(b.ebn0_db);
            }
            let (la, lb, lt) = (a.ber.log10(), b.ber.log10(), target.log10());
            Some(a.ebn0_db + (b.ebn0_db - a.ebn0_db) * (la - lt) / (la - lb))
        } else {
            None
        }
    })
}

pub fn csv_text(records: &[BerRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        writeln!(s, "{}", r.csv_line()).unwrap();
    }
    s
}

fn write(path: &Path, text: &str) -> Result<(), SimError> {
    fs::write(path, text).map_err(|source| SimError::Io { path: path.to_path_buf(), source })
}

fn read(path: &Path) -> Result<String, SimError> {
    fs::read_to_string(path).map_err(|source| SimError::Io { path: path.to_path_buf(), source })
}

/// Sidecar written next to every CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: ExperimentConfig,
    pub rate: f64,
    pub rate_exact: String,
    pub constraint_bit_length: usize,
    pub records: Vec<BerRecord>,
}

impl RunMetadata {
    pub fn new(cfg: &ExperimentConfig, link: &Link, records: &[BerRecord]) -> Self {
        let r = link.plan.rate(link.info_symbols(), link.n + link.z);
        RunMetadata {
            config: cfg.clone(),
            rate: link.rate(),
            rate_exact: r.to_string(),
            constraint_bit_length: link.code.constraint_bit_length(),
            records: records.to_vec(),
        }
    }
}

/// Writes `path` as CSV and `path` with a `.json` extension as metadata.
pub fn emit_csv(records: &[BerRecord], path: &Path, meta: Option<&RunMetadata>) -> Result<(), SimError> {
    write(path, &csv_text(records))?;
    if let Some(m) = meta {
        write(&path.with_extension("json"), &serde_json::to_string_pretty(m)?)?;
    }
    Ok(())
}

pub fn save_code(code: &ConvCode, path: &Path) -> Result<(), SimError> {
    write(path, &code.to_text())
}

pub fn load_code(path: &Path) -> Result<ConvCode, SimError> {
    Ok(ConvCode::from_text(&read(path)?)?)
}
