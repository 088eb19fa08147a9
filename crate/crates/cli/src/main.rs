//! `nbcc`: build, encode, decode and simulate non-binary LDPC convolutional
//! codes, and compute BEC thresholds.
//!
//! The number of simulation workers comes from `NBCC_WORKERS` (default: all
//! cores). Results do not depend on it.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nbcc::channel::{bpsk_awgn, frame_rng, noise_variance, shannon_limit_biawgn, symbol_likelihoods, symbols_to_bits};
use nbcc::code::{validate, CodeParams, ConvCode};
use nbcc::de::{threshold_table, DeConfig, Ensemble, THRESHOLD_CSV_HEADER};
use nbcc::decoder::{decode_block, decode_sliding_window};
use nbcc::encoder::{encode, rate, SymbolSequence};
use nbcc::sim::{
    csv_text, emit_csv, load_code, run_instance_study, run_ms_sweep, save_code, DecoderMode, ExperimentConfig, Link,
    RateSpec, RunMetadata, StopRule,
};
use nbcc::Likelihoods;
use std::fs;
use std::path::{Path, PathBuf};

const WORKERS_ENV: &str = "NBCC_WORKERS";

#[derive(Parser)]
#[command(name = "nbcc", version, about = "Non-binary LDPC convolutional codes over GF(2^p)")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Construct a code and write it to a file.
    Build {
        #[command(flatten)]
        code: CodeArgs,
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Check the structural properties of a code file.
    Validate {
        code: PathBuf,
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Termination length; defaults to m_s.
        #[arg(long)]
        z: Option<usize>,
    },
    /// Encode a symbol file of information symbols.
    Encode {
        #[arg(long)]
        code: PathBuf,
        /// Information symbols; one symbol per time unit.
        #[arg(long)]
        info: PathBuf,
        #[arg(long)]
        z: Option<usize>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Decode either a likelihood file or a codeword sent over BI-AWGN.
    Decode {
        #[arg(long)]
        code: PathBuf,
        /// Likelihood file: `q count` then one line of q probabilities per symbol.
        #[arg(long, conflicts_with = "codeword")]
        likelihoods: Option<PathBuf>,
        /// Codeword symbol file to pass through the channel first.
        #[arg(long, requires = "ebn0")]
        codeword: Option<PathBuf>,
        #[arg(long)]
        ebn0: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        z: Option<usize>,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        /// Sliding-window decoding with this many stages of m_s + 1 time units.
        #[arg(long)]
        window: Option<usize>,
        /// Decoded information symbols.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// BER/FER sweep; writes CSV plus a JSON sidecar.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        /// Run one sweep per memory instead of `--m-s`.
        #[arg(long, value_delimiter = ',')]
        ms_list: Vec<usize>,
    },
    /// One sweep per code seed plus their average.
    Instances {
        #[command(flatten)]
        sim: SimArgs,
    },
    /// BEC density-evolution thresholds as CSV.
    Threshold {
        #[arg(long, value_enum, default_value_t = EnsembleArg::Cc)]
        ensemble: EnsembleArg,
        #[arg(long, default_value_t = 2)]
        j: usize,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6")]
        p: Vec<u32>,
        /// Coupled positions.
        #[arg(long, default_value_t = 64)]
        l: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iters: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// BI-AWGN Shannon limits in Eb/N0 dB.
    Shannon {
        #[arg(long, value_delimiter = ',', default_value = "1/4,1/2,3/4,5/6,7/8")]
        rate: Vec<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EnsembleArg {
    Bc,
    Cc,
}

#[derive(Args)]
struct CodeArgs {
    #[arg(long = "m-s", default_value_t = 52)]
    m_s: usize,
    #[arg(long, default_value_t = 2)]
    j: usize,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 8)]
    p: u32,
}

#[derive(Args)]
struct SimArgs {
    /// JSON experiment file; replaces every other flag.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    code: CodeArgs,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    /// Defaults to m_s.
    #[arg(long)]
    z: Option<usize>,
    /// 1/4, 1/2, 3/4, 5/6 or 7/8.
    #[arg(long, default_value = "1/2")]
    rate: String,
    #[arg(long, default_value_t = 1)]
    repeat_seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1.0,1.5")]
    ebn0: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, default_value_t = 5)]
    window_iters: usize,
    #[arg(long, default_value_t = 100)]
    min_frame_errors: u64,
    #[arg(long, default_value_t = 10_000_000)]
    max_info_bits: u64,
    #[arg(long)]
    max_frames: Option<u64>,
    #[arg(long, default_value_t = 0)]
    sim_seed: u64,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn parse_ratio(s: &str) -> Result<(u64, u64)> {
    let (a, b) = s.split_once('/').with_context(|| format!("rate {s:?} is not of the form a/b"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn rate_spec(rate: &str, repeat_seed: u64) -> Result<RateSpec> {
    let (num, den) = parse_ratio(rate)?;
    if (num, den) == (1, 4) {
        return Ok(RateSpec::repeated(repeat_seed));
    }
    Ok(RateSpec::punctured(num, den)?)
}

impl SimArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()));
        }
        let cfg = ExperimentConfig {
            m_s: self.code.m_s,
            j: self.code.j,
            k: self.code.k,
            p: self.code.p,
            seeds: self.seeds.clone(),
            n: self.n,
            z: self.z.unwrap_or(self.code.m_s),
            rate: rate_spec(&self.rate, self.repeat_seed)?,
            ebn0_db: self.ebn0.clone(),
            max_iter: self.max_iter,
            decoder: match self.window {
                None => DecoderMode::Block,
                Some(stages) => DecoderMode::Window { stages, iters_per_step: self.window_iters },
            },
            stop: StopRule {
                min_frame_errors: self.min_frame_errors,
                max_info_bits: self.max_info_bits,
                max_frames: self.max_frames,
            },
            sim_seed: self.sim_seed,
            output: self.out.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn parse_likelihoods(text: &str) -> Result<Likelihoods> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines.next().context("empty likelihood file")?;
    let nums: Vec<usize> = head.split_whitespace().map(str::parse).collect::<Result<_, _>>().context("line 1: header")?;
    let [q, count] = nums[..] else { bail!("line 1: expected `q count`") };
    let mut vecs = Vec::with_capacity(count);
    for (i, l) in lines {
        let v: Vec<f64> = l
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .with_context(|| format!("line {}: bad probability", i + 1))?;
        if v.len() != q {
            bail!("line {}: expected {q} values, got {}", i + 1, v.len());
        }
        vecs.push(v);
    }
    if vecs.len() != count {
        bail!("expected {count} symbols, got {}", vecs.len());
    }
    Ok(Likelihoods::from_vectors(q, &vecs))
}

fn write_records(path: &Path, link: &Link, cfg: &ExperimentConfig, recs: &[nbcc::sim::BerRecord]) -> Result<()> {
    emit_csv(recs, path, Some(&RunMetadata::new(cfg, link, recs)))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn suffixed(base: &Path, tag: &str) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("ber");
    base.with_file_name(format!("{stem}_{tag}.csv"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Build { code, seed, out } => {
            let c = ConvCode::build(CodeParams::new(code.m_s, code.j, code.k, code.p, seed))?;
            save_code(&c, &out)?;
            println!("constraint length {} bits", c.constraint_bit_length());
        }
        Cmd::Validate { code, n, z } => {
            let c = load_code(&code)?;
            let report = validate(&c, n, z.unwrap_or(c.m_s()));
            println!("{report:#?}");
            if !report.all_ok() {
                bail!("validation failed");
            }
        }
        Cmd::Encode { code, info, z, out } => {
            let c = load_code(&code)?;
            let (p, seq) = SymbolSequence::from_text(&read(&info)?, c.b())?;
            if p != c.p() {
                bail!("info symbols over GF(2^{p}), code over GF(2^{})", c.p());
            }
            let z = z.unwrap_or(c.m_s());
            let v = encode(&c, &seq.symbols, seq.times(), z)?;
            write(&out, &v.to_text(c.p()))?;
            println!("rate {}", rate(&c, seq.times(), z)?);
        }
        Cmd::Decode { code, likelihoods, codeword, ebn0, seed, z, max_iter, window, out } => {
            let c = load_code(&code)?;
            let z = z.unwrap_or(c.m_s());
            let mut lik = match (likelihoods, codeword) {
                (Some(path), None) => parse_likelihoods(&read(&path)?)?,
                (None, Some(path)) => {
                    let (_, v) = SymbolSequence::from_text(&read(&path)?, c.c())?;
                    let n = v.times().checked_sub(z).context("codeword shorter than the termination")?;
                    let r = rate(&c, n, z)?;
                    let r = *r.numer() as f64 / *r.denom() as f64;
                    let db = ebn0.unwrap();
                    let obs = bpsk_awgn(&symbols_to_bits(&v.symbols, c.p()), db, r, &mut frame_rng(seed, 0));
                    symbol_likelihoods(&obs, c.p(), noise_variance(db, r))
                }
                _ => bail!("give either --likelihoods or --codeword"),
            };
            let times = lik.len() / c.c();
            if times * c.c() != lik.len() || times < z {
                bail!("{} symbols do not form a terminated block", lik.len());
            }
            for t in times - z..times {
                for j in 0..c.b() {
                    lik.set_known(t * c.c() + j, 0);
                }
            }
            let symbols = match window {
                None => {
                    let o = decode_block(&c, &lik, max_iter)?;
                    eprintln!("converged {} after {} iterations", o.converged, o.iterations);
                    o.symbols
                }
                Some(stages) => decode_sliding_window(&c, &lik, stages, max_iter)?.symbols,
            };
            let info: Vec<_> = (0..times - z).flat_map(|t| symbols[t * c.c()..t * c.c() + c.b()].to_vec()).collect();
            write(&out, &SymbolSequence::new(info, c.b()).to_text(c.p()))?;
        }
        Cmd::Simulate { sim, ms_list } => {
            let cfg = sim.config()?;
            let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("ber.csv"));
            if ms_list.is_empty() {
                let link = Link::new(&cfg, ConvCode::build(cfg.code_params(cfg.seeds[0]))?)?;
                eprintln!("rate {:.6}, constraint length {} bits", link.rate(), link.code.constraint_bit_length());
                let recs = link.sweep(&cfg)?;
                print!("{}", csv_text(&recs));
                write_records(&out, &link, &cfg, &recs)?;
            } else {
                for (m_s, recs) in run_ms_sweep(&cfg, &ms_list)? {
                    let c = ExperimentConfig { m_s, z: cfg.z.max(m_s), ..cfg.clone() };
                    let link = Link::new(&c, ConvCode::build(c.code_params(c.seeds[0]))?)?;
                    println!("# m_s = {m_s}");
                    print!("{}", csv_text(&recs));
                    write_records(&suffixed(&out, &format!("ms{m_s}")), &link, &c, &recs)?;
                }
            }
        }
        Cmd::Instances { sim } => {
            let cfg = sim.config()?;
            let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("instances.csv"));
            let study = run_instance_study(&cfg)?;
            for (seed, recs) in &study.per_seed {
                let link = Link::new(&cfg, ConvCode::build(cfg.code_params(*seed))?)?;
                write_records(&suffixed(&out, &format!("seed{seed}")), &link, &cfg, recs)?;
            }
            let link = Link::new(&cfg, ConvCode::build(cfg.code_params(cfg.seeds[0]))?)?;
            print!("{}", csv_text(&study.average));
            write_records(&suffixed(&out, "average"), &link, &cfg, &study.average)?;
        }
        Cmd::Threshold { ensemble, j, k, p, l, tol, max_iters, out } => {
            let ens = match ensemble {
                EnsembleArg::Bc => Ensemble::Block,
                EnsembleArg::Cc => Ensemble::Coupled { l },
            };
            let reqs: Vec<_> = p.iter().map(|&p| (ens, j, k, p)).collect();
            let rows = threshold_table(&reqs, &DeConfig { tol, max_iters, ..DeConfig::default() })?;
            let mut text = format!("{THRESHOLD_CSV_HEADER}\n");
            for r in rows {
                text.push_str(&r.csv());
                text.push('\n');
            }
            print!("{text}");
            if let Some(path) = out {
                write(&path, &text)?;
            }
        }
        Cmd::Shannon { rate } => {
            println!("rate,ebn0_db");
            for r in rate {
                let (a, b) = parse_ratio(&r)?;
                println!("{r},{:.3}", shannon_limit_biawgn(a as f64 / b as f64)?);
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{WORKERS_ENV}={v:?}"))?;
        pool = pool.num_threads(n);
    }
    pool.build()?.install(|| run(cli))
}
