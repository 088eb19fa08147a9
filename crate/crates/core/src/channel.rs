//! BPSK over AWGN, the binary erasure channel, and conversion of channel
//! outputs into per-symbol probability vectors over GF(2^p).
//!
//! Bit `j` of a symbol's integer value (LSB first) is the `j`-th transmitted
//! bit; bit 0 maps to +1 and bit 1 to -1. Energy per coded bit is 1 and the
//! noise variance is `1 / (2 R Eb/N0)` with `R` the transmitted rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::gf::Symbol;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("rate {0} outside (0, 1)")]
    BadRate(f64),
    #[error("bisection bracket does not contain the capacity crossing")]
    NonConvergence,
    #[error("expected {expected} likelihood vectors, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Probability vector over the `2^p` field elements.
pub type MessageVector = Vec<f64>;

/// One probability vector per symbol, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Likelihoods {
    q: usize,
    data: Vec<f64>,
}

impl Likelihoods {
    pub fn new(q: usize, data: Vec<f64>) -> Self {
        assert!(q > 0 && data.len() % q == 0);
        Likelihoods { q, data }
    }

    pub fn uniform(q: usize, len: usize) -> Self {
        Likelihoods { q, data: vec![1.0 / q as f64; q * len] }
    }

    pub fn from_vectors(q: usize, vectors: &[MessageVector]) -> Self {
        let mut data = Vec::with_capacity(q * vectors.len());
        for v in vectors {
            assert_eq!(v.len(), q);
            data.extend_from_slice(v);
        }
        Likelihoods { q, data }
    }

    /// Field size.
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.q
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.q..(i + 1) * self.q]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.q..(i + 1) * self.q]
    }

    pub fn set(&mut self, i: usize, v: &[f64]) {
        self.get_mut(i).copy_from_slice(v);
    }

    /// Replaces symbol `i` by certainty on `value`.
    pub fn set_known(&mut self, i: usize, value: Symbol) {
        let v = self.get_mut(i);
        v.fill(0.0);
        v[value as usize] = 1.0;
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.q)
    }

    /// Index of the largest component of each vector, lowest index on ties.
    pub fn hard_decisions(&self) -> Vec<Symbol> {
        self.iter().map(argmax).collect()
    }
}

/// Lowest index holding the maximum.
pub fn argmax(v: &[f64]) -> Symbol {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best as Symbol
}

/// Deterministic generator for frame `stream` of a run seeded with `seed`.
pub fn frame_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Noise variance per coded bit for the given Eb/N0 (dB) and rate.
pub fn noise_variance(ebn0_db: f64, rate: f64) -> f64 {
    1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0))
}

/// Expands symbols into `p` bits each, LSB first.
pub fn symbols_to_bits(symbols: &[Symbol], p: u32) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|&s| (0..p).map(move |j| (s >> j & 1) as u8))
        .collect()
}

/// Raw channel output, `p` entries per symbol.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelObservation {
    /// Received BPSK amplitudes.
    Awgn(Vec<f64>),
    /// Bits with erasure flags; erased bits carry no value.
    Erasure { bits: Vec<u8>, erased: Vec<bool> },
}

impl ChannelObservation {
    pub fn bit_count(&self) -> usize {
        match self {
            ChannelObservation::Awgn(y) => y.len(),
            ChannelObservation::Erasure { bits, .. } => bits.len(),
        }
    }
}

/// BPSK-modulates `bits` and adds white Gaussian noise.
pub fn bpsk_awgn<R: Rng + ?Sized>(bits: &[u8], ebn0_db: f64, rate: f64, rng: &mut R) -> ChannelObservation {
    let sigma = noise_variance(ebn0_db, rate).sqrt();
    ChannelObservation::Awgn(
        bits.iter()
            .map(|&b| {
                let x = if b == 0 { 1.0 } else { -1.0 };
                let n: f64 = rng.sample(StandardNormal);
                x + sigma * n
            })
            .collect(),
    )
}

/// Erases each bit independently with probability `epsilon`.
pub fn bec<R: Rng + ?Sized>(bits: &[u8], epsilon: f64, rng: &mut R) -> ChannelObservation {
    let erased: Vec<bool> = bits.iter().map(|_| rng.random::<f64>() < epsilon).collect();
    let bits = bits.iter().zip(&erased).map(|(&b, &e)| if e { 0 } else { b }).collect();
    ChannelObservation::Erasure { bits, erased }
}

/// Per-symbol posteriors from the channel output (uniform prior).
///
/// `sigma2` is ignored for erasure observations. Bits beyond the last whole
/// symbol are dropped.
pub fn symbol_likelihoods(obs: &ChannelObservation, p: u32, sigma2: f64) -> Likelihoods {
    let q = 1usize << p;
    let p = p as usize;
    let n = obs.bit_count() / p;
    let mut data = vec![0.0; n * q];
    match obs {
        ChannelObservation::Awgn(y) => {
            let mut llr = vec![0.0; p];
            for (sym, out) in data.chunks_mut(q).enumerate() {
                // log P(bit = 1) - log P(bit = 0) up to a shared constant
                for j in 0..p {
                    llr[j] = -2.0 * y[sym * p + j] / sigma2;
                }
                let mut max = f64::NEG_INFINITY;
                for (s, o) in out.iter_mut().enumerate() {
                    let mut l = 0.0;
                    for (j, &lj) in llr.iter().enumerate() {
                        if s >> j & 1 == 1 {
                            l += lj;
                        }
                    }
                    *o = l;
                    max = max.max(l);
                }
                let mut sum = 0.0;
                for o in out.iter_mut() {
                    *o = (*o - max).exp();
                    sum += *o;
                }
                out.iter_mut().for_each(|o| *o /= sum);
            }
        }
        ChannelObservation::Erasure { bits, erased } => {
            for (sym, out) in data.chunks_mut(q).enumerate() {
                let mut count = 0usize;
                for (s, o) in out.iter_mut().enumerate() {
                    let consistent = (0..p).all(|j| erased[sym * p + j] || (s >> j & 1) as u8 == bits[sym * p + j]);
                    if consistent {
                        *o = 1.0;
                        count += 1;
                    }
                }
                out.iter_mut().for_each(|o| *o /= count as f64);
            }
        }
    }
    Likelihoods { q, data }
}

// ln(1 + e^x) without overflow
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Capacity in bits of BPSK over AWGN with noise variance `sigma2`.
pub fn biawgn_capacity(sigma2: f64) -> f64 {
    // C = 1 - E[log2(1 + exp(-2Y/sigma2))], Y ~ N(1, sigma2); Simpson over z in [-12, 12]
    let sigma = sigma2.sqrt();
    let steps = 6000usize;
    let (lo, hi) = (-12.0f64, 12.0f64);
    let h = (hi - lo) / steps as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let f = |z: f64| {
        let y = 1.0 + sigma * z;
        norm * (-0.5 * z * z).exp() * softplus(-2.0 * y / sigma2)
    };
    let mut acc = f(lo) + f(hi);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    1.0 - acc * h / 3.0 / std::f64::consts::LN_2
}

/// Smallest Eb/N0 (dB) at which the binary-input AWGN capacity reaches `rate`.
pub fn shannon_limit_biawgn(rate: f64) -> Result<f64, ChannelError> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(ChannelError::BadRate(rate));
    }
    let gap = |db: f64| biawgn_capacity(noise_variance(db, rate)) - rate;
    let (mut lo, mut hi) = (-1.7f64, 20.0f64);
    if gap(lo) > 0.0 || gap(hi) < 0.0 {
        return Err(ChannelError::NonConvergence);
    }
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
