//! q-ary sum-product decoding with Walsh-Hadamard check-node updates.
//!
//! A check with labels `h_k` enforces `sum_k h_k s_k = 0`. Each incoming
//! message is permuted by `s -> h_k s`, which turns the check into an XOR
//! convolution over GF(2)^p; the convolution is a pointwise product in the
//! Walsh-Hadamard domain. The result is permuted back through the outgoing
//! label.
//!
//! [`BlockDecoder`] runs a flooding schedule over a whole terminated block.
//! [`WindowDecoder`] slides a window of `I (m_s + 1)` time units over the
//! stream and uses the same update kernel restricted to the window.

use thiserror::Error;

use crate::channel::{argmax, Likelihoods, MessageVector};
use crate::code::ConvCode;
use crate::gf::{Field, Symbol};

/// Components below this are treated as an underflowed message.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("length {0} is not a power of two")]
    BadLength(usize),
    #[error("all message components fell below the underflow floor")]
    NumericalUnderflow,
    #[error("need {expected} likelihood vectors, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

fn wht_in_place(v: &mut [f64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for block in v.chunks_mut(2 * h) {
            let (a, b) = block.split_at_mut(h);
            for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                let (s, d) = (*x + *y, *x - *y);
                *x = s;
                *y = d;
            }
        }
        h *= 2;
    }
}

/// Unnormalized Walsh-Hadamard transform; applying it twice scales by `len`.
pub fn wht(v: &[f64]) -> Result<Vec<f64>, DecodeError> {
    if !v.len().is_power_of_two() {
        return Err(DecodeError::BadLength(v.len()));
    }
    let mut out = v.to_vec();
    wht_in_place(&mut out);
    Ok(out)
}

// Clamps negatives from round-off and rescales to unit mass.
fn normalize(v: &mut [f64]) -> Result<(), DecodeError> {
    let mut sum = 0.0;
    for x in v.iter_mut() {
        if *x < 0.0 || x.is_nan() {
            *x = 0.0;
        }
        sum += *x;
    }
    if sum < UNDERFLOW_FLOOR || !sum.is_finite() {
        return Err(DecodeError::NumericalUnderflow);
    }
    let inv = 1.0 / sum;
    v.iter_mut().for_each(|x| *x *= inv);
    Ok(())
}

/// Message leaving a check on the edge labelled `out_label`, given the
/// messages and labels of the other edges.
pub fn check_update(
    field: &Field,
    incoming: &[&[f64]],
    in_labels: &[Symbol],
    out_label: Symbol,
) -> Result<MessageVector, DecodeError> {
    assert_eq!(incoming.len(), in_labels.len());
    let q = field.size();
    let mut acc = vec![1.0; q];
    let mut tmp = vec![0.0; q];
    for (m, &h) in incoming.iter().zip(in_labels) {
        if m.len() != q {
            return Err(DecodeError::BadLength(m.len()));
        }
        tmp.fill(0.0);
        for (s, &x) in m.iter().enumerate() {
            tmp[field.mul(h, s as Symbol) as usize] = x;
        }
        wht_in_place(&mut tmp);
        acc.iter_mut().zip(&tmp).for_each(|(a, t)| *a *= t);
    }
    wht_in_place(&mut acc);
    let mut out: Vec<f64> = (0..q).map(|s| acc[field.mul(out_label, s as Symbol) as usize]).collect();
    normalize(&mut out)?;
    Ok(out)
}

/// Componentwise product of the channel vector and incoming messages.
pub fn variable_update(channel: &[f64], incoming: &[&[f64]]) -> Result<MessageVector, DecodeError> {
    let mut out = channel.to_vec();
    for m in incoming {
        if m.len() != out.len() {
            return Err(DecodeError::BadLength(m.len()));
        }
        out.iter_mut().zip(m.iter()).for_each(|(o, x)| *o *= x);
    }
    normalize(&mut out)?;
    Ok(out)
}

fn has_tie(v: &[f64], best: Symbol) -> bool {
    let m = v[best as usize];
    v.iter().enumerate().any(|(i, &x)| i != best as usize && x == m)
}

/// Tanner graph of a terminated code over a fixed number of time units.
#[derive(Debug, Clone)]
pub struct DecoderGraph {
    q: usize,
    c: usize,
    nb: usize,
    m_s: usize,
    times: usize,
    check_ptr: Vec<usize>,
    edge_sym: Vec<usize>,
    edge_label: Vec<Symbol>,
    // per edge: index into `maps`
    edge_map: Vec<usize>,
    // maps[i][s] = label_i * s
    maps: Vec<Vec<Symbol>>,
    sym_ptr: Vec<usize>,
    sym_edges: Vec<usize>,
}

impl DecoderGraph {
    pub fn new(code: &ConvCode, times: usize) -> Self {
        let (c, nb) = (code.c(), code.checks_per_time());
        let field = code.field();
        let mut check_ptr = vec![0];
        let mut edge_sym = Vec::new();
        let mut edge_label = Vec::new();
        for t in 0..times {
            for eta in 0..nb {
                for (ts, g, h) in code.check_support(t, eta) {
                    edge_sym.push(ts * c + g);
                    edge_label.push(h);
                }
                check_ptr.push(edge_sym.len());
            }
        }
        let mut label_index = vec![usize::MAX; field.size()];
        let mut maps = Vec::new();
        let edge_map = edge_label
            .iter()
            .map(|&h| {
                if label_index[h as usize] == usize::MAX {
                    label_index[h as usize] = maps.len();
                    maps.push(field.mul_map(h));
                }
                label_index[h as usize]
            })
            .collect();
        let n_sym = times * c;
        let mut deg = vec![0usize; n_sym];
        for &s in &edge_sym {
            deg[s] += 1;
        }
        let mut sym_ptr = vec![0; n_sym + 1];
        for s in 0..n_sym {
            sym_ptr[s + 1] = sym_ptr[s] + deg[s];
        }
        let mut fill = sym_ptr.clone();
        let mut sym_edges = vec![0; edge_sym.len()];
        for (e, &s) in edge_sym.iter().enumerate() {
            sym_edges[fill[s]] = e;
            fill[s] += 1;
        }
        DecoderGraph {
            q: field.size(),
            c,
            nb,
            m_s: code.m_s(),
            times,
            check_ptr,
            edge_sym,
            edge_label,
            edge_map,
            maps,
            sym_ptr,
            sym_edges,
        }
    }

    pub fn memory(&self) -> usize {
        self.m_s
    }
    pub fn times(&self) -> usize {
        self.times
    }
    pub fn symbols(&self) -> usize {
        self.times * self.c
    }
    pub fn checks(&self) -> usize {
        self.times * self.nb
    }
    pub fn edges(&self) -> usize {
        self.edge_sym.len()
    }
    pub fn check_degree(&self, check: usize) -> usize {
        self.check_ptr[check + 1] - self.check_ptr[check]
    }
    pub fn symbol_degree(&self, sym: usize) -> usize {
        self.sym_ptr[sym + 1] - self.sym_ptr[sym]
    }
    /// `(symbol, label)` pairs of a check.
    pub fn check_edges(&self, check: usize) -> impl Iterator<Item = (usize, Symbol)> + '_ {
        (self.check_ptr[check]..self.check_ptr[check + 1]).map(|e| (self.edge_sym[e], self.edge_label[e]))
    }

    fn syndrome_ok(&self, field: &Field, hard: &[Symbol], checks: std::ops::Range<usize>) -> bool {
        checks.into_iter().all(|ch| {
            self.check_edges(ch)
                .fold(0 as Symbol, |acc, (s, h)| acc ^ field.mul(hard[s], h))
                == 0
        })
    }
}

/// Result of decoding one block.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    pub symbols: Vec<Symbol>,
    pub converged: bool,
    pub iterations: usize,
    /// Node updates that had to fall back after an underflow.
    pub underflows: u64,
}

// Message store and update kernel shared by the block and window decoders.
#[derive(Debug, Clone)]
struct Engine {
    graph: DecoderGraph,
    field: Field,
    channel: Vec<f64>,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    belief: Vec<f64>,
    hard: Vec<Symbol>,
    // belief maximum shared by several values
    tied: Vec<bool>,
    underflows: u64,
    symbol_updates: u64,
    // scratch
    spectra: Vec<f64>,
    prefix: Vec<f64>,
    tmp: Vec<f64>,
}

impl Engine {
    fn new(code: &ConvCode, times: usize) -> Self {
        let graph = DecoderGraph::new(code, times);
        let q = graph.q;
        let (ns, ne) = (graph.symbols(), graph.edges());
        let max_deg = (0..graph.checks()).map(|c| graph.check_degree(c)).max().unwrap_or(0).max(
            (0..ns).map(|s| graph.symbol_degree(s)).max().unwrap_or(0),
        );
        Engine {
            field: code.field().clone(),
            channel: vec![1.0 / q as f64; ns * q],
            v2c: vec![1.0 / q as f64; ne * q],
            c2v: vec![1.0 / q as f64; ne * q],
            belief: vec![1.0 / q as f64; ns * q],
            hard: vec![0; ns],
            tied: vec![true; ns],
            underflows: 0,
            symbol_updates: 0,
            spectra: vec![0.0; (max_deg + 1) * q],
            prefix: vec![0.0; (max_deg + 1) * q],
            tmp: vec![0.0; q],
            graph,
        }
    }

    fn reset(&mut self) {
        let u = 1.0 / self.graph.q as f64;
        self.c2v.fill(u);
        self.underflows = 0;
        self.symbol_updates = 0;
    }

    // Loads channel vectors for symbols [first, first + lik.len()) and seeds
    // their outgoing messages.
    fn load(&mut self, first: usize, lik: &Likelihoods) {
        let q = self.graph.q;
        for i in 0..lik.len() {
            let s = first + i;
            let v = lik.get(i);
            self.channel[s * q..(s + 1) * q].copy_from_slice(v);
            self.belief[s * q..(s + 1) * q].copy_from_slice(v);
            self.hard[s] = argmax(v);
            self.tied[s] = has_tie(v, self.hard[s]);
            for k in self.graph.sym_ptr[s]..self.graph.sym_ptr[s + 1] {
                let e = self.graph.sym_edges[k];
                self.v2c[e * q..(e + 1) * q].copy_from_slice(v);
            }
        }
    }

    fn update_check(&mut self, ch: usize, sym_lo: usize) {
        let q = self.graph.q;
        let (start, end) = (self.graph.check_ptr[ch], self.graph.check_ptr[ch + 1]);
        let d = end - start;
        for k in 0..d {
            let e = start + k;
            let map = &self.graph.maps[self.graph.edge_map[e]];
            let spec = &mut self.spectra[k * q..(k + 1) * q];
            spec.fill(0.0);
            for (s, &x) in self.v2c[e * q..(e + 1) * q].iter().enumerate() {
                spec[map[s] as usize] = x;
            }
            wht_in_place(spec);
        }
        // prefix[k] = product of spectra 0..k
        self.prefix[..q].fill(1.0);
        for k in 0..d {
            let (done, rest) = self.prefix.split_at_mut((k + 1) * q);
            let prev = &done[k * q..];
            let spec = &self.spectra[k * q..(k + 1) * q];
            for ((o, a), b) in rest[..q].iter_mut().zip(prev).zip(spec) {
                *o = a * b;
            }
        }
        let mut suffix = vec![1.0; q];
        for k in (0..d).rev() {
            let e = start + k;
            let out_to_window = self.graph.edge_sym[e] >= sym_lo;
            if out_to_window {
                let prod = &mut self.tmp;
                for ((o, a), b) in prod.iter_mut().zip(&self.prefix[k * q..(k + 1) * q]).zip(&suffix) {
                    *o = a * b;
                }
                wht_in_place(prod);
                let map = &self.graph.maps[self.graph.edge_map[e]];
                let out = &mut self.c2v[e * q..(e + 1) * q];
                for (s, o) in out.iter_mut().enumerate() {
                    *o = prod[map[s] as usize];
                }
                if normalize(out).is_err() {
                    out.fill(1.0 / q as f64);
                    self.underflows += 1;
                }
            }
            let spec = &self.spectra[k * q..(k + 1) * q];
            suffix.iter_mut().zip(spec).for_each(|(a, b)| *a *= b);
        }
    }

    fn update_symbol(&mut self, s: usize) {
        let q = self.graph.q;
        let (start, end) = (self.graph.sym_ptr[s], self.graph.sym_ptr[s + 1]);
        let d = end - start;
        let ch = &self.channel[s * q..(s + 1) * q];
        self.prefix[..q].copy_from_slice(ch);
        for k in 0..d {
            let e = self.graph.sym_edges[start + k];
            let (done, rest) = self.prefix.split_at_mut((k + 1) * q);
            for ((o, a), b) in rest[..q].iter_mut().zip(&done[k * q..]).zip(&self.c2v[e * q..(e + 1) * q]) {
                *o = a * b;
            }
        }
        let mut suffix = vec![1.0; q];
        for k in (0..d).rev() {
            let e = self.graph.sym_edges[start + k];
            let out = &mut self.v2c[e * q..(e + 1) * q];
            for ((o, a), b) in out.iter_mut().zip(&self.prefix[k * q..(k + 1) * q]).zip(&suffix) {
                *o = a * b;
            }
            if normalize(out).is_err() {
                out.copy_from_slice(&self.channel[s * q..(s + 1) * q]);
                self.underflows += 1;
            }
            suffix.iter_mut().zip(&self.c2v[e * q..(e + 1) * q]).for_each(|(a, b)| *a *= b);
        }
        let belief = &mut self.belief[s * q..(s + 1) * q];
        belief.copy_from_slice(&self.prefix[d * q..(d + 1) * q]);
        if normalize(belief).is_err() {
            belief.copy_from_slice(&self.channel[s * q..(s + 1) * q]);
            self.underflows += 1;
        }
        self.hard[s] = argmax(belief);
        self.tied[s] = has_tie(belief, self.hard[s]);
        self.symbol_updates += 1;
    }

    // Decisions in the window are unambiguous and satisfy its checks.
    fn settled(&self, lo: usize, hi: usize) -> bool {
        let (c, nb) = (self.graph.c, self.graph.nb);
        !self.tied[lo * c..hi * c].iter().any(|&t| t)
            && self.graph.syndrome_ok(&self.field, &self.hard, lo * nb..hi * nb)
    }

    /// Flooding iterations over time units `[lo, hi)`. Returns
    /// `(converged, iterations)`.
    fn run(&mut self, lo: usize, hi: usize, max_iter: usize, early_stop: bool) -> (bool, usize) {
        let (c, nb) = (self.graph.c, self.graph.nb);
        if early_stop && self.settled(lo, hi) {
            return (true, 0);
        }
        for it in 1..=max_iter {
            for ch in lo * nb..hi * nb {
                self.update_check(ch, lo * c);
            }
            for s in lo * c..hi * c {
                self.update_symbol(s);
            }
            if early_stop && self.settled(lo, hi) {
                return (true, it);
            }
        }
        (self.settled(lo, hi), max_iter)
    }
}

/// Flooding-schedule decoder for one terminated block, reusable across frames.
#[derive(Debug, Clone)]
pub struct BlockDecoder {
    engine: Engine,
}

impl BlockDecoder {
    pub fn new(code: &ConvCode, times: usize) -> Self {
        BlockDecoder { engine: Engine::new(code, times) }
    }

    pub fn graph(&self) -> &DecoderGraph {
        &self.engine.graph
    }

    /// Decodes from per-symbol likelihoods covering all `c * times` symbols.
    /// Stops early once the hard decisions satisfy every check.
    pub fn decode(&mut self, lik: &Likelihoods, max_iter: usize) -> Result<DecodeOutput, DecodeError> {
        let n = self.engine.graph.symbols();
        if lik.len() != n || lik.q() != self.engine.graph.q {
            return Err(DecodeError::LengthMismatch { expected: n, got: lik.len() });
        }
        self.engine.reset();
        self.engine.load(0, lik);
        let (converged, iterations) = self.engine.run(0, self.engine.graph.times, max_iter, true);
        Ok(DecodeOutput {
            symbols: self.engine.hard.clone(),
            converged,
            iterations,
            underflows: self.engine.underflows,
        })
    }

    /// Final beliefs of the last decode.
    pub fn beliefs(&self) -> Likelihoods {
        Likelihoods::new(self.engine.graph.q, self.engine.belief.clone())
    }
}

/// One-shot convenience wrapper around [`BlockDecoder`].
pub fn decode_block(code: &ConvCode, lik: &Likelihoods, max_iter: usize) -> Result<DecodeOutput, DecodeError> {
    let times = lik.len() / code.c();
    BlockDecoder::new(code, times).decode(lik, max_iter)
}

/// A time slice leaving the window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub time: usize,
    pub symbols: Vec<Symbol>,
    /// Time units received from `time` on (inclusive) before emission.
    pub latency: usize,
}

/// Sliding-window (pipeline) decoder.
///
/// The window holds `stages * (m_s + 1)` time units. Once it is full, every
/// arriving slice triggers up to `iters_per_step` flooding iterations over
/// the window, after which the oldest slice is hard-decided and leaves. At
/// the end of the stream the remaining slices leave with their current
/// decisions; if the window never filled, one pass is run first.
#[derive(Debug, Clone)]
pub struct WindowDecoder {
    engine: Engine,
    width: usize,
    iters_per_step: usize,
    early_stop: bool,
    arrived: usize,
    next_emit: usize,
    dirty: bool,
    iterations: u64,
}

impl WindowDecoder {
    pub fn new(code: &ConvCode, times: usize, stages: usize, iters_per_step: usize) -> Self {
        assert!(stages >= 1);
        WindowDecoder {
            engine: Engine::new(code, times),
            width: stages * (code.m_s() + 1),
            iters_per_step,
            early_stop: true,
            arrived: 0,
            next_emit: 0,
            dirty: false,
            iterations: 0,
        }
    }

    /// Disables the per-step syndrome stop, so every step spends exactly
    /// `iters_per_step` iterations.
    pub fn without_early_stop(mut self) -> Self {
        self.early_stop = false;
        self
    }

    /// Window span in time units.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Symbol-node updates performed so far.
    pub fn symbol_updates(&self) -> u64 {
        self.engine.symbol_updates
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn underflows(&self) -> u64 {
        self.engine.underflows
    }

    fn emit(&mut self) -> Emission {
        let c = self.engine.graph.c;
        let t = self.next_emit;
        self.next_emit += 1;
        Emission {
            time: t,
            symbols: self.engine.hard[t * c..(t + 1) * c].to_vec(),
            latency: self.arrived - t,
        }
    }

    fn step(&mut self) {
        let (_, it) = self.engine.run(self.next_emit, self.arrived, self.iters_per_step, self.early_stop);
        self.iterations += it as u64;
        self.dirty = false;
    }

    /// Feeds the channel vectors of the next time slice (`c` symbols).
    pub fn push(&mut self, slice: &Likelihoods) -> Result<Option<Emission>, DecodeError> {
        let c = self.engine.graph.c;
        if slice.len() != c || self.arrived >= self.engine.graph.times {
            return Err(DecodeError::LengthMismatch { expected: c, got: slice.len() });
        }
        self.engine.load(self.arrived * c, slice);
        self.arrived += 1;
        self.dirty = true;
        if self.arrived - self.next_emit == self.width {
            self.step();
            return Ok(Some(self.emit()));
        }
        Ok(None)
    }

    /// Flushes the slices still inside the window.
    pub fn finish(&mut self) -> Vec<Emission> {
        if self.dirty && self.arrived > self.next_emit {
            self.step();
        }
        let mut out = Vec::new();
        while self.next_emit < self.arrived {
            out.push(self.emit());
        }
        out
    }
}

/// Output of [`decode_sliding_window`].
#[derive(Debug, Clone, PartialEq)]
pub struct WindowOutput {
    pub symbols: Vec<Symbol>,
    pub emissions: Vec<Emission>,
    pub symbol_updates: u64,
    pub iterations: u64,
}

/// Runs a [`WindowDecoder`] over a whole block of likelihoods.
pub fn decode_sliding_window(
    code: &ConvCode,
    lik: &Likelihoods,
    stages: usize,
    iters_per_step: usize,
) -> Result<WindowOutput, DecodeError> {
    let c = code.c();
    let times = lik.len() / c;
    let mut dec = WindowDecoder::new(code, times, stages, iters_per_step);
    run_window(&mut dec, lik)
}

/// Drives an already configured window decoder over `lik`.
pub fn run_window(dec: &mut WindowDecoder, lik: &Likelihoods) -> Result<WindowOutput, DecodeError> {
    let c = dec.engine.graph.c;
    let q = lik.q();
    let times = lik.len() / c;
    let mut emissions = Vec::with_capacity(times);
    for t in 0..times {
        let slice = Likelihoods::new(q, (t * c..(t + 1) * c).flat_map(|s| lik.get(s).to_vec()).collect());
        if let Some(e) = dec.push(&slice)? {
            emissions.push(e);
        }
    }
    emissions.extend(dec.finish());
    let symbols = emissions.iter().flat_map(|e| e.symbols.iter().copied()).collect();
    Ok(WindowOutput { symbols, emissions, symbol_updates: dec.symbol_updates(), iterations: dec.iterations() })
}
