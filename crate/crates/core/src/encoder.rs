//! Systematic shift-register encoding of terminated convolutional codes.
//!
//! At time `t` the first `b` coded symbols copy the information symbols and
//! parity symbol `j` solves check `j - b` of time `t`:
//!
//! ```text
//! v_t^(j) = ( sum_{k<b} v_t^(k) h_0^(k,j-b)(t)
//!           + sum_{i=1..m_s} sum_k v_{t-i}^(k) h_i^(k,j-b)(t) ) / h_0^(j,j-b)(t)
//! ```
//!
//! History before `t = 0` is zero.

use std::collections::VecDeque;

use num_rational::Ratio;
use thiserror::Error;

use crate::code::ConvCode;
use crate::gf::Symbol;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("diagonal entry h_0^({row},{col})({t}) is zero")]
    SingularH0 { row: usize, col: usize, t: usize },
    #[error("expected {expected} symbols, got {got}")]
    Length { expected: usize, got: usize },
    #[error("termination length {z} is shorter than m_s = {m_s}")]
    ShortTermination { z: usize, m_s: usize },
    #[error("rate undefined for N = 0")]
    ZeroLength,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Symbols grouped into time slices of `width` symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSequence {
    pub symbols: Vec<Symbol>,
    pub width: usize,
}

impl SymbolSequence {
    pub fn new(symbols: Vec<Symbol>, width: usize) -> Self {
        debug_assert!(width > 0 && symbols.len() % width == 0);
        SymbolSequence { symbols, width }
    }

    pub fn times(&self) -> usize {
        self.symbols.len() / self.width
    }

    pub fn slice(&self, t: usize) -> &[Symbol] {
        &self.symbols[t * self.width..(t + 1) * self.width]
    }

    /// Text form: header `p count`, then one integer per line.
    pub fn to_text(&self, p: u32) -> String {
        let mut s = format!("{} {}\n", p, self.symbols.len());
        for v in &self.symbols {
            s.push_str(&v.to_string());
            s.push('\n');
        }
        s
    }

    /// Parses [`SymbolSequence::to_text`]; returns the field degree too.
    pub fn from_text(text: &str, width: usize) -> Result<(u32, SymbolSequence), EncodeError> {
        let err = |line: usize, msg: String| EncodeError::Parse { line, msg };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or_else(|| err(1, "empty symbol file".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 2 {
            return Err(err(hl + 1, "expected header `p count`".into()));
        }
        let p: u32 = h[0].parse().map_err(|e| err(hl + 1, format!("p: {e}")))?;
        let count: usize = h[1].parse().map_err(|e| err(hl + 1, format!("count: {e}")))?;
        if p == 0 || p > 16 {
            return Err(err(hl + 1, format!("field degree {p} outside 1..=16")));
        }
        let mut symbols = Vec::with_capacity(count);
        for (ln, line) in lines {
            let v: u32 = line.trim().parse().map_err(|e| err(ln + 1, format!("{e}")))?;
            if v >= 1 << p {
                return Err(err(ln + 1, format!("symbol {v} outside GF(2^{p})")));
            }
            symbols.push(v as Symbol);
        }
        if symbols.len() != count {
            return Err(err(text.lines().count(), format!("header promises {count} symbols, found {}", symbols.len())));
        }
        if width == 0 || count % width != 0 {
            return Err(err(hl + 1, format!("{count} symbols do not split into slices of {width}")));
        }
        Ok((p, SymbolSequence::new(symbols, width)))
    }
}

// One parity equation with the pivot divided out: terms are
// (delay i, stream k, coefficient / pivot).
#[derive(Debug, Clone)]
struct ParityRule {
    terms: Vec<(usize, usize, Symbol)>,
}

/// Streaming encoder holding the last `m_s` coded slices.
#[derive(Debug, Clone)]
pub struct Encoder<'a> {
    code: &'a ConvCode,
    // rules[(t mod T) * (c-b) + eta]
    rules: Vec<ParityRule>,
    history: VecDeque<Vec<Symbol>>,
    t: usize,
    mults: u64,
}

impl<'a> Encoder<'a> {
    pub fn new(code: &'a ConvCode) -> Result<Self, EncodeError> {
        let f = code.field();
        let (b, c, nb) = (code.b(), code.c(), code.checks_per_time());
        let mut rules = Vec::with_capacity(code.period() * nb);
        for t in 0..code.period() {
            for eta in 0..nb {
                let j = b + eta;
                let pivot = code.coeff(0, t, j, eta);
                let pivot_inv = f.inv(pivot).map_err(|_| EncodeError::SingularH0 { row: j, col: eta, t })?;
                let mut terms = Vec::new();
                for i in 0..=code.m_s() {
                    for k in 0..c {
                        if i == 0 && k >= b {
                            if k != j && code.coeff(0, t, k, eta) != 0 {
                                return Err(EncodeError::SingularH0 { row: k, col: eta, t });
                            }
                            continue;
                        }
                        let h = code.coeff(i, t, k, eta);
                        if h != 0 {
                            terms.push((i, k, f.mul(h, pivot_inv)));
                        }
                    }
                }
                rules.push(ParityRule { terms });
            }
        }
        Ok(Encoder { code, rules, history: VecDeque::with_capacity(code.m_s() + 1), t: 0, mults: 0 })
    }

    /// Current time unit.
    pub fn time(&self) -> usize {
        self.t
    }

    /// Field multiplications performed so far.
    pub fn multiplications(&self) -> u64 {
        self.mults
    }

    /// Encodes one slice of `b` information symbols into `c` coded symbols.
    pub fn push(&mut self, info: &[Symbol]) -> Result<Vec<Symbol>, EncodeError> {
        let (b, c) = (self.code.b(), self.code.c());
        if info.len() != b {
            return Err(EncodeError::Length { expected: b, got: info.len() });
        }
        let f = self.code.field();
        let nb = c - b;
        let mut slice = vec![0 as Symbol; c];
        slice[..b].copy_from_slice(info);
        let phase = self.t % self.code.period();
        for eta in 0..nb {
            let mut acc: Symbol = 0;
            for &(i, k, h) in &self.rules[phase * nb + eta].terms {
                let v = if i == 0 {
                    slice[k]
                } else if i <= self.history.len() {
                    self.history[self.history.len() - i][k]
                } else {
                    continue;
                };
                self.mults += 1;
                acc ^= f.mul(v, h);
            }
            slice[b + eta] = acc;
        }
        if self.code.m_s() > 0 {
            if self.history.len() == self.code.m_s() {
                self.history.pop_front();
            }
            self.history.push_back(slice.clone());
        }
        self.t += 1;
        Ok(slice)
    }
}

/// Encodes `b*n` information symbols followed by `b*z` zero termination
/// symbols into a codeword of `c*(n+z)` symbols.
pub fn encode(code: &ConvCode, info: &[Symbol], n: usize, z: usize) -> Result<SymbolSequence, EncodeError> {
    let b = code.b();
    if info.len() != b * n {
        return Err(EncodeError::Length { expected: b * n, got: info.len() });
    }
    if z < code.m_s() {
        return Err(EncodeError::ShortTermination { z, m_s: code.m_s() });
    }
    let mut enc = Encoder::new(code)?;
    let mut out = Vec::with_capacity(code.c() * (n + z));
    let zeros = vec![0 as Symbol; b];
    for t in 0..n + z {
        let u = if t < n { &info[t * b..(t + 1) * b] } else { &zeros[..] };
        out.extend(enc.push(u)?);
    }
    Ok(SymbolSequence::new(out, code.c()))
}

/// True iff every check of the terminated code over `n + z` time units is
/// satisfied by `v`.
pub fn syndrome_check(code: &ConvCode, v: &[Symbol], n: usize, z: usize) -> bool {
    let times = n + z;
    if v.len() != code.c() * times {
        return false;
    }
    let f = code.field();
    let c = code.c();
    (0..times).all(|t| {
        (0..code.checks_per_time()).all(|eta| {
            code.check_support(t, eta)
                .fold(0 as Symbol, |acc, (ts, g, h)| acc ^ f.mul(v[ts * c + g], h))
                == 0
        })
    })
}

/// Rate of the terminated code, `b N / (c (N + Z))`.
pub fn rate(code: &ConvCode, n: usize, z: usize) -> Result<Ratio<u64>, EncodeError> {
    if n == 0 {
        return Err(EncodeError::ZeroLength);
    }
    Ok(Ratio::new((code.b() * n) as u64, (code.c() * (n + z)) as u64))
}

/// Bits spent on termination, `Z c p`.
pub fn termination_bits(code: &ConvCode, z: usize) -> usize {
    z * code.c() * code.p() as usize
}
