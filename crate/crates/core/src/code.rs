//! Construction of periodic (m_s, J, K)-regular non-binary syndrome formers.
//!
//! A code is built in three steps:
//!
//! 1. [`build_base_matrix`] lays out a binary `2(m_s+1) x (m_s+1)` base matrix
//!    made of `2 x 1` blocks. Diagonal blocks are `[1 1]^T`, the block left of
//!    the diagonal (wrapping around) is `[0 1]^T`, and the remaining weight is
//!    placed at random as `[1 0]^T` / `[0 1]^T` blocks without creating
//!    4-cycles.
//! 2. [`assign_coefficients`] replaces every one by a random nonzero field
//!    element such that no check sees the same coefficient twice.
//! 3. [`diagonal_cut`] cuts the matrix along its diagonal and wraps the lower
//!    part to the right, which yields the submatrices `H_i^T(t)` of a
//!    syndrome former with period `T = m_s + 1`.
//!
//! Row `2l` of the base matrix is the systematic symbol of time unit `l`, row
//! `2l + 1` its parity symbol, and column `r` the check of time unit `r`.

use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gf::{Field, FieldError, Symbol};

/// Restarts allowed before [`build_base_matrix`] gives up.
pub const MAX_CONSTRUCTION_RESTARTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error("unsupported code shape: {0}")]
    Unsupported(String),
    #[error("no 4-cycle-free base matrix found after {0} restarts")]
    ConstructionFailure(usize),
    #[error("cannot pick {k} distinct nonzero coefficients in GF(2^{p})")]
    InfeasibleCoefficients { p: u32, k: usize },
    #[error("submatrix index {i} exceeds syndrome-former memory {m_s}")]
    IndexOutOfRange { i: usize, m_s: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Binary base matrix of size `c(m_s+1) x (c-b)(m_s+1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseMatrix {
    pub m_s: usize,
    pub j: usize,
    pub k: usize,
    pub c: usize,
    pub b: usize,
    ones: Vec<bool>,
}

impl BaseMatrix {
    pub fn rows(&self) -> usize {
        self.c * (self.m_s + 1)
    }

    pub fn cols(&self) -> usize {
        (self.c - self.b) * (self.m_s + 1)
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.ones[row * self.cols() + col]
    }

    /// Block `B_{l,r}` as a `c x (c-b)` row-major slice of flags.
    pub fn block(&self, l: usize, r: usize) -> Vec<bool> {
        let nb = self.c - self.b;
        let mut out = Vec::with_capacity(self.c * nb);
        for g in 0..self.c {
            for e in 0..nb {
                out.push(self.get(l * self.c + g, r * nb + e));
            }
        }
        out
    }

    pub fn row_weight(&self, row: usize) -> usize {
        (0..self.cols()).filter(|&c| self.get(row, c)).count()
    }

    pub fn col_weight(&self, col: usize) -> usize {
        (0..self.rows()).filter(|&r| self.get(r, col)).count()
    }

    /// True when two rows share two or more columns.
    pub fn has_four_cycle(&self) -> bool {
        let rows: Vec<Vec<usize>> = (0..self.rows())
            .map(|r| (0..self.cols()).filter(|&c| self.get(r, c)).collect())
            .collect();
        for a in 0..rows.len() {
            for b in a + 1..rows.len() {
                let shared = rows[a].iter().filter(|c| rows[b].contains(c)).count();
                if shared >= 2 {
                    return true;
                }
            }
        }
        false
    }
}

/// Number of ways the random step can distribute the systematic-row ones of a
/// `(m_s, 2, 4)` base matrix when only row and column weights are enforced:
/// `(m_s + 1)!`. `None` on overflow.
pub fn binary_ensemble_size(m_s: usize) -> Option<u128> {
    (1..=(m_s as u128 + 1)).try_fold(1u128, |acc, n| acc.checked_mul(n))
}

/// `log2` of `(m_s+1)! * (2^p - 1)^(4(m_s+1))`, the number of labelled
/// `(m_s, 2, 4)` syndrome formers.
pub fn ensemble_size_log2(m_s: usize, p: u32) -> f64 {
    let fact: f64 = (1..=m_s + 1).map(|n| (n as f64).log2()).sum();
    fact + 4.0 * (m_s as f64 + 1.0) * (((1u64 << p) - 1) as f64).log2()
}

struct Placement {
    cols: usize,
    ones: Vec<bool>,
    row_adj: Vec<Vec<usize>>,
    col_adj: Vec<Vec<usize>>,
}

impl Placement {
    fn new(rows: usize, cols: usize) -> Self {
        Placement {
            cols,
            ones: vec![false; rows * cols],
            row_adj: vec![Vec::new(); rows],
            col_adj: vec![Vec::new(); cols],
        }
    }

    fn set(&mut self, row: usize, col: usize) {
        debug_assert!(!self.ones[row * self.cols + col]);
        self.ones[row * self.cols + col] = true;
        self.row_adj[row].push(col);
        self.col_adj[col].push(row);
    }

    fn closes_four_cycle(&self, row: usize, col: usize) -> bool {
        self.col_adj[col].iter().any(|&other| {
            other != row && self.row_adj[row].iter().any(|c| self.row_adj[other].contains(c))
        })
    }
}

/// Builds a random 4-cycle-free base matrix for a rate-1/2 `(m_s, J, 2J)` code.
pub fn build_base_matrix(m_s: usize, j: usize, k: usize, seed: u64) -> Result<BaseMatrix, CodeError> {
    if j < 2 || k != 2 * j {
        return Err(CodeError::Unsupported(format!(
            "(J, K) = ({j}, {k}); the base-matrix construction needs K = 2J >= 4"
        )));
    }
    if m_s < 1 {
        return Err(CodeError::Unsupported("m_s must be at least 1".into()));
    }
    let (c, b) = (2usize, 1usize);
    let t = m_s + 1;
    let rows = c * t;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..MAX_CONSTRUCTION_RESTARTS {
        let mut pl = Placement::new(rows, t);
        for l in 0..t {
            pl.set(2 * l, l);
            pl.set(2 * l + 1, l);
            pl.set(2 * l + 1, (l + t - 1) % t);
        }
        let mut row_need: Vec<usize> = (0..rows)
            .map(|r| j.saturating_sub(pl.row_adj[r].len()))
            .collect();
        let mut col_need: Vec<usize> = (0..t).map(|r| k.saturating_sub(pl.col_adj[r].len())).collect();

        let mut stuck = false;
        loop {
            let open: Vec<usize> = (0..rows).filter(|&r| row_need[r] > 0).collect();
            let Some(&row) = open.choose(&mut rng) else { break };
            let l = row / c;
            let candidates: Vec<usize> = (0..t)
                .filter(|&r| {
                    col_need[r] > 0
                        && !pl.ones[(c * l) * t + r]
                        && !pl.ones[(c * l + 1) * t + r]
                        && !pl.closes_four_cycle(row, r)
                })
                .collect();
            let Some(&col) = candidates.choose(&mut rng) else {
                stuck = true;
                break;
            };
            pl.set(row, col);
            row_need[row] -= 1;
            col_need[col] -= 1;
        }
        if !stuck && col_need.iter().all(|&n| n == 0) {
            return Ok(BaseMatrix { m_s, j, k, c, b, ones: pl.ones });
        }
    }
    Err(CodeError::ConstructionFailure(MAX_CONSTRUCTION_RESTARTS))
}

/// Base matrix with its ones replaced by field coefficients (0 = no edge).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoefficientMatrix {
    pub m_s: usize,
    pub j: usize,
    pub k: usize,
    pub c: usize,
    pub b: usize,
    entries: Vec<Symbol>,
}

impl CoefficientMatrix {
    pub fn cols(&self) -> usize {
        (self.c - self.b) * (self.m_s + 1)
    }

    pub fn get(&self, row: usize, col: usize) -> Symbol {
        self.entries[row * self.cols() + col]
    }
}

/// Labels every edge of `base` with a random nonzero element of `field`,
/// resampling until each check's coefficients are pairwise distinct.
/// Over GF(2) every coefficient is 1 and distinctness is not required.
pub fn assign_coefficients(base: &BaseMatrix, field: &Field, seed: u64) -> Result<CoefficientMatrix, CodeError> {
    let p = field.degree();
    let (rows, cols) = (base.rows(), base.cols());
    let max_col_weight = (0..cols).map(|c| base.col_weight(c)).max().unwrap_or(0);
    if p > 1 && field.order() < max_col_weight {
        return Err(CodeError::InfeasibleCoefficients { p, k: max_col_weight });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = vec![0 as Symbol; rows * cols];
    for col in 0..cols {
        let mut used: Vec<Symbol> = Vec::new();
        for row in 0..rows {
            if !base.get(row, col) {
                continue;
            }
            let h = if p == 1 {
                1
            } else {
                loop {
                    let h = rng.random_range(1..field.size()) as Symbol;
                    if !used.contains(&h) {
                        break h;
                    }
                }
            };
            used.push(h);
            entries[row * cols + col] = h;
        }
    }
    Ok(CoefficientMatrix { m_s: base.m_s, j: base.j, k: base.k, c: base.c, b: base.b, entries })
}

/// Cuts a coefficient matrix along its diagonal to obtain the periodic
/// submatrices `H_i^T(t) = B_{(t-i) mod T, t mod T}` with `T = m_s + 1`.
pub fn diagonal_cut(pre: &CoefficientMatrix, field: Field, seed: u64) -> ConvCode {
    let period = pre.m_s + 1;
    let (c, nb) = (pre.c, pre.c - pre.b);
    let mut blocks = vec![0 as Symbol; period * period * c * nb];
    for t in 0..period {
        for i in 0..period {
            let l = (t + period - i) % period;
            for g in 0..c {
                for e in 0..nb {
                    let h = pre.get(l * c + g, t * nb + e);
                    blocks[((t * period + i) * c + g) * nb + e] = h;
                }
            }
        }
    }
    ConvCode {
        m_s: pre.m_s,
        j: pre.j,
        k: pre.k,
        b: pre.b,
        c: pre.c,
        period,
        seed,
        field,
        blocks,
    }
}

/// Parameters that fully determine a constructed code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeParams {
    pub m_s: usize,
    pub j: usize,
    pub k: usize,
    pub p: u32,
    pub seed: u64,
}

impl CodeParams {
    pub fn new(m_s: usize, j: usize, k: usize, p: u32, seed: u64) -> Self {
        CodeParams { m_s, j, k, p, seed }
    }
}

/// A terminated-ready periodic syndrome former over GF(2^p).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvCode {
    m_s: usize,
    j: usize,
    k: usize,
    b: usize,
    c: usize,
    period: usize,
    seed: u64,
    field: Field,
    // index ((t * (m_s+1) + i) * c + gamma) * (c-b) + eta
    blocks: Vec<Symbol>,
}

impl ConvCode {
    /// Runs the full construction with the default primitive polynomial.
    pub fn build(params: CodeParams) -> Result<ConvCode, CodeError> {
        let field = Field::with_default_poly(params.p)?;
        Self::build_with_field(params, field)
    }

    pub fn build_with_field(params: CodeParams, field: Field) -> Result<ConvCode, CodeError> {
        let base = build_base_matrix(params.m_s, params.j, params.k, params.seed)?;
        let coeffs = assign_coefficients(&base, &field, params.seed ^ 0x9E37_79B9_7F4A_7C15)?;
        Ok(diagonal_cut(&coeffs, field, params.seed))
    }

    /// Assembles a code from raw blocks laid out as in [`ConvCode::submatrix`].
    #[allow(clippy::too_many_arguments)]
    pub fn from_blocks(
        field: Field,
        m_s: usize,
        j: usize,
        k: usize,
        b: usize,
        c: usize,
        period: usize,
        seed: u64,
        blocks: Vec<Symbol>,
    ) -> Result<ConvCode, CodeError> {
        if b == 0 || b >= c || period == 0 {
            return Err(CodeError::Unsupported(format!("b={b}, c={c}, T={period}")));
        }
        if blocks.len() != period * (m_s + 1) * c * (c - b) {
            return Err(CodeError::Unsupported("block count does not match shape".into()));
        }
        if let Some(&bad) = blocks.iter().find(|&&h| !field.contains(h)) {
            return Err(CodeError::Unsupported(format!("coefficient {bad} outside the field")));
        }
        Ok(ConvCode { m_s, j, k, b, c, period, seed, field, blocks })
    }

    pub fn m_s(&self) -> usize {
        self.m_s
    }
    pub fn j(&self) -> usize {
        self.j
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn b(&self) -> usize {
        self.b
    }
    pub fn c(&self) -> usize {
        self.c
    }
    /// Number of checks per time unit, `c - b`.
    pub fn checks_per_time(&self) -> usize {
        self.c - self.b
    }
    pub fn period(&self) -> usize {
        self.period
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn field(&self) -> &Field {
        &self.field
    }
    pub fn p(&self) -> u32 {
        self.field.degree()
    }

    /// Constraint length in symbols, `(m_s + 1) c`.
    pub fn constraint_length(&self) -> usize {
        (self.m_s + 1) * self.c
    }

    /// Constraint length in bits, `(m_s + 1) c p`.
    pub fn constraint_bit_length(&self) -> usize {
        self.constraint_length() * self.p() as usize
    }

    /// Bits held by a shift-register encoder, `(m_s c + b) p`.
    pub fn encoder_memory_bits(&self) -> usize {
        (self.m_s * self.c + self.b) * self.p() as usize
    }

    /// Coefficient `h_i^{(gamma, eta)}(t)`; zero-based `gamma`, `eta`.
    #[inline]
    pub fn coeff(&self, i: usize, t: usize, gamma: usize, eta: usize) -> Symbol {
        let nb = self.c - self.b;
        self.blocks[(((t % self.period) * (self.m_s + 1) + i) * self.c + gamma) * nb + eta]
    }

    /// `H_i^T(t)` as a `c x (c-b)` row-major slice.
    pub fn submatrix(&self, i: usize, t: usize) -> Result<&[Symbol], CodeError> {
        if i > self.m_s {
            return Err(CodeError::IndexOutOfRange { i, m_s: self.m_s });
        }
        let len = self.c * (self.c - self.b);
        let start = ((t % self.period) * (self.m_s + 1) + i) * len;
        Ok(&self.blocks[start..start + len])
    }

    #[cfg(test)]
    pub(crate) fn submatrix_mut(&mut self, i: usize, t: usize) -> &mut [Symbol] {
        let len = self.c * (self.c - self.b);
        let start = ((t % self.period) * (self.m_s + 1) + i) * len;
        &mut self.blocks[start..start + len]
    }

    /// Nonzero entries of check `eta` at time `t_check`, restricted to symbol
    /// times `>= 0`, as `(symbol_time, gamma, coefficient)`.
    pub fn check_support(&self, t_check: usize, eta: usize) -> impl Iterator<Item = (usize, usize, Symbol)> + '_ {
        (0..=self.m_s.min(t_check)).flat_map(move |i| {
            (0..self.c).filter_map(move |g| {
                let h = self.coeff(i, t_check, g, eta);
                (h != 0).then_some((t_check - i, g, h))
            })
        })
    }

    /// Serializes the code in its text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {} {}",
            self.p(),
            self.m_s,
            self.j,
            self.k,
            self.b,
            self.c,
            self.period,
            self.field.primitive_poly(),
            self.seed
        );
        let len = self.c * (self.c - self.b);
        for block in self.blocks.chunks(len) {
            let line: Vec<String> = block.iter().map(|h| h.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    /// Parses the text format written by [`ConvCode::to_text`].
    pub fn from_text(text: &str) -> Result<ConvCode, CodeError> {
        let err = |line: usize, msg: String| CodeError::Parse { line, msg };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or_else(|| err(1, "empty code file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 9 {
            return Err(err(hline + 1, format!("expected 9 header fields, found {}", fields.len())));
        }
        let num = |i: usize| -> Result<u64, CodeError> {
            fields[i]
                .parse::<u64>()
                .map_err(|e| err(hline + 1, format!("header field {}: {e}", i + 1)))
        };
        let p = num(0)? as u32;
        let (m_s, j, k, b, c, period) = (
            num(1)? as usize,
            num(2)? as usize,
            num(3)? as usize,
            num(4)? as usize,
            num(5)? as usize,
            num(6)? as usize,
        );
        let poly = num(7)? as u32;
        let seed = num(8)?;
        let field = Field::new(p, poly).map_err(|e| err(hline + 1, e.to_string()))?;
        if b == 0 || b >= c {
            return Err(err(hline + 1, format!("need 0 < b < c, got b={b}, c={c}")));
        }
        let len = c * (c - b);
        let expected_blocks = period * (m_s + 1);
        let mut blocks = Vec::with_capacity(expected_blocks * len);
        for _ in 0..expected_blocks {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| err(text.lines().count() + 1, "unexpected end of file".into()))?;
            let vals = line
                .split_whitespace()
                .map(|v| v.parse::<Symbol>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(ln + 1, e.to_string()))?;
            if vals.len() != len {
                return Err(err(ln + 1, format!("expected {len} coefficients, found {}", vals.len())));
            }
            if let Some(v) = vals.iter().find(|&&v| !field.contains(v)) {
                return Err(err(ln + 1, format!("coefficient {v} outside GF(2^{p})")));
            }
            blocks.extend(vals);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(err(ln + 1, "trailing data after last block".into()));
        }
        ConvCode::from_blocks(field, m_s, j, k, b, c, period, seed, blocks)
    }
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub row_weight_ok: bool,
    pub col_weight_ok: bool,
    pub girth_gt4: bool,
    pub h0_systematic_ok: bool,
    pub hms_nonzero_ok: bool,
    pub coeff_distinct_ok: bool,
    pub details: Vec<String>,
}

impl ValidationReport {
    pub fn all_ok(&self) -> bool {
        self.row_weight_ok
            && self.col_weight_ok
            && self.girth_gt4
            && self.h0_systematic_ok
            && self.hms_nonzero_ok
            && self.coeff_distinct_ok
    }
}

/// Checks the structural invariants of `code` on the terminated window of
/// `n + z` time units.
///
/// Symbols whose checks would extend past the window and checks at times
/// `< m_s` (which see truncated history) are exempt from the weight tests.
pub fn validate(code: &ConvCode, n: usize, z: usize) -> ValidationReport {
    let mut rep = ValidationReport {
        row_weight_ok: true,
        col_weight_ok: true,
        girth_gt4: true,
        h0_systematic_ok: true,
        hms_nonzero_ok: true,
        coeff_distinct_ok: true,
        details: Vec::new(),
    };
    let (c, b, nb, m_s) = (code.c, code.b, code.c - code.b, code.m_s);
    let times = n + z;

    for t in 0..code.period {
        let h0 = code.submatrix(0, t).unwrap();
        for row in b..c {
            for e in 0..nb {
                let h = h0[row * nb + e];
                let on_diag = row - b == e;
                if (on_diag && h == 0) || (!on_diag && h != 0) {
                    rep.h0_systematic_ok = false;
                    rep.details.push(format!(
                        "H_0(t={t}) parity rows are not diagonal with nonzero diagonal at ({row}, {e})"
                    ));
                }
            }
        }
        if code.submatrix(m_s, t).unwrap().iter().all(|&h| h == 0) {
            rep.hms_nonzero_ok = false;
            rep.details.push(format!("H_{m_s}(t={t}) is the zero matrix"));
        }
    }

    // symbol index -> checks it touches
    let mut sym_checks: Vec<Vec<usize>> = vec![Vec::new(); times * c];
    for tc in 0..times {
        for e in 0..nb {
            let check = tc * nb + e;
            let support: Vec<_> = code.check_support(tc, e).collect();
            if tc >= m_s && support.len() != code.k {
                rep.col_weight_ok = false;
                rep.details.push(format!("check {check} has weight {}, expected {}", support.len(), code.k));
            }
            if code.p() > 1 {
                for (a, &(_, _, ha)) in support.iter().enumerate() {
                    if support[a + 1..].iter().any(|&(_, _, hb)| hb == ha) {
                        rep.coeff_distinct_ok = false;
                        rep.details.push(format!("check {check} repeats coefficient {ha}"));
                        break;
                    }
                }
            }
            for (ts, g, _) in support {
                sym_checks[ts * c + g].push(check);
            }
        }
    }
    for (sym, checks) in sym_checks.iter().enumerate() {
        if sym / c + m_s < times && checks.len() != code.j {
            rep.row_weight_ok = false;
            rep.details.push(format!("symbol {sym} has weight {}, expected {}", checks.len(), code.j));
        }
    }

    // 4-cycle: two symbols sharing two checks
    let mut check_syms: Vec<Vec<usize>> = vec![Vec::new(); times * nb];
    for (sym, checks) in sym_checks.iter().enumerate() {
        for &ch in checks {
            check_syms[ch].push(sym);
        }
    }
    let mut count = vec![0u32; times * c];
    let mut touched = Vec::new();
    'outer: for (sym, checks) in sym_checks.iter().enumerate() {
        for &ch in checks {
            for &other in &check_syms[ch] {
                if other == sym {
                    continue;
                }
                count[other] += 1;
                touched.push(other);
                if count[other] >= 2 {
                    rep.girth_gt4 = false;
                    rep.details.push(format!("symbols {sym} and {other} share two checks"));
                    break 'outer;
                }
            }
        }
        for &o in &touched {
            count[o] = 0;
        }
        touched.clear();
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mother(m_s: usize, p: u32, seed: u64) -> ConvCode {
        ConvCode::build(CodeParams::new(m_s, 2, 4, p, seed)).unwrap()
    }

    #[test]
    fn base_matrix_shape_and_mandatory_blocks() {
        let base = build_base_matrix(5, 2, 4, 1).unwrap();
        assert_eq!((base.rows(), base.cols()), (12, 6));
        for l in 0..6 {
            assert_eq!(base.block(l, l), vec![true, true]);
            assert_eq!(base.block(l, (l + 5) % 6), vec![false, true]);
        }
        for r in 0..12 {
            assert_eq!(base.row_weight(r), 2);
        }
        for c in 0..6 {
            assert_eq!(base.col_weight(c), 4);
        }
        assert!(!base.has_four_cycle());
    }

    #[test]
    fn off_diagonal_blocks_hold_a_single_one() {
        for seed in 0..20 {
            let base = build_base_matrix(7, 2, 4, seed).unwrap();
            for l in 0..8 {
                for r in 0..8 {
                    let ones = base.block(l, r).iter().filter(|&&x| x).count();
                    if r == l {
                        assert_eq!(ones, 2);
                    } else {
                        assert!(ones <= 1);
                    }
                }
            }
        }
    }

    #[test]
    fn general_three_six_construction() {
        let base = build_base_matrix(20, 3, 6, 4).unwrap();
        assert!((0..base.rows()).all(|r| base.row_weight(r) == 3));
        assert!((0..base.cols()).all(|c| base.col_weight(c) == 6));
        assert!(!base.has_four_cycle());
    }

    #[test]
    fn too_small_memory_fails() {
        // with T = 4 every completion closes a 4-cycle
        assert_eq!(build_base_matrix(3, 2, 4, 0), Err(CodeError::ConstructionFailure(MAX_CONSTRUCTION_RESTARTS)));
        assert!(matches!(build_base_matrix(5, 2, 5, 0), Err(CodeError::Unsupported(_))));
    }

    #[test]
    fn gf2_coefficients_are_all_one() {
        let base = build_base_matrix(5, 2, 4, 3).unwrap();
        let f = Field::with_default_poly(1).unwrap();
        let cm = assign_coefficients(&base, &f, 9).unwrap();
        for r in 0..base.rows() {
            for c in 0..base.cols() {
                assert_eq!(cm.get(r, c), base.get(r, c) as Symbol);
            }
        }
    }

    #[test]
    fn infeasible_coefficients() {
        let base = build_base_matrix(5, 2, 4, 3).unwrap();
        let f = Field::with_default_poly(2).unwrap();
        assert_eq!(
            assign_coefficients(&base, &f, 0),
            Err(CodeError::InfeasibleCoefficients { p: 2, k: 4 })
        );
    }

    #[test]
    fn cut_matches_block_reading() {
        let base = build_base_matrix(5, 2, 4, 11).unwrap();
        let f = Field::with_default_poly(8).unwrap();
        let cm = assign_coefficients(&base, &f, 12).unwrap();
        let code = diagonal_cut(&cm, f, 11);
        assert_eq!(code.period(), 6);
        for t in 0..6 {
            for i in 0..=5 {
                let h = code.submatrix(i, t).unwrap();
                assert_eq!(h.len(), 2);
                let l = (t + 6 - i) % 6;
                assert_eq!(h, &[cm.get(2 * l, t), cm.get(2 * l + 1, t)]);
            }
        }
    }

    #[test]
    fn submatrix_period_and_range() {
        let code = mother(5, 8, 2);
        for t in 0..12 {
            for i in 0..=5 {
                assert_eq!(code.submatrix(i, t).unwrap(), code.submatrix(i, t + 6).unwrap());
            }
            let h0 = code.submatrix(0, t).unwrap();
            assert!(h0[1] != 0);
        }
        assert_eq!(code.submatrix(6, 0), Err(CodeError::IndexOutOfRange { i: 6, m_s: 5 }));
    }

    #[test]
    fn degree_profile_of_5_2_4() {
        let code = mother(5, 8, 5);
        let times = 40;
        let mut sym_deg = vec![0; times * 2];
        for tc in 0..times {
            let sup: Vec<_> = code.check_support(tc, 0).collect();
            if tc >= 5 {
                assert_eq!(sup.len(), 4);
            }
            for (ts, g, _) in sup {
                sym_deg[ts * 2 + g] += 1;
            }
        }
        for t in 0..times - 5 {
            assert_eq!(sym_deg[2 * t], 2);
            assert_eq!(sym_deg[2 * t + 1], 2);
        }
    }

    #[test]
    fn constructed_codes_validate() {
        for (m_s, p) in [(5, 8), (26, 4), (52, 8)] {
            let code = mother(m_s, p, 7);
            let rep = validate(&code, 200, m_s);
            assert!(rep.all_ok(), "{:?}", rep.details);
        }
    }

    #[test]
    fn validation_catches_injected_faults() {
        let mut code = mother(5, 8, 1);
        // duplicate a coefficient inside one check
        let support: Vec<_> = code.check_support(10, 0).collect();
        let (t0, g0, h0) = support[0];
        let (t1, g1, _) = support[1];
        code.submatrix_mut(10 - t1, 10)[g1] = h0;
        let _ = (t0, g0);
        let rep = validate(&code, 50, 5);
        assert!(!rep.coeff_distinct_ok);

        let mut code = mother(5, 8, 1);
        code.submatrix_mut(5, 3).iter_mut().for_each(|h| *h = 0);
        let rep = validate(&code, 50, 5);
        assert!(!rep.hms_nonzero_ok);
        assert!(!rep.all_ok());

        let mut code = mother(5, 8, 1);
        code.submatrix_mut(0, 2)[1] = 0;
        assert!(!validate(&code, 50, 5).h0_systematic_ok);
    }

    #[test]
    fn construction_is_deterministic() {
        assert_eq!(mother(26, 4, 99), mother(26, 4, 99));
        assert_ne!(mother(26, 4, 99), mother(26, 4, 100));
    }

    #[test]
    fn text_round_trip() {
        let code = mother(5, 8, 17);
        let text = code.to_text();
        let back = ConvCode::from_text(&text).unwrap();
        assert_eq!(back, code);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let code = mother(5, 4, 17);
        let mut lines: Vec<String> = code.to_text().lines().map(String::from).collect();
        lines[3] = "1 x".into();
        match ConvCode::from_text(&lines.join("\n")) {
            Err(CodeError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(ConvCode::from_text("4 5 2 4"), Err(CodeError::Parse { line: 1, .. })));
        lines[3] = "1 99".into();
        assert!(matches!(ConvCode::from_text(&lines.join("\n")), Err(CodeError::Parse { line: 4, .. })));
    }

    #[test]
    fn ensemble_counts() {
        assert_eq!(binary_ensemble_size(5), Some(720));
        let expected = 720f64.log2() + 24.0 * 255f64.log2();
        assert!((ensemble_size_log2(5, 8) - expected).abs() < 1e-9);
    }
}
