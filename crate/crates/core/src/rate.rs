//! Rate adaptation of the rate-1/2 mother code.
//!
//! Higher rates drop parity symbols according to a periodic [`PuncturePattern`];
//! the receiver reinserts them as uniform messages. The rate-1/4 mode sends a
//! second copy of every coded symbol scaled by a random field element, merged
//! into the channel message once before decoding. Both leave the decoder graph
//! untouched.

use crate::channel::Likelihoods;
use crate::gf::{Field, Symbol};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RateError {
    #[error("expected {expected} transmitted symbols, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid puncture pattern: {0}")]
    Pattern(String),
    #[error("repetition coefficient must be nonzero")]
    DivisionByZero,
    #[error("repetition needs a field with more than two elements")]
    FieldTooSmall,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Periodic keep mask over (time in period, stream).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PuncturePattern {
    period: usize,
    keep: Vec<Vec<bool>>,
}

impl PuncturePattern {
    pub fn new(keep: Vec<Vec<bool>>) -> Result<Self, RateError> {
        let Some(first) = keep.first() else {
            return Err(RateError::Pattern("empty period".into()));
        };
        let width = first.len();
        if width == 0 || keep.iter().any(|row| row.len() != width) {
            return Err(RateError::Pattern("rows must share one nonzero width".into()));
        }
        if keep.iter().any(|row| !row[0]) {
            return Err(RateError::Pattern("systematic stream must be kept".into()));
        }
        Ok(PuncturePattern { period: keep.len(), keep })
    }

    /// Keeps everything.
    pub fn mother(width: usize) -> Self {
        PuncturePattern { period: 1, keep: vec![vec![true; width]] }
    }

    /// Keeps every systematic symbol and the parity of the last time unit of
    /// each period, giving rate `period / (period + 1)`.
    pub fn high_rate(period: usize) -> Self {
        let mut keep = vec![vec![true, false]; period.max(1)];
        keep.last_mut().unwrap()[1] = true;
        PuncturePattern { period: period.max(1), keep }
    }

    /// Pattern for one of the tabulated rates 1/2, 3/4, 5/6, 7/8.
    pub fn for_rate(num: u64, den: u64) -> Option<Self> {
        match (num, den) {
            (1, 2) => Some(Self::mother(2)),
            (3, 4) => Some(Self::high_rate(3)),
            (5, 6) => Some(Self::high_rate(5)),
            (7, 8) => Some(Self::high_rate(7)),
            _ => None,
        }
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn width(&self) -> usize {
        self.keep[0].len()
    }

    pub fn keeps(&self, t: usize, stream: usize) -> bool {
        self.keep[t % self.period][stream]
    }

    /// Kept symbols per period.
    pub fn kept_per_period(&self) -> usize {
        self.keep.iter().flatten().filter(|&&k| k).count()
    }

    /// Rate of the punctured code for `b` information symbols per time unit.
    pub fn rate(&self, b: u64) -> Ratio<u64> {
        Ratio::new(b * self.period as u64, self.kept_per_period() as u64)
    }

    /// Number of kept symbols among the first `times` time units.
    pub fn kept_count(&self, times: usize) -> usize {
        let full = times / self.period * self.kept_per_period();
        let tail: usize = self.keep[..times % self.period]
            .iter()
            .map(|row| row.iter().filter(|&&k| k).count())
            .sum();
        full + tail
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.period);
        for row in &self.keep {
            let flags: Vec<&str> = row.iter().map(|&k| if k { "1" } else { "0" }).collect();
            s.push_str(&flags.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, RateError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line, head) = lines.next().ok_or(RateError::Parse { line: 1, msg: "missing period".into() })?;
        let period: usize = head
            .parse()
            .map_err(|_| RateError::Parse { line, msg: format!("bad period {head:?}") })?;
        let mut keep = Vec::with_capacity(period);
        for (line, l) in lines {
            let row = l
                .split_whitespace()
                .map(|f| match f {
                    "1" => Ok(true),
                    "0" => Ok(false),
                    _ => Err(RateError::Parse { line, msg: format!("bad flag {f:?}") }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            keep.push(row);
        }
        if keep.len() != period {
            return Err(RateError::Parse {
                line: text.lines().count(),
                msg: format!("expected {period} rows, got {}", keep.len()),
            });
        }
        Self::new(keep)
    }
}

/// Removes punctured positions from a flat `times × width` symbol stream.
pub fn puncture(v: &[Symbol], pattern: &PuncturePattern) -> Vec<Symbol> {
    let w = pattern.width();
    v.iter()
        .enumerate()
        .filter(|(i, _)| pattern.keeps(i / w, i % w))
        .map(|(_, &s)| s)
        .collect()
}

/// Expands kept-symbol messages to the full stream, uniform where punctured.
pub fn depuncture_init(
    kept: &Likelihoods,
    pattern: &PuncturePattern,
    times: usize,
) -> Result<Likelihoods, RateError> {
    let expected = pattern.kept_count(times);
    if kept.len() != expected {
        return Err(RateError::LengthMismatch { expected, got: kept.len() });
    }
    let w = pattern.width();
    let mut out = Likelihoods::uniform(kept.q(), times * w);
    let mut next = 0;
    for i in 0..times * w {
        if pattern.keeps(i / w, i % w) {
            out.set(i, kept.get(next));
            next += 1;
        }
    }
    Ok(out)
}

/// Per-symbol repetition coefficients; `None` means the symbol is sent once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepetitionPlan {
    width: usize,
    coeffs: Vec<Option<Symbol>>,
}

impl RepetitionPlan {
    /// Repeats every symbol of `times` time units, coefficients uniform over
    /// the field minus {0, 1}.
    pub fn full(field: &Field, times: usize, width: usize, seed: u64) -> Result<Self, RateError> {
        if field.size() <= 2 {
            return Err(RateError::FieldTooSmall);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = field.size() as Symbol;
        let coeffs = (0..times * width).map(|_| Some(rng.random_range(2..q))).collect();
        Ok(RepetitionPlan { width, coeffs })
    }

    pub fn from_coefficients(width: usize, coeffs: Vec<Option<Symbol>>) -> Result<Self, RateError> {
        if coeffs.iter().any(|c| matches!(c, Some(0))) {
            return Err(RateError::DivisionByZero);
        }
        Ok(RepetitionPlan { width, coeffs })
    }

    pub fn coefficient(&self, index: usize) -> Option<Symbol> {
        self.coeffs.get(index).copied().flatten()
    }

    pub fn repeats(&self) -> usize {
        self.coeffs.iter().filter(|c| c.is_some()).count()
    }
}

/// Emits, per time unit, the symbols followed by their scaled repeats.
pub fn multiplicative_repeat(v: &[Symbol], plan: &RepetitionPlan, field: &Field) -> Vec<Symbol> {
    let w = plan.width;
    let mut out = Vec::with_capacity(v.len() * 2);
    for (t, slice) in v.chunks(w).enumerate() {
        out.extend_from_slice(slice);
        for (j, &s) in slice.iter().enumerate() {
            if let Some(a) = plan.coefficient(t * w + j) {
                out.push(field.mul(a, s));
            }
        }
    }
    out
}

/// Folds the message of a repeat `α·s` into the message of `s`.
pub fn merge_repeat_likelihoods(
    field: &Field,
    base: &[f64],
    repeat_obs: &[f64],
    alpha: Symbol,
) -> Result<Vec<f64>, RateError> {
    if alpha == 0 {
        return Err(RateError::DivisionByZero);
    }
    let mut out: Vec<f64> = (0..base.len())
        .map(|s| base[s] * repeat_obs[field.mul(alpha, s as Symbol) as usize])
        .collect();
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        out.iter_mut().for_each(|x| *x /= total);
    } else {
        // contradictory observations; keep the first
        out.copy_from_slice(base);
    }
    Ok(out)
}

/// A puncture pattern optionally followed by multiplicative repetition of
/// the kept symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatePlan {
    pub pattern: PuncturePattern,
    pub repetition: Option<RepetitionPlan>,
}

impl RatePlan {
    pub fn mother(width: usize) -> Self {
        RatePlan { pattern: PuncturePattern::mother(width), repetition: None }
    }

    /// Symbols sent for a stream of `times` time units.
    pub fn transmitted_len(&self, times: usize) -> usize {
        let w = self.pattern.width();
        let repeats = match &self.repetition {
            None => 0,
            Some(r) => (0..times * w)
                .filter(|&i| self.pattern.keeps(i / w, i % w) && r.coefficient(i).is_some())
                .count(),
        };
        self.pattern.kept_count(times) + repeats
    }

    /// Rate of `info_symbols` carried over `times` time units.
    pub fn rate(&self, info_symbols: usize, times: usize) -> Ratio<u64> {
        Ratio::new(info_symbols as u64, self.transmitted_len(times) as u64)
    }

    /// Transmitted stream: per time unit, kept symbols then their repeats.
    pub fn transmit(&self, v: &[Symbol], field: &Field) -> Vec<Symbol> {
        let w = self.pattern.width();
        let mut out = Vec::with_capacity(v.len() * 2);
        for (t, slice) in v.chunks(w).enumerate() {
            let kept: Vec<usize> = (0..slice.len()).filter(|&j| self.pattern.keeps(t, j)).collect();
            out.extend(kept.iter().map(|&j| slice[j]));
            if let Some(r) = &self.repetition {
                for &j in &kept {
                    if let Some(a) = r.coefficient(t * w + j) {
                        out.push(field.mul(a, slice[j]));
                    }
                }
            }
        }
        out
    }

    /// Inverts [`RatePlan::transmit`] on the message level, producing one
    /// message per mother-code symbol.
    pub fn receive(&self, rx: &Likelihoods, field: &Field, times: usize) -> Result<Likelihoods, RateError> {
        let expected = self.transmitted_len(times);
        if rx.len() != expected {
            return Err(RateError::LengthMismatch { expected, got: rx.len() });
        }
        let w = self.pattern.width();
        let mut out = Likelihoods::uniform(rx.q(), times * w);
        let mut next = 0;
        for t in 0..times {
            let kept: Vec<usize> = (0..w).filter(|&j| self.pattern.keeps(t, j)).collect();
            for &j in &kept {
                out.set(t * w + j, rx.get(next));
                next += 1;
            }
            if let Some(r) = &self.repetition {
                for &j in &kept {
                    if let Some(a) = r.coefficient(t * w + j) {
                        let merged = merge_repeat_likelihoods(field, out.get(t * w + j), rx.get(next), a)?;
                        out.set(t * w + j, &merged);
                        next += 1;
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_rates() {
        assert_eq!(PuncturePattern::for_rate(3, 4).unwrap().rate(1), Ratio::new(3, 4));
        assert_eq!(PuncturePattern::for_rate(5, 6).unwrap().rate(1), Ratio::new(5, 6));
        assert_eq!(PuncturePattern::for_rate(7, 8).unwrap().rate(1), Ratio::new(7, 8));
        assert_eq!(PuncturePattern::for_rate(1, 2).unwrap().rate(1), Ratio::new(1, 2));
        assert!(PuncturePattern::for_rate(2, 3).is_none());
    }

    #[test]
    fn puncture_counts() {
        let v: Vec<Symbol> = (0..6).collect();
        let p = PuncturePattern::for_rate(3, 4).unwrap();
        assert_eq!(puncture(&v, &p), vec![0, 2, 4, 5]);
        let v: Vec<Symbol> = (0..14).collect();
        let p = PuncturePattern::for_rate(7, 8).unwrap();
        assert_eq!(puncture(&v, &p).len(), 8);
        assert_eq!(puncture(&v, &PuncturePattern::mother(2)), v);
    }

    #[test]
    fn systematic_always_kept() {
        for (n, d) in [(3, 4), (5, 6), (7, 8)] {
            let p = PuncturePattern::for_rate(n, d).unwrap();
            assert!((0..100).all(|t| p.keeps(t, 0)));
        }
        assert!(PuncturePattern::new(vec![vec![false, true]]).is_err());
    }

    #[test]
    fn kept_count_with_tail() {
        let p = PuncturePattern::for_rate(3, 4).unwrap();
        assert_eq!(p.kept_count(3), 4);
        assert_eq!(p.kept_count(4), 5);
        assert_eq!(p.kept_count(6), 8);
        let v = vec![7; 8];
        assert_eq!(puncture(&v, &p).len(), 5);
    }

    #[test]
    fn depuncture_keeps_observed() {
        let p = PuncturePattern::for_rate(3, 4).unwrap();
        let vecs: Vec<Vec<f64>> = (0..4).map(|i| vec![0.1 * i as f64 + 0.1, 0.9 - 0.1 * i as f64]).collect();
        let kept = Likelihoods::from_vectors(2, &vecs);
        let full = depuncture_init(&kept, &p, 3).unwrap();
        assert_eq!(full.get(0), &vecs[0][..]);
        assert_eq!(full.get(1), &[0.5, 0.5]);
        assert_eq!(full.get(2), &vecs[1][..]);
        assert_eq!(full.get(5), &vecs[3][..]);
        assert!(matches!(
            depuncture_init(&kept, &p, 4),
            Err(RateError::LengthMismatch { expected: 5, got: 4 })
        ));
    }

    #[test]
    fn pattern_text_round_trip() {
        let p = PuncturePattern::for_rate(5, 6).unwrap();
        assert_eq!(PuncturePattern::from_text(&p.to_text()).unwrap(), p);
        assert!(matches!(PuncturePattern::from_text("2\n1 0\n"), Err(RateError::Parse { .. })));
        assert!(matches!(PuncturePattern::from_text("1\n1 x\n"), Err(RateError::Parse { line: 2, .. })));
    }

    #[test]
    fn repetition_plan() {
        let f = Field::with_default_poly(8).unwrap();
        let plan = RepetitionPlan::full(&f, 500, 2, 9).unwrap();
        assert!(plan.coeffs.iter().all(|c| matches!(c, Some(a) if *a >= 2)));
        let v: Vec<Symbol> = (0..20).map(|i| i * 7 % 256).collect();
        let out = multiplicative_repeat(&v, &plan, &f);
        assert_eq!(out.len(), 40);
        assert_eq!(&out[..2], &v[..2]);
        assert_eq!(out[2], f.mul(plan.coefficient(0).unwrap(), v[0]));
        assert_eq!(out[3], f.mul(plan.coefficient(1).unwrap(), v[1]));
        assert_eq!(RepetitionPlan::full(&Field::with_default_poly(1).unwrap(), 1, 2, 0), Err(RateError::FieldTooSmall));
    }

    #[test]
    fn merge_rules() {
        let f = Field::with_default_poly(2).unwrap();
        let base = [0.1, 0.2, 0.3, 0.4];
        let u = [0.25; 4];
        let m = merge_repeat_likelihoods(&f, &base, &u, 3).unwrap();
        for (a, b) in m.iter().zip(&base) {
            assert!((a - b).abs() < 1e-15);
        }
        // s = 2, alpha = 3: repeat carries 3*2 in GF(4)
        let mut d = [0.0; 4];
        d[2] = 1.0;
        let mut r = [0.0; 4];
        r[f.mul(3, 2) as usize] = 1.0;
        assert_eq!(merge_repeat_likelihoods(&f, &d, &r, 3).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(merge_repeat_likelihoods(&f, &d, &r, 0), Err(RateError::DivisionByZero));
    }

    #[test]
    fn merge_matches_posterior() {
        let f = Field::with_default_poly(2).unwrap();
        let base = [0.4, 0.1, 0.3, 0.2];
        let rep = [0.05, 0.5, 0.25, 0.2];
        for alpha in 1..4 {
            let m = merge_repeat_likelihoods(&f, &base, &rep, alpha).unwrap();
            let joint: Vec<f64> = (0..4).map(|s| base[s] * rep[f.mul(alpha, s as Symbol) as usize]).collect();
            let z: f64 = joint.iter().sum();
            for s in 0..4 {
                assert!((m[s] - joint[s] / z).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn plan_round_trip() {
        let f = Field::with_default_poly(4).unwrap();
        let times = 10;
        let plan = RatePlan {
            pattern: PuncturePattern::for_rate(3, 4).unwrap(),
            repetition: Some(RepetitionPlan::full(&f, times, 2, 1).unwrap()),
        };
        let v: Vec<Symbol> = (0..20).map(|i| (i * 5 % 16) as Symbol).collect();
        let tx = plan.transmit(&v, &f);
        assert_eq!(tx.len(), plan.transmitted_len(times));
        let mut rx = Likelihoods::uniform(16, tx.len());
        for (i, &s) in tx.iter().enumerate() {
            rx.set_known(i, s);
        }
        let full = plan.receive(&rx, &f, times).unwrap();
        for (i, &s) in v.iter().enumerate() {
            if plan.pattern.keeps(i / 2, i % 2) {
                assert_eq!(full.get(i)[s as usize], 1.0);
            } else {
                assert_eq!(full.get(i)[0], 1.0 / 16.0);
            }
        }
    }

    #[test]
    fn full_repetition_quarter_rate() {
        let f = Field::with_default_poly(8).unwrap();
        let times = 40;
        let plan = RatePlan { pattern: PuncturePattern::mother(2), repetition: Some(RepetitionPlan::full(&f, times, 2, 3).unwrap()) };
        assert_eq!(plan.rate(times, times), Ratio::new(1, 4));
        assert_eq!(RatePlan::mother(2).rate(times, times), Ratio::new(1, 2));
    }
}
