//! BEC density evolution for (J, K)-regular non-binary ensembles whose edge
//! labels are drawn from GL(GF(2), p).
//!
//! Under the all-zero codeword a message over the BEC is a linear subspace of
//! GF(2)^p (the values still possible). Random invertible labels make every
//! message a uniformly random subspace of its dimension, so the state of
//! density evolution is the distribution of that dimension.
//!
//! For a fixed `a`-dimensional subspace `A` and a uniform `b`-dimensional
//! subspace `B` of GF(2)^p,
//!
//! ```text
//! P(dim(A ∩ B) = k) = [a k]_2 [p-a b-k]_2 2^((a-k)(b-k)) / [p b]_2
//! ```
//!
//! with `[n k]_2` the Gaussian binomial coefficient. A check node adds
//! subspaces (`dim(A+B) = a + b - dim(A∩B)`), a variable node intersects
//! them with the channel subspace spanned by the erased bits.

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeError {
    #[error("unsupported ensemble: {0}")]
    BadParameters(String),
    #[error("bisection bracket inconsistent: eps = {eps} gave {outcome}")]
    NonConvergence { eps: f64, outcome: &'static str },
}

/// Distribution of the dimension of a message subspace, indices `0..=p`.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionDistribution(Vec<f64>);

impl DimensionDistribution {
    pub fn new(probs: Vec<f64>) -> Self {
        DimensionDistribution(probs)
    }

    /// Perfect knowledge: dimension 0 with certainty.
    pub fn known(p: u32) -> Self {
        let mut v = vec![0.0; p as usize + 1];
        v[0] = 1.0;
        DimensionDistribution(v)
    }

    /// Channel message: each of the `p` bits erased independently.
    pub fn channel(eps: f64, p: u32) -> Self {
        let p = p as usize;
        let mut v = vec![0.0; p + 1];
        for (d, x) in v.iter_mut().enumerate() {
            *x = binomial(p, d) * eps.powi(d as i32) * (1.0 - eps).powi((p - d) as i32);
        }
        DimensionDistribution(v)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    /// Probability that the message is not fully determined.
    pub fn undetermined(&self) -> f64 {
        self.0[1..].iter().sum()
    }

    fn normalize(&mut self) {
        let s: f64 = self.0.iter().sum();
        self.0.iter_mut().for_each(|x| *x /= s);
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Gaussian binomial coefficient `[n k]_2` as a float.
pub fn gaussian_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| {
        acc * ((1u64 << (n - i)) - 1) as f64 / ((1u64 << (i + 1)) - 1) as f64
    })
}

/// Precomputed subspace intersection/sum laws for GF(2)^p.
#[derive(Debug, Clone)]
pub struct GlKernel {
    p: usize,
    // [a][b][k] flattened, P(dim(A∩B)=k)
    inter: Vec<f64>,
    // [a][b][s] flattened, P(dim(A+B)=s)
    sum: Vec<f64>,
}

impl GlKernel {
    pub fn new(p: u32) -> Self {
        let p = p as usize;
        let n = p + 1;
        let mut inter = vec![0.0; n * n * n];
        let mut sum = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                let total = gaussian_binomial(p, b);
                for k in 0..=a.min(b) {
                    if p - a < b - k {
                        continue;
                    }
                    let pr = gaussian_binomial(a, k)
                        * gaussian_binomial(p - a, b - k)
                        * 2f64.powi(((a - k) * (b - k)) as i32)
                        / total;
                    inter[(a * n + b) * n + k] = pr;
                    sum[(a * n + b) * n + (a + b - k)] = pr;
                }
            }
        }
        GlKernel { p, inter, sum }
    }

    pub fn degree(&self) -> u32 {
        self.p as u32
    }

    /// `P(dim(A ∩ B) = k)` for fixed `dim A = a` and uniform `dim B = b`.
    pub fn intersection_law(&self, a: usize, b: usize, k: usize) -> f64 {
        let n = self.p + 1;
        self.inter[(a * n + b) * n + k]
    }

    fn combine(&self, x: &[f64], y: &[f64], table: &[f64], out: &mut [f64]) {
        let n = self.p + 1;
        out.fill(0.0);
        for (a, &xa) in x.iter().enumerate() {
            if xa == 0.0 {
                continue;
            }
            for (b, &yb) in y.iter().enumerate() {
                let w = xa * yb;
                if w == 0.0 {
                    continue;
                }
                let row = &table[(a * n + b) * n..(a * n + b + 1) * n];
                for (o, r) in out.iter_mut().zip(row) {
                    *o += w * r;
                }
            }
        }
        // the laws are exact distributions; drift in total mass compounds
        // geometrically under iteration, so pin it back to one
        let s: f64 = out.iter().sum();
        out.iter_mut().for_each(|o| *o /= s);
    }

    /// Dimension law of the sum of `count` independent uniform subspaces.
    pub fn check_output(&self, incoming: &DimensionDistribution, count: usize) -> DimensionDistribution {
        self.fold(&incoming.0, &incoming.0, count.saturating_sub(1), &self.sum)
    }

    /// Dimension law of `channel ∩ B_1 ∩ ... ∩ B_count`.
    pub fn variable_output(
        &self,
        channel: &DimensionDistribution,
        incoming: &DimensionDistribution,
        count: usize,
    ) -> DimensionDistribution {
        self.fold(&channel.0, &incoming.0, count, &self.inter)
    }

    fn fold(&self, start: &[f64], with: &[f64], times: usize, table: &[f64]) -> DimensionDistribution {
        let mut acc = start.to_vec();
        let mut tmp = vec![0.0; self.p + 1];
        for _ in 0..times {
            self.combine(&acc, with, table, &mut tmp);
            std::mem::swap(&mut acc, &mut tmp);
        }
        DimensionDistribution(acc)
    }
}

/// One round of binary BEC density evolution:
/// `eps (1 - (1 - x)^(K-1))^(J-1)`.
pub fn de_step_binary(x: f64, eps: f64, j: usize, k: usize) -> f64 {
    eps * (1.0 - (1.0 - x).powi(k as i32 - 1)).powi(j as i32 - 1)
}

/// One check-then-variable round of GL(GF(2), p) density evolution applied
/// to the variable-to-check message law `state`.
pub fn de_step_gl(
    state: &DimensionDistribution,
    eps: f64,
    j: usize,
    k: usize,
    kernel: &GlKernel,
) -> DimensionDistribution {
    let q = kernel.check_output(state, k - 1);
    let ch = DimensionDistribution::channel(eps, kernel.degree());
    let mut out = kernel.variable_output(&ch, &q, j - 1);
    out.normalize();
    out
}

/// Stopping rule for density-evolution trajectories and bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeConfig {
    /// Bisection stops once the bracket is narrower than this.
    pub tol: f64,
    /// A trajectory succeeds once the undetermined mass falls below this.
    pub target: f64,
    pub max_iters: usize,
}

impl Default for DeConfig {
    fn default() -> Self {
        DeConfig { tol: 1e-6, target: 1e-10, max_iters: 100_000 }
    }
}

// A trajectory whose per-iteration change, relative to the remaining
// undetermined mass, drops below this is taken to sit on a nonzero fixed point.
const STALL: f64 = 1e-12;

fn check_degrees(j: usize, k: usize, p: u32) -> Result<(), DeError> {
    if j < 2 || k < 2 {
        return Err(DeError::BadParameters(format!("(J, K) = ({j}, {k})")));
    }
    if p == 0 || p > 16 {
        return Err(DeError::BadParameters(format!("p = {p}")));
    }
    Ok(())
}

/// Whether uncoupled density evolution at `eps` reaches the target.
pub fn converges_uncoupled(eps: f64, j: usize, k: usize, kernel: &GlKernel, cfg: &DeConfig) -> bool {
    if kernel.degree() == 1 {
        let mut x = eps;
        for _ in 0..cfg.max_iters {
            let next = de_step_binary(x, eps, j, k);
            if next < cfg.target {
                return true;
            }
            if (x - next).abs() < STALL * next {
                return false;
            }
            x = next;
        }
        return false;
    }
    let mut x = DimensionDistribution::channel(eps, kernel.degree());
    for _ in 0..cfg.max_iters {
        let next = de_step_gl(&x, eps, j, k, kernel);
        if next.undetermined() < cfg.target {
            return true;
        }
        let delta = next.0.iter().zip(&x.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if delta < STALL * next.undetermined() {
            return false;
        }
        x = next;
    }
    false
}

fn bisect(cfg: &DeConfig, admissible: impl Fn(f64) -> bool) -> Result<f64, DeError> {
    if !admissible(0.0) {
        return Err(DeError::NonConvergence { eps: 0.0, outcome: "failure" });
    }
    if admissible(1.0) {
        return Err(DeError::NonConvergence { eps: 1.0, outcome: "success" });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > cfg.tol {
        let mid = 0.5 * (lo + hi);
        if admissible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// BP threshold of the (J, K)-regular block ensemble over GL(GF(2), p).
pub fn threshold_uncoupled(j: usize, k: usize, p: u32, cfg: &DeConfig) -> Result<f64, DeError> {
    check_degrees(j, k, p)?;
    let kernel = GlKernel::new(p);
    bisect(cfg, |eps| converges_uncoupled(eps, j, k, &kernel, cfg))
}

/// (J, K, L, w) randomly coupled ensemble with known symbols outside the
/// `L` coupled positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoupledEnsemble {
    pub j: usize,
    pub k: usize,
    pub p: u32,
    /// Number of variable positions.
    pub l: usize,
    /// Smoothing width: a variable at position `i` connects to checks at
    /// positions `i..i+w`, uniformly.
    pub w: usize,
}

impl CoupledEnsemble {
    /// Smoothing width `w = J`.
    pub fn new(j: usize, k: usize, p: u32, l: usize) -> Self {
        CoupledEnsemble { j, k, p, l, w: j }
    }
}

/// Position-resolved state of coupled density evolution.
#[derive(Debug, Clone)]
pub struct CoupledState {
    ens: CoupledEnsemble,
    kernel: GlKernel,
    channel: DimensionDistribution,
    positions: Vec<DimensionDistribution>,
    eps: f64,
}

impl CoupledState {
    pub fn new(ens: CoupledEnsemble, eps: f64) -> Self {
        let channel = DimensionDistribution::channel(eps, ens.p);
        CoupledState {
            kernel: GlKernel::new(ens.p),
            positions: vec![channel.clone(); ens.l],
            channel,
            ens,
            eps,
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn positions(&self) -> &[DimensionDistribution] {
        &self.positions
    }

    /// Variable-to-check law at `i`; positions outside `[0, L)` are known.
    pub fn at(&self, i: isize) -> DimensionDistribution {
        if i < 0 || i as usize >= self.ens.l {
            DimensionDistribution::known(self.ens.p)
        } else {
            self.positions[i as usize].clone()
        }
    }

    fn mix(parts: impl Iterator<Item = DimensionDistribution>, w: usize) -> DimensionDistribution {
        let mut acc: Option<Vec<f64>> = None;
        for d in parts {
            match acc.as_mut() {
                None => acc = Some(d.0),
                Some(a) => a.iter_mut().zip(&d.0).for_each(|(x, y)| *x += y),
            }
        }
        let mut v = acc.unwrap();
        v.iter_mut().for_each(|x| *x /= w as f64);
        DimensionDistribution(v)
    }

    /// One parallel round over all positions. Returns the largest change.
    pub fn step(&mut self) -> f64 {
        let CoupledEnsemble { j, k, l, w, .. } = self.ens;
        // check at position c sees variables c-w+1..=c
        let checks: Vec<DimensionDistribution> = (0..l + w - 1)
            .map(|c| {
                let avg = Self::mix((0..w).map(|d| self.at(c as isize - d as isize)), w);
                self.kernel.check_output(&avg, k - 1)
            })
            .collect();
        let mut delta = 0.0f64;
        for i in 0..l {
            let avg = Self::mix((0..w).map(|d| checks[i + d].clone()), w);
            let mut next = self.kernel.variable_output(&self.channel, &avg, j - 1);
            next.normalize();
            for (a, b) in next.0.iter().zip(&self.positions[i].0) {
                delta = delta.max((a - b).abs());
            }
            self.positions[i] = next;
        }
        delta
    }

    /// Largest undetermined mass over positions.
    pub fn max_undetermined(&self) -> f64 {
        self.positions.iter().map(|d| d.undetermined()).fold(0.0, f64::max)
    }
}

/// Whether coupled density evolution at `eps` reaches the target everywhere.
pub fn converges_coupled(ens: CoupledEnsemble, eps: f64, cfg: &DeConfig) -> bool {
    let mut st = CoupledState::new(ens, eps);
    for _ in 0..cfg.max_iters {
        let delta = st.step();
        let mass = st.max_undetermined();
        if mass < cfg.target {
            return true;
        }
        if delta < STALL * mass {
            return false;
        }
    }
    false
}

/// BP threshold of the coupled ensemble.
pub fn threshold_coupled(ens: CoupledEnsemble, cfg: &DeConfig) -> Result<f64, DeError> {
    check_degrees(ens.j, ens.k, ens.p)?;
    if ens.l == 0 || ens.w == 0 {
        return Err(DeError::BadParameters(format!("L = {}, w = {}", ens.l, ens.w)));
    }
    bisect(cfg, |eps| converges_coupled(ens, eps, cfg))
}

/// Which ensemble a [`ThresholdRow`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ensemble {
    Block,
    Coupled { l: usize },
}

/// One line of a threshold table.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRow {
    pub ensemble: Ensemble,
    pub j: usize,
    pub k: usize,
    pub p: u32,
    pub threshold: f64,
}

impl ThresholdRow {
    /// CSV line `ensemble,J,K,p,L,threshold`; `L` is 0 for block ensembles.
    pub fn csv(&self) -> String {
        let (name, l) = match self.ensemble {
            Ensemble::Block => ("BC", 0),
            Ensemble::Coupled { l } => ("CC", l),
        };
        format!("{name},{},{},{},{l},{:.6}", self.j, self.k, self.p, self.threshold)
    }
}

pub const THRESHOLD_CSV_HEADER: &str = "ensemble,J,K,p,L,threshold";

/// Computes the requested thresholds concurrently; rows keep input order.
pub fn threshold_table(
    requests: &[(Ensemble, usize, usize, u32)],
    cfg: &DeConfig,
) -> Result<Vec<ThresholdRow>, DeError> {
    requests
        .par_iter()
        .map(|&(ensemble, j, k, p)| {
            let threshold = match ensemble {
                Ensemble::Block => threshold_uncoupled(j, k, p, cfg)?,
                Ensemble::Coupled { l } => threshold_coupled(CoupledEnsemble::new(j, k, p, l), cfg)?,
            };
            Ok(ThresholdRow { ensemble, j, k, p, threshold })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_binomials() {
        assert_eq!(gaussian_binomial(2, 1), 3.0);
        assert_eq!(gaussian_binomial(4, 2), 35.0);
        assert_eq!(gaussian_binomial(3, 0), 1.0);
        assert_eq!(gaussian_binomial(2, 3), 0.0);
    }

    /// Counts subspace pairs in GF(2)^p by brute force.
    fn brute_intersection_law(p: usize) -> Vec<Vec<Vec<f64>>> {
        let n = 1usize << p;
        // every subspace as a membership mask over the n vectors
        let mut subspaces: Vec<(u64, usize)> = Vec::new();
        for mask in 1u64..(1u64 << n) {
            if mask & 1 == 0 {
                continue;
            }
            let members: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
            if members.iter().all(|&a| members.iter().all(|&b| mask >> (a ^ b) & 1 == 1)) {
                subspaces.push((mask, members.len().trailing_zeros() as usize));
            }
        }
        let mut law = vec![vec![vec![0.0; p + 1]; p + 1]; p + 1];
        for a in 0..=p {
            let fixed = subspaces.iter().find(|s| s.1 == a).unwrap().0;
            for b in 0..=p {
                let of_dim: Vec<u64> = subspaces.iter().filter(|s| s.1 == b).map(|s| s.0).collect();
                for m in &of_dim {
                    let k = (fixed & m).count_ones().trailing_zeros() as usize;
                    law[a][b][k] += 1.0 / of_dim.len() as f64;
                }
            }
        }
        law
    }

    #[test]
    fn intersection_law_matches_enumeration() {
        for p in 1..=4 {
            let kernel = GlKernel::new(p as u32);
            let law = brute_intersection_law(p);
            for a in 0..=p {
                for b in 0..=p {
                    for k in 0..=p {
                        assert!((kernel.intersection_law(a, b, k) - law[a][b][k]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn binary_fixed_point_at_zero() {
        assert_eq!(de_step_binary(0.0, 0.0, 3, 6), 0.0);
        assert_eq!(de_step_binary(0.5, 0.0, 3, 6), 0.0);
        let k = GlKernel::new(3);
        let s = de_step_gl(&DimensionDistribution::known(3), 0.0, 2, 4, &k);
        assert_eq!(s.undetermined(), 0.0);
    }

    #[test]
    fn gl_step_degenerates_to_binary() {
        let k = GlKernel::new(1);
        for eps in [0.2, 0.33, 0.45, 0.7] {
            let mut x = eps;
            let mut d = DimensionDistribution::channel(eps, 1);
            for _ in 0..200 {
                x = de_step_binary(x, eps, 3, 6);
                d = de_step_gl(&d, eps, 3, 6, &k);
                assert!((d.probs()[1] - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gl_step_is_monotone_in_eps() {
        let k = GlKernel::new(3);
        let s = DimensionDistribution::channel(0.4, 3);
        let lo = de_step_gl(&s, 0.3, 2, 4, &k);
        let hi = de_step_gl(&s, 0.35, 2, 4, &k);
        // first-order stochastic dominance of the dimension
        let mut cl = 0.0;
        let mut ch = 0.0;
        for d in (0..=3).rev() {
            cl += lo.probs()[d];
            ch += hi.probs()[d];
            assert!(ch >= cl - 1e-15);
        }
    }

    #[test]
    fn binary_thresholds() {
        let cfg = DeConfig { max_iters: 10_000_000, ..DeConfig::default() };
        let t = threshold_uncoupled(2, 4, 1, &cfg).unwrap();
        assert!((t - 1.0 / 3.0).abs() < 1e-6, "{t}");
        let t = threshold_uncoupled(3, 6, 1, &DeConfig::default()).unwrap();
        assert!((t - 0.4294).abs() < 1e-4, "{t}");
    }

    #[test]
    fn known_boundary_stays_known() {
        let ens = CoupledEnsemble::new(3, 6, 2, 8);
        let mut st = CoupledState::new(ens, 0.45);
        for _ in 0..20 {
            st.step();
            assert_eq!(st.at(-1).undetermined(), 0.0);
            assert_eq!(st.at(8).undetermined(), 0.0);
        }
        // edges decode first
        assert!(st.positions()[0].undetermined() < st.positions()[4].undetermined());
    }

    #[test]
    fn csv_rows() {
        let r = ThresholdRow { ensemble: Ensemble::Coupled { l: 64 }, j: 2, k: 4, p: 6, threshold: 0.4902341 };
        assert_eq!(r.csv(), "CC,2,4,6,64,0.490234");
        let r = ThresholdRow { ensemble: Ensemble::Block, j: 3, k: 6, p: 1, threshold: 0.42944 };
        assert_eq!(r.csv(), "BC,3,6,1,0,0.429440");
    }

    #[test]
    fn bad_parameters() {
        assert!(threshold_uncoupled(1, 4, 2, &DeConfig::default()).is_err());
        assert!(threshold_coupled(CoupledEnsemble::new(2, 4, 2, 0), &DeConfig::default()).is_err());
    }
}
