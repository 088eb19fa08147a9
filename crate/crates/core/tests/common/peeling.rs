//! Finite-length BEC decoding of (J, K)-regular graphs whose symbols live in
//! GF(2)^p and whose edges carry random invertible binary matrices.
//!
//! Messages are the sets of values a symbol can still take, stored as
//! membership bitmasks over the 2^p vectors (p <= 3). Under the all-zero
//! codeword these sets are subspaces that only ever shrink, so a worklist
//! schedule reaches the same fixed point as flooding.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

type Set = u16;

fn members(set: Set) -> impl Iterator<Item = usize> {
    (0..16).filter(move |&x| set >> x & 1 == 1)
}

/// Every invertible p x p binary matrix, as the table x -> A x.
fn general_linear_group(p: u32) -> Vec<Vec<u8>> {
    let q = 1usize << p;
    let mut out = Vec::new();
    let mut cols = vec![1usize; p as usize];
    loop {
        let table: Vec<u8> = (0..q)
            .map(|x| (0..p as usize).filter(|&b| x >> b & 1 == 1).fold(0, |acc, b| acc ^ cols[b]) as u8)
            .collect();
        let mut seen = vec![false; q];
        table.iter().for_each(|&y| seen[y as usize] = true);
        if seen.iter().all(|&s| s) {
            out.push(table);
        }
        // next column tuple
        let mut i = 0;
        while i < cols.len() {
            cols[i] += 1;
            if cols[i] < q {
                break;
            }
            cols[i] = 1;
            i += 1;
        }
        if i == cols.len() {
            return out;
        }
    }
}

pub struct LabeledGraph {
    p: u32,
    j: usize,
    // edge e belongs to symbol e / j
    edge_check: Vec<usize>,
    check_edges: Vec<Vec<usize>>,
    edge_label: Vec<usize>,
    // per label and set: image and preimage
    image: Vec<Vec<Set>>,
    preimage: Vec<Vec<Set>>,
    // span of the union of two sets
    sum: Vec<Set>,
}

impl LabeledGraph {
    pub fn sample(n: usize, j: usize, k: usize, p: u32, seed: u64) -> Self {
        assert!((1..=3).contains(&p) && n * j % k == 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = n * j / k;
        let mut sockets: Vec<usize> = (0..n * j).map(|s| s / k).collect();
        sockets.shuffle(&mut rng);
        let mut check_edges = vec![Vec::with_capacity(k); m];
        for (e, &c) in sockets.iter().enumerate() {
            check_edges[c].push(e);
        }
        let group = general_linear_group(p);
        let edge_label = (0..n * j).map(|_| rng.random_range(0..group.len())).collect();
        let q = 1usize << p;
        let sets = 1usize << q;
        let image = group
            .iter()
            .map(|a| (0..sets).map(|s| members(s as Set).fold(0, |acc, x| acc | 1 << a[x])).collect())
            .collect();
        let preimage = group
            .iter()
            .map(|a| (0..sets).map(|s| (0..q).filter(|&x| s >> a[x] & 1 == 1).fold(0, |acc, x| acc | 1 << x)).collect())
            .collect();
        let mut sum = vec![0; sets * sets];
        for a in 0..sets {
            for b in 0..sets {
                let mut out = a as Set;
                for v in members(b as Set) {
                    out |= members(out).fold(0, |acc, x| acc | 1 << (x ^ v));
                }
                sum[a * sets + b] = out;
            }
        }
        LabeledGraph { p, j, edge_check: sockets, check_edges, edge_label, image, preimage, sum }
    }

    pub fn symbols(&self) -> usize {
        self.edge_check.len() / self.j
    }

    fn add(&self, a: Set, b: Set) -> Set {
        self.sum[a as usize * (1 << (1 << self.p)) + b as usize]
    }

    /// Erases each bit with probability `eps`, decodes to the fixed point
    /// and returns the fraction of symbols left undetermined.
    pub fn residual(&self, eps: f64, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = 1usize << self.p;
        let n = self.symbols();
        let channel: Vec<Set> = (0..n)
            .map(|_| {
                let erased = (0..self.p).filter(|_| rng.random_bool(eps)).fold(0usize, |a, b| a | 1 << b);
                (0..q).filter(|&x| x & !erased == 0).fold(0, |acc, x| acc | 1 << x)
            })
            .collect();
        let full: Set = ((1u32 << q) - 1) as Set;
        let mut v2c: Vec<Set> = (0..self.edge_check.len()).map(|e| channel[e / self.j]).collect();
        let mut c2v = vec![full; self.edge_check.len()];
        let mut queued = vec![true; self.check_edges.len()];
        let mut work: VecDeque<usize> = (0..self.check_edges.len()).collect();
        let mut imgs = Vec::new();
        while let Some(c) = work.pop_front() {
            queued[c] = false;
            let ce = &self.check_edges[c];
            imgs.clear();
            imgs.extend(ce.iter().map(|&e| self.image[self.edge_label[e]][v2c[e] as usize]));
            for (i, &e) in ce.iter().enumerate() {
                let others = imgs.iter().enumerate().filter(|&(o, _)| o != i).fold(1, |acc, (_, &s)| self.add(acc, s));
                let msg = self.preimage[self.edge_label[e]][others as usize];
                if msg == c2v[e] {
                    continue;
                }
                c2v[e] = msg;
                let v = e / self.j;
                let es = v * self.j..(v + 1) * self.j;
                for o in es.clone().filter(|&o| o != e) {
                    let out = es.clone().filter(|&x| x != o).fold(channel[v], |acc, x| acc & c2v[x]);
                    if out != v2c[o] {
                        v2c[o] = out;
                        let oc = self.edge_check[o];
                        if !queued[oc] {
                            queued[oc] = true;
                            work.push_back(oc);
                        }
                    }
                }
            }
        }
        let open = (0..n)
            .filter(|&v| (v * self.j..(v + 1) * self.j).fold(channel[v], |acc, e| acc & c2v[e]) != 1)
            .count();
        open as f64 / n as f64
    }
}

/// Bisects for the erasure rate at which a sampled graph stops decoding to
/// a residual below `ok`.
pub fn transition(graph: &LabeledGraph, lo: f64, hi: f64, ok: f64, steps: usize, seed: u64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if graph.residual(mid, seed) < ok {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
