//! Depth-first hypothesis enumeration in log space.
//!
//! A hypothesis decides, for every `ℓ` on the first side, either to leave it
//! out or to pair it with an unused `ℓ'`. Writing the log weight as
//!
//! ```text
//! base + Σ_{ℓ skipped} skip(ℓ) + Σ_{(ℓ,ℓ')} take(ℓ, ℓ')
//! base       = ω2 Σ_ℓ' ln(1 - r2)
//! skip(ℓ)    = ω1 ln(1 - r1)
//! take(ℓ,ℓ') = ω1 ln r1 + ω2 (ln r2 - ln(1 - r2)) - d(ℓ, ℓ')
//! ```
//!
//! makes each step of the walk a single addition. The streaming pass keeps
//! only `η` and the pair marginals `β(ℓ, ℓ')`, rescaled against a running
//! maximum so nothing underflows.

use num_bigint::BigUint;
use rayon::prelude::*;

use super::{count_hypotheses, FusionWeights};
use crate::mb::existence_cap;
use crate::scalar::Real;

const PARALLEL_MIN_HYPOTHESES: u64 = 20_000;

/// Log-weight increments for one (sub)problem.
#[derive(Debug, Clone)]
pub(crate) struct PairTable<T> {
    n1: usize,
    n2: usize,
    base: T,
    skip: Vec<T>,
    take: Vec<T>,
}

/// Normalizer and normalized pair marginals of a streamed enumeration.
#[derive(Debug, Clone)]
pub(crate) struct StreamResult<T> {
    pub log_eta: T,
    pub n2: usize,
    /// `β(ℓ, ℓ')`, row-major; each row sums to the fused existence of `ℓ`.
    pub beta: Vec<T>,
    pub visited: u64,
}

impl<T: Real> StreamResult<T> {
    pub fn existence(&self, i: usize) -> T {
        self.beta[i * self.n2..(i + 1) * self.n2]
            .iter()
            .fold(T::zero(), |acc, &b| acc + b)
    }

    pub fn beta(&self, i: usize, j: usize) -> T {
        self.beta[i * self.n2 + j]
    }
}

impl<T: Real> PairTable<T> {
    /// `r1`, `r2` are clamped below one so `ln(1 - r)` stays finite.
    pub fn new(r1: &[T], r2: &[T], w: &FusionWeights<T>, d: impl Fn(usize, usize) -> T) -> Self {
        let cap = existence_cap::<T>();
        let (o1, o2) = (w.omega1(), w.omega2());
        let ln_pair = |r: T| {
            let r = r.min(cap);
            (r.ln(), (T::one() - r).ln())
        };
        let side2: Vec<(T, T)> = r2.iter().map(|&r| ln_pair(r)).collect();
        let base = side2.iter().fold(T::zero(), |acc, p| acc + o2 * p.1);
        let mut skip = Vec::with_capacity(r1.len());
        let mut take = Vec::with_capacity(r1.len() * r2.len());
        for (i, &r) in r1.iter().enumerate() {
            let (ln_r, ln_nr) = ln_pair(r);
            skip.push(o1 * ln_nr);
            for (j, &(ln_r2, ln_nr2)) in side2.iter().enumerate() {
                take.push(o1 * ln_r + o2 * (ln_r2 - ln_nr2) - d(i, j));
            }
        }
        Self {
            n1: r1.len(),
            n2: r2.len(),
            base,
            skip,
            take,
        }
    }

    pub fn count(&self) -> BigUint {
        count_hypotheses(self.n1, self.n2)
    }

    /// Calls `f(pairs, ln w̃)` for every hypothesis in enumeration order.
    pub fn walk(&self, mut f: impl FnMut(&[(usize, usize)], T)) {
        let mut used = vec![false; self.n2];
        let mut path = Vec::with_capacity(self.n1.min(self.n2));
        self.walk_from(0, self.base, &mut used, &mut path, &mut f);
    }

    fn walk_from(
        &self,
        i: usize,
        acc: T,
        used: &mut [bool],
        path: &mut Vec<(usize, usize)>,
        f: &mut impl FnMut(&[(usize, usize)], T),
    ) {
        if i == self.n1 {
            f(path, acc);
            return;
        }
        self.walk_from(i + 1, acc + self.skip[i], used, path, f);
        for j in 0..self.n2 {
            if !used[j] {
                used[j] = true;
                path.push((i, j));
                self.walk_from(i + 1, acc + self.take[i * self.n2 + j], used, path, f);
                path.pop();
                used[j] = false;
            }
        }
    }

    /// Streams every hypothesis into `η` and `β`. With `parallel`, large
    /// problems are split over the choices for the first `ℓ` and merged in
    /// branch order, so the result depends only on the input.
    pub fn stream(&self, parallel: bool) -> StreamResult<T> {
        let big = self.count() >= BigUint::from(PARALLEL_MIN_HYPOTHESES);
        let acc = if parallel && big && self.n1 > 0 {
            (0..=self.n2)
                .into_par_iter()
                .map(|branch| self.stream_branch(branch))
                .collect::<Vec<_>>()
                .into_iter()
                .fold(Accumulator::new(self.n1, self.n2), Accumulator::merge)
        } else {
            let mut acc = Accumulator::new(self.n1, self.n2);
            self.walk(|path, lw| acc.add(path, lw));
            acc
        };
        acc.finish()
    }

    /// Branch 0 skips the first `ℓ`; branch `j + 1` pairs it with `j`.
    fn stream_branch(&self, branch: usize) -> Accumulator<T> {
        let mut acc = Accumulator::new(self.n1, self.n2);
        let mut used = vec![false; self.n2];
        let mut path = Vec::with_capacity(self.n1.min(self.n2));
        let start = if branch == 0 {
            self.base + self.skip[0]
        } else {
            used[branch - 1] = true;
            path.push((0, branch - 1));
            self.base + self.take[branch - 1]
        };
        self.walk_from(1, start, &mut used, &mut path, &mut |p, lw| acc.add(p, lw));
        acc
    }
}

struct Accumulator<T> {
    n2: usize,
    max: T,
    sum: T,
    beta: Vec<T>,
    visited: u64,
}

impl<T: Real> Accumulator<T> {
    fn new(n1: usize, n2: usize) -> Self {
        Self {
            n2,
            max: T::neg_infinity(),
            sum: T::zero(),
            beta: vec![T::zero(); n1 * n2],
            visited: 0,
        }
    }

    fn rescale(&mut self, new_max: T) {
        let s = (self.max - new_max).exp();
        self.sum *= s;
        self.beta.iter_mut().for_each(|b| *b *= s);
        self.max = new_max;
    }

    fn add(&mut self, path: &[(usize, usize)], lw: T) {
        self.visited += 1;
        if !(lw > T::neg_infinity()) {
            return;
        }
        if lw > self.max {
            self.rescale(lw);
        }
        let e = (lw - self.max).exp();
        self.sum += e;
        for &(i, j) in path {
            self.beta[i * self.n2 + j] += e;
        }
    }

    fn merge(mut self, mut other: Self) -> Self {
        self.visited += other.visited;
        if other.max == T::neg_infinity() {
            return self;
        }
        if other.max > self.max {
            self.rescale(other.max);
        } else {
            other.rescale(self.max);
        }
        self.sum += other.sum;
        self.beta
            .iter_mut()
            .zip(&other.beta)
            .for_each(|(a, &b)| *a += b);
        self
    }

    fn finish(self) -> StreamResult<T> {
        if !(self.sum > T::zero()) {
            return StreamResult {
                log_eta: T::neg_infinity(),
                n2: self.n2,
                beta: vec![T::zero(); self.beta.len()],
                visited: self.visited,
            };
        }
        let sum = self.sum;
        StreamResult {
            log_eta: self.max + sum.ln(),
            n2: self.n2,
            beta: self.beta.into_iter().map(|b| b / sum).collect(),
            visited: self.visited,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::log_sum_exp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_table(rng: &mut ChaCha8Rng, n1: usize, n2: usize) -> PairTable<f64> {
        let r1: Vec<f64> = (0..n1).map(|_| rng.random_range(0.01..0.99)).collect();
        let r2: Vec<f64> = (0..n2).map(|_| rng.random_range(0.01..0.99)).collect();
        let d: Vec<f64> = (0..n1 * n2).map(|_| rng.random_range(0.0..30.0)).collect();
        let w = FusionWeights::from_first(rng.random_range(0.1..0.9)).unwrap();
        PairTable::new(&r1, &r2, &w, |i, j| d[i * n2 + j])
    }

    #[test]
    fn stream_matches_materialized_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let (n1, n2) = (rng.random_range(0..5), rng.random_range(0..5));
            let t = random_table(&mut rng, n1, n2);
            let mut all = Vec::new();
            t.walk(|p, lw| all.push((p.to_vec(), lw)));
            let logs: Vec<f64> = all.iter().map(|h| h.1).collect();
            let log_eta = log_sum_exp(&logs);
            let s = t.stream(false);
            assert!((s.log_eta - log_eta).abs() < 1e-12);
            for i in 0..n1 {
                let r: f64 = all
                    .iter()
                    .filter(|h| h.0.iter().any(|p| p.0 == i))
                    .map(|h| (h.1 - log_eta).exp())
                    .sum();
                assert!((s.existence(i) - r).abs() < 1e-12);
            }
            assert_eq!(BigUint::from(s.visited), t.count());
        }
    }

    #[test]
    fn parallel_split_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random_table(&mut rng, 6, 7);
        assert!(t.count() >= BigUint::from(PARALLEL_MIN_HYPOTHESES));
        let (a, b) = (t.stream(false), t.stream(true));
        assert_eq!(a.visited, b.visited);
        assert!((a.log_eta - b.log_eta).abs() < 1e-12);
        for (x, y) in a.beta.iter().zip(&b.beta) {
            assert!((x - y).abs() < 1e-12);
        }
        let again = t.stream(true);
        assert_eq!(b.beta, again.beta);
    }

    #[test]
    fn infinite_distance_never_paired() {
        let w = FusionWeights::equal();
        let t = PairTable::new(&[0.9], &[0.9], &w, |_, _| f64::INFINITY);
        let s = t.stream(false);
        assert_eq!(s.existence(0), 0.0);
        assert!((s.log_eta - (0.1f64).ln()).abs() < 1e-12);
    }
}
