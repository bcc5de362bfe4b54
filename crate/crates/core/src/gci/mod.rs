//! GCI fusion of two multi-Bernoulli densities.
//!
//! The fused density is a generalized MB: a mixture over fusion hypotheses
//! `(I1, θ)`, where `I1` picks components of the first sensor and `θ` maps
//! them injectively into the second. The weight of a hypothesis is
//!
//! ```text
//! w̃ = (Q1^I1)^ω1 · (Q2^θ(I1))^ω2 · Π_{ℓ ∈ I1} exp(-d(ℓ, θ(ℓ)))
//! ```
//!
//! with `Q^I = Π_{ℓ∈I} r · Π_{ℓ∉I} (1 - r)` and `d` the GCI divergence of the
//! two location densities. The result is projected back onto an MB by
//! matching first moments.

mod fuse;
mod kernel;

pub use fuse::{
    fused_pair_density, gmb_to_mb, naive_fuse, naive_gci_mb_fuse, FusionHypothesis, GmbDensity,
    NaiveOptions, NaiveStats,
};
pub(crate) use fuse::{moment_match, orient, Factored};
pub(crate) use kernel::PairTable;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{FusionError, Result};
use crate::gm::{pair_log_mass_factored, GaussianMixture, PoweredFactors};
use crate::mb::MultiBernoulliDensity;
use crate::scalar::Real;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Exponents of the weighted geometric mean `p1^ω1 p2^ω2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights<T> {
    omega1: T,
    omega2: T,
}

impl<T: Real> FusionWeights<T> {
    pub fn new(omega1: T, omega2: T) -> Result<Self> {
        let open = |w: T| w > T::zero() && w < T::one();
        if !open(omega1)
            || !open(omega2)
            || (omega1 + omega2 - T::one()).abs() > T::tol(WEIGHT_SUM_TOL)
        {
            return Err(FusionError::InvalidWeights(
                omega1.as_f64(),
                omega2.as_f64(),
            ));
        }
        Ok(Self { omega1, omega2 })
    }

    /// `(ω1, 1 - ω1)`.
    pub fn from_first(omega1: T) -> Result<Self> {
        Self::new(omega1, T::one() - omega1)
    }

    pub fn equal() -> Self {
        let half = T::lit(0.5);
        Self {
            omega1: half,
            omega2: half,
        }
    }

    pub fn omega1(&self) -> T {
        self.omega1
    }

    pub fn omega2(&self) -> T {
        self.omega2
    }

    pub fn swapped(&self) -> Self {
        Self {
            omega1: self.omega2,
            omega2: self.omega1,
        }
    }
}

/// `d(ℓ, ℓ')` for every cross-sensor pair, row-major over sensor 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DistanceMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(FusionError::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transposed(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }
}

/// `-ln ∫ p1^ω1 p2^ω2 dx`, `+inf` when the overlap underflows.
///
/// For two single Gaussians and `ω1 = ω2 = 1/2` this is the Bhattacharyya
/// distance. Under the componentwise power approximation it can dip
/// slightly below zero for multi-component mixtures.
pub fn gci_divergence<T: Real>(
    p1: &GaussianMixture<T>,
    p2: &GaussianMixture<T>,
    w: &FusionWeights<T>,
) -> Result<T> {
    Ok(-crate::gm::pair_product_log_mass(
        p1, w.omega1, p2, w.omega2,
    )?)
}

/// Full `|L1| × |L2|` matrix of [`gci_divergence`] values.
pub fn pairwise_distances<T: Real>(
    mb1: &MultiBernoulliDensity<T>,
    mb2: &MultiBernoulliDensity<T>,
    w: &FusionWeights<T>,
) -> Result<DistanceMatrix<T>> {
    Factored::new(mb1, mb2, w)?.distances()
}

pub(crate) fn distances_from_factors<T: Real>(
    f1: &[PoweredFactors<T>],
    f2: &[PoweredFactors<T>],
) -> Result<DistanceMatrix<T>> {
    let rows: Vec<Vec<T>> = f1
        .par_iter()
        .map(|a| {
            f2.iter()
                .map(|b| pair_log_mass_factored(a, b).map(|m| -m))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(DistanceMatrix {
        rows: f1.len(),
        cols: f2.len(),
        data: rows.into_iter().flatten().collect(),
    })
}

/// Every distinct `(I1, θ)` over index sets of the given sizes, as sorted
/// `(ℓ, θ(ℓ))` lists, starting with the empty hypothesis.
pub fn enumerate_hypotheses(n1: usize, n2: usize) -> Vec<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    let mut used = vec![false; n2];
    let mut path = Vec::new();
    fn walk(
        i: usize,
        n1: usize,
        used: &mut [bool],
        path: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if i == n1 {
            out.push(path.clone());
            return;
        }
        walk(i + 1, n1, used, path, out);
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                path.push((i, j));
                walk(i + 1, n1, used, path, out);
                path.pop();
                used[j] = false;
            }
        }
    }
    walk(0, n1, &mut used, &mut path, &mut out);
    out
}

/// Number of distinct hypotheses, `Σ_n C(n1, n) · A(n2, n)`.
pub fn count_hypotheses(n1: usize, n2: usize) -> BigUint {
    let mut total = BigUint::zero();
    let mut choose = BigUint::one();
    let mut arrange = BigUint::one();
    for n in 0..=n1.min(n2) {
        if n > 0 {
            choose = choose * BigUint::from(n1 - n + 1) / BigUint::from(n);
            arrange *= BigUint::from(n2 - n + 1);
        }
        total += &choose * &arrange;
    }
    total
}

/// The bookkeeping count `2^|L1| · A(|L2|, |L1|)` over full-domain maps.
///
/// It counts each restricted map several times, so it exceeds
/// [`count_hypotheses`] whenever `|L1| ≥ 1`. Sizes are ordered so that the
/// smaller set plays `L1`.
pub fn count_hypotheses_full(n1: usize, n2: usize) -> BigUint {
    let (a, b) = if n1 <= n2 { (n1, n2) } else { (n2, n1) };
    let arrange = ((b - a + 1)..=b).fold(BigUint::one(), |acc, k| acc * BigUint::from(k));
    (BigUint::one() << a) * arrange
}

/// `ln w̃` of one hypothesis, with `Q` taken over each sensor's full index
/// set.
pub fn hypothesis_log_weight<T: Real>(
    pairs: &[(usize, usize)],
    mb1: &MultiBernoulliDensity<T>,
    mb2: &MultiBernoulliDensity<T>,
    w: &FusionWeights<T>,
    d: &DistanceMatrix<T>,
) -> T {
    let mut in1 = vec![false; mb1.len()];
    let mut in2 = vec![false; mb2.len()];
    let mut log_z = T::zero();
    for &(l1, l2) in pairs {
        in1[l1] = true;
        in2[l2] = true;
        log_z -= d.get(l1, l2);
    }
    w.omega1 * mb1.log_q(&in1) + w.omega2 * mb2.log_q(&in2) + log_z
}

/// Unnormalized hypothesis weight `w̃`.
pub fn hypothesis_weight<T: Real>(
    pairs: &[(usize, usize)],
    mb1: &MultiBernoulliDensity<T>,
    mb2: &MultiBernoulliDensity<T>,
    w: &FusionWeights<T>,
    d: &DistanceMatrix<T>,
) -> T {
    hypothesis_log_weight(pairs, mb1, mb2, w, d).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mb::BernoulliComponent;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    fn g1(mean: f64) -> GaussianMixture<f64> {
        GaussianMixture::single(1.0, DVector::from_element(1, mean), DMatrix::identity(1, 1))
    }

    fn mb(items: &[(f64, f64)]) -> MultiBernoulliDensity<f64> {
        MultiBernoulliDensity::from_components(
            1,
            items
                .iter()
                .enumerate()
                .map(|(i, &(r, m))| BernoulliComponent::new(r, g1(m), i as u64))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn weights_validate() {
        assert!(FusionWeights::new(0.3, 0.7).is_ok());
        assert!(FusionWeights::new(0.3, 0.6).is_err());
        assert!(FusionWeights::new(0.0, 1.0).is_err());
        assert!(FusionWeights::<f32>::new(0.3, 0.7).is_ok());
        let w = FusionWeights::from_first(0.25).unwrap().swapped();
        assert_eq!(w.omega1(), 0.75);
    }

    #[test]
    fn divergence_examples() {
        let w = FusionWeights::equal();
        assert_eq!(gci_divergence(&g1(0.0), &g1(0.0), &w).unwrap(), 0.0);
        assert_relative_eq!(
            gci_divergence(&g1(0.0), &g1(2.0), &w).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            gci_divergence(&g1(0.0), &g1(100.0), &w).unwrap(),
            1250.0,
            epsilon = 1e-9
        );
        let bad = GaussianMixture::single(1.0, DVector::zeros(2), DMatrix::identity(2, 2));
        assert!(gci_divergence(&g1(0.0), &bad, &w).is_err());
    }

    #[test]
    fn distance_matrix_shapes() {
        let w = FusionWeights::equal();
        let a = mb(&[(0.5, 0.0), (0.5, 10.0)]);
        let b = mb(&[(0.5, 0.0), (0.5, 10.0), (0.5, 20.0)]);
        let d = pairwise_distances(&a, &b, &w).unwrap();
        assert_eq!((d.rows(), d.cols()), (2, 3));
        assert!(d.get(0, 0).abs() < 1e-12 && d.get(1, 1).abs() < 1e-12);
        assert_relative_eq!(d.get(0, 2), 50.0, epsilon = 1e-9);
        let e = pairwise_distances(&a, &MultiBernoulliDensity::empty(1), &w).unwrap();
        assert_eq!((e.rows(), e.cols()), (2, 0));
        assert_eq!(d.transposed().get(2, 0), d.get(0, 2));
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(
            enumerate_hypotheses(0, 3),
            vec![Vec::<(usize, usize)>::new()]
        );
        assert_eq!(enumerate_hypotheses(1, 1).len(), 2);
        assert_eq!(enumerate_hypotheses(2, 3).len(), 13);
        for n1 in 0..5 {
            for n2 in 0..5 {
                let all = enumerate_hypotheses(n1, n2);
                assert_eq!(BigUint::from(all.len()), count_hypotheses(n1, n2));
                let distinct: std::collections::HashSet<_> = all.iter().collect();
                assert_eq!(distinct.len(), all.len());
                for h in &all {
                    let targets: std::collections::HashSet<_> = h.iter().map(|p| p.1).collect();
                    assert_eq!(targets.len(), h.len());
                }
            }
        }
    }

    #[test]
    fn full_domain_counts() {
        assert_eq!(count_hypotheses_full(2, 3), BigUint::from(24u32));
        assert_eq!(count_hypotheses_full(0, 5), BigUint::from(1u32));
        assert_eq!(count_hypotheses_full(3, 3), BigUint::from(48u32));
        assert_eq!(count_hypotheses_full(3, 2), count_hypotheses_full(2, 3));
        assert!(count_hypotheses_full(40, 40).bits() > 150);
    }

    #[test]
    fn weight_examples() {
        let w = FusionWeights::equal();
        let a = mb(&[(0.5, 0.0)]);
        let d = pairwise_distances(&a, &a, &w).unwrap();
        assert_relative_eq!(
            hypothesis_weight(&[(0, 0)], &a, &a, &w, &d),
            0.5,
            epsilon = 1e-15
        );
        assert_relative_eq!(hypothesis_weight(&[], &a, &a, &w, &d), 0.5, epsilon = 1e-15);
        let inf = DistanceMatrix::new(1, 1, vec![f64::INFINITY]).unwrap();
        assert_eq!(hypothesis_weight(&[(0, 0)], &a, &a, &w, &inf), 0.0);
    }
}
