//! Clustered (parallelizable) GCI fusion.
//!
//! Pairs whose divergence exceeds the gate contribute at most `e^-γ` to any
//! hypothesis weight, so hypotheses pairing components across clusters are
//! dropped. What remains factorizes over the clusters of the LIC, and each
//! cluster is fused on its own with cluster-local `Q` factors.

use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::clustering::{cluster, Cluster, LargestIsolatedClustering};
use crate::error::{FusionError, Result};
use crate::gci::{
    count_hypotheses, count_hypotheses_full, moment_match, orient, DistanceMatrix, Factored,
    FusionWeights, GmbDensity, PairTable,
};
use crate::gm::GmReduction;
use crate::mb::{reduce, BernoulliComponent, MbReduction, MultiBernoulliDensity};
use crate::scalar::Real;

/// Settings for [`pgci_fuse`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgciConfig<T> {
    /// Gate on the GCI divergence; `+inf` disables truncation.
    pub gamma: T,
    /// Largest per-cluster enumeration before failing.
    pub cluster_cap: u64,
    /// With `fallback`, an oversized cluster is still fused exhaustively as
    /// long as its enumeration stays below this cap.
    pub naive_cap: u64,
    pub fallback: bool,
    pub reduction: GmReduction<T>,
    pub parallel: bool,
}

impl<T: Real> Default for PgciConfig<T> {
    fn default() -> Self {
        Self {
            gamma: T::lit(4.0),
            cluster_cap: 1_000_000,
            naive_cap: 10_000_000,
            fallback: false,
            reduction: GmReduction::default(),
            parallel: true,
        }
    }
}

/// Output of fusing one joint cluster.
#[derive(Debug, Clone)]
pub struct ClusterFusionResult<T: Real> {
    pub cluster: usize,
    pub components: Vec<BernoulliComponent<T>>,
    /// `ln η_g`.
    pub log_eta: T,
    pub hypotheses: BigUint,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FusionTimings {
    pub distances: Duration,
    pub clustering: Duration,
    pub fusion: Duration,
}

impl FusionTimings {
    pub fn total(&self) -> Duration {
        self.distances + self.clustering + self.fusion
    }
}

/// Hypothesis counts, cluster shapes and timings of one pairwise fusion.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FusionDiagnostics {
    /// `2^|L1| · A(|L2|, |L1|)`.
    pub n_h: BigUint,
    /// Distinct hypotheses of the exhaustive fusion.
    pub n_h_distinct: BigUint,
    /// `N′_H`: product of the per-cluster counts.
    pub n_h_truncated: BigUint,
    /// `N″_H`: sum of the per-cluster counts.
    pub n_h_clustered: BigUint,
    /// `(|L1_g|, |L2_g|)` of each joint cluster.
    pub cluster_sizes: Vec<(usize, usize)>,
    /// Clusters with only a first- or only a second-sensor side.
    pub singletons: (usize, usize),
    /// `(exact truncated mass, bound)` when computed.
    pub l1_bound: Option<(f64, f64)>,
    pub swapped: bool,
    pub timings: FusionTimings,
}

impl FusionDiagnostics {
    pub fn largest_cluster(&self) -> Option<(usize, usize)> {
        self.cluster_sizes
            .iter()
            .copied()
            .max_by_key(|&(a, b)| (a * b, a + b))
    }
}

/// Counts for a clustering of index sets of sizes `n1 × n2`.
pub fn hypothesis_count_report(
    n1: usize,
    n2: usize,
    lic: &LargestIsolatedClustering,
) -> FusionDiagnostics {
    let mut product = BigUint::one();
    let mut sum = BigUint::zero();
    let mut sizes = Vec::new();
    for c in lic.joint() {
        let k = count_hypotheses(c.l1.len(), c.l2.len());
        product *= &k;
        sum += k;
        sizes.push((c.l1.len(), c.l2.len()));
    }
    let first_only = lic.clusters().iter().filter(|c| c.l2.is_empty()).count();
    let second_only = lic.clusters().iter().filter(|c| c.l1.is_empty()).count();
    FusionDiagnostics {
        n_h: count_hypotheses_full(n1, n2),
        n_h_distinct: count_hypotheses(n1, n2),
        n_h_truncated: product,
        n_h_clustered: sum,
        cluster_sizes: sizes,
        singletons: (first_only, second_only),
        ..FusionDiagnostics::default()
    }
}

struct Context<'a, T: Real> {
    dim: usize,
    r1: Vec<T>,
    r2: Vec<T>,
    w: FusionWeights<T>,
    d: &'a DistanceMatrix<T>,
    factors: &'a Factored<T>,
}

fn check_cluster<T: Real>(index: usize, c: &Cluster, cfg: &PgciConfig<T>) -> Result<BigUint> {
    let count = count_hypotheses(c.l1.len(), c.l2.len());
    let cap = if cfg.fallback {
        cfg.naive_cap.max(cfg.cluster_cap)
    } else {
        cfg.cluster_cap
    };
    if count > BigUint::from(cap) {
        return Err(FusionError::OversizedCluster {
            cluster: index,
            n1: c.l1.len(),
            n2: c.l2.len(),
            hypotheses: count.to_string(),
            cap,
        });
    }
    Ok(count)
}

fn fuse_in_context<T: Real>(
    index: usize,
    c: &Cluster,
    ctx: &Context<'_, T>,
    cfg: &PgciConfig<T>,
) -> Result<ClusterFusionResult<T>> {
    let hypotheses = check_cluster(index, c, cfg)?;
    let r1: Vec<T> = c.l1.iter().map(|&i| ctx.r1[i]).collect();
    let r2: Vec<T> = c.l2.iter().map(|&j| ctx.r2[j]).collect();
    let table = PairTable::new(&r1, &r2, &ctx.w, |i, j| ctx.d.get(c.l1[i], c.l2[j]));
    let result = table.stream(cfg.parallel);
    debug_assert_eq!(BigUint::from(result.visited), hypotheses);
    let components = moment_match(ctx.dim, &c.l1, &c.l2, &result, ctx.factors, &cfg.reduction)?;
    Ok(ClusterFusionResult {
        cluster: index,
        components,
        log_eta: result.log_eta,
        hypotheses,
    })
}

/// GCI fusion restricted to one joint cluster, with `Q` over the cluster's
/// own components. Indices refer to `mb1` and `mb2` as given; no role swap
/// is applied.
pub fn fuse_cluster<T: Real>(
    index: usize,
    c: &Cluster,
    mb1: &MultiBernoulliDensity<T>,
    mb2: &MultiBernoulliDensity<T>,
    w: &FusionWeights<T>,
    d: &DistanceMatrix<T>,
    cfg: &PgciConfig<T>,
) -> Result<ClusterFusionResult<T>> {
    let factors = Factored::new(mb1, mb2, w)?;
    let ctx = Context {
        dim: mb1.dim(),
        r1: mb1.existence(),
        r2: mb2.existence(),
        w: *w,
        d,
        factors: &factors,
    };
    fuse_in_context(index, c, &ctx, cfg)
}

/// Gate, cluster and fuse each joint cluster independently. Components are
/// emitted in canonical cluster order and carry their position on the
/// (oriented) first side as id.
pub fn pgci_fuse<T: Real>(
    mb1: &MultiBernoulliDensity<T>,
    mb2: &MultiBernoulliDensity<T>,
    w: &FusionWeights<T>,
    cfg: &PgciConfig<T>,
) -> Result<(MultiBernoulliDensity<T>, FusionDiagnostics)> {
    if !(cfg.gamma > T::zero()) {
        return Err(FusionError::InvalidConfig(format!(
            "gate {} must be positive",
            cfg.gamma
        )));
    }
    let (a, b, w, swapped) = orient(mb1, mb2, w);

    let start = Instant::now();
    let factors = Factored::new(a, b, &w)?;
    let d = factors.distances()?;
    let t_dist = start.elapsed();

    let start = Instant::now();
    let (_, lic) = cluster(&d, cfg.gamma);
    let t_cluster = start.elapsed();

    let start = Instant::now();
    let joint: Vec<&Cluster> = lic.joint().collect();
    for (k, c) in joint.iter().enumerate() {
        check_cluster(k, c, cfg)?;
    }
    let ctx = Context {
        dim: a.dim(),
        r1: a.existence(),
        r2: b.existence(),
        w,
        d: &d,
        factors: &factors,
    };
    let results: Vec<ClusterFusionResult<T>> = if cfg.parallel {
        joint
            .par_iter()
            .enumerate()
            .map(|(k, c)| fuse_in_context(k, c, &ctx, cfg))
            .collect::<Result<_>>()?
    } else {
        joint
            .iter()
            .enumerate()
            .map(|(k, c)| fuse_in_context(k, c, &ctx, cfg))
            .collect::<Result<_>>()?
    };
    let t_fuse = start.elapsed();

    let components = results.into_iter().flat_map(|r| r.components).collect();
    let mut diag = hypothesis_count_report(a.len(), b.len(), &lic);
    diag.swapped = swapped;
    diag.timings = FusionTimings {
        distances: t_dist,
        clustering: t_cluster,
        fusion: t_fuse,
    };
    Ok((
        MultiBernoulliDensity::from_components_unchecked(a.dim(), components),
        diag,
    ))
}

/// Indices of the hypotheses of `g` that pair components from different
/// clusters of `lic`. Both must use the same orientation.
pub fn inter_cluster_hypotheses<T: Real>(
    g: &GmbDensity<T>,
    lic: &LargestIsolatedClustering,
) -> Vec<usize> {
    let (n1, n2) = g.sizes();
    let mut owner1 = vec![usize::MAX; n1];
    let mut owner2 = vec![usize::MAX - 1; n2];
    for (k, c) in lic.clusters().iter().enumerate() {
        c.l1.iter().for_each(|&i| owner1[i] = k);
        c.l2.iter().for_each(|&j| owner2[j] = k);
    }
    g.hypotheses()
        .iter()
        .enumerate()
        .filter(|(_, h)| h.pairs.iter().any(|&(i, j)| owner1[i] != owner2[j]))
        .map(|(k, _)| k)
        .collect()
}

/// `(2 Σ_D w, A e^-γ)` with `A = 2 Σ_D K / η` and `K = (Q1)^ω1 (Q2)^ω2`.
///
/// The first value is the exact L1 distance between the full and the
/// truncated fused densities; the second bounds it whenever every
/// divergence is nonnegative.
pub fn l1_error_bound<T: Real>(g: &GmbDensity<T>, truncated: &[usize], gamma: T) -> (T, T) {
    let two = T::lit(2.0);
    let mut mass = T::zero();
    let mut a = T::zero();
    for &k in truncated {
        mass += g.hypotheses()[k].weight;
        a += (g.log_k(k) - g.log_eta()).exp();
    }
    (two * mass, two * a * (-gamma).exp())
}

/// Fuses several posteriors by a left fold of pairwise P-GCI fusions. The
/// running result carries the accumulated weight, so step `i` uses
/// `(w_acc, w_i) / (w_acc + w_i)`. Every step is followed by an MB
/// reduction. A single posterior is returned unchanged.
pub fn multi_sensor_fuse<T: Real>(
    posteriors: &[MultiBernoulliDensity<T>],
    weights: &[T],
    cfg: &PgciConfig<T>,
    mb_reduction: &MbReduction<T>,
) -> Result<(MultiBernoulliDensity<T>, Vec<FusionDiagnostics>)> {
    if posteriors.is_empty() {
        return Err(FusionError::InvalidConfig("no posteriors to fuse".into()));
    }
    if weights.len() != posteriors.len() {
        return Err(FusionError::InvalidConfig(format!(
            "{} weights for {} posteriors",
            weights.len(),
            posteriors.len()
        )));
    }
    let total = weights.iter().fold(T::zero(), |acc, &w| acc + w);
    if weights.iter().any(|&w| !(w > T::zero())) || (total - T::one()).abs() > T::tol(1e-9) {
        return Err(FusionError::InvalidConfig(
            "fusion weights must be positive and sum to 1".into(),
        ));
    }
    let mut acc = posteriors[0].clone();
    let mut w_acc = weights[0];
    let mut diags = Vec::with_capacity(posteriors.len() - 1);
    for (post, &w_i) in posteriors.iter().zip(weights).skip(1) {
        let pair = FusionWeights::from_first(w_acc / (w_acc + w_i))?;
        let (fused, diag) = pgci_fuse(&acc, post, &pair, cfg)?;
        acc = reduce(&fused, mb_reduction);
        w_acc += w_i;
        diags.push(diag);
    }
    Ok((acc, diags))
}

/// `n″ / n` as a float, for reporting ratios of huge counts.
pub fn count_ratio(num: &BigUint, den: &BigUint) -> f64 {
    if den.is_zero() {
        return f64::NAN;
    }
    let shift = den.bits().saturating_sub(900);
    let n = (num >> shift).to_f64().unwrap_or(f64::INFINITY);
    let d = (den >> shift).to_f64().unwrap_or(f64::INFINITY);
    n / d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gci::{naive_gci_mb_fuse, pairwise_distances, NaiveOptions};
    use crate::gm::GaussianMixture;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    fn mb(items: &[(f64, f64)]) -> MultiBernoulliDensity<f64> {
        MultiBernoulliDensity::from_components(
            1,
            items
                .iter()
                .enumerate()
                .map(|(i, &(r, m))| {
                    BernoulliComponent::new(
                        r,
                        GaussianMixture::single(
                            1.0,
                            DVector::from_element(1, m),
                            DMatrix::identity(1, 1),
                        ),
                        i as u64,
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    fn cfg(gamma: f64) -> PgciConfig<f64> {
        PgciConfig {
            gamma,
            ..PgciConfig::default()
        }
    }

    #[test]
    fn single_pair_cluster() {
        let a = mb(&[(0.5, 0.0)]);
        let w = FusionWeights::equal();
        let d = pairwise_distances(&a, &a, &w).unwrap();
        let c = Cluster {
            l1: vec![0],
            l2: vec![0],
        };
        let res = fuse_cluster(0, &c, &a, &a, &w, &d, &cfg(4.0)).unwrap();
        assert_relative_eq!(res.components[0].r, 0.5, epsilon = 1e-12);
        assert_eq!(res.hypotheses, BigUint::from(2u32));
    }

    #[test]
    fn unreachable_pairs_vanish() {
        let a = mb(&[(0.5, 0.0), (0.5, 3.0)]);
        let w = FusionWeights::equal();
        let d = DistanceMatrix::from_fn(2, 2, |_, _| f64::INFINITY);
        let c = Cluster {
            l1: vec![0, 1],
            l2: vec![0, 1],
        };
        let res = fuse_cluster(0, &c, &a, &a, &w, &d, &cfg(4.0)).unwrap();
        assert!(res.components.is_empty());
    }

    #[test]
    fn separated_identical_sensors() {
        let a = mb(&[(0.9, 0.0), (0.6, 100.0), (0.3, 200.0)]);
        let w = FusionWeights::equal();
        let (p, diag) = pgci_fuse(&a, &a, &w, &cfg(4.0)).unwrap();
        assert_eq!(diag.cluster_sizes, vec![(1, 1); 3]);
        let (n, _) = naive_gci_mb_fuse(&a, &a, &w, &NaiveOptions::default()).unwrap();
        for (x, y) in p.components().iter().zip(n.components()) {
            assert_eq!(x.id, y.id);
            assert_relative_eq!(x.r, y.r, epsilon = 1e-9);
        }
        assert_eq!(diag.n_h_clustered, BigUint::from(6u32));
        assert_eq!(diag.n_h_truncated, BigUint::from(8u32));
    }

    #[test]
    fn empty_sensor_gives_empty_fusion() {
        let a = mb(&[(0.9, 0.0), (0.6, 100.0)]);
        let e = MultiBernoulliDensity::empty(1);
        let (p, _) = pgci_fuse(&a, &e, &FusionWeights::equal(), &cfg(4.0)).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn infinite_gate_equals_oracle() {
        let a = mb(&[(0.9, 0.0), (0.6, 1.0), (0.3, 6.0)]);
        let b = mb(&[(0.7, 0.3), (0.5, 5.0)]);
        let w = FusionWeights::from_first(0.4).unwrap();
        let (p, diag) = pgci_fuse(&a, &b, &w, &cfg(f64::INFINITY)).unwrap();
        assert_eq!(diag.cluster_sizes.len(), 1);
        assert!(diag.swapped);
        let (n, _) = naive_gci_mb_fuse(&a, &b, &w, &NaiveOptions::default()).unwrap();
        assert_eq!(p.len(), n.len());
        for (x, y) in p.components().iter().zip(n.components()) {
            assert_eq!(x.id, y.id);
            assert_relative_eq!(x.r, y.r, epsilon = 1e-12);
            assert_eq!(x.pdf.len(), y.pdf.len());
        }
    }

    #[test]
    fn count_report_examples() {
        let two = LargestIsolatedClustering::from_clusters(
            2,
            2,
            vec![
                Cluster {
                    l1: vec![0],
                    l2: vec![0],
                },
                Cluster {
                    l1: vec![1],
                    l2: vec![1],
                },
            ],
        );
        let r = hypothesis_count_report(2, 2, &two);
        assert_eq!(r.n_h_truncated, BigUint::from(4u32));
        assert_eq!(r.n_h_clustered, BigUint::from(4u32));
        let one = LargestIsolatedClustering::from_clusters(
            2,
            3,
            vec![Cluster {
                l1: vec![0, 1],
                l2: vec![0, 1, 2],
            }],
        );
        let r = hypothesis_count_report(2, 3, &one);
        assert_eq!(r.n_h_truncated, r.n_h_clustered);
        assert_eq!(r.n_h, BigUint::from(24u32));
    }

    #[test]
    fn oversized_cluster_fails_loudly() {
        let a = mb(&[(0.5, 0.0), (0.5, 0.1), (0.5, 0.2), (0.5, 0.3)]);
        let small = PgciConfig {
            cluster_cap: 100,
            ..cfg(4.0)
        };
        let err = pgci_fuse(&a, &a, &FusionWeights::equal(), &small).unwrap_err();
        assert!(matches!(
            err,
            FusionError::OversizedCluster { n1: 4, n2: 4, .. }
        ));
        let fallback = PgciConfig {
            fallback: true,
            ..small
        };
        assert!(pgci_fuse(&a, &a, &FusionWeights::equal(), &fallback).is_ok());
    }

    #[test]
    fn bound_examples() {
        let a = mb(&[(0.6, 0.0), (0.7, 3.0)]);
        let b = mb(&[(0.8, 0.2), (0.5, 3.5)]);
        let w = FusionWeights::equal();
        let (_, g) = naive_gci_mb_fuse(&a, &b, &w, &NaiveOptions::default()).unwrap();
        assert_eq!(l1_error_bound(&g, &[], 0.5), (0.0, 0.0));
        let (_, lic) = cluster(g.distances(), 0.5);
        let dset = inter_cluster_hypotheses(&g, &lic);
        assert!(!dset.is_empty());
        let (exact, bound) = l1_error_bound(&g, &dset, 0.5);
        assert!(exact <= bound);
        let (_, b2) = l1_error_bound(&g, &dset, 1.5);
        assert_relative_eq!(b2 / bound, (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn fold_of_one_and_identical() {
        let a = mb(&[(0.9, 0.0), (0.6, 100.0)]);
        let red = MbReduction::default();
        let (same, d) =
            multi_sensor_fuse(std::slice::from_ref(&a), &[1.0], &cfg(4.0), &red).unwrap();
        assert_eq!(same, a);
        assert!(d.is_empty());
        let third = 1.0 / 3.0;
        let (three, _) = multi_sensor_fuse(
            &[a.clone(), a.clone(), a.clone()],
            &[third; 3],
            &cfg(4.0),
            &red,
        )
        .unwrap();
        let (two, _) =
            multi_sensor_fuse(&[a.clone(), a.clone()], &[0.5; 2], &cfg(4.0), &red).unwrap();
        for (x, y) in three.components().iter().zip(two.components()) {
            assert_relative_eq!(x.r, y.r, epsilon = 1e-9);
        }
        assert!(multi_sensor_fuse::<f64>(&[], &[], &cfg(4.0), &red).is_err());
        assert!(multi_sensor_fuse(&[a.clone(), a], &[0.5, 0.6], &cfg(4.0), &red).is_err());
    }

    #[test]
    fn ratio_of_huge_counts() {
        let n = count_hypotheses_full(40, 40);
        assert_relative_eq!(count_ratio(&n, &n), 1.0);
        assert!(count_ratio(&BigUint::from(80u32), &n) < 1e-40);
    }
}
