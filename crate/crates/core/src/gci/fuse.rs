use std::collections::BTreeMap;

use num_bigint::BigUint;

use super::kernel::{PairTable, StreamResult};
use super::{distances_from_factors, DistanceMatrix, FusionWeights};
use crate::error::{FusionError, Result};
use crate::gm::{pair_product_normalized, GaussianMixture, GmReduction, PoweredFactors};
use crate::mb::{clamp_existence, BernoulliComponent, MultiBernoulliDensity};
use crate::scalar::{log_sum_exp, Real};

/// Powered location densities of both sensors, computed once per fusion.
pub(crate) struct Factored<T: Real> {
    pub f1: Vec<PoweredFactors<T>>,
    pub f2: Vec<PoweredFactors<T>>,
}

impl<T: Real> Factored<T> {
    pub fn new(
        mb1: &MultiBernoulliDensity<T>,
        mb2: &MultiBernoulliDensity<T>,
        w: &FusionWeights<T>,
    ) -> Result<Self> {
        if mb1.dim() != mb2.dim() {
            return Err(FusionError::DimensionMismatch {
                expected: mb1.dim(),
                found: mb2.dim(),
            });
        }
        let side = |mb: &MultiBernoulliDensity<T>, omega: T| {
            mb.components()
                .iter()
                .map(|c| PoweredFactors::new(&c.pdf, omega))
                .collect::<Result<Vec<_>>>()
        };
        Ok(Self {
            f1: side(mb1, w.omega1())?,
            f2: side(mb2, w.omega2())?,
        })
    }

    pub fn distances(&self) -> Result<DistanceMatrix<T>> {
        distances_from_factors(&self.f1, &self.f2)
    }

    pub fn pair(&self, i: usize, j: usize) -> Result<(GaussianMixture<T>, T)> {
        let (gm, log_mass) = pair_product_normalized(&self.f1[i], &self.f2[j])?;
        if !log_mass.finite() {
            return Err(FusionError::IncompatiblePair(i, j));
        }
        Ok((gm, log_mass))
    }
}

/// Puts the sensor with fewer components first, swapping the weights with it.
pub(crate) fn orient<'a, T: Real>(
    mb1: &'a MultiBernoulliDensity<T>,
    mb2: &'a MultiBernoulliDensity<T>,
    w: &FusionWeights<T>,
) -> (
    &'a MultiBernoulliDensity<T>,
    &'a MultiBernoulliDensity<T>,
    FusionWeights<T>,
    bool,
) {
    if mb1.len() > mb2.len() {
        (mb2, mb1, w.swapped(), true)
    } else {
        (mb1, mb2, *w, false)
    }
}

/// Moment-matched Bernoulli components for the rows `idx1` of a streamed
/// (sub)problem over `idx1 × idx2`. Components keep their position on the
/// first side as id; rows with zero fused existence are dropped.
pub(crate) fn moment_match<T: Real>(
    dim: usize,
    idx1: &[usize],
    idx2: &[usize],
    result: &StreamResult<T>,
    factors: &Factored<T>,
    reduction: &GmReduction<T>,
) -> Result<Vec<BernoulliComponent<T>>> {
    let mut out = Vec::new();
    for (li, &gi) in idx1.iter().enumerate() {
        let r = result.existence(li);
        if !(r > T::zero()) {
            continue;
        }
        let mut pdf = GaussianMixture::empty(dim);
        for (lj, &gj) in idx2.iter().enumerate() {
            let beta = result.beta(li, lj);
            if beta > T::zero() {
                let (gm, _) = factors.pair(gi, gj)?;
                append_scaled(&mut pdf, gm, beta / r)?;
            }
        }
        out.push(finish_component(r, pdf, gi, reduction)?);
    }
    Ok(out)
}

fn append_scaled<T: Real>(
    pdf: &mut GaussianMixture<T>,
    gm: GaussianMixture<T>,
    scale: T,
) -> Result<()> {
    for mut c in gm.into_components() {
        c.weight *= scale;
        pdf.push(c)?;
    }
    Ok(())
}

fn finish_component<T: Real>(
    r: T,
    pdf: GaussianMixture<T>,
    index: usize,
    reduction: &GmReduction<T>,
) -> Result<BernoulliComponent<T>> {
    let (pdf, _) = pdf.reduce(reduction).normalize()?;
    Ok(BernoulliComponent::new(
        clamp_existence(r),
        pdf,
        index as u64,
    ))
}

/// One term of the fused GMB density.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionHypothesis<T> {
    /// `(ℓ, θ(ℓ))` sorted by `ℓ`; the `ℓ` form `I1`.
    pub pairs: Vec<(usize, usize)>,
    /// `ln w̃`.
    pub log_w_tilde: T,
    /// `w̃ / η`.
    pub weight: T,
}

impl<T: Real> FusionHypothesis<T> {
    pub fn w_tilde(&self) -> T {
        self.log_w_tilde.exp()
    }

    pub fn contains(&self, l1: usize) -> bool {
        self.theta(l1).is_some()
    }

    pub fn theta(&self, l1: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == l1).map(|p| p.1)
    }
}

/// The exhaustively enumerated GCI-fused density.
///
/// Indices refer to the oriented sensors: when the first input had more
/// components than the second the roles are swapped (see
/// [`GmbDensity::swapped`]) and `ℓ` indexes the second input.
#[derive(Debug, Clone)]
pub struct GmbDensity<T: Real> {
    dim: usize,
    n1: usize,
    n2: usize,
    swapped: bool,
    log_eta: T,
    hypotheses: Vec<FusionHypothesis<T>>,
    fused_pdfs: BTreeMap<(usize, usize), GaussianMixture<T>>,
    distances: DistanceMatrix<T>,
}

impl<T: Real> GmbDensity<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sizes of the (oriented) index sets.
    pub fn sizes(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn swapped(&self) -> bool {
        self.swapped
    }

    pub fn eta(&self) -> T {
        self.log_eta.exp()
    }

    pub fn log_eta(&self) -> T {
        self.log_eta
    }

    pub fn hypotheses(&self) -> &[FusionHypothesis<T>] {
        &self.hypotheses
    }

    /// Normalized `p(ℓ, ℓ')` for every pair with nonzero overlap.
    pub fn fused_pdfs(&self) -> &BTreeMap<(usize, usize), GaussianMixture<T>> {
        &self.fused_pdfs
    }

    /// Oriented `d(ℓ, ℓ')`.
    pub fn distances(&self) -> &DistanceMatrix<T> {
        &self.distances
    }

    /// `ln K = ln w̃ + Σ d` for hypothesis `k`: the weight without the
    /// divergence factors.
    pub fn log_k(&self, k: usize) -> T {
        let h = &self.hypotheses[k];
        h.pairs
            .iter()
            .fold(h.log_w_tilde, |acc, &(i, j)| acc + self.distances.get(i, j))
    }

    pub fn total_weight(&self) -> T {
        self.hypotheses
            .iter()
            .fold(T::zero(), |acc, h| acc + h.weight)
    }
}

/// Options for the exhaustive fusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaiveOptions<T> {
    /// Largest enumeration allowed before giving up.
    pub max_hypotheses: u64,
    pub reduction: GmReduction<T>,
    pub parallel: bool,
}

impl<T: Real> Default for NaiveOptions<T> {
    fn default() -> Self {
        Self {
            max_hypotheses: 10_000_000,
            reduction: GmReduction::default(),
            parallel: true,
        }
    }
}

/// Summary of a streamed exhaustive fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveStats<T> {
    pub hypotheses: BigUint,
    pub log_eta: T,
    pub swapped: bool,
}

/// Normalized `p1^ω1 p2^ω2` for the pair `(ℓ, ℓ')` and its mass
/// `Z = exp(-d(ℓ, ℓ'))`.
pub fn fused_pair_density<T: Real>(
    l1: usize,
    l2: usize,
    mb1: &MultiBernoulliDensity<T>,
    mb2: &MultiBernoulliDensity<T>,
    w: &FusionWeights<T>,
) -> Result<(GaussianMixture<T>, T)> {
    let f1 = PoweredFactors::new(&mb1.components()[l1].pdf, w.omega1())?;
    let f2 = PoweredFactors::new(&mb2.components()[l2].pdf, w.omega2())?;
    let (gm, log_mass) = pair_product_normalized(&f1, &f2)?;
    let z = log_mass.exp();
    if !(z > T::zero()) || !z.finite() {
        return Err(FusionError::IncompatiblePair(l1, l2));
    }
    Ok((gm, z))
}

/// Moment-matched MB of a GMB density: `r(ℓ)` is the total weight of the
/// hypotheses containing `ℓ`, and `p(ℓ)` mixes the fused pair densities
/// those hypotheses use, weighted by hypothesis weight.
pub fn gmb_to_mb<T: Real>(
    g: &GmbDensity<T>,
    reduction: &GmReduction<T>,
) -> Result<MultiBernoulliDensity<T>> {
    let mut beta: BTreeMap<(usize, usize), T> = BTreeMap::new();
    for h in &g.hypotheses {
        for &pair in &h.pairs {
            *beta.entry(pair).or_insert_with(T::zero) += h.weight;
        }
    }
    let mut out = Vec::new();
    for l1 in 0..g.n1 {
        let row: Vec<((usize, usize), T)> = beta
            .range((l1, 0)..(l1 + 1, 0))
            .map(|(&k, &v)| (k, v))
            .collect();
        let r = row.iter().fold(T::zero(), |acc, e| acc + e.1);
        if !(r > T::zero()) {
            continue;
        }
        let mut pdf = GaussianMixture::empty(g.dim);
        for (pair, b) in row {
            if b > T::zero() {
                let fused = g
                    .fused_pdfs
                    .get(&pair)
                    .ok_or(FusionError::IncompatiblePair(pair.0, pair.1))?;
                append_scaled(&mut pdf, fused.clone(), b / r)?;
            }
        }
        out.push(finish_component(r, pdf, l1, reduction)?);
    }
    Ok(MultiBernoulliDensity::from_components_unchecked(g.dim, out))
}

fn check_cap(count: &BigUint, cap: u64) -> Result<()> {
    if *count > BigUint::from(cap) {
        return Err(FusionError::Intractable {
            hypotheses: count.to_string(),
            cap,
        });
    }
    Ok(())
}

struct Prepared<'a, T: Real> {
    a: &'a MultiBernoulliDensity<T>,
    swapped: bool,
    factors: Factored<T>,
    table: PairTable<T>,
}

fn prepare<'a, T: Real>(
    mb1: &'a MultiBernoulliDensity<T>,
    mb2: &'a MultiBernoulliDensity<T>,
    w: &FusionWeights<T>,
    cap: u64,
) -> Result<(Prepared<'a, T>, DistanceMatrix<T>)> {
    let (a, b, w, swapped) = orient(mb1, mb2, w);
    let count = super::count_hypotheses(a.len(), b.len());
    check_cap(&count, cap)?;
    let factors = Factored::new(a, b, &w)?;
    let d = factors.distances()?;
    let table = PairTable::new(&a.existence(), &b.existence(), &w, |i, j| d.get(i, j));
    Ok((
        Prepared {
            a,
            swapped,
            factors,
            table,
        },
        d,
    ))
}

/// Exhaustive GCI fusion: every hypothesis over the full index sets is
/// enumerated and kept, and the MB is obtained from the materialized GMB
/// density. Meant as a reference for small problems.
pub fn naive_gci_mb_fuse<T: Real>(
    mb1: &MultiBernoulliDensity<T>,
    mb2: &MultiBernoulliDensity<T>,
    w: &FusionWeights<T>,
    opts: &NaiveOptions<T>,
) -> Result<(MultiBernoulliDensity<T>, GmbDensity<T>)> {
    let (p, d) = prepare(mb1, mb2, w, opts.max_hypotheses)?;
    let mut raw = Vec::new();
    p.table.walk(|pairs, lw| raw.push((pairs.to_vec(), lw)));
    let logs: Vec<T> = raw.iter().map(|h| h.1).collect();
    let log_eta = log_sum_exp(&logs);
    let hypotheses = raw
        .into_iter()
        .map(|(pairs, lw)| FusionHypothesis {
            pairs,
            log_w_tilde: lw,
            weight: if log_eta.finite() {
                (lw - log_eta).exp()
            } else {
                T::zero()
            },
        })
        .collect();
    let mut fused_pdfs = BTreeMap::new();
    for i in 0..d.rows() {
        for j in 0..d.cols() {
            if d.get(i, j) < T::infinity() {
                fused_pdfs.insert((i, j), p.factors.pair(i, j)?.0);
            }
        }
    }
    let g = GmbDensity {
        dim: mb1.dim(),
        n1: d.rows(),
        n2: d.cols(),
        swapped: p.swapped,
        log_eta,
        hypotheses,
        fused_pdfs,
        distances: d,
    };
    let mb = gmb_to_mb(&g, &opts.reduction)?;
    Ok((mb, g))
}

/// Exhaustive GCI fusion that streams the hypotheses instead of storing
/// them. Same result as [`naive_gci_mb_fuse`] up to rounding.
pub fn naive_fuse<T: Real>(
    mb1: &MultiBernoulliDensity<T>,
    mb2: &MultiBernoulliDensity<T>,
    w: &FusionWeights<T>,
    opts: &NaiveOptions<T>,
) -> Result<(MultiBernoulliDensity<T>, NaiveStats<T>)> {
    let (p, _) = prepare(mb1, mb2, w, opts.max_hypotheses)?;
    let result = p.table.stream(opts.parallel);
    let idx1: Vec<usize> = (0..p.a.len()).collect();
    let idx2: Vec<usize> = (0..p.factors.f2.len()).collect();
    let comps = moment_match(
        mb1.dim(),
        &idx1,
        &idx2,
        &result,
        &p.factors,
        &opts.reduction,
    )?;
    Ok((
        MultiBernoulliDensity::from_components_unchecked(mb1.dim(), comps),
        NaiveStats {
            hypotheses: p.table.count(),
            log_eta: result.log_eta,
            swapped: p.swapped,
        },
    ))
}
