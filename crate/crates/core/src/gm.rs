//! Gaussian mixtures and the fractional-power algebra used by GCI fusion.
//!
//! A GCI fusion of two location densities needs `∫ p1^ω1 p2^ω2 dx`. For
//! mixtures this has no closed form, so each component is raised to the
//! power separately:
//!
//! ```text
//! [Σ α N(m, P)]^ω  ≈  Σ α^ω ρ(P, ω) N(m, P/ω)
//! ρ(P, ω) = sqrt( det(2π P / ω) · det(2π P)^(-ω) )
//! ```
//!
//! which is accurate when the components are well separated. The product of
//! two powered mixtures is again a mixture whose total mass is the overlap
//! integral, so the GCI divergence `-ln ∫ p1^ω1 p2^ω2` falls out of
//! [`pair_product_log_mass`] without building the product.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{FusionError, Result};
use crate::scalar::{log_sum_exp, Real};

const SYMMETRY_TOL: f64 = 1e-9;
const WEIGHT_SUM_TOL: f64 = 1e-12;

/// One weighted Gaussian term `α N(·; m, P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent<T: Real> {
    pub weight: T,
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
}

impl<T: Real> GaussianComponent<T> {
    pub fn new(weight: T, mean: DVector<T>, cov: DMatrix<T>) -> Self {
        Self { weight, mean, cov }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Checks the component invariants: finite nonnegative weight, square
    /// covariance matching the mean, symmetric within 1e-9 and positive
    /// definite.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.cov.nrows() != d || self.cov.ncols() != d {
            return Err(FusionError::DimensionMismatch {
                expected: d,
                found: self.cov.nrows(),
            });
        }
        if !(self.weight >= T::zero()) || !self.weight.finite() {
            return Err(FusionError::DegenerateMass(self.weight.as_f64()));
        }
        let tol = T::lit(SYMMETRY_TOL);
        for i in 0..d {
            for j in (i + 1)..d {
                if (self.cov[(i, j)] - self.cov[(j, i)]).abs() > tol {
                    return Err(FusionError::NotPositiveDefinite);
                }
            }
        }
        cholesky(&self.cov).map(|_| ())
    }
}

/// Ordered collection of Gaussian components over a `dim`-dimensional state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture<T: Real> {
    dim: usize,
    components: Vec<GaussianComponent<T>>,
}

/// Thresholds for [`GaussianMixture::reduce`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmReduction<T> {
    /// Components lighter than this are dropped.
    pub prune_threshold: T,
    /// Squared Mahalanobis radius used when merging.
    pub merge_threshold: T,
    pub max_components: usize,
}

impl<T: Real> Default for GmReduction<T> {
    fn default() -> Self {
        Self {
            prune_threshold: T::lit(1e-5),
            merge_threshold: T::lit(4.0),
            max_components: 5,
        }
    }
}

impl<T: Real> GaussianMixture<T> {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            components: Vec::new(),
        }
    }

    pub fn from_components(dim: usize, components: Vec<GaussianComponent<T>>) -> Result<Self> {
        for c in &components {
            if c.dim() != dim {
                return Err(FusionError::DimensionMismatch {
                    expected: dim,
                    found: c.dim(),
                });
            }
        }
        Ok(Self { dim, components })
    }

    pub fn single(weight: T, mean: DVector<T>, cov: DMatrix<T>) -> Self {
        let dim = mean.len();
        Self {
            dim,
            components: vec![GaussianComponent::new(weight, mean, cov)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[GaussianComponent<T>] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [GaussianComponent<T>] {
        &mut self.components
    }

    pub fn into_components(self) -> Vec<GaussianComponent<T>> {
        self.components
    }

    pub fn push(&mut self, c: GaussianComponent<T>) -> Result<()> {
        if c.dim() != self.dim {
            return Err(FusionError::DimensionMismatch {
                expected: self.dim,
                found: c.dim(),
            });
        }
        self.components.push(c);
        Ok(())
    }

    pub fn total_weight(&self) -> T {
        self.components
            .iter()
            .fold(T::zero(), |acc, c| acc + c.weight)
    }

    /// True when the weights sum to one within 1e-9.
    pub fn is_normalized(&self) -> bool {
        (self.total_weight() - T::one()).abs() <= T::lit(1e-9)
    }

    pub fn validate(&self) -> Result<()> {
        self.components.iter().try_for_each(|c| c.validate())
    }

    /// Mixture density `Σ α_j N(x; m_j, P_j)`.
    pub fn eval(&self, x: &DVector<T>) -> Result<T> {
        if x.len() != self.dim {
            return Err(FusionError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let mut total = T::zero();
        for c in &self.components {
            let chol = cholesky(&c.cov)?;
            total += c.weight * log_normal_with(&chol, &(x - &c.mean)).exp();
        }
        Ok(total)
    }

    /// Componentwise fractional power `Σ [α N(m, P)]^ω`, unnormalized.
    pub fn power(&self, omega: T) -> Result<Self> {
        check_exponent(omega)?;
        let mut out = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let chol = cholesky(&c.cov)?;
            let ln_rho = log_rho(log_det(&chol), self.dim, omega);
            let weight = (omega * c.weight.ln() + ln_rho).exp();
            out.push(GaussianComponent::new(
                weight,
                c.mean.clone(),
                &c.cov / omega,
            ));
        }
        Ok(Self {
            dim: self.dim,
            components: out,
        })
    }

    /// Scales weights to sum to one and returns the original mass.
    pub fn normalize(&self) -> Result<(Self, T)> {
        let mass = self.total_weight();
        if !(mass > T::zero()) || !mass.finite() {
            return Err(FusionError::DegenerateMass(mass.as_f64()));
        }
        let mut out = self.clone();
        for c in &mut out.components {
            c.weight /= mass;
        }
        Ok((out, mass))
    }

    /// Prune, merge and cap.
    ///
    /// Components with weight below `prune_threshold` are removed. The
    /// heaviest remaining component then absorbs every component within
    /// squared Mahalanobis distance `merge_threshold` (measured with the
    /// candidate's covariance) via a moment-preserving merge, repeating until
    /// none remain. Finally at most `max_components` of the heaviest results
    /// are kept. Weights are not renormalized.
    pub fn reduce(&self, params: &GmReduction<T>) -> Self {
        let mut pool: Vec<&GaussianComponent<T>> = self
            .components
            .iter()
            .filter(|c| c.weight >= params.prune_threshold && c.weight > T::zero())
            .collect();
        let mut merged = Vec::new();
        while !pool.is_empty() {
            // heaviest, lowest index on ties
            let mut best = 0;
            for (i, c) in pool.iter().enumerate() {
                if c.weight > pool[best].weight {
                    best = i;
                }
            }
            let anchor = pool[best].mean.clone();
            let (group, rest): (Vec<_>, Vec<_>) =
                pool.into_iter().enumerate().partition(|(i, c)| {
                    *i == best
                        || mahalanobis_sq(&c.mean, &anchor, &c.cov)
                            .is_some_and(|m| m <= params.merge_threshold)
                });
            pool = rest.into_iter().map(|(_, c)| c).collect();
            let group: Vec<_> = group.into_iter().map(|(_, c)| c).collect();
            merged.push(moment_merge(&group));
        }
        merged.sort_by(|a, b| {
            b.weight
                .partial_cmp(&a.weight)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        merged.truncate(params.max_components.max(1));
        Self {
            dim: self.dim,
            components: merged,
        }
    }

    /// Mean of the heaviest component, lowest index on ties.
    pub fn heaviest_mean(&self) -> Option<&DVector<T>> {
        let mut best: Option<&GaussianComponent<T>> = None;
        for c in &self.components {
            match best {
                Some(b) if c.weight <= b.weight => {}
                _ => best = Some(c),
            }
        }
        best.map(|c| &c.mean)
    }

    /// Overall mixture mean `Σ α m / Σ α`.
    pub fn mean(&self) -> Option<DVector<T>> {
        let w = self.total_weight();
        if !(w > T::zero()) {
            return None;
        }
        let mut m = DVector::zeros(self.dim);
        for c in &self.components {
            m += &c.mean * (c.weight / w);
        }
        Some(m)
    }
}

/// Double-sum mixture for `p1^ω1 · p2^ω2`, unnormalized.
///
/// Each term combines the ω-scaled covariances in information form:
/// `P12 = ((P1/ω1)^-1 + (P2/ω2)^-1)^-1`,
/// `m12 = P12 ((P1/ω1)^-1 m1 + (P2/ω2)^-1 m2)`, and its weight carries
/// `N(m1 - m2; 0, P1/ω1 + P2/ω2)`, so the total mass equals the overlap
/// integral exactly.
pub fn pair_product<T: Real>(
    p1: &GaussianMixture<T>,
    omega1: T,
    p2: &GaussianMixture<T>,
    omega2: T,
) -> Result<GaussianMixture<T>> {
    check_pair(p1, omega1, p2, omega2)?;
    let (f1, f2) = (
        PoweredFactors::new(p1, omega1)?,
        PoweredFactors::new(p2, omega2)?,
    );
    let mut out = Vec::with_capacity(p1.len() * p2.len());
    for a in &f1.terms {
        for b in &f2.terms {
            let log_w = cross_log_weight(a, b)?;
            let info = &a.info + &b.info;
            let info_chol = cholesky(&info)?;
            let cov = symmetrize(info_chol.inverse());
            let mean = &cov * (&a.info_mean + &b.info_mean);
            out.push(GaussianComponent::new(log_w.exp(), mean, cov));
        }
    }
    Ok(GaussianMixture {
        dim: p1.dim,
        components: out,
    })
}

/// `ln ∫ p1^ω1 p2^ω2 dx` under the componentwise power approximation; the
/// log of the total weight of [`pair_product`]. Returns `-inf` when every
/// term has zero weight.
pub fn pair_product_log_mass<T: Real>(
    p1: &GaussianMixture<T>,
    omega1: T,
    p2: &GaussianMixture<T>,
    omega2: T,
) -> Result<T> {
    check_pair(p1, omega1, p2, omega2)?;
    let (f1, f2) = (
        PoweredFactors::new(p1, omega1)?,
        PoweredFactors::new(p2, omega2)?,
    );
    pair_log_mass_factored(&f1, &f2)
}

/// Log weights of each term of [`pair_product`], row-major over (j1, j2).
pub(crate) fn pair_log_weights<T: Real>(
    f1: &PoweredFactors<T>,
    f2: &PoweredFactors<T>,
) -> Result<Vec<T>> {
    let mut logs = Vec::with_capacity(f1.terms.len() * f2.terms.len());
    for a in &f1.terms {
        for b in &f2.terms {
            logs.push(cross_log_weight(a, b)?);
        }
    }
    Ok(logs)
}

pub(crate) fn pair_log_mass_factored<T: Real>(
    f1: &PoweredFactors<T>,
    f2: &PoweredFactors<T>,
) -> Result<T> {
    Ok(log_sum_exp(&pair_log_weights(f1, f2)?))
}

/// Normalized fused density `p1^ω1 p2^ω2 / Z` and `ln Z`, with the weights
/// normalized in log space so a tiny but nonzero `Z` does not underflow.
pub(crate) fn pair_product_normalized<T: Real>(
    f1: &PoweredFactors<T>,
    f2: &PoweredFactors<T>,
) -> Result<(GaussianMixture<T>, T)> {
    let logs = pair_log_weights(f1, f2)?;
    let log_mass = log_sum_exp(&logs);
    let mut out = Vec::with_capacity(logs.len());
    let mut k = 0;
    for a in &f1.terms {
        for b in &f2.terms {
            let info = &a.info + &b.info;
            let info_chol = cholesky(&info)?;
            let cov = symmetrize(info_chol.inverse());
            let mean = &cov * (&a.info_mean + &b.info_mean);
            let w = if log_mass.finite() {
                (logs[k] - log_mass).exp()
            } else {
                T::zero()
            };
            out.push(GaussianComponent::new(w, mean, cov));
            k += 1;
        }
    }
    Ok((
        GaussianMixture {
            dim: f1.dim,
            components: out,
        },
        log_mass,
    ))
}

/// Per-component quantities of `[α N(m, P)]^ω` reused across many pairs.
#[derive(Debug, Clone)]
pub(crate) struct PoweredFactors<T: Real> {
    dim: usize,
    terms: Vec<PoweredTerm<T>>,
}

#[derive(Debug, Clone)]
struct PoweredTerm<T: Real> {
    /// `ω ln α + ln ρ(P, ω)`
    log_scale: T,
    mean: DVector<T>,
    /// `P / ω`
    scaled_cov: DMatrix<T>,
    /// `(P / ω)^-1`
    info: DMatrix<T>,
    /// `(P / ω)^-1 m`
    info_mean: DVector<T>,
}

impl<T: Real> PoweredFactors<T> {
    pub(crate) fn new(mix: &GaussianMixture<T>, omega: T) -> Result<Self> {
        check_exponent(omega)?;
        let mut terms = Vec::with_capacity(mix.len());
        for c in mix.components() {
            let chol = cholesky(&c.cov)?;
            let log_scale = omega * c.weight.ln() + log_rho(log_det(&chol), mix.dim, omega);
            let info = symmetrize(chol.inverse()) * omega;
            let info_mean = &info * &c.mean;
            terms.push(PoweredTerm {
                log_scale,
                mean: c.mean.clone(),
                scaled_cov: &c.cov / omega,
                info,
                info_mean,
            });
        }
        Ok(Self {
            dim: mix.dim,
            terms,
        })
    }
}

fn cross_log_weight<T: Real>(a: &PoweredTerm<T>, b: &PoweredTerm<T>) -> Result<T> {
    if !a.log_scale.finite() || !b.log_scale.finite() {
        return Ok(T::neg_infinity());
    }
    let s = &a.scaled_cov + &b.scaled_cov;
    let chol = cholesky(&s)?;
    Ok(a.log_scale + b.log_scale + log_normal_with(&chol, &(&a.mean - &b.mean)))
}

fn check_exponent<T: Real>(omega: T) -> Result<()> {
    if !(omega > T::zero() && omega <= T::one()) {
        return Err(FusionError::InvalidExponent(omega.as_f64()));
    }
    Ok(())
}

fn check_pair<T: Real>(
    p1: &GaussianMixture<T>,
    omega1: T,
    p2: &GaussianMixture<T>,
    omega2: T,
) -> Result<()> {
    if p1.dim != p2.dim {
        return Err(FusionError::DimensionMismatch {
            expected: p1.dim,
            found: p2.dim,
        });
    }
    if (omega1 + omega2 - T::one()).abs() > T::tol(WEIGHT_SUM_TOL) {
        return Err(FusionError::InvalidWeights(
            omega1.as_f64(),
            omega2.as_f64(),
        ));
    }
    Ok(())
}

/// `ln ρ(P, ω)` given `ln det P`.
pub fn log_rho<T: Real>(log_det_p: T, dim: usize, omega: T) -> T {
    let d = T::from_usize(dim).unwrap();
    let ln_2pi = T::two_pi().ln();
    let half = T::lit(0.5);
    half * ((T::one() - omega) * (d * ln_2pi + log_det_p) - d * omega.ln())
}

pub(crate) fn cholesky<T: Real>(m: &DMatrix<T>) -> Result<Cholesky<T, Dyn>> {
    if m.nrows() != m.ncols() {
        return Err(FusionError::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    Cholesky::new(m.clone()).ok_or(FusionError::NotPositiveDefinite)
}

pub(crate) fn log_det<T: Real>(chol: &Cholesky<T, Dyn>) -> T {
    let l = chol.l_dirty();
    (0..l.nrows()).fold(T::zero(), |acc, i| acc + l[(i, i)].ln()) * T::lit(2.0)
}

/// `ln N(diff; 0, S)` for a factored `S`.
pub(crate) fn log_normal_with<T: Real>(chol: &Cholesky<T, Dyn>, diff: &DVector<T>) -> T {
    let d = T::from_usize(diff.len()).unwrap();
    let solved = chol.solve(diff);
    let maha = diff.dot(&solved);
    -T::lit(0.5) * (d * T::two_pi().ln() + log_det(chol) + maha)
}

/// `ln N(x; m, P)`.
pub fn log_normal_pdf<T: Real>(x: &DVector<T>, mean: &DVector<T>, cov: &DMatrix<T>) -> Result<T> {
    if x.len() != mean.len() {
        return Err(FusionError::DimensionMismatch {
            expected: mean.len(),
            found: x.len(),
        });
    }
    let chol = cholesky(cov)?;
    Ok(log_normal_with(&chol, &(x - mean)))
}

fn mahalanobis_sq<T: Real>(x: &DVector<T>, mean: &DVector<T>, cov: &DMatrix<T>) -> Option<T> {
    let chol = Cholesky::new(cov.clone())?;
    let diff = x - mean;
    Some(diff.dot(&chol.solve(&diff)))
}

pub(crate) fn symmetrize<T: Real>(m: DMatrix<T>) -> DMatrix<T> {
    (&m + m.transpose()) * T::lit(0.5)
}

fn moment_merge<T: Real>(group: &[&GaussianComponent<T>]) -> GaussianComponent<T> {
    let weight = group.iter().fold(T::zero(), |acc, c| acc + c.weight);
    let dim = group[0].dim();
    let mut mean = DVector::zeros(dim);
    for c in group {
        mean += &c.mean * (c.weight / weight);
    }
    let mut cov = DMatrix::zeros(dim, dim);
    for c in group {
        let diff = &mean - &c.mean;
        cov += (&c.cov + &diff * diff.transpose()) * (c.weight / weight);
    }
    GaussianComponent::new(weight, mean, symmetrize(cov))
}
