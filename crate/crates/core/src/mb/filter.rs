//! Prediction, update, birth and reduction for the GM multi-Bernoulli filter.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{BernoulliComponent, MotionModel, MultiBernoulliDensity, SensorModel};
use crate::error::Result;
use crate::gm::{
    cholesky, log_normal_with, symmetrize, GaussianComponent, GaussianMixture, GmReduction,
};
use crate::scalar::{log_sum_exp, Real};

/// Upper clamp applied to every updated existence probability.
pub const EXISTENCE_CAP: f64 = 1.0 - 1e-9;

/// `1 - 1e-9`, widened to a few ulps for types where that rounds to one.
pub(crate) fn existence_cap<T: Real>() -> T {
    let gap = T::lit(1e-9).max(T::default_epsilon() * T::lit(4.0));
    T::one() - gap
}

pub(crate) fn clamp_existence<T: Real>(r: T) -> T {
    r.max(T::zero()).min(existence_cap())
}

/// Adaptive birth parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirthConfig<T> {
    /// Upper bound on a birth's existence probability.
    pub max_existence: T,
    /// Expected number of births per scan, shared across the scan's reports.
    pub expected_births: T,
    /// Positional standard deviation of a birth (m); normally the sensor's σ_ε.
    pub position_std: T,
    /// Velocity standard deviation of a birth (m/s).
    pub velocity_std: T,
}

impl<T: Real> Default for BirthConfig<T> {
    fn default() -> Self {
        Self {
            max_existence: T::lit(0.03),
            expected_births: T::lit(0.1),
            position_std: T::lit(10.0),
            velocity_std: T::lit(10.0),
        }
    }
}

/// Bernoulli truncation and capping applied after each update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MbReduction<T> {
    pub truncation: T,
    pub max_components: usize,
    pub gm: GmReduction<T>,
}

impl<T: Real> Default for MbReduction<T> {
    fn default() -> Self {
        Self {
            truncation: T::lit(1e-4),
            max_components: 100,
            gm: GmReduction::default(),
        }
    }
}

/// Chapman-Kolmogorov step: `r' = P_S r`, each Gaussian moved to
/// `(F m, F P Fᵀ + Q)`, births appended.
pub fn predict<T: Real>(
    prior: &MultiBernoulliDensity<T>,
    motion: &MotionModel<T>,
    births: &[BernoulliComponent<T>],
) -> MultiBernoulliDensity<T> {
    let f = &motion.transition;
    let ft = f.transpose();
    let mut out = Vec::with_capacity(prior.len() + births.len());
    for c in prior.components() {
        let comps = c
            .pdf
            .components()
            .iter()
            .map(|g| {
                GaussianComponent::new(
                    g.weight,
                    f * &g.mean,
                    symmetrize(f * &g.cov * &ft + &motion.process_noise),
                )
            })
            .collect();
        out.push(BernoulliComponent::new(
            motion.survival * c.r,
            GaussianMixture::from_components(prior.dim(), comps).expect("dimension preserved by F"),
            c.id,
        ));
    }
    out.extend(births.iter().cloned());
    MultiBernoulliDensity::from_components_unchecked(prior.dim(), out)
}

/// Kalman quantities for one Gaussian term under a sensor.
struct Innovation<T: Real> {
    weight: T,
    predicted_z: DVector<T>,
    chol_s: Cholesky<T, Dyn>,
    gain: DMatrix<T>,
    mean: DVector<T>,
    updated_cov: DMatrix<T>,
}

impl<T: Real> Innovation<T> {
    fn new(g: &GaussianComponent<T>, sensor: &SensorModel<T>) -> Result<Self> {
        let h = &sensor.observation;
        let ph_t = &g.cov * h.transpose();
        let s = symmetrize(h * &ph_t + &sensor.noise);
        let chol_s = cholesky(&s)?;
        // K = P Hᵀ S⁻¹ = (S⁻¹ H P)ᵀ
        let gain = chol_s.solve(&ph_t.transpose()).transpose();
        let identity = DMatrix::<T>::identity(g.dim(), g.dim());
        let updated_cov = symmetrize((identity - &gain * h) * &g.cov);
        Ok(Self {
            weight: g.weight,
            predicted_z: h * &g.mean,
            chol_s,
            gain,
            mean: g.mean.clone(),
            updated_cov,
        })
    }

    fn log_likelihood(&self, z: &DVector<T>) -> T {
        log_normal_with(&self.chol_s, &(z - &self.predicted_z))
    }

    fn updated(&self, z: &DVector<T>) -> (DVector<T>, DMatrix<T>) {
        (
            &self.mean + &self.gain * (z - &self.predicted_z),
            self.updated_cov.clone(),
        )
    }
}

fn innovations<T: Real>(
    density: &MultiBernoulliDensity<T>,
    sensor: &SensorModel<T>,
) -> Result<Vec<Vec<Innovation<T>>>> {
    density
        .components()
        .iter()
        .map(|c| {
            c.pdf
                .components()
                .iter()
                .map(|g| Innovation::new(g, sensor))
                .collect()
        })
        .collect()
}

/// Builds a normalized mixture from log weights; `None` when all are `-inf`.
fn mixture_from_logs<T: Real>(
    dim: usize,
    terms: Vec<(T, DVector<T>, DMatrix<T>)>,
) -> Option<GaussianMixture<T>> {
    let logs: Vec<T> = terms.iter().map(|t| t.0).collect();
    let total = log_sum_exp(&logs);
    if !total.finite() {
        return None;
    }
    let comps = terms
        .into_iter()
        .filter(|t| t.0.finite())
        .map(|(lw, m, p)| GaussianComponent::new((lw - total).exp(), m, p))
        .collect();
    GaussianMixture::from_components(dim, comps).ok()
}

/// Cardinality-balanced MB update with constant `P_D` and uniform clutter.
///
/// Returns the legacy (missed-detection) components, keeping their ids,
/// followed by one measurement-updated component per report in scan order.
/// New ids continue from [`MultiBernoulliDensity::next_id`]. Reports whose
/// updated existence is exactly zero produce no component.
pub fn update<T: Real>(
    predicted: &MultiBernoulliDensity<T>,
    scan: &[DVector<T>],
    sensor: &SensorModel<T>,
) -> Result<MultiBernoulliDensity<T>> {
    let pd = sensor.detection;
    let dim = predicted.dim();
    let mut out: Vec<BernoulliComponent<T>> = predicted
        .components()
        .iter()
        .map(|c| {
            let r = c.r * (T::one() - pd) / (T::one() - c.r * pd);
            BernoulliComponent::new(clamp_existence(r), c.pdf.clone(), c.id)
        })
        .collect();
    if scan.is_empty() || pd <= T::zero() || predicted.is_empty() {
        return Ok(MultiBernoulliDensity::from_components_unchecked(dim, out));
    }
    let kappa = sensor.clutter_intensity();
    let inno = innovations(predicted, sensor)?;
    let mut next_id = predicted.next_id();
    for z in scan {
        let mut numerator = T::zero();
        let mut denominator = kappa;
        let mut terms = Vec::new();
        for (c, gs) in predicted.components().iter().zip(&inno) {
            let miss = T::one() - c.r * pd;
            let mut q = T::zero();
            let scale = (c.r / miss * pd).ln();
            for g in gs {
                let lq = g.log_likelihood(z);
                q += g.weight * lq.exp();
                let (m, p) = g.updated(z);
                terms.push((scale + g.weight.ln() + lq, m, p));
            }
            numerator += c.r * (T::one() - c.r) * pd * q / (miss * miss);
            denominator += c.r * pd * q / miss;
        }
        let r = numerator / denominator;
        if !(r > T::zero()) {
            continue;
        }
        if let Some(pdf) = mixture_from_logs(dim, terms) {
            out.push(BernoulliComponent::new(clamp_existence(r), pdf, next_id));
            next_id += 1;
        }
    }
    Ok(MultiBernoulliDensity::from_components_unchecked(dim, out))
}

/// Per-track Bernoulli update: every component is updated as an independent
/// Bernoulli filter against the whole scan, so the number of components is
/// unchanged. Used when the object set is known up front and components
/// must not multiply with the clutter.
///
/// With `ℓ(z) = P_D q(z) / κ` and `Δ = 1 - P_D + Σ_z ℓ(z)`:
/// `r' = r Δ / (1 - r + r Δ)` and `p' ∝ (1 - P_D) p + Σ_z ℓ(z) p(·|z)`.
pub fn bernoulli_track_update<T: Real>(
    predicted: &MultiBernoulliDensity<T>,
    scan: &[DVector<T>],
    sensor: &SensorModel<T>,
) -> Result<MultiBernoulliDensity<T>> {
    let pd = sensor.detection;
    let dim = predicted.dim();
    let log_kappa = sensor.clutter_intensity().ln();
    let inno = innovations(predicted, sensor)?;
    let mut out = Vec::with_capacity(predicted.len());
    for (c, gs) in predicted.components().iter().zip(&inno) {
        let log_miss = (T::one() - pd).ln();
        let mut terms: Vec<(T, DVector<T>, DMatrix<T>)> = c
            .pdf
            .components()
            .iter()
            .map(|g| (log_miss + g.weight.ln(), g.mean.clone(), g.cov.clone()))
            .collect();
        if pd > T::zero() {
            for z in scan {
                for g in gs {
                    let lw = pd.ln() - log_kappa + g.weight.ln() + g.log_likelihood(z);
                    let (m, p) = g.updated(z);
                    terms.push((lw, m, p));
                }
            }
        }
        let logs: Vec<T> = terms.iter().map(|t| t.0).collect();
        let log_delta = log_sum_exp(&logs);
        // r' = 1 / (1 + (1 - r) / (r Δ))
        let r = if c.r <= T::zero() {
            T::zero()
        } else {
            T::one() / (T::one() + ((T::one() - c.r).ln() - c.r.ln() - log_delta).exp())
        };
        let pdf = mixture_from_logs(dim, terms).unwrap_or_else(|| c.pdf.clone());
        out.push(BernoulliComponent::new(clamp_existence(r), pdf, c.id));
    }
    Ok(MultiBernoulliDensity::from_components_unchecked(dim, out))
}

/// Probability that each report originated from an object of `predicted`:
/// `r_U(z) = S(z) / (κ + S(z))` with `S(z) = Σ_ℓ r P_D q(z) / (1 - r P_D)`.
pub fn association_probabilities<T: Real>(
    predicted: &MultiBernoulliDensity<T>,
    scan: &[DVector<T>],
    sensor: &SensorModel<T>,
) -> Result<Vec<T>> {
    let pd = sensor.detection;
    if predicted.is_empty() || pd <= T::zero() {
        return Ok(vec![T::zero(); scan.len()]);
    }
    let log_kappa = sensor.clutter_intensity().ln();
    let inno = innovations(predicted, sensor)?;
    Ok(scan
        .iter()
        .map(|z| {
            let logs: Vec<T> = predicted
                .components()
                .iter()
                .zip(&inno)
                .flat_map(|(c, gs)| {
                    let scale = (c.r * pd / (T::one() - c.r * pd)).ln();
                    gs.iter()
                        .map(move |g| scale + g.weight.ln() + g.log_likelihood(z))
                })
                .collect();
            let log_s = log_sum_exp(&logs);
            T::one() / (T::one() + (log_kappa - log_s).exp())
        })
        .collect())
}

/// One birth per report of the previous scan, centred on the report with
/// zero velocity. `assoc` holds the probability that each report belongs to
/// an existing object (empty means none do). Existence is
/// `min(r_max, λ_B (1 - r_U(z)) / Σ_ξ (1 - r_U(ξ)))`; reports that are
/// certainly associated produce no birth.
pub fn adaptive_birth<T: Real>(
    prev_scan: &[DVector<T>],
    assoc: &[T],
    cfg: &BirthConfig<T>,
    state_dim: usize,
    first_id: u64,
) -> Vec<BernoulliComponent<T>> {
    assert!(
        assoc.is_empty() || assoc.len() == prev_scan.len(),
        "one association probability per report"
    );
    let free: Vec<T> = (0..prev_scan.len())
        .map(|k| {
            assoc
                .get(k)
                .map_or(T::one(), |&a| (T::one() - a).max(T::zero()))
        })
        .collect();
    let total = free.iter().fold(T::zero(), |acc, &f| acc + f);
    if !(total > T::zero()) {
        return Vec::new();
    }
    let mut next = first_id;
    let mut out = Vec::new();
    for (z, &f) in prev_scan.iter().zip(&free) {
        let r = cfg.max_existence.min(cfg.expected_births * f / total);
        if !(r > T::zero()) {
            continue;
        }
        let mut mean = DVector::zeros(state_dim);
        let mut cov = DMatrix::zeros(state_dim, state_dim);
        for i in 0..state_dim {
            if i < z.len() {
                mean[i] = z[i];
                cov[(i, i)] = cfg.position_std * cfg.position_std;
            } else {
                cov[(i, i)] = cfg.velocity_std * cfg.velocity_std;
            }
        }
        out.push(BernoulliComponent::new(
            r,
            GaussianMixture::single(T::one(), mean, cov),
            next,
        ));
        next += 1;
    }
    out
}

/// Drops components with `r < truncation`, keeps the `max_components`
/// largest existence probabilities (original order preserved, ties to the
/// lower index) and reduces each location mixture, renormalizing it.
pub fn reduce<T: Real>(
    density: &MultiBernoulliDensity<T>,
    params: &MbReduction<T>,
) -> MultiBernoulliDensity<T> {
    let mut keep: Vec<usize> = (0..density.len())
        .filter(|&i| density.components()[i].r >= params.truncation)
        .collect();
    if keep.len() > params.max_components {
        let mut by_r = keep.clone();
        by_r.sort_by(|&a, &b| {
            density.components()[b]
                .r
                .partial_cmp(&density.components()[a].r)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        by_r.truncate(params.max_components);
        by_r.sort_unstable();
        keep = by_r;
    }
    let out = keep
        .into_iter()
        .filter_map(|i| {
            let c = &density.components()[i];
            let (pdf, _) = c.pdf.reduce(&params.gm).normalize().ok()?;
            Some(BernoulliComponent::new(c.r, pdf, c.id))
        })
        .collect();
    MultiBernoulliDensity::from_components_unchecked(density.dim(), out)
}

/// State estimates: the heaviest Gaussian mean of every component with
/// `r > threshold`.
pub fn extract_estimates<T: Real>(
    density: &MultiBernoulliDensity<T>,
    threshold: T,
) -> Vec<DVector<T>> {
    density
        .components()
        .iter()
        .filter(|c| c.r > threshold)
        .filter_map(|c| c.pdf.heaviest_mean().cloned())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mb::Region;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn state(px: f64, py: f64) -> DVector<f64> {
        DVector::from_vec(vec![px, py, 0.0, 0.0])
    }

    fn bern(r: f64, px: f64, py: f64, id: u64) -> BernoulliComponent<f64> {
        BernoulliComponent::new(
            r,
            GaussianMixture::single(1.0, state(px, py), DMatrix::identity(4, 4) * 25.0),
            id,
        )
    }

    fn sensor(pd: f64, lambda: f64) -> SensorModel<f64> {
        SensorModel::position(10.0, pd, lambda, Region::square(500.0))
    }

    fn mb(items: Vec<BernoulliComponent<f64>>) -> MultiBernoulliDensity<f64> {
        MultiBernoulliDensity::from_components(4, items).unwrap()
    }

    #[test]
    fn predict_scales_existence() {
        let motion = MotionModel::constant_velocity(1.0, 5.0, 0.98);
        let out = predict(&mb(vec![bern(0.5, 0.0, 0.0, 0)]), &motion, &[]);
        assert_relative_eq!(out.components()[0].r, 0.49, epsilon = 1e-15);
    }

    #[test]
    fn predict_identity_dynamics() {
        let motion = MotionModel {
            transition: DMatrix::identity(4, 4),
            process_noise: DMatrix::zeros(4, 4),
            survival: 1.0,
            dt: 1.0,
        };
        let prior = mb(vec![bern(0.5, 3.0, 4.0, 0)]);
        let out = predict(&prior, &motion, &[]);
        assert_eq!(out.components()[0].pdf, prior.components()[0].pdf);
    }

    #[test]
    fn predict_appends_births() {
        let motion = MotionModel::constant_velocity(1.0, 5.0, 0.98);
        let births = vec![bern(0.03, 1.0, 1.0, 7), bern(0.03, 9.0, 9.0, 8)];
        let out = predict(&MultiBernoulliDensity::empty(4), &motion, &births);
        assert_eq!(out.len(), 2);
        assert_eq!(out.components(), &births[..]);
    }

    #[test]
    fn empty_scan_legacy_only() {
        let out = update(&mb(vec![bern(0.5, 0.0, 0.0, 0)]), &[], &sensor(0.95, 10.0)).unwrap();
        assert_eq!(out.len(), 1);
        // 0.5 · 0.05 / (1 - 0.475)
        assert_relative_eq!(out.components()[0].r, 0.047619047619047616, epsilon = 1e-15);
    }

    #[test]
    fn blind_sensor_leaves_density() {
        let prior = mb(vec![bern(0.5, 0.0, 0.0, 0), bern(0.3, 50.0, 0.0, 1)]);
        let out = update(
            &prior,
            &[DVector::from_vec(vec![0.0, 0.0])],
            &sensor(0.0, 10.0),
        )
        .unwrap();
        assert_eq!(out, prior);
    }

    #[test]
    fn measurement_on_mean_with_no_clutter() {
        let mut s = sensor(0.95, 1e-12 * 1e6);
        s.clutter_rate = 1e-12 * s.region.area();
        let out = update(
            &mb(vec![bern(0.5, 0.0, 0.0, 0)]),
            &[DVector::from_vec(vec![0.0, 0.0])],
            &s,
        )
        .unwrap();
        assert_eq!(out.len(), 2);
        let r_u = out.components()[1].r;
        // κ → 0 limit of the update: (1 - r) / (1 - r P_D)
        assert_relative_eq!(r_u, 0.5 / 0.525, epsilon = 1e-6);
    }

    #[test]
    fn perfect_sensor_confirms_track() {
        let s = SensorModel::position(10.0, 1.0, 0.0, Region::square(500.0));
        let prior = mb(vec![bern(0.6, 0.0, 0.0, 0), bern(0.6, 400.0, 400.0, 1)]);
        let out = update(&prior, &[DVector::from_vec(vec![0.0, 0.0])], &s).unwrap();
        let r_u = out.components()[2].r;
        assert!(r_u > 0.99, "r_u = {r_u}");
        assert_eq!(out.components()[0].r, 0.0);
    }

    #[test]
    fn update_assigns_fresh_ids() {
        let prior = mb(vec![bern(0.5, 0.0, 0.0, 3)]);
        let scan = vec![
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![5.0, 5.0]),
        ];
        let out = update(&prior, &scan, &sensor(0.95, 10.0)).unwrap();
        let ids: Vec<u64> = out.components().iter().map(|c| c.id).collect();
        assert_eq!(ids, vec![3, 4, 5]);
        assert!(out.validate().is_ok());
    }

    #[test]
    fn track_update_keeps_count_and_confirms() {
        let prior = mb(vec![bern(0.5, 0.0, 0.0, 0), bern(0.5, 300.0, 0.0, 1)]);
        let scan = vec![DVector::from_vec(vec![1.0, -1.0])];
        let out = bernoulli_track_update(&prior, &scan, &sensor(0.95, 10.0)).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.components()[0].r > 0.99);
        // missed: r (1 - P_D) / (1 - r P_D) when the report is far away
        assert_relative_eq!(out.components()[1].r, 0.5 * 0.05 / 0.525, epsilon = 1e-6);
        assert!(out.validate().is_ok());
    }

    #[test]
    fn birth_examples() {
        let cfg = BirthConfig::default();
        assert!(adaptive_birth::<f64>(&[], &[], &cfg, 4, 0).is_empty());
        let one = adaptive_birth(&[DVector::from_vec(vec![3.0, 4.0])], &[], &cfg, 4, 10);
        assert_eq!(one.len(), 1);
        assert_relative_eq!(one[0].r, 0.03);
        assert_eq!(one[0].id, 10);
        let c = &one[0].pdf.components()[0];
        assert_eq!(c.mean.as_slice(), &[3.0, 4.0, 0.0, 0.0]);
        assert_eq!(c.cov[(0, 0)], 100.0);
        assert_eq!(c.cov[(3, 3)], 100.0);
        let scan: Vec<_> = (0..10)
            .map(|i| DVector::from_vec(vec![i as f64, 0.0]))
            .collect();
        let ten = adaptive_birth(&scan, &[], &cfg, 4, 0);
        assert_eq!(ten.len(), 10);
        assert!(ten.iter().all(|b| (b.r - 0.01).abs() < 1e-15));
        // an associated report gives its share to the others
        let mut assoc = vec![0.0; 10];
        assoc[3] = 1.0;
        let nine = adaptive_birth(&scan, &assoc, &cfg, 4, 0);
        assert_eq!(nine.len(), 9);
        assert!(nine.iter().all(|b| (b.r - 0.1 / 9.0).abs() < 1e-15));
        assert_eq!(nine[3].pdf.components()[0].mean[0], 4.0);
    }

    #[test]
    fn association_near_and_far() {
        let sensor = SensorModel::position(10.0, 0.95, 10.0, Region::square(1000.0));
        let prior = mb(vec![bern(0.9, 0.0, 0.0, 0)]);
        let scan = vec![
            DVector::from_vec(vec![1.0, -2.0]),
            DVector::from_vec(vec![800.0, 800.0]),
        ];
        let a = association_probabilities(&prior, &scan, &sensor).unwrap();
        assert!(a[0] > 0.99 && a[1] < 1e-6);
        // r_U matches the non-clutter share of the update's denominator
        let out = update(&prior, &scan[..1], &sensor).unwrap();
        assert!(out.components()[1].r <= a[0]);
        assert!(
            association_probabilities(&MultiBernoulliDensity::empty(4), &scan, &sensor)
                .unwrap()
                .iter()
                .all(|&x| x == 0.0)
        );
    }

    #[test]
    fn reduce_truncates_and_caps() {
        let out = reduce(
            &mb(vec![bern(0.9, 0.0, 0.0, 0), bern(5e-5, 1.0, 0.0, 1)]),
            &MbReduction::default(),
        );
        assert_eq!(out.len(), 1);
        let many: Vec<_> = (0..120)
            .map(|i| bern(0.001 + i as f64 * 0.005, i as f64 * 100.0, 0.0, i))
            .collect();
        let out = reduce(&mb(many), &MbReduction::default());
        assert_eq!(out.len(), 100);
        assert!(out.components().iter().all(|c| c.id >= 20));
        assert!(reduce(
            &MultiBernoulliDensity::<f64>::empty(4),
            &MbReduction::default()
        )
        .is_empty());
    }

    #[test]
    fn extraction_threshold_and_ties() {
        let d = mb(vec![bern(0.9, 1.0, 2.0, 0), bern(0.2, 5.0, 5.0, 1)]);
        let est = extract_estimates(&d, 0.5);
        assert_eq!(est.len(), 1);
        assert_eq!(est[0][0], 1.0);
        assert!(extract_estimates(&d, 0.95).is_empty());
        let tie = GaussianMixture::from_components(
            4,
            vec![
                GaussianComponent::new(0.5, state(1.0, 1.0), DMatrix::identity(4, 4)),
                GaussianComponent::new(0.5, state(2.0, 2.0), DMatrix::identity(4, 4)),
            ],
        )
        .unwrap();
        let d = mb(vec![BernoulliComponent::new(0.8, tie, 0)]);
        assert_eq!(extract_estimates(&d, 0.5)[0][0], 1.0);
    }

    #[test]
    fn empty_scan_cardinality_identity() {
        let rs = [0.1, 0.5, 0.93, 0.999];
        let prior = mb(rs
            .iter()
            .enumerate()
            .map(|(i, &r)| bern(r, i as f64 * 50.0, 0.0, i as u64))
            .collect());
        let out = update(&prior, &[], &sensor(0.9, 10.0)).unwrap();
        let expected: f64 = rs.iter().map(|r| r * 0.1 / (1.0 - r * 0.9)).sum();
        assert_relative_eq!(out.expected_cardinality(), expected, epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn updated_existence_stays_below_one(
            rs in prop::collection::vec(0.0f64..=1.0, 1..4),
            pd in 0.0f64..=1.0,
            lambda in 0.0f64..20.0,
            zs in prop::collection::vec((-60.0f64..60.0, -60.0f64..60.0), 0..4),
        ) {
            let prior = mb(rs.iter().enumerate().map(|(i, &r)| bern(r, i as f64 * 20.0, 0.0, i as u64)).collect());
            let scan: Vec<_> = zs.iter().map(|&(x, y)| DVector::from_vec(vec![x, y])).collect();
            let out = update(&prior, &scan, &sensor(pd, lambda)).unwrap();
            for c in out.components() {
                prop_assert!(c.r >= 0.0 && c.r < 1.0, "r = {}", c.r);
            }
            let trk = bernoulli_track_update(&prior, &scan, &sensor(pd, lambda.max(1e-3))).unwrap();
            for c in trk.components() {
                prop_assert!(c.r >= 0.0 && c.r < 1.0, "r = {}", c.r);
            }
        }
    }
}
