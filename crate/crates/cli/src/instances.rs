//! Synthetic fusion inputs for the diagnostic commands.

use mbfusion::gm::{GaussianComponent, GaussianMixture};
use mbfusion::mb::{BernoulliComponent, MultiBernoulliDensity};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn spd<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
    let diag = DMatrix::from_diagonal(&DVector::from_fn(2, |_, _| rng.random_range(lo..hi)));
    &a * a.transpose() * 0.3 * lo + diag
}

fn location<R: Rng>(rng: &mut R, centre: &DVector<f64>, terms: usize) -> GaussianMixture<f64> {
    let w: Vec<f64> = (0..terms).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = w.iter().sum();
    let comps = w
        .iter()
        .map(|&a| {
            let mean = centre + DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
            GaussianComponent::new(a / total, mean, spd(rng, 1.0, 9.0))
        })
        .collect();
    GaussianMixture::from_components(2, comps).expect("valid mixture")
}

/// `n` components scattered over `[-extent, extent]²` with up to
/// `max_terms` Gaussians each.
pub fn random_mb<R: Rng>(
    rng: &mut R,
    n: usize,
    extent: f64,
    max_terms: usize,
) -> MultiBernoulliDensity<f64> {
    let comps = (0..n)
        .map(|id| {
            let centre = DVector::from_fn(2, |_, _| rng.random_range(-extent..extent));
            let terms = rng.random_range(1..=max_terms);
            BernoulliComponent::new(
                rng.random_range(0.05..0.95),
                location(rng, &centre, terms),
                id as u64,
            )
        })
        .collect();
    MultiBernoulliDensity::from_components(2, comps).expect("valid density")
}

/// Objects on a line with the given spacing, seen with a few metres of error.
pub fn line_layout<R: Rng>(rng: &mut R, n: usize, spacing: f64) -> MultiBernoulliDensity<f64> {
    let comps = (0..n)
        .map(|id| {
            let mean = DVector::from_vec(vec![
                spacing * id as f64 + rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            ]);
            let pdf = GaussianMixture::single(1.0, mean, DMatrix::identity(2, 2) * 25.0);
            BernoulliComponent::new(rng.random_range(0.6..0.95), pdf, id as u64)
        })
        .collect();
    MultiBernoulliDensity::from_components(2, comps).expect("valid density")
}
