#![allow(dead_code)]

use mbfusion::gm::{GaussianComponent, GaussianMixture};
use mbfusion::mb::{BernoulliComponent, MultiBernoulliDensity};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn spd<R: Rng>(rng: &mut R, dim: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let diag = DMatrix::from_diagonal(&DVector::from_fn(dim, |_, _| rng.random_range(lo..hi)));
    &a * a.transpose() * 0.3 * lo + diag
}

pub fn gaussian<R: Rng>(
    rng: &mut R,
    center: &[f64],
    spread: f64,
    var: (f64, f64),
) -> GaussianComponent<f64> {
    let dim = center.len();
    let mean = DVector::from_fn(dim, |i, _| center[i] + rng.random_range(-spread..spread));
    GaussianComponent::new(1.0, mean, spd(rng, dim, var.0, var.1))
}

pub fn mixture<R: Rng>(rng: &mut R, center: &[f64], n: usize) -> GaussianMixture<f64> {
    let mut comps: Vec<_> = (0..n)
        .map(|_| gaussian(rng, center, 3.0, (1.0, 9.0)))
        .collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for (c, w) in comps.iter_mut().zip(weights) {
        c.weight = w / total;
    }
    GaussianMixture::from_components(center.len(), comps).unwrap()
}

/// MB with `n` components whose means lie around the given centres.
pub fn random_mb<R: Rng>(
    rng: &mut R,
    centers: &[Vec<f64>],
    max_terms: usize,
) -> MultiBernoulliDensity<f64> {
    let comps = centers
        .iter()
        .enumerate()
        .map(|(id, c)| {
            let terms = rng.random_range(1..=max_terms);
            BernoulliComponent::new(
                rng.random_range(0.05..0.95),
                mixture(rng, c, terms),
                id as u64,
            )
        })
        .collect();
    MultiBernoulliDensity::from_components(centers[0].len(), comps).unwrap()
}

pub fn random_centers<R: Rng>(rng: &mut R, n: usize, dim: usize, extent: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| rng.random_range(-extent..extent))
                .collect()
        })
        .collect()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}
