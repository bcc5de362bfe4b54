//! Multi-Bernoulli densities and the local Gaussian-mixture MB filter.

mod filter;
mod model;

pub use filter::{
    adaptive_birth, association_probabilities, bernoulli_track_update, extract_estimates, predict,
    reduce, update, BirthConfig, MbReduction, EXISTENCE_CAP,
};
pub(crate) use filter::{clamp_existence, existence_cap};
pub use model::{MotionModel, Region, SensorModel};

use std::collections::HashSet;

use crate::error::{FusionError, Result};
use crate::gm::GaussianMixture;
use crate::scalar::Real;

/// A potential object: existence probability and location density.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliComponent<T: Real> {
    pub r: T,
    pub pdf: GaussianMixture<T>,
    /// Bookkeeping tag, unique within a density.
    pub id: u64,
}

impl<T: Real> BernoulliComponent<T> {
    pub fn new(r: T, pdf: GaussianMixture<T>, id: u64) -> Self {
        Self { r, pdf, id }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r >= T::zero() && self.r <= T::one()) {
            return Err(FusionError::InvalidConfig(format!(
                "existence probability {} outside [0, 1]",
                self.r
            )));
        }
        if !self.pdf.is_normalized() {
            return Err(FusionError::DegenerateMass(
                self.pdf.total_weight().as_f64(),
            ));
        }
        self.pdf.validate()
    }
}

/// Union of independent Bernoulli components.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiBernoulliDensity<T: Real> {
    dim: usize,
    components: Vec<BernoulliComponent<T>>,
}

impl<T: Real> MultiBernoulliDensity<T> {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            components: Vec::new(),
        }
    }

    /// Builds a density, rejecting duplicate ids and mismatched dimensions.
    pub fn from_components(dim: usize, components: Vec<BernoulliComponent<T>>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(components.len());
        for c in &components {
            if c.pdf.dim() != dim {
                return Err(FusionError::DimensionMismatch {
                    expected: dim,
                    found: c.pdf.dim(),
                });
            }
            if !seen.insert(c.id) {
                return Err(FusionError::InvalidConfig(format!(
                    "duplicate Bernoulli id {}",
                    c.id
                )));
            }
        }
        Ok(Self { dim, components })
    }

    pub(crate) fn from_components_unchecked(
        dim: usize,
        components: Vec<BernoulliComponent<T>>,
    ) -> Self {
        Self { dim, components }
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

    pub fn components(&self) -> &[BernoulliComponent<T>] {
        &self.components
    }

    pub fn into_components(self) -> Vec<BernoulliComponent<T>> {
        self.components
    }

    pub fn existence(&self) -> Vec<T> {
        self.components.iter().map(|c| c.r).collect()
    }

    /// Expected number of objects, `Σ r`.
    pub fn expected_cardinality(&self) -> T {
        self.components.iter().fold(T::zero(), |acc, c| acc + c.r)
    }

    /// Smallest id strictly above every id in use.
    pub fn next_id(&self) -> u64 {
        self.components.iter().map(|c| c.id + 1).max().unwrap_or(0)
    }

    /// `ln Q^I = Σ_{ℓ∈I} ln r + Σ_{ℓ∉I} ln(1-r)` for the given membership mask.
    pub fn log_q(&self, selected: &[bool]) -> T {
        self.components
            .iter()
            .zip(selected)
            .fold(T::zero(), |acc, (c, &s)| {
                acc + if s { c.r.ln() } else { (T::one() - c.r).ln() }
            })
    }

    pub fn validate(&self) -> Result<()> {
        Self::from_components(self.dim, self.components.clone())?;
        self.components.iter().try_for_each(|c| c.validate())
    }
}
