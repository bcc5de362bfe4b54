//! Multi-Bernoulli filtering and distributed fusion with generalized
//! covariance intersection (GCI).
//!
//! The building blocks are Gaussian-mixture densities ([`gm`]), the local
//! multi-Bernoulli filter ([`mb`]), exhaustive GCI fusion ([`gci`]), gating
//! and clustering of Bernoulli components ([`clustering`]) and the clustered
//! fusion built on them ([`pgci`]). [`sim`] drives Monte-Carlo experiments.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.

// Negated comparisons are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod error;
pub mod gci;
pub mod gm;
pub mod mb;
pub mod pgci;
pub mod scalar;
pub mod sim;

pub use clustering::{cluster, Cluster, ClusterKind, DisjointSet, LargestIsolatedClustering};
pub use error::{FusionError, Result};
pub use gci::{
    count_hypotheses, count_hypotheses_full, gci_divergence, naive_fuse, naive_gci_mb_fuse,
};
pub use pgci::{multi_sensor_fuse, pgci_fuse, FusionDiagnostics};
pub use scalar::Real;

pub type Gaussian = gm::GaussianComponent<f64>;
pub type Mixture = gm::GaussianMixture<f64>;
pub type Bernoulli = mb::BernoulliComponent<f64>;
pub type MultiBernoulli = mb::MultiBernoulliDensity<f64>;
pub type Weights = gci::FusionWeights<f64>;
pub type Distances = gci::DistanceMatrix<f64>;
pub type Gmb = gci::GmbDensity<f64>;
pub type PgciSettings = pgci::PgciConfig<f64>;
pub type Motion = mb::MotionModel<f64>;
pub type Sensor = mb::SensorModel<f64>;
