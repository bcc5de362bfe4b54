use thiserror::Error;

/// Errors raised by the filter, fusion and simulation code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("covariance is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("fusion exponent {0} outside (0, 1]")]
    InvalidExponent(f64),

    #[error("fusion weights must be in (0, 1) and sum to 1, got ({0}, {1})")]
    InvalidWeights(f64, f64),

    #[error("mixture mass {0} is not positive and finite")]
    DegenerateMass(f64),

    #[error("pair ({0}, {1}) has zero overlap; it must be gated out before fusion")]
    IncompatiblePair(usize, usize),

    #[error("exhaustive fusion needs {hypotheses} hypotheses, above the cap of {cap}")]
    Intractable { hypotheses: String, cap: u64 },

    #[error("cluster {cluster} ({n1} x {n2} components) needs {hypotheses} hypotheses, above the cap of {cap}")]
    OversizedCluster {
        cluster: usize,
        n1: usize,
        n2: usize,
        hypotheses: String,
        cap: u64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("run {run}, step {step}: {source}")]
    AtStep {
        run: usize,
        step: usize,
        #[source]
        source: Box<FusionError>,
    },
}

impl FusionError {
    /// True for failures caused by enumeration caps rather than bad input or numerics.
    pub fn is_cap_failure(&self) -> bool {
        match self {
            FusionError::Intractable { .. } | FusionError::OversizedCluster { .. } => true,
            FusionError::AtStep { source, .. } => source.is_cap_failure(),
            _ => false,
        }
    }

    pub fn is_config_error(&self) -> bool {
        match self {
            FusionError::InvalidConfig(_) => true,
            FusionError::AtStep { source, .. } => source.is_config_error(),
            _ => false,
        }
    }

    pub(crate) fn at_step(self, run: usize, step: usize) -> Self {
        FusionError::AtStep {
            run,
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = FusionError> = std::result::Result<T, E>;
