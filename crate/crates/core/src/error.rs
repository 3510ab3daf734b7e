use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum GeoError {
    #[error("point ({0}, {1}) lies outside the closed unit disk")]
    Domain(f64, f64),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("geodesic trapped: travel time exceeded budget {budget}")]
    Trapped { budget: f64 },

    #[error("matrix weight is singular (|det| = {det:e})")]
    WeightSingular { det: f64 },

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("iteration did not converge after {iterations} iterations: {what}")]
    Convergence { iterations: usize, what: String },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("ring {ring} has no covering rays")]
    NoCoveringRays { ring: usize },

    #[error("iteration diverged: misfit history {history:?}")]
    Divergence { history: Vec<f64> },

    #[error("quadrature step {step} exceeds limit {limit} at lambda = {lambda}")]
    QuadratureStep { step: f64, limit: f64, lambda: f64 },

    #[error("ray {index}: {source}")]
    Ray {
        index: usize,
        #[source]
        source: Box<GeoError>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GeoError {
    /// Wraps an error with the index of the fan ray that produced it.
    pub fn at_ray(self, index: usize) -> Self {
        GeoError::Ray {
            index,
            source: Box::new(self),
        }
    }

    /// Process exit status: 2 for configuration errors, 3 for geometry and
    /// hypothesis failures, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            GeoError::Config(_)
            | GeoError::Expr(_)
            | GeoError::InvalidArgument(_)
            | GeoError::SizeMismatch { .. }
            | GeoError::QuadratureStep { .. }
            | GeoError::Io(_) => 2,
            GeoError::Domain(..)
            | GeoError::Trapped { .. }
            | GeoError::Hypothesis(_)
            | GeoError::NoCoveringRays { .. }
            | GeoError::WeightSingular { .. } => 3,
            GeoError::Numeric(_) | GeoError::Convergence { .. } | GeoError::Divergence { .. } => 4,
            GeoError::Ray { .. } => unreachable!("root skips ray annotations"),
        }
    }

    /// Innermost error, skipping ray annotations.
    pub fn root(&self) -> &GeoError {
        match self {
            GeoError::Ray { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, GeoError>;
