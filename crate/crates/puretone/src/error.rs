use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// The variants are grouped so that a driver can map them onto distinct
/// process exit codes (see [`Error::category`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("constitutive law violated: {0}")]
    Constitutive(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("integration failed at x = {x}: {reason}")]
    Integration { x: f64, reason: String },

    #[error("evolution failed at x = {x}: {reason}")]
    Evolution { x: f64, reason: String },

    #[error("resonant modes {offenders:?} (min |delta| = {min_divisor:e})")]
    Resonance {
        offenders: Vec<usize>,
        min_divisor: f64,
    },

    #[error("genuine nonlinearity violated: {0}")]
    GenuineNonlinearity(String),

    #[error("auxiliary solve left the trust region: {0}")]
    TrustRegion(String),

    #[error("bifurcation equation not solved: {0}")]
    Bifurcation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by command-line drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    /// Bad input: arguments, profiles, gas parameters, files.
    Config,
    /// A resonant mode blocks the requested construction.
    Resonance,
    /// Gradient blow-up or loss of hyperbolicity during evolution.
    BlowUp,
    /// An iterative solver or integrator failed to converge.
    Convergence,
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Domain(_)
            | Error::Constitutive(_)
            | Error::Argument(_)
            | Error::GenuineNonlinearity(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => Category::Config,
            Error::Resonance { .. } => Category::Resonance,
            Error::Evolution { .. } => Category::BlowUp,
            Error::Integration { .. } | Error::TrustRegion(_) | Error::Bifurcation(_) => {
                Category::Convergence
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
