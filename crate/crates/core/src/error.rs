use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {field} = {value}: {reason}")]
    Validation {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("photon count {n} exceeds input count {total}")]
    CountOutOfRange { n: u64, total: u64 },

    /// The herald probability is zero, so conditioning on a click is undefined.
    #[error("the herald can never fire (zero dark-count probability and no detectable pairs)")]
    NoHerald,

    /// ξ(0) = 0: every heralded bin carries at least one photon and the gain is unbounded.
    #[error("perfect herald: xi(0) = 0, the heralding gain is unbounded")]
    PerfectHerald,

    #[error("moment undefined: the mean photon number is zero")]
    ZeroMean,

    #[error("mode filtering is only modeled on top of a Poisson (multimode) pair source")]
    FilterRequiresPoisson,

    #[error("correcting factor {kind} does not match filter branch {branch}")]
    KindMismatch {
        kind: &'static str,
        branch: &'static str,
    },

    #[error("Laguerre polynomial overflowed at order {order}")]
    LaguerreOverflow { order: usize },

    #[error("Laguerre order {order} exceeds the supported maximum of {max}")]
    LaguerreOrder { order: usize, max: usize },

    #[error("{0} overflowed the double range")]
    Overflow(&'static str),

    #[error("tail bound not reached within {max_terms} terms")]
    Truncation { max_terms: usize },

    #[error(
        "fano(mu) is not unimodal on [{lo:e}, {hi:e}]; run with a grid pre-scan or narrow the bracket"
    )]
    NonUnimodal { lo: f64, hi: f64 },

    #[error("with d_h = 0 the fano ratio has its infimum at mu = 0; no interior optimum exists")]
    InfimumAtZero,

    #[error("no heralded trials among {trials} (herald rate {herald_rate})")]
    NoHeraldSamples { trials: u64, herald_rate: f64 },
}

impl Error {
    /// True for errors caused by malformed input rather than by the physics of
    /// a valid configuration.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. }
                | Error::Config(_)
                | Error::FilterRequiresPoisson
                | Error::KindMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
