use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An environment distribution or experiment configuration is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// A consumer read a site the environment (or potential) was not built for.
    #[error("site {site} is outside the window [{min}, {max}]")]
    OutOfWindow { site: i64, min: i64, max: i64 },

    /// Arguments outside an operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested infinite-valley sampler cannot handle this distribution.
    #[error("unsupported sampler: {0}")]
    UnsupportedSampler(String),

    /// The rejection oracle found no accepted path within its proposal budget.
    #[error("rejection oracle infeasible: no acceptance in {proposals} proposals")]
    OracleInfeasible { proposals: u64 },

    /// The infinite-valley window could not be made large enough.
    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("empty sample")]
    EmptySample,

    #[error("sample lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),

    /// Too many replicates failed.
    #[error("failure budget exceeded: {failed} of {total} replicates failed")]
    FailureBudget { failed: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
