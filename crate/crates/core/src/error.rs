use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parameter `{name}` must be strictly positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("parameter `{name}` = {value} is outside its domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("basis needs at least 2 oscillator levels, got {0}")]
    BasisTooSmall(usize),

    #[error("basis mismatch: expected dimension {expected}, found {found}")]
    BasisMismatch { expected: usize, found: usize },

    #[error(
        "coherent state with mean occupation {mean_occupation:.3} does not fit in {n_osc} oscillator levels"
    )]
    CoherentTruncation { mean_occupation: f64, n_osc: usize },

    #[error("population {population:.3e} in the top oscillator band at tau = {tau:.6} exceeds the abort threshold")]
    TruncationLeak { tau: f64, population: f64 },

    #[error("effective field has zero magnitude")]
    ZeroField,

    #[error("eigensolver failed to converge for eigenvalue {index} after {iterations} iterations")]
    NoConvergence { index: usize, iterations: usize },

    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("sample times are not strictly increasing at index {index}")]
    NonMonotoneTime { index: usize },

    #[error("no zero crossings found in the series")]
    NoCrossings,

    #[error("degenerate fit: all abscissae are equal")]
    DegenerateFit,

    #[error("empty averaging window")]
    EmptyWindow,

    #[error("tau*sin(tau) = {rhs} has no root below the scan bound {scan_bound}")]
    RootNotFound { rhs: f64, scan_bound: f64 },

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("selected measurement branch has zero norm")]
    ZeroNormBranch,
}
