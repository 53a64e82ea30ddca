use thiserror::Error;

/// Errors raised by the modelling, simulation and tuning routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation (negative length,
    /// wavelength outside a grid, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// A device or experiment description is physically inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// The device has no coupling at all, so routing ratios are undefined.
    #[error("degenerate device: {0}")]
    Degenerate(String),
    /// No pump/signal/idler triplet could be selected.
    #[error("resonance selection failed: {0}")]
    Selection(String),
    /// A least-squares fit could not be solved.
    #[error("fit failed: {0}")]
    Fit(String),
    /// A ratio estimator received only zero counts.
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),
    /// A documented precondition of the operation was not met.
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
