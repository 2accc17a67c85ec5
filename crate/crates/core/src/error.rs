use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(
        "evanescent mode: transverse wavenumber {transverse:.6e} rad/m exceeds {limit:.6e} rad/m"
    )]
    EvanescentMode { transverse: f64, limit: f64 },

    #[error("total internal reflection: n*sin(theta) = {0:.6} exceeds ambient index")]
    TotalInternalReflection(f64),

    #[error("degenerate fringe: fitted amplitude {amplitude:.3e} vs offset {offset:.3e}")]
    DegenerateFringe { amplitude: f64, offset: f64 },

    #[error("truncation overflow: mode {mode} would hold {occupation} quanta (n_max = {n_max})")]
    TruncationOverflow {
        mode: usize,
        occupation: u32,
        n_max: u32,
    },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("dots unresolved: {0}")]
    DotsUnresolved(String),

    #[error("unitarity violation: |T| = {magnitude} at sample ({x}, {y})")]
    UnitarityViolation { x: usize, y: usize, magnitude: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
