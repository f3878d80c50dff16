use thiserror::Error;

/// Errors produced by the numerical layers.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite sample at index {index}: {value}")]
    NonFinite { index: usize, value: String },

    #[error("potential rejected: {0}")]
    Potential(String),

    #[error(
        "Volterra iteration did not converge at k = {k}: residual {residual:.3e} after {iterations} iterations \
         (potential too large or too slowly decaying for this truncation)"
    )]
    VolterraDiverged {
        k: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("scattering coefficient routes disagree at k = {k}: |T_wronskian - T_integral| = {defect:.3e}")]
    RouteMismatch { k: f64, defect: f64 },

    #[error("mass drift {drift:.3e} exceeded tolerance at step {step} (t = {t})")]
    MassDrift { step: usize, t: f64, drift: f64 },

    #[error("boundary mass {mass:.3e} exceeded tolerance at step {step} (t = {t}); box too small")]
    BoundaryMass { step: usize, t: f64, mass: f64 },

    #[error("linear backends disagree on calibration pulse: {defect:.3e} > {allowed:.3e} (sign mismatch?)")]
    BackendMismatch { defect: f64, allowed: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed dump file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
