use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown preset `{0}` (expected fe8 or mn12)")]
    UnknownPreset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A derived oscillator frequency left the regime where the bosonic mapping holds.
    #[error("invalid regime: {name} = {value:e} must be positive")]
    InvalidRegime { name: &'static str, value: f64 },

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("no steady state: drift spectral abscissa is {abscissa:e} (all eigenvalues must have negative real parts)")]
    NoSteadyState { abscissa: f64 },

    #[error("stale linearization: mean-field residual {residual:e} exceeds {tolerance:e}")]
    StaleLinearization { residual: f64, tolerance: f64 },

    #[error("mean-field fixed point not converged: {0}")]
    MeanFieldNotConverged(String),

    #[error("integration failed at t = {time:e} s: {reason}")]
    Integration { time: f64, reason: String },

    #[error("unphysical covariance at t = {time:e} s: 2*nu_min = {two_nu_min}")]
    Unphysical { time: f64, two_nu_min: f64 },

    #[error("state invariant violated at t = {time:e} s: {what}")]
    InvariantViolation { time: f64, what: String },

    #[error("matrix is not symmetric (defect {defect:e})")]
    NotSymmetric { defect: f64 },

    #[error("matrix dimension {0} is not even")]
    OddDimension(usize),

    #[error("index {index} out of range for {len} modes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("balanced bipartition needs an even mode count, got {0}")]
    UnsupportedModeCount(usize),

    #[error("eigen decomposition did not converge")]
    EigenFailure,

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    ConfigParse(String),
}

impl Error {
    /// Short machine-readable tag used by the CLI error report.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnknownPreset(_) => "unknown_preset",
            Error::InvalidConfig(_) => "invalid_config",
            Error::InvalidRegime { .. } => "invalid_regime",
            Error::DivisionByZero(_) => "division_by_zero",
            Error::NoSteadyState { .. } => "no_steady_state",
            Error::StaleLinearization { .. } => "stale_linearization",
            Error::MeanFieldNotConverged(_) => "mean_field_not_converged",
            Error::Integration { .. } => "integration",
            Error::Unphysical { .. } => "unphysical",
            Error::InvariantViolation { .. } => "invariant_violation",
            Error::NotSymmetric { .. } => "not_symmetric",
            Error::OddDimension(_) => "odd_dimension",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::InvalidPartition(_) => "invalid_partition",
            Error::UnsupportedModeCount(_) => "unsupported_mode_count",
            Error::EigenFailure => "eigen_failure",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::ConfigParse(_) => "config_parse",
        }
    }
}
