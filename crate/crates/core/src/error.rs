use thiserror::Error;

/// Errors raised across the reconstruction toolkit.
#[derive(Debug, Error)]
pub enum ReconError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("duplicate sample: {0}")]
    Duplicate(String),

    #[error("interval [{start}, {end}) is shorter than one grid step; raise the grid rate")]
    IntervalTooShort { start: f64, end: f64 },

    #[error("degenerate hyperplane at index {0}: kernel is orthogonal to the signal subspace")]
    DegenerateHyperplane(usize),

    #[error("kernel family is not orthogonal")]
    NonOrthogonal,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("iteration diverged: {0}")]
    Diverged(String),

    #[error("argument {value} outside table range [-{t_max}, {t_max}]")]
    TableRange { value: f64, t_max: f64 },

    #[error("degenerate sampling: {0}")]
    DegenerateSampling(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ReconError> = std::result::Result<T, E>;

pub(crate) fn dim_check(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(ReconError::Dimension(format!(
            "{what}: expected {expected}, got {got}"
        )));
    }
    Ok(())
}
