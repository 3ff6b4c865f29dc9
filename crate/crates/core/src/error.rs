use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("refinement {0} out of range (0..=6)")]
    Refinement(usize),
    #[error("degenerate metric on face {0}")]
    Degenerate(usize),
    #[error("non-SPD input on face {0}")]
    NotSpd(usize),
    #[error("solver did not converge: {0}")]
    NoConvergence(String),
    #[error("positivity lost: {0}")]
    Positivity(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("spectral gap {gap:.3} below 10")]
    SpectralGap { gap: f64 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
