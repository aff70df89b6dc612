use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("no balance point found; best residual {residual:.3e} at (m_e, m_i) = ({m_e}, {m_i})")]
    NoRoot { residual: f64, m_e: f64, m_i: f64 },

    #[error("singular Jacobian J_v (det = {det:.3e})")]
    SingularJacobian { det: f64 },

    #[error("initial point is off the balanced manifold: {0}")]
    OffManifold(String),

    #[error("empirical time {t} lies outside the limit trajectory grid")]
    GridMismatch { t: f64 },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("malformed micro-state dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
