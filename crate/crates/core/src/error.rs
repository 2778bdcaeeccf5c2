use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot convert {from} to {to}: dimension mismatch")]
    DimensionMismatch { from: &'static str, to: &'static str },

    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {t} outside trajectory domain [0, {t_f}]")]
    OutOfRange { t: f64, t_f: f64 },

    #[error("derivative order {0} not available (max 4)")]
    DerivativeOrder(usize),

    #[error("noise time step {dt} too coarse for t_f = {t_f} (need dt <= t_f/100)")]
    CoarseNoiseStep { dt: f64, t_f: f64 },

    #[error("quadrature did not reach tolerance {tol:e} on [{a}, {b}]")]
    Quadrature { a: f64, b: f64, tol: f64 },

    #[error("integrator failure: {0}")]
    Integrator(String),

    #[error("wavefunction reached the grid edge (outer probability {outer_probability:e}); enlarge the grid")]
    GridEscape { outer_probability: f64 },

    #[error("singular at θ=0 (node {node}, θ = {theta:e})")]
    SingularTheta { node: usize, theta: f64 },

    #[error("singular Jacobian in linear solve (pivot column {0})")]
    SingularMatrix(usize),

    #[error("continuation failed at δ = {delta:e}: {reason}")]
    Continuation { delta: f64, reason: String },

    #[error("{0}")]
    Unsupported(String),
}
