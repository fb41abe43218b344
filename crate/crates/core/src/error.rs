use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("derivative order must be positive, got {0}")]
    InvalidOrder(i32),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("hamiltonian not representable: {0}")]
    Unrepresentable(String),

    #[error("gauge function validation failed: {0}")]
    GaugeValidation(String),

    #[error("scheme `{scheme}` cannot propagate the {gauge} system")]
    SchemeMismatch { scheme: String, gauge: String },

    #[error("time step {dt} violates the stability bound (|lambda|*dt = {product:.3} > {limit})")]
    Unstable { dt: f64, product: f64, limit: f64 },

    #[error("propagation diverged at step {step} (t = {time}): {diagnostic}")]
    Diverged {
        step: usize,
        time: f64,
        diagnostic: String,
    },

    #[error("conductivity extraction failed: {0}")]
    Conductivity(String),
}

pub type Result<T> = std::result::Result<T, EpsError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> EpsError {
    EpsError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
