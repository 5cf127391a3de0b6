use thiserror::Error;

/// Errors surfaced by the solver and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sample count {got} does not match expected {want}")]
    SizeMismatch { want: usize, got: usize },
    #[error("fields live on different lattices")]
    LatticeMismatch,
    #[error("wrong component count: expected {want}, got {got}")]
    ComponentMismatch { want: usize, got: usize },
    #[error("analytic norm overflowed f64 range")]
    Overflow,
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("inconsistent initial data: {law} residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    InconsistentData {
        law: &'static str,
        residual: f64,
        tol: f64,
    },
    #[error("time {t} outside stored history [{t0}, {t1}]")]
    OutsideHistory { t: f64, t0: f64, t1: f64 },
    #[error("trajectory horizon too short: need {need}, have {have}")]
    Horizon { need: f64, have: f64 },
    #[error("empty admissible set for the uniform norm (check delta0, eta)")]
    EmptyAdmissibleSet,
    #[error("blow-up detected at t = {t}: {what}")]
    BlowUp { t: f64, what: &'static str },
    #[error("constraint violated at t = {t}: {what} = {value:.3e} exceeds {tol:.3e}")]
    ConstraintViolation {
        t: f64,
        what: &'static str,
        value: f64,
        tol: f64,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("signal too short for dispersion fit: need horizon {need:.3}, have {have:.3}")]
    SignalTooShort { need: f64, have: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;
