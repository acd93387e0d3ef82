//! Crate-wide error type.

use num_complex::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("state-space data must be finite")]
    NonFiniteData,

    #[error("resolvent singular at lambda = {0}")]
    SingularResolvent(Complex64),

    #[error("system is unstable (stability margin {margin:.3e})")]
    UnstableSystem { margin: f64 },

    #[error("operation requires a square system ({ny}x{nu})")]
    NotSquare { ny: usize, nu: usize },

    #[error("feedthrough is not invertible (sigma_min = {0:.3e})")]
    NotInvertible(f64),

    #[error("discrete-time adjoint has no realization: A is singular")]
    AdjointUnrepresentable,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("wrong inertia: expected ({expected_pos}+, {expected_neg}-), found ({found_pos}+, {found_neg}-, {found_zero} near zero)")]
    WrongInertia {
        expected_pos: usize,
        expected_neg: usize,
        found_pos: usize,
        found_neg: usize,
        found_zero: usize,
    },

    #[error("psi4 is singular after factorization")]
    SingularPsi4,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("weight vanishes on the grid near omega = {0}")]
    WeightVanishes(f64),

    #[error("theta must lie in (-pi/2, pi/2)")]
    ThetaOutOfRange,

    #[error("phase unreachable by a real section at omega = {0}: response is real there")]
    PhaseUnreachable(f64),

    #[error("invalid all-pass target: modulus must be 1")]
    InvalidTarget,

    #[error("plant satisfies the IQC (margin {0:.3e}); nothing to destabilize")]
    PlantSatisfiesIqc(f64),

    #[error("factor conditions failed: {0}")]
    ConditionsFailed(String),

    #[error("feedback loop is not well-posed (sigma_min(I - D2*D1) = {0:.3e})")]
    NotWellPosed(f64),

    #[error("closed loop is unstable")]
    UnstableClosedLoop,

    #[error("json: {0}")]
    Json(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
