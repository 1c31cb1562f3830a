use thiserror::Error;

/// Errors raised by field evaluation and the geometric operations built on it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("point {point:?} lies outside the open chart box")]
    OutsideChart { point: Vec<f64> },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("metric is numerically singular at {point:?} (condition number {condition:.3e})")]
    SingularMetric { point: Vec<f64>, condition: f64 },
    #[error("metric is not positive-definite at {point:?} (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { point: Vec<f64>, min_eigenvalue: f64 },
    #[error("endomorphism is not self-adjoint at {point:?} (asymmetry {defect:.3e})")]
    NotSelfAdjoint { point: Vec<f64>, defect: f64 },
    #[error("endomorphism has a non-positive eigenvalue {eigenvalue:.3e} at {point:?}")]
    NonPositiveSpectrum { point: Vec<f64>, eigenvalue: f64 },
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("field evaluation produced a non-finite value at {point:?}")]
    FieldEvaluation { point: Vec<f64> },
    #[error("field provides derivatives up to order {available}, order {requested} was requested")]
    DerivativeUnavailable { requested: u8, available: u8 },
    #[error("integrator step fell below h_min = {h_min:.3e} at t = {t}")]
    StepUnderflow { t: f64, h_min: f64 },
    #[error("velocity is zero")]
    ZeroVelocity,
    #[error("integral polynomial has a root with imaginary part {imag:.3e}")]
    ComplexRoot { imag: f64 },
    #[error("eigenfunction ordering violated at {point:?}: phi_{index} gap {gap:.3e}")]
    OrderingViolated { point: Vec<f64>, index: usize, gap: f64 },
    #[error("eigenfunction phi_{index} = {value:.3e} is not positive at {point:?}")]
    NonPositivePhi { point: Vec<f64>, index: usize, value: f64 },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("spectral gap between lambda_{r} and lambda_{next} closes at {point:?} (gap {gap:.3e})", next = r + 1)]
    GapViolated { point: Vec<f64>, r: usize, gap: f64 },
    #[error("operation requires dimension {expected}, got {got}")]
    WrongDimension { expected: usize, got: usize },
    #[error("quadratic integral is proportional to the energy integral")]
    EnergyProportional,
    #[error("holomorphic coefficient is not a quadratic polynomial (relative residual {residual:.3e} > {tolerance:.3e})")]
    NotPolynomial { residual: f64, tolerance: f64 },
    #[error("point {z} is within {margin} of a pole or branch cut")]
    BranchViolation { z: String, margin: f64 },
    #[error("domain violation at {point:?}: {what}")]
    DomainViolation { point: Vec<f64>, what: String },
    #[error("unknown builtin example `{0}`")]
    UnknownName(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
