use thiserror::Error;

/// Every failure the library can report.
///
/// Variants carry enough context (fiber index, measured value) to locate the
/// offending piece of a field without re-running the computation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian: symmetry defect {defect:e}")]
    NotHermitian { defect: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
    #[error("eigenvalue {eigenvalue:e} sits within tolerance of threshold {threshold:e}")]
    EigenvalueAtThreshold { eigenvalue: f64, threshold: f64 },
    #[error("eigenvalue estimate {re:e}{im:+e}i lies on or near the branch cut")]
    SpectrumOnCut { re: f64, im: f64 },
    #[error("spectrum is not enclosed by the integration contour")]
    SpectrumOutsideContour,
    #[error("contour quadrature did not settle below tolerance (last change {change:e})")]
    ContourTooTight { change: f64 },
    #[error("shift {re:e}{im:+e}i is (numerically) an eigenvalue")]
    SingularShift { re: f64, im: f64 },
    #[error("matrix is singular")]
    Singular,
    #[error("kernel present: smallest |eigenvalue| {min_abs:e}")]
    KernelPresent { min_abs: f64 },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("base space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("grid point {index} lies on declared zero {zero}")]
    GridHitsZero { index: usize, zero: f64 },
    #[error("undeclared zero suspected near z = {near}")]
    UndeclaredZeroSuspected { near: f64 },
    #[error("germ declaration inconsistent at z = {at}: {reason}")]
    GermMismatch { at: f64, reason: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("field is not injective with dense image: {witness}")]
    NotInjectiveDense { witness: String },
    #[error("form is degenerate: {0}")]
    Degenerate(String),
    #[error("no splitting: residual {residual:e}")]
    NoSplitting { residual: f64 },
    #[error("(α, f*) jointly singular at fiber {fiber} (z = {z}), lower bound {bound:e}")]
    JointlySingular { fiber: usize, z: f64, bound: f64 },
    #[error("contour failure: {0}")]
    ContourFailure(String),
    #[error("smallness ‖α‖·‖F‖ < 1 unreachable: {0}")]
    SmallnessUnreachable(String),
    #[error("fiber {fiber} (z = {z}) has an eigenvalue within tolerance of zero")]
    ZeroEigenvalueFiber { fiber: usize, z: f64 },
    #[error("form is not block definite: {0}")]
    NotBlockDefinite(String),
    #[error("spectrum not positive at fiber {fiber}: eigenvalue {re:e}{im:+e}i")]
    SpectrumNotPositive { fiber: usize, re: f64, im: f64 },
    #[error("η-limit did not converge (last change {change:e})")]
    NotConverging { change: f64 },
    #[error("negativity detected: eigenvalue {value:e} at fiber {fiber}")]
    NegativityDetected { fiber: usize, value: f64 },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("density curve vanishes on the whole λ window")]
    EmptyWindow,
    #[error("certificate check failed: {0}")]
    CertificateFailed(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
