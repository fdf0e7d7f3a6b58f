use thiserror::Error;

/// Every failure mode of the library. Variants map onto the CLI exit-code
/// contract through [`Error::exit_code`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("moment constraint violated: |sum A_j| = {residual:e}")]
    ConstraintViolation { residual: f64 },
    #[error("evaluation at z = {z} too close to pole t_{index}")]
    PoleEvaluation { z: String, index: usize },
    #[error("eigenvalues collide within tolerance (gap {gap:e})")]
    DegenerateSpectrum { gap: f64 },
    #[error("no admissible instance after {attempts} attempts")]
    GenerationFailure { attempts: usize },
    #[error("eigenvalue matrix {index} is not traceless (trace {trace})")]
    TraceViolation { index: usize, trace: String },
    #[error("spectral curve is singular (minimal root gap {gap:e})")]
    SingularCurve { gap: f64 },
    #[error("spectral curve is reducible")]
    ReducibleCurve,
    #[error("point z = {z} is too close to a branch point (distance {distance:e})")]
    NearBranchPoint { z: String, distance: f64 },
    #[error("sheet continuation ambiguous near z = {z}")]
    ContinuationAmbiguous { z: String },
    #[error("infinity is a branch point (odd degree normal form)")]
    InfinityIsBranchPoint,
    #[error("homology basis degenerate: {reason}")]
    BasisDegenerate { reason: String },
    #[error("quadrature did not reach target {target:e} (estimate {estimate:e})")]
    QuadratureFailure { target: f64, estimate: f64 },
    #[error("theta truncation radius {radius} exceeds cap")]
    TruncationFailure { radius: f64 },
    #[error("no nondegenerate odd characteristic found")]
    OddCharDegenerate,
    #[error("argument lies on the theta divisor (|theta|/scale = {ratio:e})")]
    OnThetaDivisor { ratio: f64 },
    #[error("points too close to the diagonal (|dz| = {distance:e})")]
    NearDiagonal { distance: f64 },
    #[error("toric matrix {index} is not diagonal (off-diagonal {offdiag:e})")]
    NonDiagonalToric { index: usize, offdiag: f64 },
    #[error("logarithm branch ambiguous for toric entry r_{index}")]
    LogBranchAmbiguity { index: usize },
    #[error("finite differences unstable (Richardson disagreement {disagreement:e})")]
    FdInstability { disagreement: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Name of the variant, used in machine-readable diagnostics.
    pub fn variant_name(&self) -> &'static str {
        match self {
            Error::ConstraintViolation { .. } => "ConstraintViolation",
            Error::PoleEvaluation { .. } => "PoleEvaluation",
            Error::DegenerateSpectrum { .. } => "DegenerateSpectrum",
            Error::GenerationFailure { .. } => "GenerationFailure",
            Error::TraceViolation { .. } => "TraceViolation",
            Error::SingularCurve { .. } => "SingularCurve",
            Error::ReducibleCurve => "ReducibleCurve",
            Error::NearBranchPoint { .. } => "NearBranchPoint",
            Error::ContinuationAmbiguous { .. } => "ContinuationAmbiguous",
            Error::InfinityIsBranchPoint => "InfinityIsBranchPoint",
            Error::BasisDegenerate { .. } => "BasisDegenerate",
            Error::QuadratureFailure { .. } => "QuadratureFailure",
            Error::TruncationFailure { .. } => "TruncationFailure",
            Error::OddCharDegenerate => "OddCharDegenerate",
            Error::OnThetaDivisor { .. } => "OnThetaDivisor",
            Error::NearDiagonal { .. } => "NearDiagonal",
            Error::NonDiagonalToric { .. } => "NonDiagonalToric",
            Error::LogBranchAmbiguity { .. } => "LogBranchAmbiguity",
            Error::FdInstability { .. } => "FdInstability",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
        }
    }

    /// 0 pass, 1 verification fail, 2 singular/reducible locus, 3 theta divisor, 64 usage.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SingularCurve { .. } | Error::ReducibleCurve | Error::InfinityIsBranchPoint => 2,
            Error::OnThetaDivisor { .. } => 3,
            Error::Parse(_) | Error::InvalidParameter(_) | Error::Io(_) => 64,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
