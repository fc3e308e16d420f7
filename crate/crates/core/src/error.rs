use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("operator is not self-adjoint (‖A − A*‖ = {0:.3e})")]
    NotSelfAdjoint(f64),
    #[error("ambiguous eigenvalue clustering: {0}")]
    NumericalDegeneracy(String),
    #[error("exact spectrum not representable in the scalar field: {0}")]
    InexactSpectrum(String),
    #[error("function undefined at spectral value {0}")]
    DomainGap(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension {0} exceeds the configured cap of {1}")]
    DimensionCap(usize, usize),
    #[error("not a projection: {0}")]
    NotProjection(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("ray {0} is the zero vector")]
    ZeroVector(usize),
    #[error("rays {0} and {1} are parallel")]
    DuplicateRay(usize, usize),
    #[error("missing value for {0}")]
    MissingValue(String),
    #[error("incomplete assignment: {0}")]
    IncompleteAssignment(String),
    #[error("not a quasi-state: {0}")]
    NotQuasiState(String),
    #[error("certificate was produced for configuration {expected}, not {found}")]
    HashMismatch { expected: String, found: String },
    #[error("corrupt certificate: {0}")]
    CorruptCertificate(String),
    #[error("rank {rank} is not divisible into {parts} parts")]
    IndivisibleRank { rank: usize, parts: usize },
    #[error("value not representable exactly: {0}")]
    NotExactlyRepresentable(String),
    #[error("functional is not positive (Gram eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("functional is not normalized (φ(I) = {0})")]
    NotNormalized(String),
    #[error("algebra has no blocks")]
    EmptyAlgebra,
    #[error("bad block specification: {0}")]
    BadBlockSpec(String),
    #[error("bad density specification: {0}")]
    BadDensitySpec(String),
    #[error("invalid density operator: {0}")]
    InvalidDensity(String),
    #[error("presheaf closure failure: {0}")]
    ClosureFailure(String),
    #[error("solver limit: {0}")]
    SolverLimit(String),
    #[error("unknown {kind} `{name}`")]
    UnknownStrategy { kind: &'static str, name: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
