use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("grid dimension {got} is below the minimum of {min}")]
    DimensionTooSmall { got: usize, min: usize },
    #[error("grid spacing must be positive and finite, got {0}")]
    NonpositiveSpacing(f64),
    #[error("invalid physical parameter: {0}")]
    InvalidParams(String),
    #[error("field shape mismatch for {field}: expected {expected:?}, got {got:?}")]
    ShapeMismatch { field: &'static str, expected: (usize, usize), got: (usize, usize) },
    #[error("non-finite value detected at step {step}")]
    Blowup { step: usize },
    #[error("time step {dt} exceeds the CFL limit {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("checkpoint has bad magic bytes")]
    BadMagic,
    #[error("checkpoint version {0} is not supported")]
    VersionMismatch(u32),
    #[error("checkpoint payload truncated: need {needed} bytes, have {available}")]
    TruncatedPayload { needed: usize, available: usize },
    #[error("checkpoint is malformed: {0}")]
    MalformedCheckpoint(String),
    #[error("operation requires a nonzero Coriolis parameter")]
    ZeroCoriolis,
    #[error("operation requires a nonzero beta")]
    ZeroBeta,
    #[error("wavevector must be nonzero")]
    ZeroWavevector,
    #[error("wavenumber is not on the periodic lattice of the grid")]
    OffLatticeWavenumber,
    #[error("velocity field is divergent (residual {residual:e} > tolerance {tolerance:e})")]
    DivergentInput { residual: f64, tolerance: f64 },
    #[error("iterative solver did not converge (relative residual {0:e})")]
    NoConvergence(f64),
    #[error("grid has {dofs} degrees of freedom, dense oracle limit is {limit}")]
    TooLargeGrid { dofs: usize, limit: usize },
    #[error("operation not supported for this configuration: {0}")]
    Unsupported(String),
    #[error("could not satisfy generator constraints after {0} attempts")]
    UnsatisfiableConstraints(usize),
}
