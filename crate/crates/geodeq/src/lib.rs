#![allow(clippy::needless_range_loop)]

//! Construction and verification of geodesically equivalent metric pairs.
//!
//! A pair of pseudo-Riemannian metrics (g, ḡ) on the same chart is geodesically
//! equivalent when every g-geodesic is, up to reparameterization, a ḡ-geodesic.
//! The library builds such pairs from explicit normal forms (diagonal families,
//! real and complex Jordan blocks, glued products of smaller blocks) and then
//! checks the algebraic and dynamical consequences numerically: the defining
//! first-order PDE on the associated (1,1)-tensor L, self-adjointness of L,
//! conservation of the associated family of integrals along geodesics, vanishing
//! Nijenhuis torsion, and the unparameterized-geodesic test itself.
//!
//! Everything is evaluated through first-order jets, so all derivative checks
//! use exact forward-mode differentiation rather than finite differences.

pub mod cli;
pub mod fields;
pub mod gluing;
pub mod jets;
pub mod linalg;
pub mod normalforms;
pub mod verify;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimension {0} outside the supported range 1..=8")]
    UnsupportedDimension(usize),

    #[error("total glued dimension {0} exceeds the supported maximum of 8")]
    DimensionOverflow(usize),

    #[error("singular matrix: pivot magnitude {0:.3e}")]
    SingularMatrix(f64),

    #[error("division by a jet with zero value part")]
    JetDivisionByZero,

    #[error("root finder did not converge within {0} iterations")]
    RootsDiverged(usize),

    #[error("empty polynomial (all coefficients zero) has no well-defined roots")]
    ZeroPolynomial,

    #[error("eigenvalue {re:.6e}{im:+.6e}i too close to the real axis (tol {tol:.3e})")]
    EigenvalueNearRealAxis { re: f64, im: f64, tol: f64 },

    #[error("eigenvalue clusters at {a} and {b} are separated by {sep:.3e}, below 10x the split tolerance {tol:.3e}")]
    ClusterCollision { a: String, b: String, sep: f64, tol: f64 },

    #[error("conflicting targets supplied for eigenvalue clusters closer than the clustering tolerance")]
    ConflictingTargets,

    #[error("matrix function of a real matrix has imaginary residue {0:.3e}, above tol {1:.3e}")]
    ImaginaryResidue(f64, f64),

    #[error("point {point:?} violates exclusion `{name}`: |{value:.6e}| below margin {margin:.3e}")]
    ExclusionViolation {
        name: String,
        point: Vec<f64>,
        value: f64,
        margin: f64,
    },

    #[error("point {point:?} lies outside the chart box")]
    OutsideChart { point: Vec<f64> },

    #[error(
        "rejection sampling aborted: {accepted}/{attempted} accepted (<50%); \
         most frequent rejection: {dominant}"
    )]
    SamplingRejection {
        attempted: usize,
        accepted: usize,
        dominant: String,
    },

    #[error("declared spectral regions of blocks {0} and {1} overlap")]
    SpectralOverlap(usize, usize),

    #[error(
        "sampled eigenvalue {re:.6e}{im:+.6e}i of block {block} escapes its declared spectral region"
    )]
    SpectrumEscapesRegion { block: usize, re: f64, im: f64 },

    #[error("geodesic step size underflow at t = {0:.6e}")]
    StepUnderflow(f64),

    #[error("geodesic integration exceeded {steps} steps at t = {t:.6e}")]
    StepBudget { steps: usize, t: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid scene or construction spec: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code the CLI maps this error to: input/usage problems
    /// exit with 2, mathematical failures are handled by the commands
    /// themselves (exit 1) and never surface as `Error`.
    pub fn exit_code(&self) -> i32 {
        2
    }
}
