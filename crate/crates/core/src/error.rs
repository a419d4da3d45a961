use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op}: expected a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("matrix data has {found} entries, expected {expected}")]
    EntryCount { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("leading principal minor {minor} is degenerate (pivot modulus {modulus:e} <= {tolerance:e})")]
    SingularPivot {
        minor: usize,
        modulus: f64,
        tolerance: f64,
    },
    #[error("matrix is not unitary: |W^H W - I|_F = {deviation:e}")]
    NotUnitary { deviation: f64 },
    #[error("matrix is not hermitian: |A - A^H|_F = {deviation:e}")]
    NotHermitian { deviation: f64 },
    #[error("unitary lies outside the coordinate chart: leading minor {minor} vanishes")]
    GaugeSingular { minor: usize },
    #[error("{op} is not available for n = {n}")]
    Unsupported { op: &'static str, n: usize },
    #[error("invalid coordinates: {0}")]
    InvalidCoordinates(String),
    #[error("invalid mass spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("invalid angles: {0}")]
    InvalidAngles(String),
    #[error("invalid plaquette: {0}")]
    InvalidPlaquette(String),
    #[error("invalid fit problem: {0}")]
    InvalidProblem(String),
    #[error("coordinates are not representable by standard angles: {0}")]
    NotRepresentable(String),
    #[error("{what}: expected {expected} values, got {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("mass differences vanish, cannot divide by T*B")]
    DegenerateMasses,
    #[error("determinant {re:e} + {im:e}i is neither real nor pure imaginary")]
    AmbiguousParity { re: f64, im: f64 },
    #[error(
        "determinant identity leaves an imaginary residue {residue:e} against real part {real:e}"
    )]
    ImaginaryResidue { residue: f64, real: f64 },
}

impl Error {
    /// True for failures that come from the numerics (chart singularities,
    /// invariant violations) rather than from malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::SingularPivot { .. }
                | Error::GaugeSingular { .. }
                | Error::DegenerateMasses
                | Error::AmbiguousParity { .. }
                | Error::ImaginaryResidue { .. }
                | Error::NotRepresentable(_)
        )
    }
}
