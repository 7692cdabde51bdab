use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("p must exceed 1 (got {0})")]
    InvalidExponent(f64),

    #[error("domain dimensions must be positive (got a={a}, b={b})")]
    NonPositiveDimension { a: f64, b: f64 },

    #[error("resolution {n} is too small to resolve the domain")]
    ResolutionTooSmall { n: usize },

    #[error("scale factor must be positive (got {0})")]
    NonPositiveScale(f64),

    #[error("disks {0} and {1} overlap")]
    OverlappingDisks(usize, usize),

    #[error("disk {0} is not contained in the rectangle")]
    DiskOutsideDomain(usize),

    #[error("field has {got} values but the mesh has {expected} vertices")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("p-mass of the field is zero")]
    ZeroMass,

    #[error("mesh has no interior vertices")]
    EmptyInterior,

    #[error("eigenpair is not converged")]
    Unconverged,

    #[error("operation requires a {expected} domain")]
    UnsupportedDomain { expected: &'static str },

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("no sign change of the branch difference on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("quadrature budget exhausted: error estimate {estimate:e} above target {target:e}")]
    QuadratureBudget { estimate: f64, target: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}
