use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("lattice has {n_sites} sites; exact sector methods support at most 128")]
    TooManySites { n_sites: usize },

    #[error("sector holds {count} configurations, above the memory cap of {cap}")]
    CapacityExceeded { count: u128, cap: usize },

    #[error("unknown fragment id {0}")]
    UnknownFragment(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("configuration {0} is not in the basis")]
    NotInBasis(String),

    #[error(
        "Krylov step failed to converge at t = {time}: error estimate {estimate:e} > tol {tol:e} at dt = {dt:e}"
    )]
    NonConvergence {
        time: f64,
        dt: f64,
        estimate: f64,
        tol: f64,
    },

    #[error("dense diagonalization of dimension {dim} exceeds the cap of {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("unrealizable pattern: {0}")]
    UnrealizablePattern(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
