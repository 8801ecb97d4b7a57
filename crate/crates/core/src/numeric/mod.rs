//! Rational-function algebra, polynomial roots, eigenvalues and state-space assembly.

mod eigen;
mod poly;
mod rational;
mod response;
mod roots;
mod statespace;

pub use eigen::{balance, eigenvalues, MAX_STATES};
pub use num_complex::Complex64;
pub use poly::{sub_cancelling, Poly, MAX_DEGREE};
pub use rational::{NearCancellation, RationalFunction};
pub use response::{hz_log_grid, log_grid, ResponseTable};
pub use roots::{polynomial_roots, ROOT_TOLERANCE};
pub use statespace::{
    balanced_canonical, controllable_canonical, realize_complex, realize_real, ComplexSiso, Interconnection, RealStateSpace,
    Signal,
};

/// Imaginary unit.
pub const J: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericError {
    #[error("pole at evaluation point s = {re} + j{im}")]
    PoleAtEvaluation { re: f64, im: f64 },
    #[error("denominator is identically zero")]
    ZeroDenominator,
    #[error("polynomial degree {degree} exceeds the cap of 64")]
    DegreeCap { degree: usize },
    #[error("polynomial degree must be at least 1")]
    DegreeTooLow,
    #[error("root finding did not converge for degree {degree}")]
    RootNonConvergence { degree: usize },
    #[error("root residual {residual:e} above tolerance")]
    RootResidual { residual: f64 },
    #[error("eigenvalue iteration cap exceeded for a {n}x{n} matrix")]
    EigenNonConvergence { n: usize },
    #[error("state dimension {n} exceeds the cap of 64")]
    MatrixCap { n: usize },
    #[error("ill-posed algebraic loop in interconnection")]
    IllPosedLoop,
    #[error("improper transfer function cannot be realized")]
    Improper,
    #[error("function has complex coefficients")]
    NotRealCoefficients,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value")]
    NonFinite,
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),
}
