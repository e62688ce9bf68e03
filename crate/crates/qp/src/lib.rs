//! Sparse convex quadratic programming.
//!
//! ```text
//! minimize    0.5 x'Px + q'x
//! subject to  l <= Ax <= u
//! ```
//!
//! Solved by an operator-splitting method on a Ruiz-equilibrated copy of the
//! problem, with a cached sparse LDL' factorization of the quasi-definite KKT
//! matrix and an optional active-set polish step.

mod admm;
mod csc;
mod error;
mod ldl;
mod problem;
mod scalar;

pub use admm::{residuals, solve_qp, solve_with, QpSolution, QpStatus, Settings};
pub use csc::CscMatrix;
pub use error::QpError;
pub use ldl::{LdlFactor, Ordering};
pub use problem::QpProblem;
pub use scalar::Scalar;

pub type QpProblemF64 = QpProblem<f64>;
pub type QpProblemF32 = QpProblem<f32>;
pub type QpSolutionF64 = QpSolution<f64>;
pub type CscMatrixF64 = CscMatrix<f64>;
pub type SettingsF64 = Settings<f64>;
