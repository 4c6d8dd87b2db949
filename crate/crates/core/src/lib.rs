//! Mixed finite element solver for the Helmholtz transmission eigenvalue
//! problem, posed on `H0^2 x H0^1` with Bogner–Fox–Schmit elements for the
//! plate-like unknown and biquadratic Lagrange elements for the auxiliary
//! unknown.
//!
//! The crate offers two discretizations of the same pencil `λ A x = B x`:
//!
//! * a direct solve on one grid ([`eigensolver::solve_pencil`]), and
//! * a two-grid scheme ([`twogrid::two_grid_solve`]) that solves the
//!   eigenproblem on a coarse grid, corrects the right and left eigenvectors
//!   with two linear solves on a nested fine grid sharing one factorization,
//!   and recovers the eigenvalue by a generalized Rayleigh quotient.
//!
//! The transmission eigenvalue is `k = 1/sqrt(λ)`.
//!
//! [`harness`] drives convergence studies and writes text/CSV/JSON/SVG
//! reports.

pub mod assembly;
pub mod coefficients;
pub mod elements;
pub mod error;
pub mod exec;
pub mod harness;
pub mod mesh;
pub mod skyline;
pub mod sparse;
pub mod eigensolver;
pub mod twogrid;
mod dense;

pub use error::{Result, TeigError};
pub use exec::Execution;

/// Complex scalar used for eigenvalues and eigenvectors.
pub type C64 = num_complex::Complex64;
