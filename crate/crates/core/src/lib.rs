//! Solver library for boundary value problems with a fractional power of a
//! second-order elliptic operator under Robin boundary conditions.
//!
//! Given coefficients k, c, μ and a right-hand side f on a planar domain, the
//! library computes u = A^{-α} f (0 < α < 1) by
//!
//! 1. P1 finite-element assembly of the stiffness and mass matrices
//!    ([`fem`]) on a triangulation ([`mesh`]),
//! 2. estimating the spectral lower bound δ = λ_min of K v = λ M v by
//!    inverse power iteration ([`eigen`]),
//! 3. integrating an auxiliary pseudo-parabolic problem from t = 0 to t = 1
//!    with an implicit two-level weighted scheme ([`stepper`]); the final
//!    layer is the fractional solve.
//!
//! A dense spectral oracle ([`oracle`]) evaluates the exact discrete solution
//! for verification on small meshes. All linear algebra runs on symmetric
//! compressed-row matrices with a Jacobi-preconditioned conjugate-gradient
//! solver ([`sparse`]).

pub mod eigen;
pub mod fem;
pub mod mesh;
pub mod oracle;
pub mod sparse;
pub mod stepper;

mod error;

pub use error::{Error, Result};
