//! Saddle points of Morse index one by level-set iterations on the parallel distance.
//!
//! The solver keeps two points `z`, `z'` on a common level `l` of `f` and drives
//! them together. The workhorse is the parallel distance `g_{l,v}(x)`: the length
//! of the segment cut from the line `x + R v` by the super-level set `{f >= l}`.
//! Its square is convex near a nondegenerate saddle and has closed-form first and
//! second derivatives in terms of `∇f` and `∇²f` at the two segment endpoints.
//!
//! Module map:
//!
//! - [`linalg`]: Jacobi eigensolver, LU and condition estimates for small dense matrices.
//! - [`objective`]: the function under study, builtins, finite-difference fallbacks.
//! - [`line1d`]: line maxima, minima and level crossings along `x + t v`.
//! - [`pardist`]: `g`, `g²` and their derivatives; the exact quadratic formula.
//! - [`quadmodel`]: quadratic models, eigenstructure, saddle location, Newton refinement.
//! - [`subroutines`]: the four level-set steps (PD), (Av), (l↓), (l↑).
//! - [`driver`]: the global loop, stopping rules and trace.
//! - [`verify`]: numerical checks of the derivative formulas and convexity claims.
//! - [`cli`]: command line front end.

// `!(a < b)` is used on purpose so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod driver;
mod error;
pub mod linalg;
pub mod line1d;
pub mod objective;
pub mod pardist;
pub mod quadmodel;
pub mod subroutines;
pub mod verify;

pub use error::{Error, Result};

/// Dense column vector used throughout.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used throughout.
pub type Matrix = nalgebra::DMatrix<f64>;
