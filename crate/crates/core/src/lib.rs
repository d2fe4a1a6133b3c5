//! Numerical laboratory for singular convolution operators on the plane
//!
//! ```text
//! L_λ(f; x, y) = ∬_D f(t, s) K_λ(t − x, s − y) ds dt
//! ```
//!
//! over a bounded rectangle `D` or the whole plane: kernel families and their
//! admissibility checks, μ-weighted Lebesgue points, and empirical
//! pointwise-convergence rates.

// negated comparisons are used on purpose: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod class_a;
pub mod error;
pub mod expr;
pub mod kernels;
pub mod lebesgue;
pub mod operator;
pub mod quadrature;
pub mod rate;
pub mod trend;

pub use error::{Error, Result};
