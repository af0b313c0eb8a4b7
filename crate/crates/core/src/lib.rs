//! Bivariate polynomials orthogonal with respect to varying weights `x₁⁻ⁿx₂⁻ⁿw`:
//! moments, monic construction, three-term relations and their verification.

pub mod cli;
pub mod error;
pub mod index;
pub mod koornwinder;
pub mod matrix;
pub mod moments;
pub mod poly;
pub mod quadrature;
pub mod relations;
pub mod scalar;
pub mod univariate;
pub mod vops;

pub use error::{Error, Result};
pub use index::{monomial_vector, negative_monomial_vector, poly_dim, shift_matrix, MultiIndex};
pub use matrix::{dense_solve, Matrix};
pub use poly::{BiPoly, PolyVec};
pub use scalar::{Backend, Scalar};
