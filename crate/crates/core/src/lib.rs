//! Curvature weight functionals on polynomial phase systems.
//!
//! The crate is organised in five layers:
//!
//! * [`poly`] — exact multivariate polynomial arithmetic over the rationals,
//!   polynomial matrices, and symbolic determinants;
//! * [`linalg`] — dense floating-point helpers: determinants, conditioned
//!   `GL(n)` sampling, annihilating projections, and the square-completion
//!   decomposition;
//! * [`weights`] — the curvature weight functionals (bordered and nested
//!   determinants built from a map and its cutoffs) together with the
//!   inductive weight-construction engine;
//! * [`integrate`] — seeded Monte Carlo and tensor quadrature over box
//!   regions: sublevel measures, singular geometric integrals, averaging
//!   operators, image measures and widths, and the scan for the sharp
//!   determinant functional;
//! * [`verify`] — end-to-end checkers wiring the layers together: exact
//!   determinant identities, Jacobian factorizations, pointwise inequalities,
//!   weighted-inequality ratio reports, and the exponent calculator.

pub mod error;
pub mod integrate;
pub mod linalg;
pub mod poly;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
