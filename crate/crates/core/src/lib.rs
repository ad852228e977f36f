//! Dynamics of the unicritical correspondence `w = (z^p)^(1/q) + c`.
//!
//! * [`corr`]: forward images, branch derivatives, escape radius.
//! * [`orbit`]: set-valued iteration and filled-Julia membership.
//! * [`raster`]: parallel rendering of filled Julia and Multibrot sets.
//! * [`misiurewicz`]: locating Misiurewicz parameters, multipliers and the
//!   transversality derivative.
//! * [`similarity`]: Koenigs linearisation, Hausdorff distances and
//!   asymptotic-similarity curves.
//! * [`io`]: PGM/PNG, CSV and report serialisation.

// Comparisons are written as `!(x < limit)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corr;
pub mod error;
pub mod io;
pub mod misiurewicz;
pub mod orbit;
pub mod pipeline;
pub mod raster;
pub mod similarity;

pub use error::{Error, Result};
pub use num_complex::Complex64;
