//! Numerical laboratory for variational, jump-counting and square-function
//! estimates of ergodic averages on periodic lattices.

// `!(x > 0.0)` style tests are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averages;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod martingale;
pub mod variation;
pub mod weights;

pub use error::{Error, Result};
