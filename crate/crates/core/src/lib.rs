//! Solver library for the time-fractional Allen-Cahn equation on 2-D periodic
//! domains: nonuniform fast-L1 time stepping with sum-of-exponentials history
//! compression, maximum-principle preserving schemes, and a verification
//! harness for convergence and kernel identities.

// parameter guards are written as `!(x > 0.0)` so NaN input is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// double-double constants and frozen test references carry full digit strings
#![allow(clippy::excessive_precision)]
#![cfg_attr(test, allow(clippy::approx_constant))]

pub mod error;
pub mod frackernel;
pub mod mesh;
pub mod schemes;
pub mod spatial;
pub mod cli;
pub mod verify;

#[cfg(test)]
pub(crate) mod oracles;

pub use error::{Error, Result};
