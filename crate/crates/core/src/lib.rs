//! Online pairwise least-squares learning in reproducing kernel Hilbert spaces,
//! with an exact finite-dimensional verification backend.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiment;
pub mod hypothesis;
pub mod kernel;
pub mod learner;
pub mod measure;
pub mod theory;

pub use error::{Error, Result};
