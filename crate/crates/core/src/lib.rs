// `!(x <= y)` style checks are used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conformal;
pub mod episodes;
pub mod error;
pub mod example;
pub mod models;
pub mod neural;
pub mod nonconformity;
pub mod persistence;
pub mod stats;

pub use error::{Error, Result};
pub use example::Example;
