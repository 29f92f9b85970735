// validation negates comparisons so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod density;
pub mod efficiency;
pub mod error;
pub mod optimize;
pub mod proposals;
pub mod quadrature;
pub mod scenario;
pub mod smc;
pub mod verify;

pub use density::{DensitySpec, Interval};
pub use error::{Error, Result};
