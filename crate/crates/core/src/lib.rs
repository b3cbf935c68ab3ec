pub mod cli;
pub mod discrepancy;
pub mod error;
pub mod features;
pub mod goftest;
pub mod hyper;
pub mod io;
pub mod kernels;
pub mod models;
pub mod numeric;
pub mod proposals;
pub mod quadrature;
pub mod sgld;

pub use error::{Error, Result};
