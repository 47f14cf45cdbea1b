pub mod association;
pub mod cli;
pub mod error;
pub mod glmb_filter;
pub mod labeled;
pub mod metrics;
pub mod models;
pub mod quadrature;
pub mod rfs;
pub mod sim;

pub use error::{Error, Result};
