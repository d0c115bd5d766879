pub mod bounds;
pub mod cli;
pub mod concentration;
pub mod config;
pub mod error;
pub mod geometry;
pub mod mc;
pub mod quadrature;
pub mod report;
pub mod specfun;
pub mod wavelet;
pub mod weights;

pub use config::NumericsConfig;
pub use error::{Error, Result};
