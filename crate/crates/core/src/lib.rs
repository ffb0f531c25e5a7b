pub mod acceptance;
pub mod analysis;
pub mod config;
pub mod contour;
pub mod eigensolver;
pub mod error;
pub mod field;
pub mod geometry;
pub mod quadrature;
pub mod specfun;
pub mod sweep;

pub use error::{Error, Result};
