pub mod analysis;
pub mod cli;
pub mod compression;
pub mod error;
pub mod geometry;
pub mod discretization;
pub mod kernel;
pub mod matrix;
pub mod quadrature;
pub mod solve;
pub mod visibility;
pub mod windows;

pub use error::{Error, Result};
