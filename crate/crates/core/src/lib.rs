pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod imgproc;
pub mod nn;
pub mod numerics;
pub mod train;

pub use error::{Error, Result};
