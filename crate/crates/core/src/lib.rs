pub mod cli;
pub mod criteria;
mod error;
pub mod gpcm;
pub mod numeric;
pub mod reproduce;
pub mod search;
pub mod sim;
pub mod solvers;
pub mod weights;

pub use error::{Error, Result};
