pub mod cli;
pub mod error;
pub mod estimators;
pub mod flows;
pub mod irf;
pub mod kernels;
pub mod numerics;
pub mod reference;
pub mod targets;

pub use error::{Error, Result};
