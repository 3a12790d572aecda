pub mod cluster;
pub mod density;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod sampler;
pub mod specfun;
pub mod symgroup;

pub use error::{Error, Result};
