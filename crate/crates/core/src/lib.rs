pub mod assignment;
pub mod error;
pub mod filters;
pub mod fisst;
pub mod harness;
pub mod math;
pub mod metrics;
pub mod models;
pub mod particles;
pub mod rng;

pub use error::{Error, Result};
