pub mod error;
pub mod glm;
pub mod ingest;
pub mod patterns;
pub mod pipeline;
pub mod simgen;
pub mod solver;
pub mod tuning;

pub use error::{LpsError, Result};
