pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod extractor;
pub mod io;
pub mod models;
pub mod prioritization;
pub mod thresholds;

pub use error::{Error, Result};
