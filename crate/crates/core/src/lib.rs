pub mod corpus;
pub mod embedding;
pub mod error;
pub mod graph;
pub mod model;
pub mod numerics;
pub mod semcon;
pub mod trainer;

pub use error::{Error, Result};
