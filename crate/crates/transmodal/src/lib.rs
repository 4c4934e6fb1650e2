pub mod admissibility;
pub mod cli;
pub mod derivability;
pub mod error;
pub mod frames;
pub mod logics;
pub mod oracle;
pub mod reductions;
pub mod syntax;
pub mod translations;

pub use error::{Error, Result};
