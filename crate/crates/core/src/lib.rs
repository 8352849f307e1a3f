pub mod classify;
pub mod cli;
pub mod error;
pub mod field;
pub mod forms;
pub mod linalg;
pub mod random;
pub mod torsion;

pub use error::{Error, Result};
