pub mod cover;
pub mod eval;
pub mod error;
pub mod geometry;
pub mod majorant;
pub mod network;
pub mod oracle;

pub use error::{Error, Result};
