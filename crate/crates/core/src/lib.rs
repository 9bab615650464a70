pub mod design;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod harness;
pub mod materials;
pub mod metrics;
pub mod policies;
pub mod reward;
pub mod taskgen;
pub mod toolserver;
pub mod verify;

pub use error::{Error, Result};
