//! Competitive-ratio approximation scheme for online scheduling over time.
//!
//! Instances are simplified into a bounded universe, online algorithms are
//! represented as finite maps over canonical configuration classes, and maps
//! are evaluated against an exact offline optimum.

pub mod algmap;
pub mod config;
pub mod error;
pub mod model;
pub mod num;
pub mod oracle;
pub mod schedule;
pub mod search;
pub mod simplify;

pub use error::{Error, Result};
