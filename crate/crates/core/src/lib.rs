//! LQG control over a fixed-rate digital channel with subtractive dithered
//! quantization and three period-two coding strategies.

pub mod codec;
pub mod error;
pub mod escape;
pub mod experiment;
pub mod filters;
pub mod linalg;
pub mod performance;
pub mod plant;
pub mod quantizer;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::Matrix;
