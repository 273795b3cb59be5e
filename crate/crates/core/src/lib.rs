pub mod augment;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod tta;

pub use error::{Error, Result};
