//! Exact diagonalisation and Born-Oppenheimer band analysis of the Dicke model.

pub mod bands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod harmonic;
pub mod invariant;
pub mod linalg;
pub mod operators;
pub mod output;
pub mod params;
pub mod pipeline;
pub mod quadrature;
pub mod spectrum;

pub use error::{DickeError, Result};
pub use params::ModelParams;
