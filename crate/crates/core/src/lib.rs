//! Numerical laboratory for the energy-critical heat equation
//! `∂ₜu = Δu + u³` on the four-dimensional torus, and for the decay
//! character of low-frequency data.

pub mod bubble;
pub mod checkpoint;
pub mod config;
pub mod decay;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod fit;
pub mod spectral;

pub use error::{Error, Result};
