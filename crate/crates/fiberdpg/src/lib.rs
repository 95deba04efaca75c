//! Vectorial envelope ultraweak DPG solver for weakly-guiding fiber waveguides.

pub mod amplifier;
pub mod bessel;
pub mod boundary;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod dump;
pub mod envelope;
pub mod error;
pub mod fem;
pub mod fibermodes;
pub mod propagate;
pub mod quadrature;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
