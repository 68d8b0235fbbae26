//! Periodic homogenization of a thermo-diffusion system with Smoluchowski
//! coagulation in a perforated square: cell problems, effective tensors, micro
//! and homogenized solvers, and a corrector-rate harness.

pub mod cell;
pub mod coefficients;
pub mod corrector;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod homogenized;
pub mod micro;
pub mod time;

pub use error::{Error, Result};
