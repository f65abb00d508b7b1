//! Normalizing flows in plain `f64`.
//!
//! * [`ndcore`]: dense tensors and a reverse-mode autodiff tape.
//! * [`bijectors`]: invertible transforms with exact `ln|det J|`.
//! * [`density`]: base distributions and change-of-variables log-densities.
//! * [`training`]: maximum-likelihood fitting with clipped Adam, checkpoints.
//! * [`data`]: synthetic datasets, CSV and PGM I/O, image augmentation.
//! * [`audit`]: round-trip and numerical-Jacobian checks of a chain.

pub mod audit;
pub mod bijectors;
pub mod data;
pub mod density;
pub mod error;
pub mod linalg;
pub mod ndcore;
pub mod par;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
