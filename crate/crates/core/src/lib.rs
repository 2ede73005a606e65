//! Reconstruction of images from linear measurements with an untrained
//! convolutional generator as prior, optionally combined with explicit or
//! denoiser-defined priors through ADMM, plus tools to study the generator's
//! Jacobian spectrum and the fitting dynamics it induces.
//!
//! Module map:
//! - [`nn`]: the generator, its derivatives, and Adam.
//! - [`ops`]: measurement operators and seeded corruption.
//! - [`priors`]: proximal operators and denoisers.
//! - [`solvers`]: ISTA/FISTA, DIP, the two DIP-ADMM variants, plug-and-play
//!   ADMM and directional fitting.
//! - [`spectral`]: matrix-free `J J^T`, Lanczos, projections, residual
//!   prediction.
//! - [`harness`]: configuration, file formats, metrics and the experiment
//!   runner behind the CLI.

pub mod error;
pub mod harness;
pub mod image;
pub mod linalg;
pub mod nn;
pub mod ops;
pub mod priors;
pub mod rng;
pub mod solvers;
pub mod spectral;

pub use error::{Error, Result};
pub use image::{ImageTensor, Shape};
