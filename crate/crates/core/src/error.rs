use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("Lanczos did not converge: {converged} of {requested} pairs after {iterations} iterations")]
    NotConverged {
        requested: usize,
        converged: usize,
        iterations: usize,
        partial: Box<crate::spectral::SpectralBasis>,
    },

    #[error("spectrum fingerprint mismatch: file has {found}, generator is {expected}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("external denoiser `{command}` failed: {reason}")]
    ExternalDenoiser { command: String, reason: String },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("image error: {0}")]
    Image(#[from] ::image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}
