use std::fmt::Write as _;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::nn::Generator;
use crate::spectral::{self, SpectralBasis};

/// The generator a config describes, sized to its image.
pub fn generator_for(cfg: &ExperimentConfig) -> Result<Generator> {
    let truth = ImageTensor::read_png(&cfg.image)?;
    Generator::new(cfg.generator.clone(), truth.shape())
}

pub fn check_fingerprint(basis: &SpectralBasis, g: &Generator) -> Result<()> {
    match &basis.fingerprint {
        Some(fp) if *fp == g.fingerprint() => Ok(()),
        found => Err(Error::FingerprintMismatch {
            expected: g.fingerprint(),
            found: found.clone().unwrap_or_else(|| "none".into()),
        }),
    }
}

/// Top-`k` spectrum of `J J^T` at the configured generator's initialization.
pub fn compute_spectrum(cfg: &ExperimentConfig, k: usize, lanczos_seed: u64) -> Result<SpectralBasis> {
    let g = generator_for(cfg)?;
    spectral::jjt_topk(&g, g.theta0(), k, lanczos_seed)
}

/// `index,eigenvalue,coefficient` rows for `v`, indices from 0.
pub fn projection_csv(basis: &SpectralBasis, v: &[f64]) -> Result<String> {
    let coeffs = spectral::project(basis, v)?;
    let mut s = String::from("index,eigenvalue,coefficient\n");
    for (i, (l, c)) in basis.eigenvalues.iter().zip(&coeffs).enumerate() {
        let _ = writeln!(s, "{i},{l},{c}");
    }
    Ok(s)
}

/// Predicted residual norms `||r_t||` for `t = 0..=steps` when fitting `b`
/// from `G(theta_0)`, and the predicted image `b + r_steps`.
pub fn predict_curve(
    basis: &SpectralBasis,
    g: &Generator,
    b: &ImageTensor,
    eta: f64,
    steps: u32,
) -> Result<(String, ImageTensor)> {
    check_fingerprint(basis, g)?;
    let g0 = g.forward(g.theta0())?;
    g0.ensure_same_shape(b)?;
    let r0: Vec<f64> = g0.as_slice().iter().zip(b.as_slice()).map(|(a, b)| a - b).collect();
    let mut s = String::from("t,residual_norm\n");
    let mut last = r0.clone();
    for t in 0..=steps {
        last = spectral::predict_residual(basis, &r0, eta, t)?;
        let _ = writeln!(s, "{t},{}", crate::linalg::norm(&last));
    }
    let image = b.with_data(b.as_slice().iter().zip(&last).map(|(b, r)| b + r).collect())?;
    Ok((s, image))
}
