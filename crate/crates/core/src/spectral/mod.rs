//! Spectral analysis of the generator's output Jacobian at initialization.
//!
//! Eigenpairs `(sigma_i^2, u_i)` of `J J^T` set the per-direction speed
//! `(1 - eta sigma_i^2)^t` at which gradient descent fits a residual. This
//! module finds the top of that spectrum without materializing `J`, projects
//! images onto it, and evaluates the linearized predictions built on it.

mod io;
mod lanczos;

use log::warn;

pub use io::{read_spectrum, write_spectrum, MAGIC};
pub use lanczos::{lanczos_topk, RESIDUAL_TOL};

use crate::error::{check_len, Error, Result};
use crate::image::ImageTensor;
use crate::linalg::{dot, norm};
use crate::nn::Generator;

/// Top-`k` eigenpairs of `J J^T`, eigenvalues descending, vectors stored
/// row-major as a `k x n` block.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    pub n: usize,
    pub eigenvalues: Vec<f64>,
    pub vectors: Vec<f64>,
    /// Identifies the generator (architecture, image shape, seed) the
    /// spectrum belongs to.
    pub fingerprint: Option<String>,
}

impl SpectralBasis {
    pub fn new(n: usize, eigenvalues: Vec<f64>, vectors: Vec<f64>) -> Result<Self> {
        check_len(eigenvalues.len() * n, vectors.len())?;
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument("eigenvalues must be sorted descending".into()));
        }
        if eigenvalues.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument("eigenvalues must be finite and nonnegative".into()));
        }
        Ok(Self {
            n,
            eigenvalues,
            vectors,
            fingerprint: None,
        })
    }

    pub fn with_fingerprint(mut self, fingerprint: impl Into<String>) -> Self {
        self.fingerprint = Some(fingerprint.into());
        self
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.n..(i + 1) * self.n]
    }

    /// The leading `p` pairs.
    pub fn truncated(&self, p: usize) -> Result<Self> {
        if p > self.k() {
            return Err(Error::InvalidArgument(format!(
                "asked for {p} eigenvectors, basis has {}",
                self.k()
            )));
        }
        Ok(Self {
            n: self.n,
            eigenvalues: self.eigenvalues[..p].to_vec(),
            vectors: self.vectors[..p * self.n].to_vec(),
            fingerprint: self.fingerprint.clone(),
        })
    }

    /// Whether the basis spans the whole space.
    pub fn is_complete(&self) -> bool {
        self.k() == self.n
    }

    /// Check `| ||u_i|| - 1 | <= norm_tol` and `|<u_i, u_j>| <= cross_tol`.
    pub fn check_orthonormal(&self, norm_tol: f64, cross_tol: f64) -> Result<()> {
        for i in 0..self.k() {
            let ui = self.vector(i);
            let len = norm(ui);
            if (len - 1.0).abs() > norm_tol {
                return Err(Error::InvalidArgument(format!("eigenvector {i} has norm {len}")));
            }
            for j in 0..i {
                let c = dot(ui, self.vector(j));
                if c.abs() > cross_tol {
                    return Err(Error::InvalidArgument(format!("<u_{i}, u_{j}> = {c}")));
                }
            }
        }
        Ok(())
    }

    /// `U (U^T v)` restricted to the first `p` vectors.
    pub fn project_back(&self, v: &[f64], p: usize) -> Result<Vec<f64>> {
        check_len(self.n, v.len())?;
        let mut out = vec![0.0; self.n];
        for i in 0..p.min(self.k()) {
            let u = self.vector(i);
            crate::linalg::axpy(dot(u, v), u, &mut out);
        }
        Ok(out)
    }
}

/// Top-`k` eigenpairs of `J J^T` for the generator linearized at `theta`.
pub fn jjt_topk(g: &Generator, theta: &[f64], k: usize, seed: u64) -> Result<SpectralBasis> {
    let lin = g.linearize(theta)?;
    let n = lin.output_len();
    let basis = match lanczos_topk(|v| lin.jjt_apply(v), n, k, seed) {
        Ok(b) => b,
        Err(Error::NotConverged {
            requested,
            converged,
            iterations,
            partial,
        }) => {
            return Err(Error::NotConverged {
                requested,
                converged,
                iterations,
                partial: Box::new(partial.with_fingerprint(g.fingerprint())),
            })
        }
        Err(e) => return Err(e),
    };
    Ok(basis.with_fingerprint(g.fingerprint()))
}

/// Coefficients `<u_i, v>`.
pub fn project(basis: &SpectralBasis, v: &[f64]) -> Result<Vec<f64>> {
    check_len(basis.n, v.len())?;
    Ok((0..basis.k()).map(|i| dot(basis.vector(i), v)).collect())
}

/// Residual after `t` gradient-descent steps of size `eta` under the
/// linearized model:
/// `r_t = sum_i (1 - eta sigma_i^2)^t <u_i, r0> u_i + (r0 - U U^T r0)`.
///
/// The part of `r0` outside the basis is carried along unattenuated, so the
/// prediction is only meaningful when the basis holds the dominant spectrum.
pub fn predict_residual(basis: &SpectralBasis, r0: &[f64], eta: f64, t: u32) -> Result<Vec<f64>> {
    let coeffs = project(basis, r0)?;
    if let Some(&top) = basis.eigenvalues.first() {
        if eta < 0.0 || eta * top > 1.0 {
            warn!("step {eta} is outside (0, 1/sigma_max^2 = {}]", 1.0 / top);
        }
    }
    let mut out = r0.to_vec();
    for (i, c) in coeffs.iter().enumerate() {
        let factor = (1.0 - eta * basis.eigenvalues[i]).powi(t as i32) - 1.0;
        crate::linalg::axpy(factor * c, basis.vector(i), &mut out);
    }
    Ok(out)
}

/// Right-hand terms of the linearized generalization bound and the measured
/// left-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    /// `(1 - eta sigma_min^2)^t ||G(theta_0)||`.
    pub init: f64,
    /// `(1 - eta sigma_p^2)^t ||x||`.
    pub signal: f64,
    /// `sqrt(sum_i (1 - (1 - eta sigma_i^2)^t)^2 <u_i, noise>^2)`.
    pub noise: f64,
    /// `||G_t - x||` for the linearized iterate `G_t` after `t` steps.
    pub lhs: f64,
}

impl BoundTerms {
    pub fn rhs(&self) -> f64 {
        self.init + self.signal + self.noise
    }
}

/// Evaluate the bound for fitting `b = x_true + noise` by `t` linearized
/// gradient steps from `theta0`. `p` (1-based) selects `sigma_p`.
///
/// Needs the complete spectrum, since the first term uses `sigma_min`. The
/// left-hand side comes from iterating `r <- r - eta J J^T r` directly.
#[allow(clippy::too_many_arguments)]
pub fn bound_terms(
    basis: &SpectralBasis,
    g: &Generator,
    theta0: &[f64],
    x_true: &ImageTensor,
    noise: &[f64],
    eta: f64,
    t: u32,
    p: usize,
) -> Result<BoundTerms> {
    if !basis.is_complete() {
        return Err(Error::InvalidArgument(format!(
            "the bound needs all {} eigenpairs, basis has {}",
            basis.n,
            basis.k()
        )));
    }
    if p == 0 || p > basis.k() {
        return Err(Error::InvalidArgument(format!("p = {p} outside 1..={}", basis.k())));
    }
    let lin = g.linearize(theta0)?;
    check_len(lin.output_len(), basis.n)?;
    check_len(basis.n, x_true.len())?;
    check_len(basis.n, noise.len())?;
    let g0 = lin.output().as_slice();
    let contraction = |l: f64| (1.0 - eta * l).powi(t as i32);
    let sigma_min = *basis.eigenvalues.last().expect("complete basis is nonempty");
    let init = contraction(sigma_min) * norm(g0);
    let signal = contraction(basis.eigenvalues[p - 1]) * norm(x_true.as_slice());
    let noise_coeffs = project(basis, noise)?;
    let noise_term = basis
        .eigenvalues
        .iter()
        .zip(&noise_coeffs)
        .map(|(&l, c)| ((1.0 - contraction(l)) * c).powi(2))
        .sum::<f64>()
        .sqrt();

    let mut r: Vec<f64> = g0
        .iter()
        .zip(x_true.as_slice())
        .zip(noise)
        .map(|((g, x), e)| g - x - e)
        .collect();
    for _ in 0..t {
        let jr = lin.jjt_apply(&r)?;
        crate::linalg::axpy(-eta, &jr, &mut r);
    }
    // G_t - x = r_t + noise.
    let lhs = norm(&r.iter().zip(noise).map(|(a, e)| a + e).collect::<Vec<_>>());
    Ok(BoundTerms {
        init,
        signal,
        noise: noise_term,
        lhs,
    })
}
