//! Loops that optimize generator weights.

use super::{AdmmState, Monitor, Optimizer, Recorder, RunOutput, SolverConfig};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::linalg::{axpy, dot};
use crate::nn::{Generator, Linearization};
use crate::ops::Measurement;
use crate::priors::Prox;
use crate::spectral::SpectralBasis;

/// Regularization by denoising: adds `lambda/2 x^T (x - f(x))` to the loss,
/// with gradient `lambda (x - f(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Red {
    pub lambda: f64,
    pub denoiser: Prox,
}

fn check_shapes(g: &Generator, meas: &Measurement) -> Result<()> {
    if g.output_shape() != meas.shape {
        return Err(Error::ShapeMismatch {
            expected: g.output_shape().to_string(),
            actual: meas.shape.to_string(),
        });
    }
    Ok(())
}

/// Gradient descent (Adam by default) on `1/2 ||b - A G(theta)||^2`,
/// optionally with a RED term.
pub fn dip_gd(
    g: &Generator,
    meas: &Measurement,
    cfg: &SolverConfig,
    red: Option<&Red>,
    monitor: &mut Monitor<'_>,
) -> Result<RunOutput> {
    cfg.validate()?;
    check_shapes(g, meas)?;
    if let Some(r) = red {
        r.denoiser.validate()?;
    }
    let mut rec = Recorder::new(monitor, cfg);
    let mut opt = Optimizer::new(cfg, g.weight_count());
    let mut theta = g.theta0().to_vec();
    let mut lin = g.linearize(&theta)?;
    let mut calls = 0;
    for t in 0..=cfg.iters {
        let x = lin.output();
        let mut seed = meas.data_grad(x.as_slice())?;
        let mut loss = meas.data_loss(x.as_slice())?;
        if let Some(r) = red {
            let fx = r.denoiser.apply(x, 1.0)?;
            calls += 1;
            let resid: Vec<f64> = x.as_slice().iter().zip(fx.as_slice()).map(|(a, b)| a - b).collect();
            loss += 0.5 * r.lambda * dot(x.as_slice(), &resid);
            axpy(r.lambda, &resid, &mut seed);
        }
        rec.observe(t, x, || Ok(loss))?;
        if t == cfg.iters {
            break;
        }
        let grad = lin.vjp(&seed)?;
        opt.step(&mut theta, &grad)?;
        lin = g.linearize(&theta)?;
    }
    let image = lin.into_output();
    Ok(rec.finish(image, calls))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmmVariant {
    /// x-step by `N` warm-started ISTA iterations; theta-step on the coupling
    /// term only.
    V1,
    /// x-step by a single prox; theta-step on data term plus coupling.
    V2,
}

/// DIP-ADMM, one outer iteration per [`DipAdmm::step`].
pub struct DipAdmm<'g> {
    g: &'g Generator,
    meas: &'g Measurement,
    cfg: SolverConfig,
    variant: AdmmVariant,
    state: AdmmState<Vec<f64>>,
    /// Tape at the current `theta`; its output is `G(theta_t)`.
    lin: Linearization<'g>,
    opt: Optimizer,
    prox_calls: usize,
}

impl<'g> DipAdmm<'g> {
    /// Starts from `theta_0`, `x_0 = A^T b`, `u_0 = 0`.
    pub fn new(g: &'g Generator, meas: &'g Measurement, cfg: &SolverConfig, variant: AdmmVariant) -> Result<Self> {
        cfg.validate()?;
        check_shapes(g, meas)?;
        let theta = g.theta0().to_vec();
        let lin = g.linearize(&theta)?;
        Ok(Self {
            g,
            meas,
            cfg: cfg.clone(),
            variant,
            state: AdmmState {
                x: meas.zero_fill()?,
                primal: theta,
                u: ImageTensor::zeros(meas.shape),
                t: 0,
            },
            lin,
            opt: Optimizer::new(cfg, g.weight_count()),
            prox_calls: 0,
        })
    }

    pub fn state(&self) -> &AdmmState<Vec<f64>> {
        &self.state
    }

    /// `G(theta_t)`.
    pub fn output(&self) -> &ImageTensor {
        self.lin.output()
    }

    pub fn prox_calls(&self) -> usize {
        self.prox_calls
    }

    /// `1/2 ||b - A G||^2 + R(G)` at `G = G(theta_t)`; `R` counts as zero for
    /// denoisers.
    pub fn loss(&self) -> Result<f64> {
        let gx = self.output();
        Ok(self.meas.data_loss(gx.as_slice())? + self.cfg.prior.value(gx).unwrap_or(0.0))
    }

    fn x_step(&mut self) -> Result<ImageTensor> {
        let rho = self.cfg.rho;
        let gt = self.lin.output().as_slice();
        let u = self.state.u.as_slice();
        match self.variant {
            AdmmVariant::V1 => {
                let step = 1.0 / (self.meas.op.operator_norm() + rho);
                let mut x = self.state.x.clone();
                for _ in 0..self.cfg.inner_ista {
                    let mut grad = self.meas.data_grad(x.as_slice())?;
                    for (k, gk) in grad.iter_mut().enumerate() {
                        *gk += rho * (x.as_slice()[k] - gt[k] + u[k]);
                    }
                    let mut v = x.as_slice().to_vec();
                    axpy(-step, &grad, &mut v);
                    x = self.cfg.prior.apply(&x.with_data(v)?, step)?;
                    self.prox_calls += 1;
                }
                Ok(x)
            }
            AdmmVariant::V2 => {
                let v: Vec<f64> = gt.iter().zip(u).map(|(g, u)| g - u).collect();
                self.prox_calls += 1;
                self.cfg.prior.apply(&self.state.x.with_data(v)?, 1.0 / rho)
            }
        }
    }

    pub fn step(&mut self) -> Result<()> {
        let rho = self.cfg.rho;
        let x = self.x_step()?;
        let gt = self.lin.output().as_slice();
        let mut seed: Vec<f64> = gt
            .iter()
            .zip(x.as_slice())
            .zip(self.state.u.as_slice())
            .map(|((g, x), u)| rho * (g - x - u))
            .collect();
        if self.variant == AdmmVariant::V2 {
            let data = self.meas.data_grad(gt)?;
            seed.iter_mut().zip(&data).for_each(|(s, d)| *s += d);
        }
        let grad = self.lin.vjp(&seed)?;
        self.opt.step(&mut self.state.primal, &grad)?;
        self.lin = self.g.linearize(&self.state.primal)?;
        let g_next = self.lin.output().as_slice();
        let dual = self.cfg.dual_step;
        for ((u, x), g) in self.state.u.as_mut_slice().iter_mut().zip(x.as_slice()).zip(g_next) {
            *u += dual * (x - g);
        }
        self.state.x = x;
        self.state.t += 1;
        Ok(())
    }
}

fn dip_admm(
    g: &Generator,
    meas: &Measurement,
    cfg: &SolverConfig,
    variant: AdmmVariant,
    monitor: &mut Monitor<'_>,
) -> Result<RunOutput> {
    let mut solver = DipAdmm::new(g, meas, cfg, variant)?;
    let mut rec = Recorder::new(monitor, cfg);
    for t in 0..=cfg.iters {
        rec.observe(t, solver.output(), || solver.loss())?;
        if t < cfg.iters {
            solver.step()?;
        }
    }
    let calls = solver.prox_calls();
    Ok(rec.finish(solver.lin.into_output(), calls))
}

/// DIP-ADMM-v1; the reconstruction is `G(theta_t)`.
pub fn dip_admm_v1(g: &Generator, meas: &Measurement, cfg: &SolverConfig, monitor: &mut Monitor<'_>) -> Result<RunOutput> {
    dip_admm(g, meas, cfg, AdmmVariant::V1, monitor)
}

/// DIP-ADMM-v2; the reconstruction is `G(theta_t)`.
pub fn dip_admm_v2(g: &Generator, meas: &Measurement, cfg: &SolverConfig, monitor: &mut Monitor<'_>) -> Result<RunOutput> {
    dip_admm(g, meas, cfg, AdmmVariant::V2, monitor)
}

/// Fit `b` only along the top `p` eigenvectors `U_p` of `J J^T`:
/// minimize `1/2 ||U_p^T (G(theta) - b)||^2`.
pub fn directional_fit(
    g: &Generator,
    b: &ImageTensor,
    basis: &SpectralBasis,
    p: usize,
    cfg: &SolverConfig,
    monitor: &mut Monitor<'_>,
) -> Result<RunOutput> {
    cfg.validate()?;
    if let Some(fp) = &basis.fingerprint {
        if *fp != g.fingerprint() {
            return Err(Error::FingerprintMismatch {
                expected: g.fingerprint(),
                found: fp.clone(),
            });
        }
    }
    if g.output_shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            expected: g.output_shape().to_string(),
            actual: b.shape().to_string(),
        });
    }
    crate::error::check_len(b.len(), basis.n)?;
    let basis = basis.truncated(p)?;
    let mut rec = Recorder::new(monitor, cfg);
    let mut opt = Optimizer::new(cfg, g.weight_count());
    let mut theta = g.theta0().to_vec();
    let mut lin = g.linearize(&theta)?;
    for t in 0..=cfg.iters {
        let x = lin.output();
        let r: Vec<f64> = x.as_slice().iter().zip(b.as_slice()).map(|(a, b)| a - b).collect();
        let coeffs = crate::spectral::project(&basis, &r)?;
        let loss = 0.5 * coeffs.iter().map(|c| c * c).sum::<f64>();
        rec.observe(t, x, || Ok(loss))?;
        if t == cfg.iters {
            break;
        }
        let mut seed = vec![0.0; basis.n];
        for (i, c) in coeffs.iter().enumerate() {
            axpy(*c, basis.vector(i), &mut seed);
        }
        let grad = lin.vjp(&seed)?;
        opt.step(&mut theta, &grad)?;
        lin = g.linearize(&theta)?;
    }
    Ok(rec.finish(lin.into_output(), 0))
}

