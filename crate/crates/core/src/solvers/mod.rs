//! Reconstruction loops.
//!
//! Every loop evaluates its current reconstruction `x_t` for `t = 0..=T`
//! (`x_0` is the initialization) and hands it to a [`Recorder`], which keeps
//! the exponential moving average of the images and writes a [`TraceRow`]
//! every `record_every` iterations and at `T`.

mod dip;
mod pnp;
mod proximal;

use cpu_time::ProcessTime;

pub use dip::{dip_admm_v1, dip_admm_v2, dip_gd, directional_fit, AdmmVariant, DipAdmm, Red};
pub use pnp::{diagonal_solve, pnp_admm, PnpAdmm};
pub use proximal::{fista, fista_run, ista, ista_run};

use crate::error::{Error, Result};
use crate::harness::{ema_in_place, psnr_slices};
use crate::image::ImageTensor;
use crate::nn::AdamState;
use crate::priors::Prox;

/// How `theta` follows its gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThetaOptimizer {
    #[default]
    Adam,
    /// `theta -= lr * grad`; only the linearized-dynamics checks use it.
    GradientDescent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rho: f64,
    pub dual_step: f64,
    /// Outer iterations `T`.
    pub iters: usize,
    /// ISTA steps per x-update in DIP-ADMM-v1 (`N`).
    pub inner_ista: usize,
    pub lr: f64,
    pub prior: Prox,
    pub record_every: usize,
    pub optimizer: ThetaOptimizer,
    /// When false the `cpu_seconds` column is written as zero so traces are
    /// reproducible byte for byte.
    pub record_time: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            dual_step: 1.0,
            iters: 1000,
            inner_ista: 5,
            lr: 1e-3,
            prior: Prox::None,
            record_every: 1,
            optimizer: ThetaOptimizer::Adam,
            record_time: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if !self.dual_step.is_finite() {
            return bad("dual_step must be finite".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.iters == 0 || self.inner_ista == 0 || self.record_every == 0 {
            return bad("iters, inner_ista and record_every must be at least 1".into());
        }
        self.prior.validate()
    }
}

/// The `(x, theta or y, u)` triple of an ADMM loop after `t` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState<P> {
    pub x: ImageTensor,
    pub primal: P,
    pub u: ImageTensor,
    pub t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub cpu_seconds: f64,
    pub loss: f64,
    pub psnr: Option<f64>,
    /// PSNR of the moving average of the reconstructions.
    pub psnr_ema: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    /// Proximal operator (or denoiser) evaluations over the whole run.
    pub prox_calls: usize,
}

impl RunTrace {
    /// Highest recorded PSNR and its iteration.
    pub fn peak_psnr(&self) -> Option<(usize, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.psnr.map(|p| (r.iter, p)))
            .fold(None, |best, (i, p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((i, p)),
            })
    }

    pub fn final_psnr(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.psnr)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: RunTrace,
    /// `x_T`.
    pub image: ImageTensor,
    /// Moving average of `x_0, ..., x_T`.
    pub ema: ImageTensor,
}

type Hook<'a> = Box<dyn FnMut(&TraceRow, &ImageTensor, &ImageTensor) -> Result<()> + 'a>;

/// Optional ground truth for PSNR and a callback run on every recorded row
/// with the raw and averaged reconstructions.
#[derive(Default)]
pub struct Monitor<'a> {
    truth: Option<&'a ImageTensor>,
    hook: Option<Hook<'a>>,
}

impl<'a> Monitor<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_truth(mut self, truth: &'a ImageTensor) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn on_record(mut self, hook: impl FnMut(&TraceRow, &ImageTensor, &ImageTensor) -> Result<()> + 'a) -> Self {
        self.hook = Some(Box::new(hook));
        self
    }
}

pub(crate) struct Recorder<'m, 'a> {
    monitor: &'m mut Monitor<'a>,
    ema: Option<ImageTensor>,
    rows: Vec<TraceRow>,
    every: usize,
    last: usize,
    clock: Option<ProcessTime>,
}

impl<'m, 'a> Recorder<'m, 'a> {
    pub(crate) fn new(monitor: &'m mut Monitor<'a>, cfg: &SolverConfig) -> Self {
        Self {
            monitor,
            ema: None,
            rows: Vec::new(),
            every: cfg.record_every,
            last: cfg.iters,
            clock: cfg.record_time.then(ProcessTime::now),
        }
    }

    /// Take `x_t`; `loss` is only evaluated on recorded iterations.
    pub(crate) fn observe(&mut self, t: usize, x: &ImageTensor, loss: impl FnOnce() -> Result<f64>) -> Result<()> {
        match &mut self.ema {
            None => self.ema = Some(x.clone()),
            Some(ema) => ema_in_place(ema.as_mut_slice(), x.as_slice())?,
        }
        if !t.is_multiple_of(self.every) && t != self.last {
            return Ok(());
        }
        let loss = loss()?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        let ema = self.ema.as_ref().expect("set above");
        let (psnr, psnr_ema) = match self.monitor.truth {
            Some(truth) => {
                truth.ensure_same_shape(x)?;
                (
                    Some(psnr_slices(truth.as_slice(), x.as_slice())),
                    Some(psnr_slices(truth.as_slice(), ema.as_slice())),
                )
            }
            None => (None, None),
        };
        let row = TraceRow {
            iter: t,
            cpu_seconds: self.clock.map_or(0.0, |c| c.elapsed().as_secs_f64()),
            loss,
            psnr,
            psnr_ema,
        };
        if let Some(hook) = self.monitor.hook.as_mut() {
            hook(&row, x, ema)?;
        }
        self.rows.push(row);
        Ok(())
    }

    pub(crate) fn finish(self, image: ImageTensor, prox_calls: usize) -> RunOutput {
        RunOutput {
            ema: self.ema.unwrap_or_else(|| image.clone()),
            image,
            trace: RunTrace {
                rows: self.rows,
                prox_calls,
            },
        }
    }
}

/// Adam or plain gradient descent on `theta`.
pub(crate) enum Optimizer {
    Adam(AdamState),
    Gd(f64),
}

impl Optimizer {
    pub(crate) fn new(cfg: &SolverConfig, len: usize) -> Self {
        match cfg.optimizer {
            ThetaOptimizer::Adam => Self::Adam(AdamState::new(len, cfg.lr)),
            ThetaOptimizer::GradientDescent => Self::Gd(cfg.lr),
        }
    }

    pub(crate) fn step(&mut self, theta: &mut [f64], grad: &[f64]) -> Result<()> {
        match self {
            Self::Adam(state) => state.step(theta, grad),
            Self::Gd(lr) => {
                crate::error::check_len(theta.len(), grad.len())?;
                crate::linalg::axpy(-*lr, grad, theta);
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Shape;

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        for bad in [
            SolverConfig { rho: 0.0, ..Default::default() },
            SolverConfig { iters: 0, ..Default::default() },
            SolverConfig { inner_ista: 0, ..Default::default() },
            SolverConfig { prior: Prox::Tv { lambda: -1.0 }, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn recorder_schedule_and_ema() {
        let cfg = SolverConfig {
            iters: 5,
            record_every: 2,
            record_time: false,
            ..Default::default()
        };
        let s = Shape::new(1, 1, 1);
        let truth = ImageTensor::filled(s, 1.0);
        let mut monitor = Monitor::new().with_truth(&truth);
        let mut rec = Recorder::new(&mut monitor, &cfg);
        for t in 0..=5 {
            let x = ImageTensor::filled(s, if t == 0 { 0.0 } else { 1.0 });
            rec.observe(t, &x, || Ok(t as f64)).unwrap();
        }
        let out = rec.finish(truth.clone(), 0);
        let iters: Vec<usize> = out.trace.rows.iter().map(|r| r.iter).collect();
        assert_eq!(iters, vec![0, 2, 4, 5]);
        // EMA seeded with x_0 = 0, then five steps toward 1.
        assert!((out.ema.as_slice()[0] - (1.0 - 0.9f64.powi(5))).abs() < 1e-15);
        assert_eq!(out.trace.rows[1].psnr, Some(f64::INFINITY));
        assert_eq!(out.trace.peak_psnr().map(|p| p.0), Some(2));
    }
}
