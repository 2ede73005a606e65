//! Proximal gradient methods for `min_x 1/2 ||b - A x||^2 + R(x)`.

use super::{Monitor, Recorder, RunOutput, SolverConfig};
use crate::error::Result;
use crate::image::ImageTensor;
use crate::linalg::axpy;
use crate::ops::Measurement;
use crate::priors::Prox;

fn objective(meas: &Measurement, prior: &Prox, x: &ImageTensor) -> Result<Option<f64>> {
    match prior.value(x) {
        Some(r) => Ok(Some(r + meas.data_loss(x.as_slice())?)),
        None => Ok(None),
    }
}

/// One step `prox_{R/L}(x - grad f(x) / L)`.
fn forward_backward(meas: &Measurement, prior: &Prox, x: &ImageTensor, step: f64) -> Result<ImageTensor> {
    let g = meas.data_grad(x.as_slice())?;
    let mut v = x.as_slice().to_vec();
    axpy(-step, &g, &mut v);
    prior.apply(&x.with_data(v)?, step)
}

/// Runs `iters` steps, reporting `(t, x_t)` for `t = 0..=iters`; returns
/// `x_T` and the number of prox evaluations.
fn run(
    meas: &Measurement,
    prior: &Prox,
    iters: usize,
    x0: &ImageTensor,
    accelerated: bool,
    mut observe: impl FnMut(usize, &ImageTensor) -> Result<()>,
) -> Result<(ImageTensor, usize)> {
    prior.validate()?;
    x0.ensure_same_shape(&ImageTensor::zeros(meas.shape))?;
    let lipschitz = meas.op.operator_norm();
    let step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 };
    let mut calls = 0;
    let mut x = x0.clone();
    observe(0, &x)?;
    // FISTA state: extrapolated point, momentum weight, last objective.
    let mut y = x.clone();
    let mut tk = 1.0f64;
    let mut f_prev = if accelerated { objective(meas, prior, &x)? } else { None };
    for t in 1..=iters {
        if !accelerated {
            x = forward_backward(meas, prior, &x, step)?;
            calls += 1;
        } else {
            let mut z = forward_backward(meas, prior, &y, step)?;
            calls += 1;
            let mut f_z = objective(meas, prior, &z)?;
            if let (Some(fp), Some(fz)) = (f_prev, f_z) {
                if fz > fp {
                    // Objective went up: drop the momentum and take a plain step.
                    z = forward_backward(meas, prior, &x, step)?;
                    calls += 1;
                    f_z = objective(meas, prior, &z)?;
                    tk = 1.0;
                }
            }
            let t_next = (1.0 + (1.0 + 4.0 * tk * tk).sqrt()) / 2.0;
            let w = (tk - 1.0) / t_next;
            let yv: Vec<f64> = z
                .as_slice()
                .iter()
                .zip(x.as_slice())
                .map(|(zn, xo)| zn + w * (zn - xo))
                .collect();
            y = z.with_data(yv)?;
            x = z;
            tk = t_next;
            f_prev = f_z;
        }
        observe(t, &x)?;
    }
    Ok((x, calls))
}

/// ISTA with fixed step `1 / ||A^T A||`.
pub fn ista(meas: &Measurement, prior: &Prox, iters: usize, x0: &ImageTensor) -> Result<ImageTensor> {
    Ok(run(meas, prior, iters, x0, false, |_, _| Ok(()))?.0)
}

/// FISTA with the same step, restarting the momentum whenever the objective
/// would increase (when `R` has a value), which makes it monotone.
pub fn fista(meas: &Measurement, prior: &Prox, iters: usize, x0: &ImageTensor) -> Result<ImageTensor> {
    Ok(run(meas, prior, iters, x0, true, |_, _| Ok(()))?.0)
}

fn traced(meas: &Measurement, cfg: &SolverConfig, monitor: &mut Monitor<'_>, accelerated: bool) -> Result<RunOutput> {
    cfg.validate()?;
    let mut rec = Recorder::new(monitor, cfg);
    let x0 = meas.zero_fill()?;
    let (x, calls) = run(meas, &cfg.prior, cfg.iters, &x0, accelerated, |t, x| {
        rec.observe(t, x, || {
            Ok(meas.data_loss(x.as_slice())? + cfg.prior.value(x).unwrap_or(0.0))
        })
    })?;
    Ok(rec.finish(x, calls))
}

/// [`ista`] from the zero-filled measurement, recorded.
pub fn ista_run(meas: &Measurement, cfg: &SolverConfig, monitor: &mut Monitor<'_>) -> Result<RunOutput> {
    traced(meas, cfg, monitor, false)
}

/// [`fista`] from the zero-filled measurement, recorded.
pub fn fista_run(meas: &Measurement, cfg: &SolverConfig, monitor: &mut Monitor<'_>) -> Result<RunOutput> {
    traced(meas, cfg, monitor, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Shape;
    use crate::ops::MeasurementOp;
    use crate::priors::soft_threshold;

    fn denoise(b: Vec<f64>) -> Measurement {
        let s = Shape::new(1, b.len(), 1);
        Measurement::new(b, MeasurementOp::identity(s.len()), 0.0, s).unwrap()
    }

    #[test]
    fn no_prior_identity_reaches_b() {
        let meas = denoise(vec![0.3, -1.0, 2.0]);
        let x0 = ImageTensor::zeros(meas.shape);
        let x = ista(&meas, &Prox::None, 3, &x0).unwrap();
        assert!(crate::linalg::max_abs_diff(x.as_slice(), &meas.b) <= 1e-8);
    }

    #[test]
    fn single_l1_step_is_soft_threshold() {
        let b = vec![0.9, -0.2, 0.05, -1.5];
        let meas = denoise(b.clone());
        let x0 = ImageTensor::new(meas.shape, b.clone()).unwrap();
        let x = ista(&meas, &Prox::L1 { lambda: 0.3 }, 1, &x0).unwrap();
        assert_eq!(x.as_slice(), soft_threshold(&b, 0.3).as_slice());
    }

    #[test]
    fn traced_run_counts_prox_calls() {
        let meas = denoise(vec![0.5; 4]);
        let cfg = SolverConfig {
            iters: 7,
            prior: Prox::L1 { lambda: 0.1 },
            ..Default::default()
        };
        let out = ista_run(&meas, &cfg, &mut Monitor::new()).unwrap();
        assert_eq!(out.trace.prox_calls, 7);
        assert_eq!(out.trace.rows.len(), 8);
    }
}
