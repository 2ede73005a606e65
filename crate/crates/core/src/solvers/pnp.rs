//! Plug-and-play ADMM: the generator replaced by a free variable `y`.

use super::{AdmmState, Monitor, Recorder, RunOutput, SolverConfig};
use crate::error::{check_len, Error, Result};
use crate::image::ImageTensor;
use crate::ops::Measurement;

/// `(D + rho I)^{-1} rhs` for a diagonal `D`.
pub fn diagonal_solve(diag: &[f64], rhs: &[f64], rho: f64) -> Result<Vec<f64>> {
    check_len(diag.len(), rhs.len())?;
    if diag.iter().any(|&d| d + rho <= 0.0) {
        return Err(Error::InvalidArgument("A^T A + rho I is singular".into()));
    }
    Ok(rhs.iter().zip(diag).map(|(r, d)| r / (d + rho)).collect())
}

pub struct PnpAdmm<'m> {
    meas: &'m Measurement,
    cfg: SolverConfig,
    /// Diagonal of `A^T A`.
    gram: Vec<f64>,
    atb: Vec<f64>,
    state: AdmmState<ImageTensor>,
    prox_calls: usize,
}

impl<'m> PnpAdmm<'m> {
    /// Starts from `x_0 = y_0 = A^T b`, `u_0 = 0`. The closed-form y-step
    /// needs a diagonal `A^T A`, which holds for every [`crate::ops::MeasurementOp`].
    pub fn new(meas: &'m Measurement, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let y0 = meas.zero_fill()?;
        Ok(Self {
            meas,
            cfg: cfg.clone(),
            gram: meas.op.gram_diagonal(),
            atb: y0.as_slice().to_vec(),
            state: AdmmState {
                x: y0.clone(),
                primal: y0,
                u: ImageTensor::zeros(meas.shape),
                t: 0,
            },
            prox_calls: 0,
        })
    }

    pub fn state(&self) -> &AdmmState<ImageTensor> {
        &self.state
    }

    pub fn prox_calls(&self) -> usize {
        self.prox_calls
    }

    /// `1/2 ||b - A x||^2 + R(x)` at the current `x`.
    pub fn loss(&self) -> Result<f64> {
        let x = &self.state.x;
        Ok(self.meas.data_loss(x.as_slice())? + self.cfg.prior.value(x).unwrap_or(0.0))
    }

    pub fn step(&mut self) -> Result<()> {
        let rho = self.cfg.rho;
        let AdmmState { x, primal: y, u, t } = &mut self.state;
        let v: Vec<f64> = y.as_slice().iter().zip(u.as_slice()).map(|(y, u)| y - u).collect();
        *x = self.cfg.prior.apply(&x.with_data(v)?, 1.0 / rho)?;
        self.prox_calls += 1;
        let rhs: Vec<f64> = self
            .atb
            .iter()
            .zip(x.as_slice())
            .zip(u.as_slice())
            .map(|((a, x), u)| a + rho * (x + u))
            .collect();
        *y = y.with_data(diagonal_solve(&self.gram, &rhs, rho)?)?;
        let dual = self.cfg.dual_step;
        for ((u, x), y) in u.as_mut_slice().iter_mut().zip(x.as_slice()).zip(y.as_slice()) {
            *u += dual * (x - y);
        }
        *t += 1;
        Ok(())
    }
}

/// Plug-and-play ADMM; the reconstruction is the prox output `x_t`.
pub fn pnp_admm(meas: &Measurement, cfg: &SolverConfig, monitor: &mut Monitor<'_>) -> Result<RunOutput> {
    let mut solver = PnpAdmm::new(meas, cfg)?;
    let mut rec = Recorder::new(monitor, cfg);
    for t in 0..=cfg.iters {
        rec.observe(t, &solver.state.x, || solver.loss())?;
        if t < cfg.iters {
            solver.step()?;
        }
    }
    let calls = solver.prox_calls;
    Ok(rec.finish(solver.state.x, calls))
}
