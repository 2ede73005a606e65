//! Experiment plumbing: metrics, configuration, run directories and the
//! file formats the command-line tool reads and writes.

mod config;
mod metrics;
mod run;
mod spectra;

pub use config::{ExperimentConfig, Method, Task};
pub use metrics::{ema_smooth, mean_std, psnr};
pub(crate) use metrics::{ema_in_place, psnr_slices};
pub use run::{
    aggregate, degrade, load_problem, read_curves, read_mask, read_values, run_experiment, write_curves,
    write_degraded, write_mask, write_values, CURVES_HEADER,
};
pub use spectra::{check_fingerprint, compute_spectrum, generator_for, predict_curve, projection_csv};
