use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use super::config::{ExperimentConfig, Method, Task};
use super::metrics::mean_std;
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::nn::Generator;
use crate::ops::{LinearOperator, Measurement, MeasurementOp};
use crate::solvers::{self, Monitor, Red, RunOutput, TraceRow};
use crate::spectral;

pub const CURVES_HEADER: &str = "iter,cpu_seconds,loss,psnr,psnr_ema";

/// Ground truth and the simulated measurement for a config.
pub fn load_problem(cfg: &ExperimentConfig) -> Result<(ImageTensor, Measurement)> {
    let truth = ImageTensor::read_png(&cfg.image)?;
    let shape = truth.shape();
    let op = match cfg.task {
        Task::Denoise => MeasurementOp::identity(shape.len()),
        Task::Inpaint => MeasurementOp::random_pixels(shape, cfg.keep_fraction, cfg.seed.wrapping_add(2))?,
    };
    let meas = Measurement::simulate(&truth, op, cfg.noise_sigma_unit(), cfg.seed.wrapping_add(1))?;
    Ok((truth, meas))
}

fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        v.to_string()
    }
}

pub fn write_curves(path: impl AsRef<Path>, rows: &[TraceRow]) -> Result<()> {
    let mut s = String::from(CURVES_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.iter,
            format_float(r.cpu_seconds),
            format_float(r.loss),
            format_float(r.psnr.unwrap_or(f64::NAN)),
            format_float(r.psnr_ema.unwrap_or(f64::NAN)),
        );
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_curves(path: impl AsRef<Path>) -> Result<Vec<TraceRow>> {
    let path = path.as_ref();
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CURVES_HEADER) {
        return Err(bad(format!("first line must be `{CURVES_HEADER}`")));
    }
    let mut rows: Vec<TraceRow> = Vec::new();
    for (no, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(bad(format!("line {}: expected 5 fields", no + 2)));
        }
        let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| bad(format!("line {}: bad number `{s}`", no + 2))) };
        let opt = |v: f64| (!v.is_nan()).then_some(v);
        let row = TraceRow {
            iter: f[0].parse().map_err(|_| bad(format!("line {}: bad iteration", no + 2)))?,
            cpu_seconds: num(f[1])?,
            loss: num(f[2])?,
            psnr: opt(num(f[3])?),
            psnr_ema: opt(num(f[4])?),
        };
        if rows.last().is_some_and(|p| p.iter >= row.iter) {
            return Err(bad(format!("line {}: iterations must increase", no + 2)));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Kept coordinates, one per line (every coordinate for the identity).
pub fn write_mask(path: impl AsRef<Path>, op: &MeasurementOp) -> Result<()> {
    let mut s = String::new();
    match op.kept_indices() {
        Some(kept) => kept.iter().for_each(|i| {
            let _ = writeln!(s, "{i}");
        }),
        None => (0..op.domain_len()).for_each(|i| {
            let _ = writeln!(s, "{i}");
        }),
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_mask(path: impl AsRef<Path>, n: usize) -> Result<MeasurementOp> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let kept = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim().parse::<usize>().map_err(|_| Error::Format {
                path: path.to_path_buf(),
                reason: format!("bad index `{l}`"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if kept.iter().any(|&i| i >= n) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("index out of range for n = {n}"),
        });
    }
    MeasurementOp::mask(n, kept)
}

/// `b`, one value per line in shortest round-trip form.
pub fn write_values(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    let mut s = String::with_capacity(values.len() * 20);
    for v in values {
        let _ = writeln!(s, "{v}");
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_values(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim().parse().map_err(|_| Error::Format {
                path: path.to_path_buf(),
                reason: format!("bad value `{l}`"),
            })
        })
        .collect()
}

/// Write `config.txt`, `mask.txt`, `measurement.txt` and `degraded.png`
/// (the zero-filled measurement) into `dir`.
pub fn write_degraded(dir: &Path, cfg: &ExperimentConfig, meas: &Measurement) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.txt"), cfg.to_text())?;
    write_mask(dir.join("mask.txt"), &meas.op)?;
    write_values(dir.join("measurement.txt"), &meas.b)?;
    meas.zero_fill()?.write_png(dir.join("degraded.png"))?;
    Ok(())
}

/// Simulate the measurement only.
pub fn degrade(cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let (_, meas) = load_problem(cfg)?;
    write_degraded(&cfg.output, cfg, &meas)?;
    Ok(cfg.output.clone())
}

/// Run the configured method and fill `cfg.output` with the config snapshot,
/// measurement files, `curves.csv`, periodic snapshots and final images.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let (truth, meas) = load_problem(cfg)?;
    let dir = cfg.output.as_path();
    write_degraded(dir, cfg, &meas)?;
    let snapshots = dir.join("snapshots");
    if cfg.snapshot_every > 0 {
        fs::create_dir_all(&snapshots)?;
    }
    let every = cfg.snapshot_every;
    let last = cfg.iters;
    let mut monitor = Monitor::new().with_truth(&truth).on_record(|row, x, ema| {
        if every > 0 && (row.iter % every == 0 || row.iter == last) {
            x.write_png(snapshots.join(format!("iter_{:06}.png", row.iter)))?;
            ema.write_png(snapshots.join(format!("iter_{:06}_ema.png", row.iter)))?;
        }
        Ok(())
    });
    let solver_cfg = cfg.solver_config();
    info!("running {} for {} iterations into {}", cfg.method, cfg.iters, dir.display());
    let out = if cfg.method.uses_generator() {
        let g = Generator::new(cfg.generator.clone(), truth.shape())?;
        match cfg.method {
            Method::Dip => {
                let red = (cfg.red_lambda > 0.0).then(|| Red {
                    lambda: cfg.red_lambda,
                    denoiser: cfg.prior.clone(),
                });
                solvers::dip_gd(&g, &meas, &solver_cfg, red.as_ref(), &mut monitor)?
            }
            Method::DipAdmmV1 => solvers::dip_admm_v1(&g, &meas, &solver_cfg, &mut monitor)?,
            Method::DipAdmmV2 => solvers::dip_admm_v2(&g, &meas, &solver_cfg, &mut monitor)?,
            _ => {
                let path = cfg.spectrum.as_ref().expect("validated");
                let basis = spectral::read_spectrum(path)?;
                if basis.fingerprint.as_deref() != Some(g.fingerprint().as_str()) {
                    return Err(Error::FingerprintMismatch {
                        expected: g.fingerprint(),
                        found: basis.fingerprint.unwrap_or_else(|| "none".into()),
                    });
                }
                let b = ImageTensor::new(meas.shape, meas.b.clone())?;
                solvers::directional_fit(&g, &b, &basis, cfg.directional_p, &solver_cfg, &mut monitor)?
            }
        }
    } else {
        match cfg.method {
            Method::Pnp => solvers::pnp_admm(&meas, &solver_cfg, &mut monitor)?,
            Method::Ista => solvers::ista_run(&meas, &solver_cfg, &mut monitor)?,
            _ => solvers::fista_run(&meas, &solver_cfg, &mut monitor)?,
        }
    };
    drop(monitor);
    write_curves(dir.join("curves.csv"), &out.trace.rows)?;
    out.image.write_png(dir.join("final.png"))?;
    out.ema.write_png(dir.join("final_ema.png"))?;
    Ok(out)
}

/// Mean and sample standard deviation of `loss`, `psnr` and `psnr_ema` across
/// runs, iteration by iteration. All runs must share the iteration column.
pub fn aggregate(dirs: &[PathBuf]) -> Result<String> {
    if dirs.is_empty() {
        return Err(Error::InvalidArgument("no run directories given".into()));
    }
    let runs = dirs
        .iter()
        .map(|d| read_curves(d.join("curves.csv")))
        .collect::<Result<Vec<_>>>()?;
    let iters: Vec<usize> = runs[0].iter().map(|r| r.iter).collect();
    for (d, run) in dirs.iter().zip(&runs) {
        if run.iter().map(|r| r.iter).ne(iters.iter().copied()) {
            return Err(Error::InvalidArgument(format!(
                "{} records different iterations than {}",
                d.display(),
                dirs[0].display()
            )));
        }
    }
    let mut s = String::from(
        "iter,runs,cpu_seconds_mean,loss_mean,loss_std,psnr_mean,psnr_std,psnr_ema_mean,psnr_ema_std\n",
    );
    for (i, iter) in iters.iter().enumerate() {
        let column = |f: &dyn Fn(&TraceRow) -> f64| -> (f64, f64) {
            mean_std(&runs.iter().map(|r| f(&r[i])).collect::<Vec<_>>())
        };
        let (cpu, _) = column(&|r| r.cpu_seconds);
        let (lm, ls) = column(&|r| r.loss);
        let (pm, ps) = column(&|r| r.psnr.unwrap_or(f64::NAN));
        let (em, es) = column(&|r| r.psnr_ema.unwrap_or(f64::NAN));
        let _ = writeln!(
            s,
            "{iter},{},{},{},{},{},{},{},{}",
            runs.len(),
            format_float(cpu),
            format_float(lm),
            format_float(ls),
            format_float(pm),
            format_float(ps),
            format_float(em),
            format_float(es)
        );
    }
    Ok(s)
}
