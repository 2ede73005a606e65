use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::warn;

use dipadmm::harness::{self, ExperimentConfig};
use dipadmm::image::ImageTensor;
use dipadmm::ops::add_gaussian_noise;
use dipadmm::spectral::{self, SpectralBasis};
use dipadmm::Error;

#[derive(Parser)]
#[command(name = "dipadmm", version, about = "Deep image prior with ADMM priors, and Jacobian spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the measurement and write mask, measurement and zero-fill.
    Degrade(ConfigArgs),
    /// Run a reconstruction into the output directory.
    Reconstruct(ConfigArgs),
    /// Top-k eigenpairs of J J^T at the generator's initialization.
    Spectrum {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        lanczos_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Coefficients of an image (or a noise draw) on a spectrum.
    Project {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long = "spectrum-file")]
        spectrum_file: PathBuf,
        /// Image to project; defaults to the config's image.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Project Gaussian noise with this deviation (0-255 units) instead.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, default_value_t = 0)]
        noise_seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Linearized residual prediction for denoising the config's measurement.
    Predict {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long = "spectrum-file")]
        spectrum_file: PathBuf,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        steps: u32,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the predicted image after `steps` steps.
        #[arg(long)]
        image_out: Option<PathBuf>,
    },
    /// PSNR of an image against a reference, in dB.
    Psnr { reference: PathBuf, image: PathBuf },
    /// Mean and sample standard deviation of curves across run directories.
    Aggregate {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A config file plus per-field overrides.
#[derive(Args, Default)]
struct ConfigArgs {
    /// `key=value` file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    image: Option<String>,
    #[arg(long)]
    keep_fraction: Option<String>,
    #[arg(long)]
    noise_sigma: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    prior: Option<String>,
    #[arg(long)]
    red_lambda: Option<String>,
    #[arg(long)]
    level_channels: Option<String>,
    #[arg(long)]
    kernel_size: Option<String>,
    #[arg(long)]
    input_channels: Option<String>,
    #[arg(long)]
    leaky_slope: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    dual_step: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    #[arg(long)]
    inner_ista: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    generator_seed: Option<String>,
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    record_every: Option<String>,
    #[arg(long)]
    snapshot_every: Option<String>,
    #[arg(long)]
    record_time: Option<String>,
    #[arg(long)]
    spectrum: Option<String>,
    #[arg(long)]
    directional_p: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> dipadmm::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let overrides = [
            ("task", &self.task),
            ("image", &self.image),
            ("keep_fraction", &self.keep_fraction),
            ("noise_sigma", &self.noise_sigma),
            ("method", &self.method),
            ("prior", &self.prior),
            ("red_lambda", &self.red_lambda),
            ("level_channels", &self.level_channels),
            ("kernel_size", &self.kernel_size),
            ("input_channels", &self.input_channels),
            ("leaky_slope", &self.leaky_slope),
            ("rho", &self.rho),
            ("dual_step", &self.dual_step),
            ("iters", &self.iters),
            ("inner_ista", &self.inner_ista),
            ("lr", &self.lr),
            ("optimizer", &self.optimizer),
            ("seed", &self.seed),
            ("generator_seed", &self.generator_seed),
            ("output", &self.output),
            ("record_every", &self.record_every),
            ("snapshot_every", &self.snapshot_every),
            ("record_time", &self.record_time),
            ("spectrum", &self.spectrum),
            ("directional_p", &self.directional_p),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn emit(out: Option<&Path>, text: &str) -> dipadmm::Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_checked_spectrum(path: &Path, cfg: &ExperimentConfig) -> dipadmm::Result<SpectralBasis> {
    let basis = spectral::read_spectrum(path)?;
    let g = harness::generator_for(cfg)?;
    harness::check_fingerprint(&basis, &g)?;
    Ok(basis)
}

fn run(cli: Cli) -> dipadmm::Result<ExitCode> {
    match cli.command {
        Command::Degrade(args) => {
            let dir = harness::degrade(&args.resolve()?)?;
            println!("{}", dir.display());
        }
        Command::Reconstruct(args) => {
            let cfg = args.resolve()?;
            let out = harness::run_experiment(&cfg)?;
            if let Some((iter, peak)) = out.trace.peak_psnr() {
                println!(
                    "final psnr {:.3} dB, peak {peak:.3} dB at iteration {iter}",
                    out.trace.final_psnr().unwrap_or(f64::NAN)
                );
            }
        }
        Command::Spectrum {
            config,
            k,
            lanczos_seed,
            out,
        } => {
            let cfg = config.resolve()?;
            match harness::compute_spectrum(&cfg, k, lanczos_seed) {
                Ok(basis) => spectral::write_spectrum(&out, &basis)?,
                Err(Error::NotConverged {
                    requested,
                    converged,
                    iterations,
                    partial,
                }) => {
                    spectral::write_spectrum(&out, &partial)?;
                    eprintln!(
                        "only {converged} of {requested} eigenpairs converged after {iterations} \
                         iterations; wrote those to {}",
                        out.display()
                    );
                    return Ok(ExitCode::from(2));
                }
                Err(e) => return Err(e),
            }
        }
        Command::Project {
            config,
            spectrum_file,
            input,
            noise,
            noise_seed,
            out,
        } => {
            let cfg = config.resolve()?;
            let basis = load_checked_spectrum(&spectrum_file, &cfg)?;
            let v = match noise {
                Some(sigma) => add_gaussian_noise(&vec![0.0; basis.n], sigma / 255.0, noise_seed)?,
                None => ImageTensor::read_png(input.as_ref().unwrap_or(&cfg.image))?.into_vec(),
            };
            emit(out.as_deref(), &harness::projection_csv(&basis, &v)?)?;
        }
        Command::Predict {
            config,
            spectrum_file,
            eta,
            steps,
            out,
            image_out,
        } => {
            let cfg = config.resolve()?;
            if cfg.task != harness::Task::Denoise {
                warn!("the linearized model assumes denoising; using the zero-filled measurement");
            }
            let basis = load_checked_spectrum(&spectrum_file, &cfg)?;
            let g = harness::generator_for(&cfg)?;
            let (_, meas) = harness::load_problem(&cfg)?;
            let b = meas.zero_fill()?;
            let (csv, image) = harness::predict_curve(&basis, &g, &b, eta, steps)?;
            emit(out.as_deref(), &csv)?;
            if let Some(path) = image_out {
                image.write_png(path)?;
            }
        }
        Command::Psnr { reference, image } => {
            let r = ImageTensor::read_png(reference)?;
            let x = ImageTensor::read_png(image)?;
            println!("{}", harness::psnr(&r, &x)?);
        }
        Command::Aggregate { runs, out } => emit(out.as_deref(), &harness::aggregate(&runs)?)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
