use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::GeneratorConfig;
use crate::priors::Prox;
use crate::solvers::{SolverConfig, ThetaOptimizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Inpaint,
    Denoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Dip,
    DipAdmmV1,
    DipAdmmV2,
    Pnp,
    Ista,
    Fista,
    Directional,
}

const METHODS: [(Method, &str); 7] = [
    (Method::Dip, "dip"),
    (Method::DipAdmmV1, "dip-admm-v1"),
    (Method::DipAdmmV2, "dip-admm-v2"),
    (Method::Pnp, "pnp"),
    (Method::Ista, "ista"),
    (Method::Fista, "fista"),
    (Method::Directional, "directional"),
];

impl Method {
    pub fn uses_generator(self) -> bool {
        matches!(self, Self::Dip | Self::DipAdmmV1 | Self::DipAdmmV2 | Self::Directional)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = METHODS.iter().find(|(m, _)| m == self).map(|(_, n)| *n).unwrap_or("?");
        f.write_str(name)
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        METHODS
            .iter()
            .find(|(_, n)| *n == s.trim())
            .map(|(m, _)| *m)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Inpaint => "inpaint",
            Self::Denoise => "denoise",
        })
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inpaint" => Ok(Self::Inpaint),
            "denoise" => Ok(Self::Denoise),
            _ => Err(Error::InvalidConfig(format!("unknown task `{s}`"))),
        }
    }
}

/// Everything that determines a run. Stored as flat `key=value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    /// Ground-truth PNG.
    pub image: PathBuf,
    pub keep_fraction: f64,
    /// Noise standard deviation in 0-255 units.
    pub noise_sigma: f64,
    pub method: Method,
    pub prior: Prox,
    /// Weight of the RED term for `method = dip`; 0 disables it. The prior
    /// is the denoiser.
    pub red_lambda: f64,
    pub generator: GeneratorConfig,
    pub rho: f64,
    pub dual_step: f64,
    pub iters: usize,
    pub inner_ista: usize,
    pub lr: f64,
    pub optimizer: ThetaOptimizer,
    /// Seeds the generator; mask and noise use `seed + 2` and `seed + 1`.
    pub seed: u64,
    pub output: PathBuf,
    pub record_every: usize,
    /// Write raw and averaged PNGs every this many iterations; 0 disables.
    pub snapshot_every: usize,
    pub record_time: bool,
    /// Spectrum file for `method = directional`.
    pub spectrum: Option<PathBuf>,
    /// Number of leading eigenvectors fitted by `method = directional`.
    pub directional_p: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: Task::Inpaint,
            image: PathBuf::new(),
            keep_fraction: 0.5,
            noise_sigma: 10.0,
            method: Method::Dip,
            prior: Prox::None,
            red_lambda: 0.0,
            generator: GeneratorConfig::default(),
            rho: 1.0,
            dual_step: 1.0,
            iters: 5000,
            inner_ista: 5,
            lr: 1e-3,
            optimizer: ThetaOptimizer::Adam,
            seed: 0,
            output: PathBuf::from("run"),
            record_every: 10,
            snapshot_every: 500,
            record_time: true,
            spectrum: None,
            directional_p: 0,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("`{key}`: cannot parse `{value}`")))
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 25] = [
        "task",
        "image",
        "keep_fraction",
        "noise_sigma",
        "method",
        "prior",
        "red_lambda",
        "level_channels",
        "kernel_size",
        "input_channels",
        "leaky_slope",
        "rho",
        "dual_step",
        "iters",
        "inner_ista",
        "lr",
        "optimizer",
        "seed",
        "output",
        "record_every",
        "snapshot_every",
        "record_time",
        "spectrum",
        "directional_p",
        "generator_seed",
    ];

    /// Set one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "task" => self.task = v.parse()?,
            "image" => self.image = PathBuf::from(v),
            "keep_fraction" => self.keep_fraction = parse_num(key, v)?,
            "noise_sigma" => self.noise_sigma = parse_num(key, v)?,
            "method" => self.method = v.parse()?,
            "prior" => self.prior = v.parse()?,
            "red_lambda" => self.red_lambda = parse_num(key, v)?,
            "level_channels" => {
                self.generator.level_channels = v
                    .split(',')
                    .map(|c| parse_num(key, c))
                    .collect::<Result<Vec<usize>>>()?
            }
            "kernel_size" => self.generator.kernel_size = parse_num(key, v)?,
            "input_channels" => self.generator.input_channels = parse_num(key, v)?,
            "leaky_slope" => self.generator.leaky_slope = parse_num(key, v)?,
            "rho" => self.rho = parse_num(key, v)?,
            "dual_step" => self.dual_step = parse_num(key, v)?,
            "iters" => self.iters = parse_num(key, v)?,
            "inner_ista" => self.inner_ista = parse_num(key, v)?,
            "lr" => self.lr = parse_num(key, v)?,
            "optimizer" => {
                self.optimizer = match v {
                    "adam" => ThetaOptimizer::Adam,
                    "gd" => ThetaOptimizer::GradientDescent,
                    _ => return Err(Error::InvalidConfig(format!("unknown optimizer `{v}`"))),
                }
            }
            "seed" => {
                self.seed = parse_num(key, v)?;
                self.generator.seed = self.seed;
            }
            "generator_seed" => self.generator.seed = parse_num(key, v)?,
            "output" => self.output = PathBuf::from(v),
            "record_every" => self.record_every = parse_num(key, v)?,
            "snapshot_every" => self.snapshot_every = parse_num(key, v)?,
            "record_time" => self.record_time = parse_num(key, v)?,
            "spectrum" => self.spectrum = (!v.is_empty()).then(|| PathBuf::from(v)),
            "directional_p" => self.directional_p = parse_num(key, v)?,
            other => return Err(Error::InvalidConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parse `key=value` lines on top of the defaults. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key=value", no + 1)))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn to_text(&self) -> String {
        let g = &self.generator;
        let channels: Vec<String> = g.level_channels.iter().map(|c| c.to_string()).collect();
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        put("task", self.task.to_string());
        put("image", self.image.display().to_string());
        put("keep_fraction", self.keep_fraction.to_string());
        put("noise_sigma", self.noise_sigma.to_string());
        put("method", self.method.to_string());
        put("prior", self.prior.to_string());
        put("red_lambda", self.red_lambda.to_string());
        put("level_channels", channels.join(","));
        put("kernel_size", g.kernel_size.to_string());
        put("input_channels", g.input_channels.to_string());
        put("leaky_slope", g.leaky_slope.to_string());
        put("rho", self.rho.to_string());
        put("dual_step", self.dual_step.to_string());
        put("iters", self.iters.to_string());
        put("inner_ista", self.inner_ista.to_string());
        put("lr", self.lr.to_string());
        put(
            "optimizer",
            match self.optimizer {
                ThetaOptimizer::Adam => "adam",
                ThetaOptimizer::GradientDescent => "gd",
            }
            .into(),
        );
        put("seed", self.seed.to_string());
        put("generator_seed", g.seed.to_string());
        put("output", self.output.display().to_string());
        put("record_every", self.record_every.to_string());
        put("snapshot_every", self.snapshot_every.to_string());
        put("record_time", self.record_time.to_string());
        put(
            "spectrum",
            self.spectrum.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        );
        put("directional_p", self.directional_p.to_string());
        s
    }

    pub fn noise_sigma_unit(&self) -> f64 {
        self.noise_sigma / 255.0
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            rho: self.rho,
            dual_step: self.dual_step,
            iters: self.iters,
            inner_ista: self.inner_ista,
            lr: self.lr,
            prior: self.prior.clone(),
            record_every: self.record_every,
            optimizer: self.optimizer,
            record_time: self.record_time,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return bad("keep_fraction must lie in (0, 1]");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be >= 0");
        }
        if !(self.red_lambda >= 0.0 && self.red_lambda.is_finite()) {
            return bad("red_lambda must be >= 0");
        }
        self.solver_config().validate()?;
        // Snapshots are taken from recorded iterations.
        if self.snapshot_every > 0 && !self.snapshot_every.is_multiple_of(self.record_every) {
            return bad("snapshot_every must be a multiple of record_every");
        }
        match self.method {
            Method::Pnp | Method::Ista | Method::Fista if self.prior == Prox::None => {
                return bad("pnp, ista and fista need a prior");
            }
            Method::Directional => {
                if self.spectrum.is_none() {
                    return bad("directional fitting needs a spectrum file");
                }
                if self.task != Task::Denoise {
                    return bad("directional fitting is defined for denoising only");
                }
            }
            _ => {}
        }
        if self.red_lambda > 0.0 && self.method != Method::Dip {
            return bad("red_lambda applies to method=dip only");
        }
        if self.red_lambda > 0.0 && self.prior == Prox::None {
            return bad("red_lambda needs a denoiser in `prior`");
        }
        Ok(())
    }
}
