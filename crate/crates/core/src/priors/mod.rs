//! Regularizers, their proximal operators, and denoisers standing in for them.
//!
//! A [`Prox`] evaluates `prox_{s R}(v) = argmin_x 1/2 ||v - x||^2 + s R(x)` for
//! a step `s`. Denoisers (non-local means, external programs) have no
//! explicit `R`; they ignore `s` and are applied as-is.

mod external;
mod nlm;
mod tv;

use std::fmt;
use std::str::FromStr;

pub use external::run_external;
pub use nlm::{nlm_denoise, NlmParams};
pub use tv::{prox_tv1d, prox_tv1d_into, prox_tv2d, prox_tv2d_with, tv1d_norm, tv_norm, TvOptions};

use crate::error::{Error, Result};
use crate::image::ImageTensor;

/// Elementwise `sign(v) * max(|v| - lam, 0)`.
pub fn soft_threshold(v: &[f64], lam: f64) -> Vec<f64> {
    v.iter()
        .map(|&x| x.signum() * (x.abs() - lam).max(0.0))
        .map(|x| if x == 0.0 { 0.0 } else { x })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prox {
    /// `R = 0`; the prox is the identity.
    None,
    L1 { lambda: f64 },
    /// Anisotropic total variation.
    Tv { lambda: f64 },
    Nlm(NlmParams),
    /// A program invoked as `<command> <in.png> <out.png>`.
    External { command: String },
}

impl Prox {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::L1 { lambda } | Self::Tv { lambda } if !(*lambda >= 0.0 && lambda.is_finite()) => {
                Err(Error::InvalidArgument(format!("prox weight {lambda} must be >= 0")))
            }
            Self::Nlm(p) => p.validate(),
            Self::External { command } if command.trim().is_empty() => {
                Err(Error::InvalidArgument("external denoiser command is empty".into()))
            }
            _ => Ok(()),
        }
    }

    /// Whether this is a denoiser rather than the prox of an explicit `R`.
    pub fn is_denoiser(&self) -> bool {
        matches!(self, Self::Nlm(_) | Self::External { .. })
    }

    /// `prox_{step R}(v)`.
    pub fn apply(&self, v: &ImageTensor, step: f64) -> Result<ImageTensor> {
        let out = match self {
            Self::None => v.clone(),
            Self::L1 { lambda } => v.with_data(soft_threshold(v.as_slice(), step * lambda))?,
            Self::Tv { lambda } => prox_tv2d(v, step * lambda),
            Self::Nlm(p) => nlm_denoise(v, p)?,
            Self::External { command } => run_external(command, v)?,
        };
        if !out.as_slice().iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("proximal operator"));
        }
        Ok(out)
    }

    /// `R(x)` when it exists; denoisers have none.
    pub fn value(&self, x: &ImageTensor) -> Option<f64> {
        match self {
            Self::None => Some(0.0),
            Self::L1 { lambda } => Some(lambda * x.as_slice().iter().map(|v| v.abs()).sum::<f64>()),
            Self::Tv { lambda } => Some(lambda * tv_norm(x)),
            Self::Nlm(_) | Self::External { .. } => None,
        }
    }
}

/// `x - f(x)`, the gradient of the regularization-by-denoising prior
/// `1/2 x^T (x - f(x))` for a locally homogeneous denoiser `f`.
pub fn red_gradient(x: &ImageTensor, denoiser: &Prox) -> Result<ImageTensor> {
    let fx = denoiser.apply(x, 1.0)?;
    x.with_data(x.as_slice().iter().zip(fx.as_slice()).map(|(a, b)| a - b).collect())
}

impl fmt::Display for Prox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => write!(f, "none"),
            Self::L1 { lambda } => write!(f, "l1:{lambda}"),
            Self::Tv { lambda } => write!(f, "tv:{lambda}"),
            Self::Nlm(p) => write!(
                f,
                "nlm:{},{},{},{}",
                p.sigma, p.patch_distance, p.cutoff, p.patch_size
            ),
            Self::External { command } => write!(f, "external:{command}"),
        }
    }
}

/// Parses `none`, `l1:<lam>`, `tv:<lam>`,
/// `nlm:<sigma>,<patch_distance>,<cutoff>[,<patch_size>]`, `external:<command>`.
impl FromStr for Prox {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let bad = || Error::InvalidConfig(format!("cannot parse prior `{s}`"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let prox = match kind {
            "none" if args.is_empty() => Self::None,
            "l1" => Self::L1 { lambda: num(args)? },
            "tv" => Self::Tv { lambda: num(args)? },
            "nlm" => {
                let parts: Vec<&str> = args.split(',').collect();
                if !(parts.len() == 3 || parts.len() == 4) {
                    return Err(bad());
                }
                let int = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
                Self::Nlm(NlmParams {
                    sigma: num(parts[0])?,
                    patch_distance: int(parts[1])?,
                    cutoff: num(parts[2])?,
                    patch_size: parts.get(3).map(|t| int(t)).transpose()?.unwrap_or(7),
                })
            }
            "external" => Self::External {
                command: args.to_string(),
            },
            _ => return Err(bad()),
        };
        prox.validate()?;
        Ok(prox)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Shape;

    #[test]
    fn soft_threshold_closed_form() {
        assert_eq!(soft_threshold(&[3.0, -0.5, 0.2], 1.0), vec![2.0, 0.0, 0.0]);
        assert_eq!(soft_threshold(&[3.0, -0.5], 0.0), vec![3.0, -0.5]);
        assert_eq!(soft_threshold(&[-3.0], 1.0), vec![-2.0]);
    }

    #[test]
    fn soft_threshold_minimizes_scalar_objective_on_grid() {
        for &(v, lam) in &[(0.7, 0.3), (-1.2, 0.5), (0.1, 0.4), (2.0, 0.0)] {
            let got = soft_threshold(&[v], lam)[0];
            let obj = |y: f64| 0.5 * (y - v) * (y - v) + lam * y.abs();
            let best = (-30_000..=30_000)
                .map(|i| i as f64 * 1e-4)
                .min_by(|a, b| obj(*a).total_cmp(&obj(*b)))
                .unwrap();
            assert!((got - best).abs() <= 1e-4, "v={v} lam={lam}: {got} vs grid {best}");
            assert!(obj(got) <= obj(best) + 1e-12);
        }
    }

    #[test]
    fn parse_and_display_roundtrip() {
        for s in ["none", "l1:0.5", "tv:0.01", "nlm:0.01,2,0.05,7", "external:bm3d --sigma 0.05"] {
            let p: Prox = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert_eq!(
            "nlm:0.01,2,0.05".parse::<Prox>().unwrap(),
            Prox::Nlm(NlmParams::default())
        );
        assert!("tv:-1".parse::<Prox>().is_err());
        assert!("bogus".parse::<Prox>().is_err());
        assert!("external:".parse::<Prox>().is_err());
    }

    #[test]
    fn red_gradient_of_identity_is_zero() {
        let x = ImageTensor::new(Shape::new(2, 2, 1), vec![0.1, 0.5, 0.9, 0.3]).unwrap();
        let g = red_gradient(&x, &Prox::None).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn red_gradient_vanishes_on_constants_under_nlm() {
        let x = ImageTensor::filled(Shape::new(8, 8, 3), 0.6);
        let g = red_gradient(&x, &Prox::Nlm(NlmParams::default())).unwrap();
        assert!(g.as_slice().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn values() {
        let x = ImageTensor::new(Shape::new(2, 2, 1), vec![1.0, 2.0, 3.0, -4.0]).unwrap();
        assert_eq!(Prox::L1 { lambda: 0.5 }.value(&x), Some(5.0));
        assert_eq!(Prox::None.value(&x), Some(0.0));
        assert_eq!(Prox::Nlm(NlmParams::default()).value(&x), None);
    }
}
