//! Linear measurement operators `A` and the corruption model `b = A x + e`.

use crate::error::{check_len, Error, Result};
use crate::image::{ImageTensor, Shape};
use crate::linalg::{dot, norm};
use crate::rng::Stream;

/// A linear map with an adjoint, in flat-vector form.
pub trait LinearOperator {
    fn domain_len(&self) -> usize;
    fn range_len(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>>;
}

/// `||A^T A||` by power iteration, for operators without a closed form.
pub fn power_norm(op: &dyn LinearOperator, tol: f64, max_iter: usize) -> Result<f64> {
    let n = op.domain_len();
    if n == 0 {
        return Ok(0.0);
    }
    let mut rng = Stream::new(0x9e37_79b9);
    let mut v = rng.gaussian_vec(n);
    let s = norm(&v);
    v.iter_mut().for_each(|x| *x /= s);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = op.adjoint(&op.apply(&v)?)?;
        let next = dot(&v, &w);
        let nw = norm(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        v = w.into_iter().map(|x| x / nw).collect();
        let done = (next - lambda).abs() <= tol * next.abs().max(f64::MIN_POSITIVE);
        lambda = next;
        if done {
            break;
        }
    }
    Ok(lambda)
}

/// Identity or a coordinate-selection (truncated permutation) operator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeasurementOp {
    Identity { n: usize },
    /// Keeps the listed coordinates; `kept` is sorted and unique.
    Mask { n: usize, kept: Vec<usize> },
}

impl MeasurementOp {
    pub fn identity(n: usize) -> Self {
        Self::Identity { n }
    }

    pub fn mask(n: usize, kept: Vec<usize>) -> Result<Self> {
        if kept.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("mask indices must be sorted and unique".into()));
        }
        if kept.last().is_some_and(|&i| i >= n) {
            return Err(Error::InvalidArgument(format!("mask index out of range for n = {n}")));
        }
        Ok(Self::Mask { n, kept })
    }

    /// Keep `round(keep_fraction * pixels)` pixels chosen uniformly at random.
    /// All channels of a pixel are kept or dropped together.
    pub fn random_pixels(shape: Shape, keep_fraction: f64, seed: u64) -> Result<Self> {
        if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "keep fraction {keep_fraction} not in (0, 1]"
            )));
        }
        let pixels = shape.pixels();
        let keep = (keep_fraction * pixels as f64).round() as usize;
        if keep == 0 {
            return Err(Error::InvalidArgument("mask keeps no pixels".into()));
        }
        // Partial Fisher-Yates over pixel ids.
        let mut ids: Vec<usize> = (0..pixels).collect();
        let mut rng = Stream::new(seed);
        for i in 0..keep {
            let j = i + rng.below(pixels - i);
            ids.swap(i, j);
        }
        let mut chosen = ids[..keep].to_vec();
        chosen.sort_unstable();
        let c = shape.channels;
        let kept = chosen
            .into_iter()
            .flat_map(|p| (0..c).map(move |ch| p * c + ch))
            .collect();
        Self::mask(shape.len(), kept)
    }

    pub fn kept_indices(&self) -> Option<&[usize]> {
        match self {
            Self::Identity { .. } => None,
            Self::Mask { kept, .. } => Some(kept),
        }
    }

    /// Diagonal of `A^T A` (1 on kept coordinates, 0 elsewhere).
    pub fn gram_diagonal(&self) -> Vec<f64> {
        match self {
            Self::Identity { n } => vec![1.0; *n],
            Self::Mask { n, kept } => {
                let mut d = vec![0.0; *n];
                kept.iter().for_each(|&i| d[i] = 1.0);
                d
            }
        }
    }

    /// `||A^T A||`: exactly 1 for the identity and any nonempty mask.
    pub fn operator_norm(&self) -> f64 {
        match self {
            Self::Identity { n } => f64::from(u8::from(*n > 0)),
            Self::Mask { kept, .. } => f64::from(u8::from(!kept.is_empty())),
        }
    }

    /// `A^T A x`, i.e. zero-filling of the unobserved coordinates.
    pub fn gram(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.adjoint(&self.apply(x)?)
    }
}

impl LinearOperator for MeasurementOp {
    fn domain_len(&self) -> usize {
        match self {
            Self::Identity { n } | Self::Mask { n, .. } => *n,
        }
    }

    fn range_len(&self) -> usize {
        match self {
            Self::Identity { n } => *n,
            Self::Mask { kept, .. } => kept.len(),
        }
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.domain_len(), x.len())?;
        Ok(match self {
            Self::Identity { .. } => x.to_vec(),
            Self::Mask { kept, .. } => kept.iter().map(|&i| x[i]).collect(),
        })
    }

    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.range_len(), y.len())?;
        Ok(match self {
            Self::Identity { .. } => y.to_vec(),
            Self::Mask { n, kept } => {
                let mut x = vec![0.0; *n];
                for (&i, &v) in kept.iter().zip(y) {
                    x[i] = v;
                }
                x
            }
        })
    }
}

/// `v + sigma * g` with `g` standard normal from `seed`.
pub fn add_gaussian_noise(v: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise sigma {sigma} must be >= 0")));
    }
    if sigma == 0.0 {
        return Ok(v.to_vec());
    }
    let mut rng = Stream::new(seed);
    Ok(v.iter().map(|x| x + sigma * rng.gaussian()).collect())
}

/// Observed data `b` together with the operator that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub b: Vec<f64>,
    pub op: MeasurementOp,
    /// Noise standard deviation on the `[0, 1]` intensity scale.
    pub noise_sigma: f64,
    /// Shape of the unknown image.
    pub shape: Shape,
}

impl Measurement {
    pub fn new(b: Vec<f64>, op: MeasurementOp, noise_sigma: f64, shape: Shape) -> Result<Self> {
        check_len(shape.len(), op.domain_len())?;
        check_len(op.range_len(), b.len())?;
        if !b.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("measurement has non-finite entries".into()));
        }
        Ok(Self {
            b,
            op,
            noise_sigma,
            shape,
        })
    }

    /// Simulate `b = A x + sigma * g`.
    pub fn simulate(truth: &ImageTensor, op: MeasurementOp, noise_sigma: f64, seed: u64) -> Result<Self> {
        let clean = op.apply(truth.as_slice())?;
        let b = add_gaussian_noise(&clean, noise_sigma, seed)?;
        Self::new(b, op, noise_sigma, truth.shape())
    }

    /// `A^T b` as an image.
    pub fn zero_fill(&self) -> Result<ImageTensor> {
        ImageTensor::new(self.shape, self.op.adjoint(&self.b)?)
    }

    /// `1/2 ||b - A x||^2`.
    pub fn data_loss(&self, x: &[f64]) -> Result<f64> {
        let ax = self.op.apply(x)?;
        Ok(0.5 * ax.iter().zip(&self.b).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
    }

    /// `A^T (A x - b)`, the gradient of [`Self::data_loss`].
    pub fn data_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.op.apply(x)?;
        r.iter_mut().zip(&self.b).for_each(|(a, b)| *a -= b);
        self.op.adjoint(&r)
    }
}
