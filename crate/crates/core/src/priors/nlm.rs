//! Non-local means with a Gaussian-weighted patch distance.

use crate::error::{Error, Result};
use crate::image::ImageTensor;

/// Parameters of [`nlm_denoise`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlmParams {
    /// Expected noise standard deviation; `2 sigma^2` is discounted from
    /// every patch distance.
    pub sigma: f64,
    /// Search radius: candidates lie in a `(2d + 1)^2` window.
    pub patch_distance: usize,
    /// Cut-off distance `h` of the weight kernel `exp(-d^2 / h^2)`.
    pub cutoff: f64,
    /// Odd patch side length.
    pub patch_size: usize,
}

impl Default for NlmParams {
    fn default() -> Self {
        Self {
            sigma: 0.01,
            patch_distance: 2,
            cutoff: 0.05,
            patch_size: 7,
        }
    }
}

impl NlmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.cutoff > 0.0) || self.patch_distance == 0 {
            return Err(Error::InvalidArgument("NLM parameters must be positive".into()));
        }
        if self.patch_size.is_multiple_of(2) {
            return Err(Error::InvalidArgument("NLM patch size must be odd".into()));
        }
        Ok(())
    }

    pub fn patch_radius(&self) -> usize {
        self.patch_size / 2
    }

    /// Normalized separable Gaussian patch kernel, one axis.
    ///
    /// Width `(patch_size - 1) / 4`; the 2D kernel is the outer product.
    pub fn kernel_1d(&self) -> Vec<f64> {
        let r = self.patch_radius() as isize;
        let a = ((self.patch_size as f64 - 1.0) / 4.0).max(f64::MIN_POSITIVE);
        let g: Vec<f64> = (-r..=r)
            .map(|d| (-0.5 * (d * d) as f64 / (a * a)).exp())
            .collect();
        let s: f64 = g.iter().sum();
        g.into_iter().map(|v| v / s).collect()
    }

    /// Weight of a candidate at mean squared patch distance `d2`.
    pub fn weight(&self, d2: f64) -> f64 {
        let discounted = (d2 - 2.0 * self.sigma * self.sigma).max(0.0);
        (-discounted / (self.cutoff * self.cutoff)).exp()
    }
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    (if m >= n { period - m } else { m }) as usize
}

/// Denoise `x`; each output pixel is a convex combination of pixels in its
/// search window, weighted by patch similarity (patch differences are
/// averaged over channels). Borders are handled by reflection.
pub fn nlm_denoise(x: &ImageTensor, params: &NlmParams) -> Result<ImageTensor> {
    params.validate()?;
    let (h, w, c) = (x.height(), x.width(), x.channels());
    let s = params.patch_radius();
    let d = params.patch_distance;
    let pad = s + d;
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let src = x.as_slice();

    // Padded copy, planar.
    let mut padded = vec![0.0; c * ph * pw];
    for ch in 0..c {
        for py in 0..ph {
            let sy = reflect(py as isize - pad as isize, h);
            for px in 0..pw {
                let sx = reflect(px as isize - pad as isize, w);
                padded[(ch * ph + py) * pw + px] = src[(sy * w + sx) * c + ch];
            }
        }
    }

    let g = params.kernel_1d();
    // Region of the squared-difference map needed by the patch sums.
    let (rh, rw) = (h + 2 * s, w + 2 * s);
    let mut diff = vec![0.0; rh * rw];
    let mut rowsum = vec![0.0; rh * w];
    let mut acc = vec![0.0; h * w * c];
    let mut wsum = vec![0.0; h * w];
    let inv_c = 1.0 / c as f64;

    for oy in -(d as isize)..=d as isize {
        for ox in -(d as isize)..=d as isize {
            // diff[a][b] compares padded (a + d, b + d) with its shifted twin.
            for a in 0..rh {
                for b in 0..rw {
                    let (y0, x0) = (a + d, b + d);
                    let (y1, x1) = ((y0 as isize + oy) as usize, (x0 as isize + ox) as usize);
                    let mut sq = 0.0;
                    for ch in 0..c {
                        let base = ch * ph * pw;
                        let e = padded[base + y0 * pw + x0] - padded[base + y1 * pw + x1];
                        sq += e * e;
                    }
                    diff[a * rw + b] = sq * inv_c;
                }
            }
            // Separable Gaussian patch sum: along x, then along y.
            for a in 0..rh {
                for j in 0..w {
                    let line = &diff[a * rw + j..a * rw + j + g.len()];
                    rowsum[a * w + j] = line.iter().zip(&g).map(|(v, k)| v * k).sum();
                }
            }
            for i in 0..h {
                for j in 0..w {
                    let mut d2 = 0.0;
                    for (t, k) in g.iter().enumerate() {
                        d2 += k * rowsum[(i + t) * w + j];
                    }
                    let wt = params.weight(d2);
                    wsum[i * w + j] += wt;
                    let (ny, nx) = ((i + pad) as isize + oy, (j + pad) as isize + ox);
                    for ch in 0..c {
                        acc[(i * w + j) * c + ch] += wt * padded[(ch * ph + ny as usize) * pw + nx as usize];
                    }
                }
            }
        }
    }

    let out: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, v)| v / wsum[k / c])
        .collect();
    ImageTensor::new(x.shape(), out)
}
