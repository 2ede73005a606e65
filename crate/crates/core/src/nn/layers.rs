//! Layer kernels on channel-major feature maps.
//!
//! Each layer has three rules: `forward` (records what the backward pass
//! needs), `backward` (vector-Jacobian product), and `tangent` (Jacobian-vector
//! product). Convolutions lower to GEMM through an im2col buffer with reflect
//! padding.

use crate::linalg::{gemm, MatRef};

/// A `c x h x w` activation, stored plane by plane.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
}

/// Reflect an out-of-range index back into `0..n` (edge not repeated).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let mut i = i;
    // Padding never exceeds n - 1 for the sizes we accept, but fold anyway.
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

/// Geometry of one convolution layer and where its weights sit in theta.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    /// Offset of the `out x in x k x k` weight block; biases follow it.
    pub offset: usize,
}

impl ConvSpec {
    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.fan_in()
    }

    pub fn param_len(&self) -> usize {
        self.weight_len() + self.out_channels
    }

    pub fn output_size(&self, height: usize, width: usize) -> (usize, usize) {
        let pad = self.kernel / 2;
        (
            (height + 2 * pad - self.kernel) / self.stride + 1,
            (width + 2 * pad - self.kernel) / self.stride + 1,
        )
    }

    fn weights<'a>(&self, theta: &'a [f64]) -> &'a [f64] {
        &theta[self.offset..self.offset + self.weight_len()]
    }

    fn bias<'a>(&self, theta: &'a [f64]) -> &'a [f64] {
        let start = self.offset + self.weight_len();
        &theta[start..start + self.out_channels]
    }

    /// Source row/column for every (kernel tap, output position) pair.
    fn taps(&self, n_in: usize, n_out: usize) -> Vec<usize> {
        let pad = (self.kernel / 2) as isize;
        let mut t = Vec::with_capacity(self.kernel * n_out);
        for k in 0..self.kernel as isize {
            for o in 0..n_out as isize {
                t.push(reflect(o * self.stride as isize + k - pad, n_in));
            }
        }
        t
    }

    /// Unfold `input` into a `(in*k*k) x (oh*ow)` matrix.
    pub fn im2col(&self, input: &FeatureMap) -> (Vec<f64>, usize, usize) {
        let (oh, ow) = self.output_size(input.height, input.width);
        let k = self.kernel;
        let ty = self.taps(input.height, oh);
        let tx = self.taps(input.width, ow);
        let p = oh * ow;
        let mut cols = vec![0.0; self.fan_in() * p];
        let plane = input.pixels();
        for ci in 0..self.in_channels {
            let src = &input.data[ci * plane..(ci + 1) * plane];
            for ky in 0..k {
                let rows = &ty[ky * oh..(ky + 1) * oh];
                for kx in 0..k {
                    let cidx = &tx[kx * ow..(kx + 1) * ow];
                    let r = (ci * k + ky) * k + kx;
                    let dst = &mut cols[r * p..(r + 1) * p];
                    for (oy, &iy) in rows.iter().enumerate() {
                        let line = &src[iy * input.width..(iy + 1) * input.width];
                        let out = &mut dst[oy * ow..(oy + 1) * ow];
                        for (o, &ix) in out.iter_mut().zip(cidx) {
                            *o = line[ix];
                        }
                    }
                }
            }
        }
        (cols, oh, ow)
    }

    /// Adjoint of [`Self::im2col`]: scatter-add columns back onto the input grid.
    fn col2im(&self, cols: &[f64], height: usize, width: usize, oh: usize, ow: usize) -> FeatureMap {
        let k = self.kernel;
        let ty = self.taps(height, oh);
        let tx = self.taps(width, ow);
        let p = oh * ow;
        let mut out = FeatureMap::zeros(self.in_channels, height, width);
        let plane = height * width;
        for ci in 0..self.in_channels {
            let dst = &mut out.data[ci * plane..(ci + 1) * plane];
            for ky in 0..k {
                let rows = &ty[ky * oh..(ky + 1) * oh];
                for kx in 0..k {
                    let cidx = &tx[kx * ow..(kx + 1) * ow];
                    let r = (ci * k + ky) * k + kx;
                    let src = &cols[r * p..(r + 1) * p];
                    for (oy, &iy) in rows.iter().enumerate() {
                        let line = &mut dst[iy * width..(iy + 1) * width];
                        for (v, &ix) in src[oy * ow..(oy + 1) * ow].iter().zip(cidx) {
                            line[ix] += v;
                        }
                    }
                }
            }
        }
        out
    }

    /// Returns the output and the im2col buffer the backward pass needs.
    pub fn forward(&self, theta: &[f64], input: &FeatureMap) -> (FeatureMap, Vec<f64>) {
        let (cols, oh, ow) = self.im2col(input);
        let out = self.apply_cols(theta, &cols, oh, ow, true);
        (out, cols)
    }

    fn apply_cols(&self, theta: &[f64], cols: &[f64], oh: usize, ow: usize, with_bias: bool) -> FeatureMap {
        let p = oh * ow;
        let mut out = FeatureMap::zeros(self.out_channels, oh, ow);
        gemm(
            MatRef::new(self.weights(theta), self.out_channels, self.fan_in()),
            MatRef::new(cols, self.fan_in(), p),
            0.0,
            &mut out.data,
        );
        if with_bias {
            for (row, &b) in out.data.chunks_mut(p).zip(self.bias(theta)) {
                row.iter_mut().for_each(|v| *v += b);
            }
        }
        out
    }

    /// Writes this layer's parameter gradient into `grad` and returns the
    /// input gradient when `need_input` is set.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        theta: &[f64],
        cols: &[f64],
        in_height: usize,
        in_width: usize,
        dout: &FeatureMap,
        grad: &mut [f64],
        need_input: bool,
    ) -> Option<FeatureMap> {
        let p = dout.pixels();
        let (wl, k) = (self.weight_len(), self.fan_in());
        let (gw, gb) = grad[self.offset..self.offset + self.param_len()].split_at_mut(wl);
        gemm(
            MatRef::new(&dout.data, self.out_channels, p),
            MatRef::new(cols, k, p).t(),
            0.0,
            gw,
        );
        for (b, row) in gb.iter_mut().zip(dout.data.chunks(p)) {
            *b = row.iter().sum();
        }
        need_input.then(|| {
            let mut dcols = vec![0.0; k * p];
            gemm(
                MatRef::new(self.weights(theta), self.out_channels, k).t(),
                MatRef::new(&dout.data, self.out_channels, p),
                0.0,
                &mut dcols,
            );
            self.col2im(&dcols, in_height, in_width, dout.height, dout.width)
        })
    }

    /// Tangent of the output given input tangent `din` (absent for the
    /// constant latent input) and parameter tangent `dtheta`.
    pub fn tangent(
        &self,
        theta: &[f64],
        cols: &[f64],
        din: Option<&FeatureMap>,
        dtheta: &[f64],
        oh: usize,
        ow: usize,
    ) -> FeatureMap {
        let mut out = self.apply_cols(dtheta, cols, oh, ow, true);
        if let Some(din) = din {
            let (dcols, _, _) = self.im2col(din);
            gemm(
                MatRef::new(self.weights(theta), self.out_channels, self.fan_in()),
                MatRef::new(&dcols, self.fan_in(), oh * ow),
                1.0,
                &mut out.data,
            );
        }
        out
    }
}

/// Interpolation taps for 2x bilinear upsampling with half-pixel centers
/// (source coordinate `(o + 0.5) / 2 - 0.5`, clamped at the borders).
fn upsample_taps(n: usize) -> Vec<(usize, usize, f64, f64)> {
    (0..2 * n)
        .map(|o| {
            let src = ((o as f64 + 0.5) / 2.0 - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(n - 1);
            let i1 = (i0 + 1).min(n - 1);
            let frac = src - i0 as f64;
            (i0, i1, 1.0 - frac, frac)
        })
        .collect()
}

/// 2x bilinear upsampling; linear, so it doubles as its own tangent rule.
pub fn upsample2x(input: &FeatureMap) -> FeatureMap {
    let (h, w) = (input.height, input.width);
    let (oh, ow) = (2 * h, 2 * w);
    let tx = upsample_taps(w);
    let ty = upsample_taps(h);
    let mut out = FeatureMap::zeros(input.channels, oh, ow);
    let mut rows = vec![0.0; h * ow];
    for c in 0..input.channels {
        let src = &input.data[c * h * w..(c + 1) * h * w];
        for y in 0..h {
            let line = &src[y * w..(y + 1) * w];
            for (ox, &(i0, i1, w0, w1)) in tx.iter().enumerate() {
                rows[y * ow + ox] = w0 * line[i0] + w1 * line[i1];
            }
        }
        let dst = &mut out.data[c * oh * ow..(c + 1) * oh * ow];
        for (oy, &(i0, i1, w0, w1)) in ty.iter().enumerate() {
            let (r0, r1) = (&rows[i0 * ow..(i0 + 1) * ow], &rows[i1 * ow..(i1 + 1) * ow]);
            for ((d, a), b) in dst[oy * ow..(oy + 1) * ow].iter_mut().zip(r0).zip(r1) {
                *d = w0 * a + w1 * b;
            }
        }
    }
    out
}

/// Adjoint of [`upsample2x`].
pub fn upsample2x_adjoint(dout: &FeatureMap) -> FeatureMap {
    let (oh, ow) = (dout.height, dout.width);
    let (h, w) = (oh / 2, ow / 2);
    let tx = upsample_taps(w);
    let ty = upsample_taps(h);
    let mut out = FeatureMap::zeros(dout.channels, h, w);
    let mut rows = vec![0.0; h * ow];
    for c in 0..dout.channels {
        rows.iter_mut().for_each(|v| *v = 0.0);
        let src = &dout.data[c * oh * ow..(c + 1) * oh * ow];
        for (oy, &(i0, i1, w0, w1)) in ty.iter().enumerate() {
            let line = &src[oy * ow..(oy + 1) * ow];
            for (ox, &g) in line.iter().enumerate() {
                rows[i0 * ow + ox] += w0 * g;
                rows[i1 * ow + ox] += w1 * g;
            }
        }
        let dst = &mut out.data[c * h * w..(c + 1) * h * w];
        for y in 0..h {
            let line = &rows[y * ow..(y + 1) * ow];
            let drow = &mut dst[y * w..(y + 1) * w];
            for (&g, &(i0, i1, w0, w1)) in line.iter().zip(&tx) {
                drow[i0] += w0 * g;
                drow[i1] += w1 * g;
            }
        }
    }
    out
}

/// Per-element slope of the leaky ReLU at the recorded input.
pub fn leaky_relu(input: &mut FeatureMap, slope: f64) -> Vec<f64> {
    input
        .data
        .iter_mut()
        .map(|v| {
            if *v > 0.0 {
                1.0
            } else {
                *v *= slope;
                slope
            }
        })
        .collect()
}

pub fn scale_by(map: &mut FeatureMap, factors: &[f64]) {
    for (v, f) in map.data.iter_mut().zip(factors) {
        *v *= f;
    }
}

pub fn sigmoid(input: &mut FeatureMap) {
    for v in &mut input.data {
        *v = 1.0 / (1.0 + (-*v).exp());
    }
}

/// Derivative factors `s (1 - s)` from sigmoid outputs.
pub fn sigmoid_slopes(output: &FeatureMap) -> Vec<f64> {
    output.data.iter().map(|s| s * (1.0 - s)).collect()
}
