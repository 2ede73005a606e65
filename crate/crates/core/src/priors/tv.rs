//! Anisotropic total variation: norm and proximal operators.

use crate::image::ImageTensor;
use crate::linalg::max_abs_diff;

/// `sum |x[i,j] - x[i+1,j]| + |x[i,j] - x[i,j+1]|`, summed over channels.
pub fn tv_norm(x: &ImageTensor) -> f64 {
    let (h, w, c) = (x.height(), x.width(), x.channels());
    let d = x.as_slice();
    let mut total = 0.0;
    for i in 0..h {
        for j in 0..w {
            for ch in 0..c {
                let v = d[(i * w + j) * c + ch];
                if i + 1 < h {
                    total += (v - d[((i + 1) * w + j) * c + ch]).abs();
                }
                if j + 1 < w {
                    total += (v - d[(i * w + j + 1) * c + ch]).abs();
                }
            }
        }
    }
    total
}

/// `lam * sum |y[i+1] - y[i]|` for a 1D signal.
pub fn tv1d_norm(y: &[f64]) -> f64 {
    y.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Exact minimizer of `1/2 ||y - v||^2 + lam * sum |y[i+1] - y[i]|`.
///
/// Johnson's dynamic program: the derivative of each partial objective is a
/// piecewise linear function kept as knots with slope and offset increments,
/// and the solution is read back through the clipping thresholds. Linear
/// time, no iterations or tolerances.
pub fn prox_tv1d(v: &[f64], lam: f64) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    prox_tv1d_into(v, lam, &mut out);
    out
}

pub fn prox_tv1d_into(y: &[f64], lam: f64, out: &mut [f64]) {
    let n = y.len();
    debug_assert_eq!(n, out.len());
    if n == 0 {
        return;
    }
    if lam <= 0.0 || n == 1 {
        out.copy_from_slice(y);
        return;
    }
    // Knot positions with slope/offset increments, growing outwards from the
    // middle of a 2n buffer: l moves down by at most one per step, r up.
    let mut x = vec![0.0; 2 * n];
    let mut a = vec![0.0; 2 * n];
    let mut b = vec![0.0; 2 * n];
    let mut lo_knot = vec![0.0; n - 1];
    let mut hi_knot = vec![0.0; n - 1];

    lo_knot[0] = y[0] - lam;
    hi_knot[0] = y[0] + lam;
    let (mut l, mut r) = (n - 1, n);
    x[l] = lo_knot[0];
    x[r] = hi_knot[0];
    a[l] = 1.0;
    b[l] = lam - y[0];
    a[r] = -1.0;
    b[r] = y[0] + lam;
    let (mut afirst, mut bfirst) = (1.0, -lam - y[1]);
    let (mut alast, mut blast) = (-1.0, y[1] - lam);

    for k in 1..n - 1 {
        // Walk up from the left until the derivative exceeds -lam.
        let (mut alo, mut blo) = (afirst, bfirst);
        let mut lo = l;
        while lo <= r && alo * x[lo] + blo <= -lam {
            alo += a[lo];
            blo += b[lo];
            lo += 1;
        }
        lo_knot[k] = (-lam - blo) / alo;
        l = lo - 1;
        x[l] = lo_knot[k];

        // Walk down from the right until the derivative drops below lam.
        let (mut ahi, mut bhi) = (alast, blast);
        let mut hi = r as isize;
        while hi >= l as isize && -ahi * x[hi as usize] - bhi >= lam {
            ahi += a[hi as usize];
            bhi += b[hi as usize];
            hi -= 1;
        }
        hi_knot[k] = (lam + bhi) / -ahi;
        r = (hi + 1) as usize;
        x[r] = hi_knot[k];

        a[l] = alo;
        b[l] = blo + lam;
        a[r] = ahi;
        b[r] = bhi + lam;
        afirst = 1.0;
        bfirst = -lam - y[k + 1];
        alast = -1.0;
        blast = y[k + 1] - lam;
    }

    // The last value is where the full derivative crosses zero.
    let (mut alo, mut blo) = (afirst, bfirst);
    let mut lo = l;
    while lo <= r && alo * x[lo] + blo <= 0.0 {
        alo += a[lo];
        blo += b[lo];
        lo += 1;
    }
    out[n - 1] = -blo / alo;
    for k in (0..n - 1).rev() {
        let next = out[k + 1];
        out[k] = if next > hi_knot[k] {
            hi_knot[k]
        } else if next < lo_knot[k] {
            lo_knot[k]
        } else {
            next
        };
    }
}

/// Stopping rule for [`prox_tv2d_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvOptions {
    pub max_sweeps: usize,
    /// Stop once successive iterates differ by at most this in max-norm.
    pub tol: f64,
}

impl Default for TvOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 50,
            tol: 1e-6,
        }
    }
}

/// Approximate `argmin_y 1/2 ||y - x||^2 + lam ||y||_TV`, channel by channel.
pub fn prox_tv2d(x: &ImageTensor, lam: f64) -> ImageTensor {
    prox_tv2d_with(x, lam, TvOptions::default())
}

/// Row and column 1D proxes combined by the Dykstra-like splitting, which
/// converges to the prox of the sum rather than a composition of proxes.
pub fn prox_tv2d_with(x: &ImageTensor, lam: f64, opts: TvOptions) -> ImageTensor {
    if lam <= 0.0 {
        return x.clone();
    }
    let (h, w) = (x.height(), x.width());
    let mut out = x.clone();
    for ch in 0..x.channels() {
        let plane = x.channel(ch);
        let solved = dykstra_plane(&plane, h, w, lam, opts);
        out.set_channel(ch, &solved);
    }
    out
}

fn prox_rows(src: &[f64], w: usize, lam: f64, dst: &mut [f64]) {
    for (s, d) in src.chunks(w).zip(dst.chunks_mut(w)) {
        prox_tv1d_into(s, lam, d);
    }
}

fn prox_cols(src: &[f64], h: usize, w: usize, lam: f64, dst: &mut [f64], col_in: &mut [f64], col_out: &mut [f64]) {
    for j in 0..w {
        for i in 0..h {
            col_in[i] = src[i * w + j];
        }
        prox_tv1d_into(col_in, lam, col_out);
        for i in 0..h {
            dst[i * w + j] = col_out[i];
        }
    }
}

fn dykstra_plane(x: &[f64], h: usize, w: usize, lam: f64, opts: TvOptions) -> Vec<f64> {
    let n = h * w;
    let mut z = x.to_vec();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut next = vec![0.0; n];
    let (mut col_in, mut col_out) = (vec![0.0; h], vec![0.0; h]);
    for _ in 0..opts.max_sweeps {
        for i in 0..n {
            tmp[i] = z[i] + p[i];
        }
        prox_rows(&tmp, w, lam, &mut y);
        for i in 0..n {
            p[i] = tmp[i] - y[i];
            tmp[i] = y[i] + q[i];
        }
        prox_cols(&tmp, h, w, lam, &mut next, &mut col_in, &mut col_out);
        for i in 0..n {
            q[i] = tmp[i] - next[i];
        }
        let change = max_abs_diff(&next, &z);
        std::mem::swap(&mut z, &mut next);
        if change <= opts.tol {
            break;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Shape;

    #[test]
    fn tv_of_constant_is_zero() {
        let x = ImageTensor::filled(Shape::new(3, 4, 2), 0.3);
        assert_eq!(tv_norm(&x), 0.0);
    }

    #[test]
    fn tv_of_two_by_two() {
        let x = ImageTensor::new(Shape::new(2, 2, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(tv_norm(&x), 6.0);
        assert_eq!(tv_norm(&x.map(|v| -2.5 * v)), 15.0);
    }

    #[test]
    fn two_point_prox_moves_toward_mean() {
        let y = prox_tv1d(&[0.0, 1.0], 0.25);
        assert!((y[0] - 0.25).abs() < 1e-15 && (y[1] - 0.75).abs() < 1e-15, "{y:?}");
        // Large enough lam fuses to the mean.
        assert_eq!(prox_tv1d(&[0.0, 1.0], 0.6), vec![0.5, 0.5]);
    }

    #[test]
    fn constant_and_zero_lambda_are_fixed() {
        assert!(prox_tv1d(&[0.4; 5], 3.0).iter().all(|v| (v - 0.4).abs() < 1e-15));
        let v = [0.1, -2.0, 3.0];
        assert_eq!(prox_tv1d(&v, 0.0), v.to_vec());
        assert!(prox_tv1d(&[], 1.0).is_empty());
        let img = ImageTensor::new(Shape::new(2, 2, 1), vec![0.1, 0.9, 0.4, 0.2]).unwrap();
        assert_eq!(prox_tv2d(&img, 0.0), img);
        let flat = ImageTensor::filled(Shape::new(4, 5, 3), 0.7);
        assert!(crate::linalg::max_abs_diff(prox_tv2d(&flat, 0.3).as_slice(), flat.as_slice()) < 1e-15);
    }
}
