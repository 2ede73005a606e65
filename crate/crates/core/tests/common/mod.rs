//! Oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use dipadmm::image::ImageTensor;
use dipadmm::nn::Generator;
use dipadmm::priors::{tv1d_norm, tv_norm};
use nalgebra::{DMatrix, SymmetricEigen};

pub fn tv1d_objective(x: &[f64], v: &[f64], lam: f64) -> f64 {
    0.5 * x.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum::<f64>() + lam * tv1d_norm(x)
}

/// `min_{|z| <= lam} 1/2 ||v - D^T z||^2` by projected gradient; returns the
/// primal point `v - D^T z` and the dual objective value (a lower bound on
/// the primal optimum).
pub fn tv1d_dual(v: &[f64], lam: f64, iters: usize) -> (Vec<f64>, f64) {
    let n = v.len();
    let mut z = vec![0.0; n.saturating_sub(1)];
    let primal = |z: &[f64]| -> Vec<f64> {
        // D^T z where (D x)_i = x_{i+1} - x_i.
        let mut x = v.to_vec();
        for (i, zi) in z.iter().enumerate() {
            x[i] += zi;
            x[i + 1] -= zi;
        }
        x
    };
    for _ in 0..iters {
        let x = primal(&z);
        for i in 0..z.len() {
            // Gradient of the dual objective is -D x.
            z[i] = (z[i] + 0.25 * (x[i + 1] - x[i])).clamp(-lam, lam);
        }
    }
    let x = primal(&z);
    let dual = 0.5 * v.iter().map(|a| a * a).sum::<f64>() - 0.5 * x.iter().map(|a| a * a).sum::<f64>();
    (x, dual)
}

pub fn tv2d_objective(x: &ImageTensor, v: &ImageTensor, lam: f64) -> f64 {
    0.5 * x
        .as_slice()
        .iter()
        .zip(v.as_slice())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        + lam * tv_norm(x)
}

/// Anisotropic 2D TV prox through its dual (one box-constrained variable per
/// horizontal and vertical difference) by projected gradient, single channel.
pub fn tv2d_dual(v: &[f64], h: usize, w: usize, lam: f64, iters: usize) -> Vec<f64> {
    let mut zh = vec![0.0; h * (w - 1)];
    let mut zv = vec![0.0; (h - 1) * w];
    let primal = |zh: &[f64], zv: &[f64]| -> Vec<f64> {
        let mut x = v.to_vec();
        for i in 0..h {
            for j in 0..w - 1 {
                let z = zh[i * (w - 1) + j];
                x[i * w + j] += z;
                x[i * w + j + 1] -= z;
            }
        }
        for i in 0..h - 1 {
            for j in 0..w {
                let z = zv[i * w + j];
                x[i * w + j] += z;
                x[(i + 1) * w + j] -= z;
            }
        }
        x
    };
    // ||D D^T|| <= 8 for the 2D forward-difference operator.
    for _ in 0..iters {
        let x = primal(&zh, &zv);
        for i in 0..h {
            for j in 0..w - 1 {
                let k = i * (w - 1) + j;
                zh[k] = (zh[k] + 0.125 * (x[i * w + j + 1] - x[i * w + j])).clamp(-lam, lam);
            }
        }
        for i in 0..h - 1 {
            for j in 0..w {
                let k = i * w + j;
                zv[k] = (zv[k] + 0.125 * (x[(i + 1) * w + j] - x[i * w + j])).clamp(-lam, lam);
            }
        }
    }
    primal(&zh, &zv)
}

pub const FD_STEP: f64 = 1e-4;

/// Central difference of `1/2 ||G(theta + s d) - target||^2`, with the loss
/// difference formed per output so two large sums never cancel.
pub fn central(g: &Generator, shifted: impl Fn(f64) -> Vec<f64>, target: &[f64]) -> f64 {
    let p = g.forward(&shifted(FD_STEP)).unwrap();
    let m = g.forward(&shifted(-FD_STEP)).unwrap();
    p.as_slice()
        .iter()
        .zip(m.as_slice())
        .zip(target)
        .map(|((a, b), t)| 0.5 * (a - b) * (a + b - 2.0 * t))
        .sum::<f64>()
        / (2.0 * FD_STEP)
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// `J J^T` assembled from one reverse pass per output coordinate.
pub fn dense_jjt(g: &Generator) -> DMatrix<f64> {
    let lin = g.linearize(g.theta0()).unwrap();
    let (n, w) = (lin.output_len(), lin.weight_count());
    let mut j = DMatrix::zeros(n, w);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        for (c, v) in lin.vjp(&e).unwrap().into_iter().enumerate() {
            j[(i, c)] = v;
        }
    }
    &j * j.transpose()
}

/// Eigenpairs sorted by eigenvalue, largest first.
pub fn dense_eigen(k: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(k.clone());
    let mut order: Vec<usize> = (0..k.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(k.nrows(), k.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}
