use crate::error::{Error, Result};
use crate::linalg::{dot, gemm, norm, MatRef};
use crate::rng::Stream;

use super::SpectralBasis;

/// Ritz pairs are accepted once `||A v - lambda v|| <= RESIDUAL_TOL * lambda_max`.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Iteration continues until this tighter residual is met (or steps run
/// out), so small eigenvalues come out with relative accuracy close to the
/// acceptance tolerance.
const TARGET_TOL: f64 = 1e-10;

/// Top-`k` eigenpairs of a symmetric positive semidefinite operator given
/// only through its action `v -> A v`.
///
/// Runs Lanczos with full reorthogonalization for at most `min(10 k, n)`
/// steps. When the Krylov space becomes invariant the recurrence is
/// restarted with a fresh random direction orthogonal to everything seen so
/// far, so repeated eigenvalues and the complete spectrum (`k = n`) are
/// reachable.
///
/// If fewer than `k` pairs meet the residual test in time, the error carries
/// the pairs that did.
pub fn lanczos_topk<F>(mut op: F, n: usize, k: usize, seed: u64) -> Result<SpectralBasis>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if k > n {
        return Err(Error::InvalidArgument(format!("asked for {k} eigenpairs of an order-{n} operator")));
    }
    if k == 0 {
        return SpectralBasis::new(n, Vec::new(), Vec::new());
    }
    let max_steps = (10 * k).min(n);
    let mut rng = Stream::new(seed);

    // Krylov basis, one row per step.
    let mut q: Vec<f64> = Vec::with_capacity(max_steps.min(4 * k + 16) * n);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();

    let mut v = fresh_direction(&mut rng, &q, n);
    let mut next_check = k.max(8).min(max_steps);
    let mut scale: f64 = 0.0;

    loop {
        let m = alpha.len();
        q.extend_from_slice(&v);
        let mut w = op(&v)?;
        crate::error::check_len(n, w.len())?;
        let a = dot(&w, &v);
        alpha.push(a);
        // Two passes of classical Gram-Schmidt against the whole basis.
        orthogonalize(&mut w, &q, m + 1, n);
        orthogonalize(&mut w, &q, m + 1, n);
        let b = norm(&w);
        scale = scale.max(a.abs() + b);
        let steps = m + 1;

        let invariant = b <= 1e-12 * scale.max(f64::MIN_POSITIVE);
        if steps == max_steps || steps >= next_check || invariant {
            let check = ritz_check(&alpha, &beta, b, k);
            if check.tight >= k || steps == max_steps {
                let basis = assemble(&q, steps, n, &check, k);
                if check.converged >= k {
                    return Ok(basis);
                }
                let converged = check.converged.min(k);
                return Err(Error::NotConverged {
                    requested: k,
                    converged,
                    iterations: steps,
                    partial: Box::new(basis.truncated(converged)?),
                });
            }
            next_check = (steps + (steps / 4).max(4)).min(max_steps);
        }

        if invariant {
            beta.push(0.0);
            v = fresh_direction(&mut rng, &q, n);
        } else {
            beta.push(b);
            v = w.into_iter().map(|x| x / b).collect();
        }
    }
}

/// `w -= Q^T (Q w)` for the first `rows` rows of `q`.
fn orthogonalize(w: &mut [f64], q: &[f64], rows: usize, n: usize) {
    let qm = MatRef::new(&q[..rows * n], rows, n);
    let mut h = vec![0.0; rows];
    gemm(qm, MatRef::new(w, n, 1), 0.0, &mut h);
    let mut proj = vec![0.0; n];
    gemm(qm.t(), MatRef::new(&h, rows, 1), 0.0, &mut proj);
    w.iter_mut().zip(&proj).for_each(|(a, p)| *a -= p);
}

fn fresh_direction(rng: &mut Stream, q: &[f64], n: usize) -> Vec<f64> {
    let rows = q.len() / n;
    loop {
        let mut v = rng.gaussian_vec(n);
        if rows > 0 {
            orthogonalize(&mut v, q, rows, n);
            orthogonalize(&mut v, q, rows, n);
        }
        let s = norm(&v);
        if s > 1e-8 {
            v.iter_mut().for_each(|x| *x /= s);
            return v;
        }
    }
}

struct RitzCheck {
    /// Eigenvalues of the tridiagonal matrix, descending.
    values: Vec<f64>,
    /// Matching eigenvectors, one row each.
    vectors: Vec<Vec<f64>>,
    /// Leading pairs (in descending order) that pass the residual test.
    converged: usize,
    /// Leading pairs that pass the target test.
    tight: usize,
}

fn ritz_check(alpha: &[f64], beta: &[f64], last_beta: f64, k: usize) -> RitzCheck {
    let m = alpha.len();
    let (values, vectors) = tridiagonal_eigen(alpha, &beta[..m - 1]);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let lambda_max = values[order[0]].abs().max(f64::MIN_POSITIVE);
    // Residual of a Ritz pair is |beta_m * (last entry of s_i)|.
    let residual = |i: usize| (last_beta * vectors[i * m + m - 1]).abs();
    let leading = |tol: f64| order.iter().take(k).take_while(|&&i| residual(i) <= tol * lambda_max).count();
    let converged = leading(RESIDUAL_TOL);
    let tight = leading(TARGET_TOL);
    RitzCheck {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: order.iter().map(|&i| vectors[i * m..(i + 1) * m].to_vec()).collect(),
        converged,
        tight,
    }
}

fn assemble(q: &[f64], m: usize, n: usize, check: &RitzCheck, k: usize) -> SpectralBasis {
    let k = k.min(m);
    let s: Vec<f64> = check.vectors[..k].iter().flatten().copied().collect();
    let mut vectors = vec![0.0; k * n];
    gemm(MatRef::new(&s, k, m), MatRef::new(&q[..m * n], m, n), 0.0, &mut vectors);
    for row in vectors.chunks_mut(n) {
        let s = norm(row);
        row.iter_mut().for_each(|x| *x /= s);
    }
    // The operator is PSD; tiny negative Ritz values are rounding.
    let eigenvalues = check.values[..k].iter().map(|&l| l.max(0.0)).collect();
    SpectralBasis {
        n,
        eigenvalues,
        vectors,
        fingerprint: None,
    }
}

/// Eigen-decomposition of the symmetric tridiagonal matrix with diagonal `d`
/// and off-diagonal `e` by implicit QL with Wilkinson shifts.
///
/// Returns unsorted eigenvalues and the eigenvectors as rows of an `m x m`
/// row-major matrix.
pub(crate) fn tridiagonal_eigen(d: &[f64], e: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = d.len();
    assert_eq!(e.len() + 1, m.max(1));
    let mut d = d.to_vec();
    let mut e: Vec<f64> = e.iter().copied().chain(std::iter::once(0.0)).collect();
    // Row i of z is the i-th eigenvector; rotations touch two rows at a time.
    let mut z = vec![0.0; m * m];
    for i in 0..m {
        z[i * m + i] = 1.0;
    }
    for l in 0..m {
        let mut iterations = 0;
        loop {
            let mut mm = l;
            while mm + 1 < m {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iterations += 1;
            assert!(iterations < 200, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[mm] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..mm).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let (lo, hi) = z.split_at_mut((i + 1) * m);
                let zi = &mut lo[i * m..];
                let zi1 = &mut hi[..m];
                for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                    let f = *b;
                    *b = s * *a + c * f;
                    *a = c * *a - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }
    (d, z)
}
