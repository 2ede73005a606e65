//! Matrix-free `J J^T`, Lanczos and the linearized predictions against dense
//! linear algebra.

use dipadmm::image::{ImageTensor, Shape};
use dipadmm::linalg::{axpy, dot, max_abs_diff, norm};
use dipadmm::nn::{Generator, GeneratorConfig};
use dipadmm::rng::Stream;
use dipadmm::spectral::{
    bound_terms, jjt_topk, lanczos_topk, predict_residual, project, read_spectrum, write_spectrum, SpectralBasis,
};
use nalgebra::DMatrix;

mod common;
use common::{dense_eigen, dense_jjt};

fn generator(levels: &[usize], shape: Shape, seed: u64) -> Generator {
    let cfg = GeneratorConfig {
        level_channels: levels.to_vec(),
        input_channels: 3,
        seed,
        ..GeneratorConfig::default()
    };
    Generator::new(cfg, shape).unwrap()
}

#[test]
fn dense_assembly_matches_operator() {
    let g = generator(&[4], Shape::new(4, 4, 3), 1);
    let k = dense_jjt(&g);
    assert_eq!(k.nrows(), 48);
    let lin = g.linearize(g.theta0()).unwrap();
    let mut rng = Stream::new(10);
    for _ in 0..5 {
        let v = rng.gaussian_vec(48);
        let dense = &k * nalgebra::DVector::from_vec(v.clone());
        let ours = lin.jjt_apply(&v).unwrap();
        assert!(max_abs_diff(&ours, dense.as_slice()) <= 1e-10);
    }
    assert!(max_abs_diff(k.as_slice(), k.transpose().as_slice()) <= 1e-12);
}

#[test]
fn forward_mode_is_linear_and_shaped() {
    let shape = Shape::new(16, 16, 3);
    let g = generator(&[4], shape, 2);
    let lin = g.linearize(g.theta0()).unwrap();
    assert_eq!(lin.output_len(), shape.len());
    let zero = lin.jvp(&vec![0.0; lin.weight_count()]).unwrap();
    assert!(zero.iter().all(|&v| v == 0.0));
    let mut rng = Stream::new(20);
    let (a, b) = (rng.gaussian_vec(lin.weight_count()), rng.gaussian_vec(lin.weight_count()));
    let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - y).collect();
    let (ja, jb, js) = (lin.jvp(&a).unwrap(), lin.jvp(&b).unwrap(), lin.jvp(&sum).unwrap());
    let combo: Vec<f64> = ja.iter().zip(&jb).map(|(x, y)| 2.0 * x - y).collect();
    assert!(max_abs_diff(&js, &combo) <= 1e-10 * norm(&combo).max(1.0));
}

#[test]
fn lanczos_matches_dense_eigensolver() {
    let g = generator(&[4, 6], Shape::new(8, 8, 3), 3);
    let k = dense_jjt(&g);
    let (vals, _) = dense_eigen(&k);
    let basis = jjt_topk(&g, g.theta0(), 20, 0).unwrap();
    assert_eq!(basis.fingerprint.as_deref(), Some(g.fingerprint().as_str()));
    basis.check_orthonormal(1e-8, 1e-6).unwrap();
    for i in 0..20 {
        let rel = (basis.eigenvalues[i] - vals[i]).abs() / vals[i];
        assert!(rel <= 1e-6, "eigenvalue {i}: {} vs {}", basis.eigenvalues[i], vals[i]);
        let u = nalgebra::DVector::from_column_slice(basis.vector(i));
        let resid = (&k * &u - &u * basis.eigenvalues[i]).norm();
        assert!(resid <= 1e-6 * vals[0], "residual {i}: {resid:e}");
    }
}

#[test]
fn lanczos_eigenvalues_ignore_start_vector() {
    let g = generator(&[4, 6], Shape::new(8, 8, 3), 4);
    let a = jjt_topk(&g, g.theta0(), 12, 1).unwrap();
    let b = jjt_topk(&g, g.theta0(), 12, 99).unwrap();
    for i in 0..12 {
        let rel = (a.eigenvalues[i] - b.eigenvalues[i]).abs() / a.eigenvalues[i];
        assert!(rel <= 1e-8, "eigenvalue {i}: {rel:e}");
    }
    assert!(a.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    assert!(a.eigenvalues.iter().all(|&l| l >= 0.0));
}

#[test]
fn lanczos_on_explicit_matrix() {
    let n = 30;
    let mut rng = Stream::new(5);
    let m = DMatrix::from_fn(n, n, |_, _| rng.gaussian());
    let a = &m * m.transpose();
    let (vals, _) = dense_eigen(&a);
    let basis = lanczos_topk(
        |v| Ok((&a * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec()),
        n,
        n,
        7,
    )
    .unwrap();
    basis.check_orthonormal(1e-8, 1e-6).unwrap();
    for i in 0..n {
        assert!((basis.eigenvalues[i] - vals[i]).abs() <= 1e-8 * vals[0]);
    }
    // Projecting an eigenvector gives a unit coordinate.
    let c = project(&basis, basis.vector(4)).unwrap();
    for (j, cj) in c.iter().enumerate() {
        assert!((cj - if j == 4 { 1.0 } else { 0.0 }).abs() <= 1e-8);
    }
}

fn complete_basis(g: &Generator) -> SpectralBasis {
    let k = dense_jjt(g);
    let (vals, vecs) = dense_eigen(&k);
    let n = k.nrows();
    let mut flat = Vec::with_capacity(n * n);
    for c in 0..n {
        flat.extend(vecs.column(c).iter());
    }
    let vals = vals.into_iter().map(|v| v.max(0.0)).collect();
    SpectralBasis::new(n, vals, flat).unwrap().with_fingerprint(g.fingerprint())
}

#[test]
fn full_basis_prediction_is_the_linear_recursion() {
    let g = generator(&[4], Shape::new(4, 4, 3), 6);
    let basis = complete_basis(&g);
    let lin = g.linearize(g.theta0()).unwrap();
    let mut rng = Stream::new(60);
    let r0 = rng.gaussian_vec(basis.n);
    let eta = 0.9 / basis.eigenvalues[0];
    let mut r = r0.clone();
    for t in 0..=40u32 {
        let predicted = predict_residual(&basis, &r0, eta, t).unwrap();
        assert!(max_abs_diff(&predicted, &r) <= 1e-10 * norm(&r0), "t={t}");
        let kr = lin.jjt_apply(&r).unwrap();
        axpy(-eta, &kr, &mut r);
    }
    assert_eq!(predict_residual(&basis, &r0, 0.0, 17).unwrap(), r0);
}

#[test]
fn bound_terms_behave() {
    let shape = Shape::new(4, 4, 3);
    let g = generator(&[4], shape, 7);
    let basis = complete_basis(&g);
    let n = basis.n;
    let eta = 0.5 / basis.eigenvalues[0];
    let p = 10;
    let mut rng = Stream::new(70);
    // A signal inside the span of the top p directions.
    let mut x = vec![0.0; n];
    for i in 0..p {
        axpy(rng.gaussian(), basis.vector(i), &mut x);
    }
    let x = ImageTensor::new(shape, x).unwrap();
    let noise: Vec<f64> = rng.gaussian_vec(n).into_iter().map(|v| 0.1 * v).collect();

    let t0 = bound_terms(&basis, &g, g.theta0(), &x, &noise, eta, 0, p).unwrap();
    assert!(t0.noise.abs() <= 1e-12);
    assert!(t0.lhs <= t0.init + t0.signal + 1e-12);

    let mut last_signal = f64::INFINITY;
    for t in [1u32, 5, 20, 50, 100, 200] {
        let terms = bound_terms(&basis, &g, g.theta0(), &x, &noise, eta, t, p).unwrap();
        assert!(terms.lhs <= terms.rhs() * (1.0 + 1e-10), "t={t}: {terms:?}");
        assert!(terms.signal <= last_signal);
        last_signal = terms.signal;
    }
    assert!(bound_terms(&basis.truncated(n - 1).unwrap(), &g, g.theta0(), &x, &noise, eta, 1, p).is_err());
    assert!(bound_terms(&basis, &g, g.theta0(), &x, &noise, eta, 1, 0).is_err());
}

#[test]
fn spectrum_file_roundtrip_keeps_fingerprint() {
    let g = generator(&[4, 6], Shape::new(8, 8, 3), 8);
    let basis = jjt_topk(&g, g.theta0(), 6, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.bin");
    write_spectrum(&path, &basis).unwrap();
    let back = read_spectrum(&path).unwrap();
    assert_eq!(back, basis);
    // An eigenvector survives a trip through an image tensor unchanged.
    let u5 = ImageTensor::new(g.output_shape(), back.vector(5).to_vec()).unwrap();
    assert!((dot(u5.as_slice(), basis.vector(5)) - 1.0).abs() <= 1e-12);
}
