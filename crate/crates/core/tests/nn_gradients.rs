//! Reverse- and forward-mode derivatives of the generator against central
//! finite differences in 64-bit arithmetic.

use dipadmm::image::{ImageTensor, Shape};
use dipadmm::linalg::{dot, norm};
use dipadmm::nn::{Generator, GeneratorConfig};
use dipadmm::rng::Stream;

mod common;
use common::{central, relative_error, FD_STEP as H};

fn two_level(seed: u64) -> Generator {
    let cfg = GeneratorConfig {
        level_channels: vec![4, 6],
        input_channels: 3,
        seed,
        ..GeneratorConfig::default()
    };
    Generator::new(cfg, Shape::new(8, 8, 3)).unwrap()
}

#[test]
fn gradient_matches_central_differences_on_random_coordinates() {
    let g = two_level(21);
    let mut rng = Stream::new(99);
    // Perturb away from the initialization so every layer carries signal.
    let theta: Vec<f64> = g.theta0().iter().map(|w| w + 0.05 * rng.gaussian()).collect();
    let target: Vec<f64> = (0..g.output_shape().len()).map(|_| rng.uniform()).collect();

    let out = g.forward(&theta).unwrap();
    let seed = out
        .with_data(out.as_slice().iter().zip(&target).map(|(a, b)| a - b).collect())
        .unwrap();
    let grad = g.loss_grad(&theta, &seed).unwrap();

    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let i = rng.below(theta.len());
        let shifted = |s: f64| {
            let mut t = theta.clone();
            t[i] += s;
            t
        };
        let fd = central(&g, shifted, &target);
        let err = relative_error(grad[i], fd);
        worst = worst.max(err);
        assert!(err <= 1e-5, "coordinate {i}: analytic {} vs fd {fd} (rel {err:e})", grad[i]);
    }
    eprintln!("worst coordinate relative error {worst:e}");
}

#[test]
fn directional_derivative_matches_for_random_directions() {
    let g = two_level(4);
    let mut rng = Stream::new(5);
    let theta = g.theta0().to_vec();
    let target: Vec<f64> = (0..g.output_shape().len()).map(|_| rng.uniform()).collect();
    let out = g.forward(&theta).unwrap();
    let seed = out
        .with_data(out.as_slice().iter().zip(&target).map(|(a, b)| a - b).collect())
        .unwrap();
    let grad = g.loss_grad(&theta, &seed).unwrap();
    for _ in 0..5 {
        let mut delta = rng.gaussian_vec(theta.len());
        let n = norm(&delta);
        delta.iter_mut().for_each(|d| *d /= n);
        let step = |s: f64| -> Vec<f64> { theta.iter().zip(&delta).map(|(t, d)| t + s * d).collect() };
        let fd = central(&g, step, &target);
        let an = dot(&grad, &delta);
        assert!(relative_error(an, fd) <= 1e-5, "{an} vs {fd}");
    }
}

#[test]
fn jvp_matches_central_differences() {
    let g = two_level(8);
    let mut rng = Stream::new(6);
    let theta = g.theta0().to_vec();
    let lin = g.linearize(&theta).unwrap();
    let delta = rng.gaussian_vec(theta.len());
    let jvp = lin.jvp(&delta).unwrap();
    let shifted = |s: f64| -> ImageTensor {
        let t: Vec<f64> = theta.iter().zip(&delta).map(|(a, d)| a + s * d).collect();
        g.forward(&t).unwrap()
    };
    let (p, m) = (shifted(H), shifted(-H));
    let fd: Vec<f64> = p
        .as_slice()
        .iter()
        .zip(m.as_slice())
        .map(|(a, b)| (a - b) / (2.0 * H))
        .collect();
    let diff: Vec<f64> = jvp.iter().zip(&fd).map(|(a, b)| a - b).collect();
    let rel = norm(&diff) / norm(&fd);
    assert!(rel <= 1e-5, "relative error {rel:e}");
}

#[test]
fn jjt_is_symmetric_psd() {
    let g = two_level(1);
    let lin = g.linearize(g.theta0()).unwrap();
    let mut rng = Stream::new(3);
    let n = lin.output_len();
    for _ in 0..3 {
        let a = rng.gaussian_vec(n);
        let b = rng.gaussian_vec(n);
        let ja = lin.jjt_apply(&a).unwrap();
        let jb = lin.jjt_apply(&b).unwrap();
        assert!(dot(&a, &ja) >= 0.0);
        let (x, y) = (dot(&a, &jb), dot(&ja, &b));
        assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0), "{x} vs {y}");
    }
}
