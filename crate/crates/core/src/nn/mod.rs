//! Generator network, reverse/forward-mode derivatives and the Adam optimizer.

mod adam;
mod generator;
pub mod layers;

pub use adam::AdamState;
pub use generator::{Generator, GeneratorConfig, Linearization};

/// Build a generator for images of `shape`.
pub fn init_generator(config: GeneratorConfig, shape: crate::image::Shape) -> crate::Result<Generator> {
    Generator::new(config, shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{ImageTensor, Shape};
    use crate::linalg::{dot, sub};
    use crate::rng::Stream;

    fn tiny(levels: Vec<usize>, size: usize, seed: u64) -> Generator {
        let cfg = GeneratorConfig {
            level_channels: levels,
            input_channels: 4,
            seed,
            ..GeneratorConfig::default()
        };
        Generator::new(cfg, Shape::new(size, size, 3)).unwrap()
    }

    #[test]
    fn rejects_bad_configs() {
        let shape = Shape::new(16, 16, 3);
        let no_levels = GeneratorConfig {
            level_channels: vec![],
            ..GeneratorConfig::default()
        };
        assert!(Generator::new(no_levels, shape).is_err());
        let even = GeneratorConfig {
            kernel_size: 4,
            level_channels: vec![4],
            ..GeneratorConfig::default()
        };
        assert!(Generator::new(even, shape).is_err());
        // 5 levels need multiples of 32.
        assert!(Generator::new(GeneratorConfig::default(), Shape::new(48, 48, 3)).is_err());
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let a = tiny(vec![4, 8], 8, 11);
        let b = tiny(vec![4, 8], 8, 11);
        assert_eq!(a.theta0(), b.theta0());
        assert_eq!(a.latent(), b.latent());
        let c = tiny(vec![4, 8], 8, 12);
        assert_ne!(a.theta0(), c.theta0());
    }

    #[test]
    fn single_level_preserves_shape() {
        let g = tiny(vec![4], 16, 0);
        let out = g.forward(g.theta0()).unwrap();
        assert_eq!(out.shape(), Shape::new(16, 16, 3));
    }

    #[test]
    fn default_config_is_overparameterized() {
        let shape = Shape::new(128, 128, 3);
        let g = Generator::new(GeneratorConfig::default(), shape).unwrap();
        assert!(g.weight_count() > shape.len(), "w = {}", g.weight_count());
    }

    #[test]
    fn three_channel_latent_reproduces_reference_parameter_count() {
        // The reference network (3-channel input, 128x128x3 output) has 980787
        // parameters; with a 3-channel latent this architecture matches it.
        let cfg = GeneratorConfig {
            input_channels: 3,
            ..GeneratorConfig::default()
        };
        let g = Generator::new(cfg, Shape::new(128, 128, 3)).unwrap();
        assert_eq!(g.weight_count(), 980_787);
    }

    #[test]
    fn outputs_in_open_unit_interval_and_pure() {
        let g = tiny(vec![4, 8], 8, 3);
        let mut s = Stream::new(9);
        // Unit-variance weights saturate the sigmoid to exactly 1.0 in f64.
        let theta: Vec<f64> = s.gaussian_vec(g.weight_count()).iter().map(|v| 0.3 * v).collect();
        let a = g.forward(&theta).unwrap();
        assert!(a.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
        let b = g.forward(&theta).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_output_layer_gives_half() {
        let g = tiny(vec![4, 8], 8, 3);
        let mut theta = g.theta0().to_vec();
        for w in &mut theta[g.output_layer_range()] {
            *w = 0.0;
        }
        let out = g.forward(&theta).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn forward_length_mismatch() {
        let g = tiny(vec![4], 8, 0);
        assert!(g.forward(&[0.0; 3]).is_err());
    }

    #[test]
    fn zero_seed_zero_gradient() {
        let g = tiny(vec![4, 8], 8, 3);
        let grad = g
            .loss_grad(g.theta0(), &ImageTensor::zeros(g.output_shape()))
            .unwrap();
        assert!(grad.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn self_residual_has_zero_gradient() {
        let g = tiny(vec![4, 8], 8, 3);
        let out = g.forward(g.theta0()).unwrap();
        let residual = out.with_data(sub(out.as_slice(), out.as_slice())).unwrap();
        let grad = g.loss_grad(g.theta0(), &residual).unwrap();
        assert!(grad.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn jvp_vjp_adjoint() {
        let g = tiny(vec![4, 8], 8, 5);
        let lin = g.linearize(g.theta0()).unwrap();
        let mut s = Stream::new(2);
        let d = s.gaussian_vec(g.weight_count());
        let v = s.gaussian_vec(lin.output_len());
        let lhs = dot(&lin.jvp(&d).unwrap(), &v);
        let rhs = dot(&d, &lin.vjp(&v).unwrap());
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        assert!(lin.jvp(&vec![0.0; g.weight_count()]).unwrap().iter().all(|&x| x == 0.0));
    }
}
