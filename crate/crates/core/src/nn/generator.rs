//! The hourglass generator `G(theta)` and its derivatives.

use crate::error::{check_len, Error, Result};
use crate::image::{ImageTensor, Shape};
use crate::nn::layers::{self, ConvSpec, FeatureMap};
use crate::rng::Stream;

/// Architecture and seed of the generator.
///
/// Each level halves the resolution with a stride-2 convolution followed by a
/// stride-1 convolution; the decoder mirrors it with bilinear 2x upsampling and
/// one convolution per level. There are no skip connections and no
/// normalization layers. A 1x1 convolution and a sigmoid produce the image.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    /// Channels per level, shared by the encoder and decoder.
    pub level_channels: Vec<usize>,
    pub kernel_size: usize,
    pub input_channels: usize,
    pub leaky_slope: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            level_channels: vec![16, 32, 64, 128, 128],
            kernel_size: 3,
            input_channels: 32,
            leaky_slope: 0.1,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn levels(&self) -> usize {
        self.level_channels.len()
    }

    pub fn validate(&self, shape: Shape) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.level_channels.is_empty() {
            return bad("generator needs at least one level".into());
        }
        if self.level_channels.contains(&0) || self.input_channels == 0 {
            return bad("channel counts must be positive".into());
        }
        if self.kernel_size.is_multiple_of(2) {
            return bad(format!("kernel size {} is not odd", self.kernel_size));
        }
        if !(self.leaky_slope.is_finite()) {
            return bad("leaky slope must be finite".into());
        }
        if shape.channels == 0 {
            return bad("output needs at least one channel".into());
        }
        let step = 1usize << self.levels();
        if shape.height == 0 || shape.width == 0 || !shape.height.is_multiple_of(step) || !shape.width.is_multiple_of(step) {
            return bad(format!(
                "output size {}x{} must be a positive multiple of {step} for {} levels",
                shape.height,
                shape.width,
                self.levels()
            ));
        }
        Ok(())
    }

    /// Stable identifier of (architecture, output shape, seed).
    pub fn fingerprint(&self, shape: Shape) -> String {
        let canonical = format!(
            "levels={:?};kernel={};input={};slope={:e};shape={}",
            self.level_channels, self.kernel_size, self.input_channels, self.leaky_slope, shape
        );
        // FNV-1a, fixed so fingerprints survive toolchain changes.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in canonical.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}-seed{}", self.seed)
    }
}

#[derive(Debug, Clone)]
enum Layer {
    Conv(ConvSpec),
    LeakyRelu,
    Upsample,
    Sigmoid,
}

/// What the reverse and tangent passes need from one layer's forward pass.
#[derive(Debug)]
enum Record {
    Conv {
        cols: Vec<f64>,
        in_height: usize,
        in_width: usize,
        out_height: usize,
        out_width: usize,
    },
    Slopes(Vec<f64>),
    Upsample,
}

/// A randomly initialized generator with a fixed latent input.
#[derive(Debug, Clone)]
pub struct Generator {
    config: GeneratorConfig,
    shape: Shape,
    layers: Vec<Layer>,
    latent: FeatureMap,
    theta0: Vec<f64>,
    weight_count: usize,
}

impl Generator {
    /// Build the layer graph, draw the latent input and the initial weights.
    ///
    /// Weights and biases of a layer with fan-in `f` are uniform on
    /// `[-1/sqrt(f), 1/sqrt(f)]`; the latent input is standard normal. Both
    /// come from streams keyed by `config.seed`.
    pub fn new(config: GeneratorConfig, shape: Shape) -> Result<Self> {
        config.validate(shape)?;
        let k = config.kernel_size;
        let mut layers = Vec::new();
        let mut offset = 0;
        let mut conv = |layers: &mut Vec<Layer>, cin, cout, kernel, stride| {
            let spec = ConvSpec {
                in_channels: cin,
                out_channels: cout,
                kernel,
                stride,
                offset,
            };
            offset += spec.param_len();
            layers.push(Layer::Conv(spec));
        };

        let mut channels = config.input_channels;
        for &c in &config.level_channels {
            conv(&mut layers, channels, c, k, 2);
            layers.push(Layer::LeakyRelu);
            conv(&mut layers, c, c, k, 1);
            layers.push(Layer::LeakyRelu);
            channels = c;
        }
        for &c in config.level_channels.iter().rev() {
            layers.push(Layer::Upsample);
            conv(&mut layers, channels, c, k, 1);
            layers.push(Layer::LeakyRelu);
            channels = c;
        }
        conv(&mut layers, channels, shape.channels, 1, 1);
        layers.push(Layer::Sigmoid);
        let weight_count = offset;

        let mut latent_rng = Stream::new(config.seed);
        let latent = FeatureMap {
            channels: config.input_channels,
            height: shape.height,
            width: shape.width,
            data: latent_rng.gaussian_vec(config.input_channels * shape.pixels()),
        };

        let mut weight_rng = Stream::new(config.seed ^ 0x005e_ed0f_7e7a);
        let mut theta0 = vec![0.0; weight_count];
        for layer in &layers {
            if let Layer::Conv(spec) = layer {
                let a = (1.0 / spec.fan_in() as f64).sqrt();
                for w in &mut theta0[spec.offset..spec.offset + spec.param_len()] {
                    *w = weight_rng.symmetric(a);
                }
            }
        }

        Ok(Self {
            config,
            shape,
            layers,
            latent,
            theta0,
            weight_count,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn output_shape(&self) -> Shape {
        self.shape
    }

    /// Number of trainable parameters `w`.
    pub fn weight_count(&self) -> usize {
        self.weight_count
    }

    pub fn theta0(&self) -> &[f64] {
        &self.theta0
    }

    /// The latent input `z`, channel-major.
    pub fn latent(&self) -> &[f64] {
        &self.latent.data
    }

    pub fn fingerprint(&self) -> String {
        self.config.fingerprint(self.shape)
    }

    /// Index range of the final 1x1 layer's weights and biases within theta.
    pub fn output_layer_range(&self) -> std::ops::Range<usize> {
        self.convs()
            .last()
            .map(|s| s.offset..s.offset + s.param_len())
            .unwrap_or(0..0)
    }

    fn convs(&self) -> impl Iterator<Item = &ConvSpec> {
        self.layers.iter().filter_map(|l| match l {
            Layer::Conv(s) => Some(s),
            _ => None,
        })
    }

    /// `G(theta)`.
    pub fn forward(&self, theta: &[f64]) -> Result<ImageTensor> {
        Ok(self.linearize(theta)?.output)
    }

    /// Evaluate `G(theta)` and keep the tape for derivative products.
    pub fn linearize(&self, theta: &[f64]) -> Result<Linearization<'_>> {
        check_len(self.weight_count, theta.len())?;
        let mut records = Vec::with_capacity(self.layers.len());
        let mut act: Option<FeatureMap> = None;
        for layer in &self.layers {
            let input = act.as_ref().unwrap_or(&self.latent);
            let next = match layer {
                Layer::Conv(spec) => {
                    let (out, cols) = spec.forward(theta, input);
                    records.push(Record::Conv {
                        cols,
                        in_height: input.height,
                        in_width: input.width,
                        out_height: out.height,
                        out_width: out.width,
                    });
                    out
                }
                Layer::LeakyRelu => {
                    let mut out = act.take().expect("activation follows a layer");
                    records.push(Record::Slopes(layers::leaky_relu(&mut out, self.config.leaky_slope)));
                    out
                }
                Layer::Upsample => {
                    records.push(Record::Upsample);
                    layers::upsample2x(input)
                }
                Layer::Sigmoid => {
                    let mut out = act.take().expect("activation follows a layer");
                    layers::sigmoid(&mut out);
                    records.push(Record::Slopes(layers::sigmoid_slopes(&out)));
                    out
                }
            };
            act = Some(next);
        }
        let out = act.expect("generator has layers");
        if !out.data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("generator forward"));
        }
        Ok(Linearization {
            generator: self,
            theta: theta.to_vec(),
            records,
            output: ImageTensor::from_planar(self.shape, &out.data),
        })
    }

    /// `dL/dtheta` for a loss whose gradient with respect to `G(theta)` is `seed`.
    pub fn loss_grad(&self, theta: &[f64], seed: &ImageTensor) -> Result<Vec<f64>> {
        self.linearize(theta)?.vjp(seed.as_slice())
    }
}

/// `G` evaluated at a fixed `theta` together with its recorded tape.
///
/// Supports any number of vector-Jacobian and Jacobian-vector products at that
/// point without re-running the forward pass.
#[derive(Debug)]
pub struct Linearization<'a> {
    generator: &'a Generator,
    theta: Vec<f64>,
    records: Vec<Record>,
    output: ImageTensor,
}

impl Linearization<'_> {
    pub fn output(&self) -> &ImageTensor {
        &self.output
    }

    pub fn into_output(self) -> ImageTensor {
        self.output
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Output dimension `n`.
    pub fn output_len(&self) -> usize {
        self.output.len()
    }

    pub fn weight_count(&self) -> usize {
        self.generator.weight_count
    }

    /// `J^T v` for an output-space vector `v` in `(h, w, c)` order.
    pub fn vjp(&self, v: &[f64]) -> Result<Vec<f64>> {
        let shape = self.generator.shape;
        check_len(shape.len(), v.len())?;
        let seed = ImageTensor::new(shape, v.to_vec())?;
        let mut grad = vec![0.0; self.generator.weight_count];
        let mut g = FeatureMap {
            channels: shape.channels,
            height: shape.height,
            width: shape.width,
            data: seed.to_planar(),
        };
        for (i, (layer, record)) in self.generator.layers.iter().zip(&self.records).enumerate().rev() {
            g = match (layer, record) {
                (
                    Layer::Conv(spec),
                    Record::Conv {
                        cols,
                        in_height,
                        in_width,
                        ..
                    },
                ) => {
                    let need_input = i > 0;
                    match spec.backward(&self.theta, cols, *in_height, *in_width, &g, &mut grad, need_input) {
                        Some(d) => d,
                        None => break,
                    }
                }
                (Layer::LeakyRelu | Layer::Sigmoid, Record::Slopes(s)) => {
                    layers::scale_by(&mut g, s);
                    g
                }
                (Layer::Upsample, Record::Upsample) => layers::upsample2x_adjoint(&g),
                _ => unreachable!("tape out of sync with layers"),
            };
        }
        Ok(grad)
    }

    /// `J dtheta`, returned in `(h, w, c)` order.
    pub fn jvp(&self, dtheta: &[f64]) -> Result<Vec<f64>> {
        check_len(self.generator.weight_count, dtheta.len())?;
        let mut t: Option<FeatureMap> = None;
        for (layer, record) in self.generator.layers.iter().zip(&self.records) {
            let next = match (layer, record) {
                (
                    Layer::Conv(spec),
                    Record::Conv {
                        cols,
                        out_height,
                        out_width,
                        ..
                    },
                ) => spec.tangent(&self.theta, cols, t.as_ref(), dtheta, *out_height, *out_width),
                (Layer::LeakyRelu | Layer::Sigmoid, Record::Slopes(s)) => {
                    let mut d = t.take().expect("tangent follows a layer");
                    layers::scale_by(&mut d, s);
                    d
                }
                (Layer::Upsample, Record::Upsample) => layers::upsample2x(t.as_ref().expect("tangent follows a layer")),
                _ => unreachable!("tape out of sync with layers"),
            };
            t = Some(next);
        }
        let t = t.expect("generator has layers");
        Ok(ImageTensor::from_planar(self.generator.shape, &t.data).into_vec())
    }

    /// `J J^T v`.
    pub fn jjt_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.jvp(&self.vjp(v)?)
    }
}
