use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// Spatial and channel extent of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    pub const fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn pixels(&self) -> usize {
        self.height * self.width
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// An `H x W x C` image of real values stored row-major as `(h, w, c)`.
///
/// The canonical intensity range is `[0, 1]`, but nothing clamps to it:
/// residuals and dual variables live in the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values for {shape}", shape.len()),
                actual: format!("{} values", data.len()),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("image contains NaN or Inf".into()));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    /// Build from channel-major planes (`c, h, w`).
    pub fn from_planar(shape: Shape, planes: &[f64]) -> Self {
        assert_eq!(planes.len(), shape.len());
        let (hw, c) = (shape.pixels(), shape.channels);
        let mut data = vec![0.0; shape.len()];
        for ch in 0..c {
            for p in 0..hw {
                data[p * c + ch] = planes[ch * hw + p];
            }
        }
        Self { shape, data }
    }

    /// Channel-major copy (`c, h, w`).
    pub fn to_planar(&self) -> Vec<f64> {
        let (hw, c) = (self.shape.pixels(), self.shape.channels);
        let mut planes = vec![0.0; self.data.len()];
        for ch in 0..c {
            for p in 0..hw {
                planes[ch * hw + p] = self.data[p * c + ch];
            }
        }
        planes
    }

    /// One channel as a contiguous `h x w` plane.
    pub fn channel(&self, ch: usize) -> Vec<f64> {
        let c = self.shape.channels;
        self.data.iter().skip(ch).step_by(c).copied().collect()
    }

    pub fn set_channel(&mut self, ch: usize, plane: &[f64]) {
        let c = self.shape.channels;
        for (dst, src) in self.data.iter_mut().skip(ch).step_by(c).zip(plane) {
            *dst = *src;
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }
    pub fn height(&self) -> usize {
        self.shape.height
    }
    pub fn width(&self) -> usize {
        self.shape.width
    }
    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.shape.width + x) * self.shape.channels + c]
    }

    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        let idx = (y * self.shape.width + x) * self.shape.channels + c;
        self.data[idx] = v;
    }

    /// Same shape, new contents.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.shape, data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape == other.shape {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: self.shape.to_string(),
                actual: other.shape.to_string(),
            })
        }
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn clamp01(&self) -> Self {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    /// Read an 8-bit PNG into `[0, 1]`. Gray images get one channel, color
    /// images three (alpha is dropped).
    pub fn read_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = ::image::open(path.as_ref())?;
        let (channels, raw, w, h) = if img.color().has_color() {
            let rgb = img.to_rgb8();
            let (w, h) = rgb.dimensions();
            (3, rgb.into_raw(), w, h)
        } else {
            let gray = img.to_luma8();
            let (w, h) = gray.dimensions();
            (1, gray.into_raw(), w, h)
        };
        let data = raw.into_iter().map(|v| f64::from(v) / 255.0).collect();
        Self::new(Shape::new(h as usize, w as usize, channels), data)
    }

    /// Write as an 8-bit PNG, clamping to `[0, 1]` and rounding to the
    /// nearest level.
    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        let (w, h) = (self.shape.width as u32, self.shape.height as u32);
        let color = match self.shape.channels {
            1 => ::image::ExtendedColorType::L8,
            3 => ::image::ExtendedColorType::Rgb8,
            4 => ::image::ExtendedColorType::Rgba8,
            c => return Err(Error::Unsupported(format!("PNG with {c} channels"))),
        };
        ::image::save_buffer_with_format(path.as_ref(), &bytes, w, h, color, ::image::ImageFormat::Png)?;
        Ok(())
    }
}
