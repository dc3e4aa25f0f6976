//! Grayscale images: PGM I/O, bicubic resampling, dataset manifests and the
//! synthetic text-strip generator.

mod dataset;
mod font;
mod pgm;
mod resample;
mod synth;

pub use dataset::{read_annotations, split_dataset, DatasetManifest, ManifestEntry, Split};
pub use pgm::{decode_pgm, encode_pgm, load_pgm, save_pgm};
pub use resample::{bicubic_downscale, bicubic_upscale_x2, keys_kernel, resize_bicubic, KEYS_A};
pub use synth::{
    generate_synthetic_corpus, generate_synthetic_images, render_text_strip, SynthConfig, SyntheticSample,
    SYNTH_ALPHABET,
};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A single-channel image with values in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::shape(format!("image dimensions must be >= 1, got {height}x{width}")));
        }
        if data.len() != height * width {
            return Err(Error::shape(format!(
                "{} values cannot fill a {height}x{width} image",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(GrayImage { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self::new(height, width, vec![value.clamp(0.0, 1.0); height * width]).expect("valid fill")
    }

    /// Builds an image from `f(row, col)`, clamping into `[0, 1]`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x).clamp(0.0, 1.0));
            }
        }
        Self::new(height, width, data).expect("valid image")
    }

    pub fn from_bytes(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(height, width, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }

    /// Quantizes to bytes with `round(v · 255)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8).collect()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(1, self.height, self.width, self.data.clone()).expect("image values are finite")
    }

    /// Takes channel 0 of `t`, clamping into `[0, 1]`.
    pub fn from_tensor(t: &Tensor) -> Self {
        GrayImage {
            height: t.height(),
            width: t.width(),
            data: t.plane(0).iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    /// Top-left `height × width` window.
    pub fn crop_to(&self, height: usize, width: usize) -> Result<Self> {
        if height > self.height || width > self.width || height == 0 || width == 0 {
            return Err(Error::shape(format!(
                "cannot crop {}x{} to {height}x{width}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            data.extend_from_slice(&self.data[y * self.width..y * self.width + width]);
        }
        Ok(GrayImage { height, width, data })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}
