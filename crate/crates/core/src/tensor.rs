//! Dense `channels × height × width` storage and the elementwise / geometric
//! primitives (activation, padding, cropping) the network is built from.
//!
//! Data is row-major in `(channel, row, column)` order so that a row of a
//! single channel is a contiguous slice.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Tensor {
    /// Wraps `data` as a tensor, checking the length and that every value is finite.
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::shape(format!(
                "tensor dimensions must be >= 1, got {channels}x{height}x{width}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::shape(format!(
                "{} values cannot fill a {channels}x{height}x{width} tensor",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value {} at flat index {pos}",
                data[pos]
            )));
        }
        Ok(Tensor {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, 0.0)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Self {
        assert!(
            channels > 0 && height > 0 && width > 0,
            "tensor dimensions must be >= 1"
        );
        Tensor {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    /// Builds a tensor by evaluating `f(channel, row, col)` at every position.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut t = Self::zeros(channels, height, width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    t.data[(c * height + y) * width + x] = f(c, y, x);
                }
            }
        }
        t
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// `(channels, height, width)`
    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, value: f64) {
        self.data[(c * self.height + y) * self.width + x] = value;
    }

    /// One channel plane as a contiguous slice.
    #[inline]
    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn ensure_same_shape(&self, other: &Tensor, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{what}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }
}

/// The `n_out × n_in × f × f` weights and `n_out` biases of one convolutional layer.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    num_filters: usize,
    in_channels: usize,
    filter_size: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl FilterBank {
    pub fn new(
        num_filters: usize,
        in_channels: usize,
        filter_size: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self> {
        if num_filters == 0 || in_channels == 0 {
            return Err(Error::shape("filter bank needs at least one filter and one input channel"));
        }
        if filter_size == 0 || filter_size.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "filter size must be odd and >= 1, got {filter_size}"
            )));
        }
        let expected = num_filters * in_channels * filter_size * filter_size;
        if weights.len() != expected {
            return Err(Error::shape(format!(
                "expected {expected} weights, got {}",
                weights.len()
            )));
        }
        if biases.len() != num_filters {
            return Err(Error::shape(format!(
                "expected {num_filters} biases, got {}",
                biases.len()
            )));
        }
        if weights.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("filter bank contains a non-finite value"));
        }
        Ok(FilterBank {
            num_filters,
            in_channels,
            filter_size,
            weights,
            biases,
        })
    }

    pub fn zeros(num_filters: usize, in_channels: usize, filter_size: usize) -> Self {
        Self::new(
            num_filters,
            in_channels,
            filter_size,
            vec![0.0; num_filters * in_channels * filter_size * filter_size],
            vec![0.0; num_filters],
        )
        .expect("valid zero filter bank")
    }

    #[inline]
    pub fn num_filters(&self) -> usize {
        self.num_filters
    }

    #[inline]
    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    #[inline]
    pub fn filter_size(&self) -> usize {
        self.filter_size
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    #[inline]
    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    #[inline]
    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    #[inline]
    pub fn weight(&self, k: usize, c: usize, i: usize, j: usize) -> f64 {
        let f = self.filter_size;
        self.weights[((k * self.in_channels + c) * f + i) * f + j]
    }

    /// The `f × f` kernel connecting input channel `c` to output `k`.
    #[inline]
    pub fn kernel(&self, k: usize, c: usize) -> &[f64] {
        let ff = self.filter_size * self.filter_size;
        let start = (k * self.in_channels + c) * ff;
        &self.weights[start..start + ff]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub(crate) fn same_layout(&self, other: &FilterBank) -> bool {
        self.num_filters == other.num_filters
            && self.in_channels == other.in_channels
            && self.filter_size == other.filter_size
    }
}

/// Elementwise `max(0, x)`.
pub fn relu(t: &Tensor) -> Tensor {
    t.map(|v| if v > 0.0 { v } else { 0.0 })
}

pub(crate) fn relu_in_place(t: &mut Tensor) {
    for v in t.data_mut() {
        if *v <= 0.0 {
            *v = 0.0;
        }
    }
}

/// Passes `grad_out` through where `t > 0`; the derivative at exactly zero is taken as 0.
///
/// `t` may be either the pre- or post-activation values, since both are
/// positive at the same positions.
pub fn relu_backward(t: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    t.ensure_same_shape(grad_out, "relu_backward")?;
    let mut g = grad_out.clone();
    for (gv, &tv) in g.data_mut().iter_mut().zip(t.data()) {
        if tv <= 0.0 {
            *gv = 0.0;
        }
    }
    Ok(g)
}

pub fn zero_pad(t: &Tensor, top: usize, bottom: usize, left: usize, right: usize) -> Tensor {
    let (c, h, w) = t.shape();
    let oh = h + top + bottom;
    let ow = w + left + right;
    let mut out = Tensor::zeros(c, oh, ow);
    for ch in 0..c {
        let src = t.plane(ch);
        let dst = out.plane_mut(ch);
        for y in 0..h {
            let d = (y + top) * ow + left;
            dst[d..d + w].copy_from_slice(&src[y * w..(y + 1) * w]);
        }
    }
    out
}

/// Centered `out_h × out_w` window of every channel. Margins must be even.
pub fn crop_center(t: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (_, h, w) = t.shape();
    if out_h == 0 || out_w == 0 || out_h > h || out_w > w {
        return Err(Error::shape(format!(
            "cannot crop {h}x{w} to {out_h}x{out_w}"
        )));
    }
    if !(h - out_h).is_multiple_of(2) || !(w - out_w).is_multiple_of(2) {
        return Err(Error::shape(format!(
            "asymmetric crop {h}x{w} -> {out_h}x{out_w} (margins must be even)"
        )));
    }
    let top = (h - out_h) / 2;
    let left = (w - out_w) / 2;
    crop(t, top, left, out_h, out_w)
}

/// Window of every channel with top-left corner at `(top, left)`.
pub fn crop(t: &Tensor, top: usize, left: usize, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (c, h, w) = t.shape();
    if out_h == 0 || out_w == 0 || top + out_h > h || left + out_w > w {
        return Err(Error::shape(format!(
            "window {out_h}x{out_w} at ({top},{left}) exceeds {h}x{w}"
        )));
    }
    let mut out = Tensor::zeros(c, out_h, out_w);
    for ch in 0..c {
        let src = t.plane(ch);
        let dst = out.plane_mut(ch);
        for y in 0..out_h {
            let s = (top + y) * w + left;
            dst[y * out_w..(y + 1) * out_w].copy_from_slice(&src[s..s + out_w]);
        }
    }
    Ok(out)
}
