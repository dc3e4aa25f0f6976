//! Separable bicubic resampling with the Keys kernel (a = −0.5).
//!
//! Output pixel `o` samples the input at `(o + 0.5) / scale − 0.5`
//! (pixel centers aligned), taps falling outside the image are clamped to
//! the nearest edge pixel, and weights are normalized to sum to one. When
//! shrinking, the kernel is stretched by the reduction factor so that it
//! low-pass filters before decimation.

use super::GrayImage;
use crate::error::{Error, Result};

pub const KEYS_A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = −0.5`.
pub fn keys_kernel(x: f64) -> f64 {
    let a = KEYS_A;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// For each output index, the `(input index, weight)` taps.
fn axis_taps(in_len: usize, out_len: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = out_len as f64 / in_len as f64;
    let stretch = if scale < 1.0 { 1.0 / scale } else { 1.0 };
    let support = 2.0 * stretch;
    (0..out_len)
        .map(|o| {
            let center = (o as f64 + 0.5) / scale - 0.5;
            let first = (center - support).floor() as i64 + 1;
            let last = (center + support).ceil() as i64 - 1;
            let mut taps: Vec<(usize, f64)> = Vec::with_capacity((last - first + 1) as usize);
            let mut total = 0.0;
            for t in first..=last {
                let w = keys_kernel((center - t as f64) / stretch);
                if w == 0.0 {
                    continue;
                }
                let idx = t.clamp(0, in_len as i64 - 1) as usize;
                total += w;
                match taps.iter_mut().find(|(i, _)| *i == idx) {
                    Some(slot) => slot.1 += w,
                    None => taps.push((idx, w)),
                }
            }
            for tap in &mut taps {
                tap.1 /= total;
            }
            taps
        })
        .collect()
}

/// Resizes to `out_h × out_w`; results are clamped to `[0, 1]`.
pub fn resize_bicubic(img: &GrayImage, out_h: usize, out_w: usize) -> Result<GrayImage> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid("output dimensions must be >= 1"));
    }
    let (h, w) = (img.height(), img.width());
    let src = img.data();

    let xtaps = axis_taps(w, out_w);
    let mut rows = vec![0.0; h * out_w];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for (x, taps) in xtaps.iter().enumerate() {
            rows[y * out_w + x] = taps.iter().map(|&(i, k)| k * line[i]).sum();
        }
    }

    let ytaps = axis_taps(h, out_h);
    let mut out = vec![0.0; out_h * out_w];
    for (y, taps) in ytaps.iter().enumerate() {
        let dst = &mut out[y * out_w..(y + 1) * out_w];
        for &(i, k) in taps {
            for (d, s) in dst.iter_mut().zip(&rows[i * out_w..(i + 1) * out_w]) {
                *d += k * s;
            }
        }
    }
    for v in &mut out {
        *v = v.clamp(0.0, 1.0);
    }
    GrayImage::new(out_h, out_w, out)
}

pub fn bicubic_upscale_x2(img: &GrayImage) -> GrayImage {
    resize_bicubic(img, 2 * img.height(), 2 * img.width()).expect("non-empty output")
}

/// Shrinks by 2 or 4; both dimensions must be divisible by the factor.
pub fn bicubic_downscale(img: &GrayImage, factor: usize) -> Result<GrayImage> {
    if factor != 2 && factor != 4 {
        return Err(Error::invalid(format!("downscale factor must be 2 or 4, got {factor}")));
    }
    if !img.height().is_multiple_of(factor) || !img.width().is_multiple_of(factor) {
        return Err(Error::invalid(format!(
            "{}x{} is not divisible by {factor}",
            img.height(),
            img.width()
        )));
    }
    resize_bicubic(img, img.height() / factor, img.width() / factor)
}
