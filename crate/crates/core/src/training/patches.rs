//! 18×18 training windows and their padded-input / 14×14-target pairs.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::imaging::{bicubic_upscale_x2, GrayImage};
use crate::network::{NetworkSpec, PATCH_SIZE, TARGET_SIZE};
use crate::tensor::{crop, crop_center, zero_pad, Tensor};

pub const STRIDE_VERTICAL: usize = 2;
pub const STRIDE_HORIZONTAL: usize = 5;

/// One training sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchPair {
    /// LR window zero-padded to `18 + training_pad` on each axis.
    pub input: Tensor,
    /// Central 14×14 of the HR window.
    pub target: Tensor,
    pub source_id: String,
    /// Top-left `(row, col)` of the 18×18 window in the source image.
    pub origin: (usize, usize),
}

/// Result of [`extract_patch_pairs`]; `undersized` is set when the image
/// cannot hold a single 18×18 window.
#[derive(Clone, Debug, Default)]
pub struct PatchExtraction {
    pub pairs: Vec<PatchPair>,
    pub undersized: bool,
}

/// Top-left corners of every full window: rows 0, 2, 4, … and columns 0, 5, 10, ….
pub fn window_origins(height: usize, width: usize) -> Vec<(usize, usize)> {
    if height < PATCH_SIZE || width < PATCH_SIZE {
        return Vec::new();
    }
    let mut out = Vec::new();
    for r in (0..=height - PATCH_SIZE).step_by(STRIDE_VERTICAL) {
        for c in (0..=width - PATCH_SIZE).step_by(STRIDE_HORIZONTAL) {
            out.push((r, c));
        }
    }
    out
}

fn check_pair_shapes(hr: &Tensor, lr_upscaled: &Tensor) -> Result<()> {
    hr.ensure_same_shape(lr_upscaled, "HR and upscaled LR differ")?;
    if hr.channels() != 1 {
        return Err(Error::shape("training images must be single-channel"));
    }
    Ok(())
}

fn make_pair(
    hr: &Tensor,
    lr_upscaled: &Tensor,
    half_pad: usize,
    source_id: &str,
    origin: (usize, usize),
) -> Result<PatchPair> {
    let (r, c) = origin;
    let lr_win = crop(lr_upscaled, r, c, PATCH_SIZE, PATCH_SIZE)?;
    let hr_win = crop(hr, r, c, PATCH_SIZE, PATCH_SIZE)?;
    Ok(PatchPair {
        input: zero_pad(&lr_win, half_pad, half_pad, half_pad, half_pad),
        target: crop_center(&hr_win, TARGET_SIZE, TARGET_SIZE)?,
        source_id: source_id.to_string(),
        origin,
    })
}

pub fn extract_patch_pairs(
    hr: &Tensor,
    lr_upscaled: &Tensor,
    spec: &NetworkSpec,
    source_id: &str,
) -> Result<PatchExtraction> {
    check_pair_shapes(hr, lr_upscaled)?;
    let half_pad = spec.training_pad()? / 2;
    let origins = window_origins(hr.height(), hr.width());
    if origins.is_empty() {
        log::warn!(
            "image `{source_id}` is {}x{}, smaller than {PATCH_SIZE}x{PATCH_SIZE}; no patches extracted",
            hr.height(),
            hr.width()
        );
        return Ok(PatchExtraction { pairs: Vec::new(), undersized: true });
    }
    let pairs = origins
        .into_iter()
        .map(|o| make_pair(hr, lr_upscaled, half_pad, source_id, o))
        .collect::<Result<_>>()?;
    Ok(PatchExtraction { pairs, undersized: false })
}

/// An HR image and its bicubic ×2 LR partner, both as tensors of equal size.
#[derive(Clone, Debug)]
pub struct ImagePair {
    pub id: String,
    pub hr: Tensor,
    pub lr_upscaled: Tensor,
}

impl ImagePair {
    /// Upscales `lr` ×2; if the result differs in size from `hr` by rounding,
    /// both are cropped to the common top-left region.
    pub fn from_images(id: impl Into<String>, hr: &GrayImage, lr: &GrayImage) -> Result<Self> {
        let up = bicubic_upscale_x2(lr);
        let h = hr.height().min(up.height());
        let w = hr.width().min(up.width());
        Ok(ImagePair {
            id: id.into(),
            hr: hr.crop_to(h, w)?.to_tensor(),
            lr_upscaled: up.crop_to(h, w)?.to_tensor(),
        })
    }
}

/// Indexed access to training samples.
pub trait PatchSource {
    fn len(&self) -> usize;

    fn pair(&self, index: usize) -> Result<Cow<'_, PatchPair>>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl PatchSource for [PatchPair] {
    fn len(&self) -> usize {
        <[PatchPair]>::len(self)
    }

    fn pair(&self, index: usize) -> Result<Cow<'_, PatchPair>> {
        self.get(index)
            .map(Cow::Borrowed)
            .ok_or_else(|| Error::invalid(format!("patch index {index} out of range")))
    }
}

impl PatchSource for Vec<PatchPair> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn pair(&self, index: usize) -> Result<Cow<'_, PatchPair>> {
        self.as_slice().pair(index)
    }
}

/// Windows over a set of images, materialized on demand.
///
/// Holds only the images and the window list, so large corpora do not need
/// every padded patch in memory at once.
#[derive(Clone, Debug)]
pub struct WindowedImages {
    images: Vec<ImagePair>,
    windows: Vec<(usize, (usize, usize))>,
    half_pad: usize,
    skipped: Vec<String>,
}

impl WindowedImages {
    pub fn new(images: Vec<ImagePair>, spec: &NetworkSpec) -> Result<Self> {
        let half_pad = spec.training_pad()? / 2;
        let mut windows = Vec::new();
        let mut skipped = Vec::new();
        for (i, img) in images.iter().enumerate() {
            check_pair_shapes(&img.hr, &img.lr_upscaled)?;
            let origins = window_origins(img.hr.height(), img.hr.width());
            if origins.is_empty() {
                log::warn!("image `{}` is smaller than {PATCH_SIZE}x{PATCH_SIZE}; skipped", img.id);
                skipped.push(img.id.clone());
            }
            windows.extend(origins.into_iter().map(|o| (i, o)));
        }
        Ok(WindowedImages { images, windows, half_pad, skipped })
    }

    pub fn images(&self) -> &[ImagePair] {
        &self.images
    }

    /// Ids of images too small for any window.
    pub fn skipped(&self) -> &[String] {
        &self.skipped
    }
}

impl PatchSource for WindowedImages {
    fn len(&self) -> usize {
        self.windows.len()
    }

    fn pair(&self, index: usize) -> Result<Cow<'_, PatchPair>> {
        let &(img, origin) = self
            .windows
            .get(index)
            .ok_or_else(|| Error::invalid(format!("patch index {index} out of range")))?;
        let im = &self.images[img];
        make_pair(&im.hr, &im.lr_upscaled, self.half_pad, &im.id, origin).map(Cow::Owned)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::parse_spec;

    fn ramp(h: usize, w: usize) -> Tensor {
        Tensor::from_fn(1, h, w, |_, y, x| (y * w + x) as f64 / (h * w) as f64)
    }

    #[test]
    fn counts_for_small_images() {
        let spec = parse_spec("64(9)-32(7)-1(5)").unwrap();
        let one = extract_patch_pairs(&ramp(18, 18), &ramp(18, 18), &spec, "a").unwrap();
        assert_eq!(one.pairs.len(), 1);
        let six = extract_patch_pairs(&ramp(20, 28), &ramp(20, 28), &spec, "b").unwrap();
        assert_eq!(six.pairs.len(), 6);
        let none = extract_patch_pairs(&ramp(18, 17), &ramp(18, 17), &spec, "c").unwrap();
        assert!(none.pairs.is_empty() && none.undersized);
    }

    #[test]
    fn pair_contents() {
        let spec = parse_spec("64(9)-32(7)-1(5)").unwrap();
        let hr = ramp(22, 30);
        let lr = hr.map(|v| v * 0.5);
        let ex = extract_patch_pairs(&hr, &lr, &spec, "img").unwrap();
        let p = ex.pairs.iter().find(|p| p.origin == (2, 5)).unwrap();
        assert_eq!(p.input.shape(), (1, 32, 32));
        assert_eq!(p.target.shape(), (1, 14, 14));
        assert_eq!(p.target.get(0, 0, 0), hr.get(0, 4, 7));
        assert_eq!(p.input.get(0, 7, 7), lr.get(0, 2, 5));
        assert_eq!(p.input.get(0, 6, 7), 0.0);
        assert_eq!(p.source_id, "img");
    }

    #[test]
    fn rejects_mismatched_sizes() {
        let spec = parse_spec("8(5)-4(3)-1(3)").unwrap();
        assert!(extract_patch_pairs(&ramp(20, 20), &ramp(20, 21), &spec, "x").is_err());
    }

    #[test]
    fn windowed_source_matches_eager_extraction() {
        let spec = parse_spec("8(5)-4(3)-1(3)").unwrap();
        let images = vec![
            ImagePair { id: "a".into(), hr: ramp(20, 28), lr_upscaled: ramp(20, 28).map(|v| v * 0.9) },
            ImagePair { id: "b".into(), hr: ramp(10, 40), lr_upscaled: ramp(10, 40) },
            ImagePair { id: "c".into(), hr: ramp(24, 24), lr_upscaled: ramp(24, 24).map(|v| 1.0 - v) },
        ];
        let src = WindowedImages::new(images.clone(), &spec).unwrap();
        let mut eager = Vec::new();
        for im in &images {
            eager.extend(extract_patch_pairs(&im.hr, &im.lr_upscaled, &spec, &im.id).unwrap().pairs);
        }
        assert_eq!(src.len(), eager.len());
        assert_eq!(src.skipped(), ["b".to_string()]);
        for (i, p) in eager.iter().enumerate() {
            assert_eq!(src.pair(i).unwrap().as_ref(), p);
        }
    }
}
