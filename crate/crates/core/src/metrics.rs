//! PSNR, RMSE and mean SSIM on single-channel images.
//!
//! Images are stored in `[0, 1]`; every metric is computed after scaling to
//! the 8-bit range `[0, 255]`.

use std::cmp::Ordering;
use std::fmt;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Multiplier from stored `[0, 1]` values to the 8-bit scale.
pub const PIXEL_SCALE: f64 = 255.0;
pub const DEFAULT_PEAK: f64 = 255.0;
/// Pixels removed from each side in [`BorderMode::Trim`].
pub const BORDER_TRIM: usize = 4;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BorderMode {
    /// Whole image (test-time convention).
    Keep,
    /// Drop a 4-pixel frame on every side (training-time convention).
    Trim,
}

impl BorderMode {
    pub fn margin(self) -> usize {
        match self {
            BorderMode::Keep => 0,
            BorderMode::Trim => BORDER_TRIM,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BorderMode::Keep => "keep",
            BorderMode::Trim => "trim4",
        }
    }
}

impl std::str::FromStr for BorderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keep" => Ok(BorderMode::Keep),
            "trim4" | "trim" => Ok(BorderMode::Trim),
            other => Err(Error::invalid(format!(
                "unknown border mode `{other}` (expected keep or trim4)"
            ))),
        }
    }
}

/// PSNR in dB, or the sentinel for identical images (reported as `inf`).
///
/// The sentinel compares greater than every finite value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Psnr {
    Db(f64),
    Identical,
}

impl Psnr {
    /// Finite stand-in for [`Psnr::Identical`] where a number is unavoidable (ensemble scores).
    pub const CAP_DB: f64 = 1000.0;

    pub fn db(self) -> Option<f64> {
        match self {
            Psnr::Db(v) => Some(v),
            Psnr::Identical => None,
        }
    }

    pub fn is_identical(self) -> bool {
        matches!(self, Psnr::Identical)
    }

    /// dB value with identical images mapped to [`Psnr::CAP_DB`].
    pub fn capped(self) -> f64 {
        match self {
            Psnr::Db(v) => v.min(Self::CAP_DB),
            Psnr::Identical => Self::CAP_DB,
        }
    }
}

impl PartialOrd for Psnr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Psnr::Identical, Psnr::Identical) => Some(Ordering::Equal),
            (Psnr::Identical, Psnr::Db(_)) => Some(Ordering::Greater),
            (Psnr::Db(_), Psnr::Identical) => Some(Ordering::Less),
            (Psnr::Db(a), Psnr::Db(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Db(v) => write!(f, "{v:.4}"),
            Psnr::Identical => f.write_str("inf"),
        }
    }
}

/// Both images as `[0,255]`-scaled `(height, width, values)` after border handling.
fn prepared(a: &Tensor, b: &Tensor, border: BorderMode, min_side: usize) -> Result<(usize, usize, Vec<f64>, Vec<f64>)> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "metric inputs differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.channels() != 1 {
        return Err(Error::shape("metrics expect single-channel images"));
    }
    let m = border.margin();
    let (h, w) = (a.height(), a.width());
    let need = 2 * m + min_side;
    if h < need || w < need {
        return Err(Error::shape(format!(
            "image {h}x{w} is too small: needs at least {need}x{need} with border mode {}",
            border.label()
        )));
    }
    let (oh, ow) = (h - 2 * m, w - 2 * m);
    let take = |t: &Tensor| {
        let mut v = Vec::with_capacity(oh * ow);
        for y in m..h - m {
            v.extend(t.plane(0)[y * w + m..y * w + w - m].iter().map(|p| p * PIXEL_SCALE));
        }
        v
    };
    Ok((oh, ow, take(a), take(b)))
}

fn mse_scaled(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Root-mean-square error on the 8-bit scale.
pub fn rmse(a: &Tensor, b: &Tensor, border: BorderMode) -> Result<f64> {
    let (_, _, pa, pb) = prepared(a, b, border, 1)?;
    Ok(mse_scaled(&pa, &pb).sqrt())
}

/// `10·log10(peak² / mse)` on the 8-bit scale.
pub fn psnr(a: &Tensor, b: &Tensor, peak: f64, border: BorderMode) -> Result<Psnr> {
    let (_, _, pa, pb) = prepared(a, b, border, 1)?;
    Ok(psnr_from_mse(mse_scaled(&pa, &pb), peak))
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> Psnr {
    if mse == 0.0 {
        Psnr::Identical
    } else {
        Psnr::Db(10.0 * (peak * peak / mse).log10())
    }
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut g = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    g
}

/// Separable valid filtering of an `h × w` plane with the 1-D window `g` on both axes.
fn filter_valid(src: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let ow = w - k + 1;
    let oh = h - k + 1;
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = g.iter().zip(&src[y * w + x..]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = g.iter().enumerate().map(|(i, a)| a * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean of the local SSIM map (11×11 Gaussian window, σ = 1.5, K1 = 0.01,
/// K2 = 0.03, dynamic range 255), over valid window positions only.
pub fn mssim(a: &Tensor, b: &Tensor, border: BorderMode) -> Result<f64> {
    let (h, w, pa, pb) = prepared(a, b, border, SSIM_WINDOW)?;
    let g = gaussian_window();
    let c1 = (SSIM_K1 * DEFAULT_PEAK).powi(2);
    let c2 = (SSIM_K2 * DEFAULT_PEAK).powi(2);

    let aa: Vec<f64> = pa.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = pb.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
    let mu_a = filter_valid(&pa, h, w, &g);
    let mu_b = filter_valid(&pb, h, w, &g);
    let e_aa = filter_valid(&aa, h, w, &g);
    let e_bb = filter_valid(&bb, h, w, &g);
    let e_ab = filter_valid(&ab, h, w, &g);

    let n = mu_a.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
        let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        total += num / den;
    }
    Ok(total / n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub psnr: Psnr,
    pub rmse: f64,
    pub mssim: f64,
    pub border_mode: BorderMode,
    pub peak: f64,
}

pub fn metric_report(a: &Tensor, b: &Tensor, border: BorderMode) -> Result<MetricReport> {
    Ok(MetricReport {
        psnr: psnr(a, b, DEFAULT_PEAK, border)?,
        rmse: rmse(a, b, border)?,
        mssim: mssim(a, b, border)?,
        border_mode: border,
        peak: DEFAULT_PEAK,
    })
}

#[derive(Clone, Debug)]
pub struct ImageReport {
    pub id: String,
    pub result: std::result::Result<MetricReport, String>,
}

/// Arithmetic means over the images that were evaluated successfully.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aggregate {
    /// Mean of per-image dB values, excluding identical pairs; `None` when all were identical.
    pub psnr: Option<f64>,
    pub rmse: f64,
    pub mssim: f64,
    pub evaluated: usize,
    pub identical_excluded: usize,
}

#[derive(Clone, Debug)]
pub struct SetReport {
    pub images: Vec<ImageReport>,
    pub aggregate: Aggregate,
    pub border_mode: BorderMode,
}

impl SetReport {
    pub fn failures(&self) -> impl Iterator<Item = (&str, &str)> {
        self.images.iter().filter_map(|r| match &r.result {
            Err(e) => Some((r.id.as_str(), e.as_str())),
            Ok(_) => None,
        })
    }

    /// `image_id,psnr,rmse,mssim` rows followed by a summary row labelled `summary_label`.
    pub fn write_csv(&self, w: &mut impl Write, summary_label: &str) -> io::Result<()> {
        writeln!(w, "image_id,psnr,rmse,mssim")?;
        for r in &self.images {
            match &r.result {
                Ok(m) => writeln!(w, "{},{},{:.6},{:.6}", r.id, m.psnr, m.rmse, m.mssim)?,
                Err(_) => writeln!(w, "{},,,", r.id)?,
            }
        }
        self.write_summary_row(w, summary_label)
    }

    pub fn write_summary_row(&self, w: &mut impl Write, label: &str) -> io::Result<()> {
        let a = &self.aggregate;
        let psnr = a.psnr.map_or_else(|| "inf".to_string(), |v| format!("{v:.4}"));
        writeln!(w, "{label},{psnr},{:.6},{:.6}", a.rmse, a.mssim)
    }
}

/// Per-image reports plus their means. Failures are recorded and skipped.
pub fn evaluate_set<'a, I>(pairs: I, border: BorderMode) -> Result<SetReport>
where
    I: IntoIterator<Item = (&'a str, &'a Tensor, &'a Tensor)>,
{
    let images: Vec<ImageReport> = pairs
        .into_iter()
        .map(|(id, sr, hr)| ImageReport {
            id: id.to_string(),
            result: metric_report(sr, hr, border).map_err(|e| e.to_string()),
        })
        .collect();
    if images.is_empty() {
        return Err(Error::invalid("evaluate_set needs at least one image pair"));
    }
    let ok: Vec<&MetricReport> = images.iter().filter_map(|r| r.result.as_ref().ok()).collect();
    let n = ok.len();
    let finite: Vec<f64> = ok.iter().filter_map(|m| m.psnr.db()).collect();
    let mean = |v: &mut dyn Iterator<Item = f64>| if n == 0 { f64::NAN } else { v.sum::<f64>() / n as f64 };
    let aggregate = Aggregate {
        psnr: (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64),
        rmse: mean(&mut ok.iter().map(|m| m.rmse)),
        mssim: mean(&mut ok.iter().map(|m| m.mssim)),
        evaluated: n,
        identical_excluded: n - finite.len(),
    };
    Ok(SetReport {
        images,
        aggregate,
        border_mode: border,
    })
}
