//! Synthetic text strips standing in for a real LR/HR text-image corpus.
//!
//! Each sample is a short random string drawn with the built-in bitmap
//! font at an integer scale, rendered 4× supersampled (so glyph edges are
//! anti-aliased), with random polarity, contrast, per-glyph jitter and a
//! little sensor noise. The LR partner is the bicubic ×2 reduction.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::{DatasetManifest, ManifestEntry};
use super::font::{glyph, GLYPH_H, GLYPH_W};
use super::{bicubic_downscale, save_pgm, GrayImage};
use crate::error::{Error, Result};

/// Characters the generator draws from (space is added separately).
pub const SYNTH_ALPHABET: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789.,:;!?'\"-()/&%";

const SUPERSAMPLE: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthConfig {
    pub count: usize,
    pub seed: u64,
    /// Inclusive HR height range; both ends are rounded to even values.
    pub min_height: usize,
    pub max_height: usize,
    pub min_chars: usize,
    pub max_chars: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            count: 100,
            seed: 0,
            min_height: 18,
            max_height: 58,
            min_chars: 3,
            max_chars: 10,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("synthetic corpus needs count >= 1"));
        }
        if self.min_height < 10 || self.min_height > self.max_height {
            return Err(Error::invalid(format!(
                "invalid height range [{}, {}]",
                self.min_height, self.max_height
            )));
        }
        if self.min_chars == 0 || self.min_chars > self.max_chars {
            return Err(Error::invalid("invalid character count range"));
        }
        Ok(())
    }
}

/// One generated pair.
#[derive(Clone, Debug)]
pub struct SyntheticSample {
    pub id: String,
    pub text: String,
    pub hr: GrayImage,
    pub lr: GrayImage,
}

fn image_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn random_text(rng: &mut ChaCha8Rng, min_chars: usize, max_chars: usize) -> String {
    let alphabet: Vec<char> = SYNTH_ALPHABET.chars().collect();
    let n = rng.gen_range(min_chars..=max_chars);
    let mut s = String::with_capacity(n);
    for i in 0..n {
        let interior = i > 0 && i + 1 < n;
        if interior && !s.ends_with(' ') && rng.gen_bool(0.12) {
            s.push(' ');
        } else {
            s.push(alphabet[rng.gen_range(0..alphabet.len())]);
        }
    }
    s
}

/// Renders `text` into an image of the given (even) height.
pub fn render_text_strip(text: &str, height: usize, rng: &mut impl Rng) -> Result<GrayImage> {
    let chars: Vec<_> = text
        .chars()
        .map(|c| glyph(c).ok_or_else(|| Error::invalid(format!("character {c:?} is not in the font"))))
        .collect::<Result<_>>()?;
    if chars.is_empty() {
        return Err(Error::invalid("cannot render empty text"));
    }
    let max_scale = ((height.saturating_sub(4)) / GLYPH_H).max(1);
    let scale = if max_scale > 1 { rng.gen_range(max_scale - 1..=max_scale) } else { 1 };
    let advance = (GLYPH_W + 1) * scale;
    let margin = rng.gen_range(scale..=3 * scale);
    let mut width = 2 * margin + chars.len() * advance - scale;
    width += width % 2;

    let dark_text = rng.gen_bool(0.5);
    let low = rng.gen_range(0.0..0.3);
    let high = rng.gen_range(0.65..1.0);
    let (bg, fg) = if dark_text { (high, low) } else { (low, high) };

    let ss = SUPERSAMPLE;
    let (ch, cw) = (height * ss, width * ss);
    let mut canvas = vec![bg; ch * cw];
    let cell = scale * ss;
    let text_h = GLYPH_H * cell;
    let top = (ch.saturating_sub(text_h) / 2) as i64;
    let line_jitter = rng.gen_range(-(cell as i64) / 2..=(cell as i64) / 2);
    for (k, rows) in chars.iter().enumerate() {
        let dy = rng.gen_range(-(ss as i64) / 2..=(ss as i64) / 2);
        let dx = rng.gen_range(-(ss as i64) / 2..=(ss as i64) / 2);
        let oy = top + line_jitter + dy;
        let ox = ((margin + k * advance) * ss) as i64 + dx;
        for (gy, row) in rows.iter().enumerate() {
            for (gx, px) in row.bytes().enumerate() {
                if px != b'#' {
                    continue;
                }
                for sy in 0..cell as i64 {
                    let y = oy + (gy * cell) as i64 + sy;
                    if y < 0 || y >= ch as i64 {
                        continue;
                    }
                    for sx in 0..cell as i64 {
                        let x = ox + (gx * cell) as i64 + sx;
                        if x >= 0 && x < cw as i64 {
                            canvas[y as usize * cw + x as usize] = fg;
                        }
                    }
                }
            }
        }
    }

    let noise = Normal::new(0.0, rng.gen_range(0.0..0.015)).expect("valid sigma");
    let norm = (ss * ss) as f64;
    Ok(GrayImage::from_fn(height, width, |y, x| {
        let mut acc = 0.0;
        for sy in 0..ss {
            let row = &canvas[(y * ss + sy) * cw + x * ss..][..ss];
            acc += row.iter().sum::<f64>();
        }
        acc / norm + noise.sample(rng)
    }))
}

/// Generates `config.count` samples in memory; a pure function of the config.
pub fn generate_synthetic_images(config: &SynthConfig) -> Result<Vec<SyntheticSample>> {
    config.validate()?;
    let (lo, hi) = (config.min_height.div_ceil(2), config.max_height / 2);
    if lo > hi {
        return Err(Error::invalid("height range contains no even value"));
    }
    (0..config.count)
        .map(|i| {
            let mut rng = image_rng(config.seed, i);
            let height = 2 * rng.gen_range(lo..=hi);
            let text = random_text(&mut rng, config.min_chars, config.max_chars);
            let hr = render_text_strip(&text, height, &mut rng)?;
            let lr = bicubic_downscale(&hr, 2)?;
            Ok(SyntheticSample {
                id: format!("syn{i:05}"),
                text,
                hr,
                lr,
            })
        })
        .collect()
}

/// Writes `hr/<id>.pgm`, `lr/<id>.pgm` and `manifest.tsv` under `out_dir`.
pub fn generate_synthetic_corpus(config: &SynthConfig, out_dir: &Path) -> Result<DatasetManifest> {
    let samples = generate_synthetic_images(config)?;
    for sub in ["hr", "lr"] {
        let d = out_dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(format!("creating {}", d.display()), e))?;
    }
    let mut entries = Vec::with_capacity(samples.len());
    for s in &samples {
        let hr_rel = format!("hr/{}.pgm", s.id);
        let lr_rel = format!("lr/{}.pgm", s.id);
        save_pgm(&s.hr, &out_dir.join(&hr_rel))?;
        save_pgm(&s.lr, &out_dir.join(&lr_rel))?;
        entries.push(ManifestEntry {
            id: s.id.clone(),
            hr_path: hr_rel.into(),
            lr_path: lr_rel.into(),
            annotation: Some(s.text.clone()),
        });
    }
    let manifest = DatasetManifest::new(entries, None, out_dir.to_path_buf())?;
    manifest.write(&out_dir.join("manifest.tsv"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(count: usize, seed: u64) -> SynthConfig {
        SynthConfig { count, seed, ..SynthConfig::default() }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_synthetic_images(&small(6, 3)).unwrap();
        let b = generate_synthetic_images(&small(6, 3)).unwrap();
        let c = generate_synthetic_images(&small(6, 4)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.hr, y.hr);
            assert_eq!(x.text, y.text);
        }
        assert!(a.iter().zip(&c).any(|(x, y)| x.hr != y.hr));
    }

    #[test]
    fn heights_even_in_range_and_lr_half() {
        for s in generate_synthetic_images(&small(40, 11)).unwrap() {
            let h = s.hr.height();
            assert!(h % 2 == 0 && (18..=58).contains(&h), "height {h}");
            assert_eq!(s.lr.height() * 2, h);
            assert_eq!(s.lr.width() * 2, s.hr.width());
            assert!(s.hr.width() >= 18);
            assert!(s.text.chars().all(|c| c == ' ' || SYNTH_ALPHABET.contains(c)));
        }
    }

    #[test]
    fn text_has_contrast() {
        let s = &generate_synthetic_images(&small(1, 0)).unwrap()[0];
        let (lo, hi) = s.hr.data().iter().fold((1.0f64, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(hi - lo > 0.3);
    }

    #[test]
    fn rejects_unknown_characters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(render_text_strip("abc", 20, &mut rng).is_err());
        assert!(render_text_strip("", 20, &mut rng).is_err());
    }
}
