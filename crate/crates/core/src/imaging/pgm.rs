//! Binary PGM (`P5`, maxval 255).

use std::fs;
use std::path::Path;

use super::GrayImage;
use crate::error::{Error, Result};

fn skip_ws_and_comments(data: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < data.len() && data[pos] == b'#' {
            while pos < data.len() && data[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn header_number(data: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    *pos = skip_ws_and_comments(data, *pos);
    let start = *pos;
    while *pos < data.len() && data[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Pgm(if *pos >= data.len() {
            format!("truncated header (missing {what})")
        } else {
            format!("expected {what}, found byte 0x{:02x}", data[*pos])
        }));
    }
    std::str::from_utf8(&data[start..*pos])
        .unwrap()
        .parse()
        .map_err(|_| Error::Pgm(format!("{what} out of range")))
}

pub fn decode_pgm(data: &[u8]) -> Result<GrayImage> {
    if data.len() < 2 || &data[..2] != b"P5" {
        return Err(Error::Pgm("bad magic (expected P5)".into()));
    }
    let mut pos = 2;
    let width = header_number(data, &mut pos, "width")?;
    let height = header_number(data, &mut pos, "height")?;
    let maxval = header_number(data, &mut pos, "maxval")?;
    if maxval != 255 {
        return Err(Error::Pgm(format!("unsupported maxval {maxval} (only 255)")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Pgm(format!("empty image {width}x{height}")));
    }
    match data.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        Some(_) => return Err(Error::Pgm("missing whitespace after maxval".into())),
        None => return Err(Error::Pgm("truncated header".into())),
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Pgm("image dimensions overflow".into()))?;
    let payload = &data[pos..];
    if payload.len() < n {
        return Err(Error::Pgm(format!(
            "truncated payload: {} of {n} bytes",
            payload.len()
        )));
    }
    GrayImage::from_bytes(height, width, &payload[..n])
}

/// Canonical encoding: `P5\n<w> <h>\n255\n` followed by the quantized bytes.
pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.to_bytes());
    out
}

pub fn load_pgm(path: &Path) -> Result<GrayImage> {
    let data = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_pgm(&data).map_err(|e| match e {
        Error::Pgm(m) => Error::Pgm(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn save_pgm(image: &GrayImage, path: &Path) -> Result<()> {
    fs::write(path, encode_pgm(image)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decodes_two_by_two() {
        let img = decode_pgm(b"P5\n2 2\n255\n\x00\x80\xff\x40").unwrap();
        assert_eq!(img.data(), &[0.0, 128.0 / 255.0, 1.0, 64.0 / 255.0]);
        assert!((img.data()[1] - 0.50196).abs() < 1e-5);
    }

    #[test]
    fn accepts_comments_in_header() {
        let img = decode_pgm(b"P5 # made by hand\n3 1 # dims\n255\n\x01\x02\x03").unwrap();
        assert_eq!((img.height(), img.width()), (1, 3));
    }

    #[test]
    fn named_errors() {
        let msg = |b: &[u8]| decode_pgm(b).unwrap_err().to_string();
        assert!(msg(b"P6\n1 1\n255\n\x00").contains("magic"));
        assert!(msg(b"P5\n2 ").contains("truncated"));
        assert!(msg(b"P5\n2 2\n65535\n").contains("maxval"));
        assert!(msg(b"P5\n2 2\n255\n\x00").contains("truncated payload"));
        assert!(msg(b"").contains("magic"));
    }

    proptest! {
        #[test]
        fn byte_round_trip(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
            let mut s = seed | 1;
            let bytes: Vec<u8> = (0..w * h).map(|_| { s ^= s << 13; s ^= s >> 7; s ^= s << 17; s as u8 }).collect();
            let mut file = format!("P5\n{w} {h}\n255\n").into_bytes();
            file.extend(&bytes);
            let img = decode_pgm(&file).unwrap();
            prop_assert_eq!(encode_pgm(&img), file);
        }
    }
}
