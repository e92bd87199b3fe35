//! Binary PGM (P5, 8-bit) reading and writing, plus grayscale PNG input.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, GrayImage, Result};

/// Mapping from real values to 8-bit samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Normalization {
    /// `min -> 0`, `max -> 255`; a constant grid maps to 128.
    MinMax,
    /// `lo -> 0`, `hi -> 255`, clamped outside.
    Fixed { lo: f64, hi: f64 },
    /// `-scale -> 0`, `0 -> 128`, `+scale -> 255`, clamped; `scale <= 0`
    /// maps everything to 128.
    Symmetric { scale: f64 },
}

/// Written next to every image as `<file>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub normalization: Normalization,
    pub data_min: f64,
    pub data_max: f64,
    pub width: usize,
    pub height: usize,
}

/// Reads a P5 PGM (maxval 255) or, with the `png` feature, an 8-bit
/// grayscale PNG.
pub fn read_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"P5") {
        decode_pgm(&bytes, path)
    } else if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes, path)
    } else if bytes.starts_with(b"P") {
        Err(Error::MalformedHeader {
            path: path.into(),
            reason: "only binary P5 graymaps are supported".into(),
        })
    } else {
        Err(Error::UnsupportedFormat(path.into()))
    }
}

#[cfg(feature = "png")]
fn decode_png(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    use image::{ImageFormat, DynamicImage};
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| {
        Error::MalformedHeader { path: path.into(), reason: e.to_string() }
    })?;
    match img {
        DynamicImage::ImageLuma8(g) => {
            GrayImage::from_u8(g.width() as usize, g.height() as usize, g.as_raw())
        }
        other => Err(Error::UnsupportedDepth {
            path: path.into(),
            reason: format!("expected 8-bit grayscale PNG, found {:?}", other.color()),
        }),
    }
}

#[cfg(not(feature = "png"))]
fn decode_png(_bytes: &[u8], path: &Path) -> Result<GrayImage> {
    Err(Error::UnsupportedFormat(path.into()))
}

/// Parses a P5 header and payload from memory.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let malformed = |reason: &str| Error::MalformedHeader { path: path.into(), reason: reason.into() };
    if !bytes.starts_with(b"P5") {
        return Err(malformed("missing P5 magic"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        // whitespace and comments before each field
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(malformed("header ends early")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(malformed(["width", "height", "maxval"][i]));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| malformed("numeric field out of range"))?;
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(malformed("no whitespace after maxval")),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(malformed("zero dimension"));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedDepth {
            path: path.into(),
            reason: format!("maxval {maxval}, only 255 is supported"),
        });
    }
    let expected = width * height;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(Error::Truncated { path: path.into(), expected, found: payload.len() });
    }
    GrayImage::from_u8(width, height, &payload[..expected])
}

/// `P5` bytes of an 8-bit raster.
pub fn encode_pgm(width: usize, height: usize, samples: &[u8]) -> Vec<u8> {
    assert_eq!(samples.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(samples);
    out
}

/// Maps real values to bytes under `norm`.
pub fn quantize(values: &[f64], norm: Normalization) -> Vec<u8> {
    let to_byte = |v: f64| v.round().clamp(0.0, 255.0) as u8;
    match norm {
        Normalization::MinMax => {
            let (lo, hi) = values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            if hi > lo {
                values.iter().map(|&v| to_byte(255.0 * (v - lo) / (hi - lo))).collect()
            } else {
                vec![128; values.len()]
            }
        }
        Normalization::Fixed { lo, hi } => {
            if hi > lo {
                values.iter().map(|&v| to_byte(255.0 * (v - lo) / (hi - lo))).collect()
            } else {
                vec![128; values.len()]
            }
        }
        Normalization::Symmetric { scale } => {
            if scale > 0.0 {
                values.iter().map(|&v| to_byte(127.5 + 127.5 * v / scale)).collect()
            } else {
                vec![128; values.len()]
            }
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `grid` as P5 under `norm` and records the mapping in a JSON
/// sidecar next to it.
pub fn write_image(grid: &GrayImage, path: impl AsRef<Path>, norm: Normalization) -> Result<()> {
    let path = path.as_ref();
    let bytes = quantize(grid.data(), norm);
    fs::write(path, encode_pgm(grid.width(), grid.height(), &bytes))?;
    let (data_min, data_max) = grid.range();
    let sidecar = Sidecar { normalization: norm, data_min, data_max, width: grid.width(), height: grid.height() };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(())
}
