//! Real-valued grayscale image and the small amount of geometry the rest of
//! the crate needs (mirror indexing, exact quarter-turn rotations).

use crate::{Error, Result};

/// Row-major real image. `get(col, row)`; row 0 is the top row.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "pixel {} (col {}, row {}) is not finite",
                i,
                i % width,
                i / width
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0 && value.is_finite());
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0);
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(col, row));
            }
        }
        assert!(data.iter().all(|v| v.is_finite()));
        Self { width, height, data }
    }

    /// Promotes 8-bit samples to reals in 0..=255.
    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, bytes.iter().map(|&b| b as f64).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(self.width, self.height, |c, r| f(self.get(c, r)))
    }

    /// `(min, max)` over all pixels.
    pub fn range(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Quarter turn counter-clockwise as displayed (row 0 on top), which is
    /// also counter-clockwise in the y-up frame. Square images keep their
    /// center fixed.
    pub fn rotate_ccw(&self) -> Self {
        let (w, h) = (self.width, self.height);
        // new(col', row') = old(w - 1 - row', col')
        Self::from_fn(h, w, |c, r| self.get(w - 1 - r, c))
    }

    /// Quarter turn clockwise as displayed.
    pub fn rotate_cw(&self) -> Self {
        let (w, h) = (self.width, self.height);
        Self::from_fn(h, w, |c, r| self.get(r, h - 1 - c))
    }
}

/// Reflect-without-repeat index: `-1 -> 1`, `n -> n - 2`.
///
/// Only a single reflection is supported, so `-n < i < 2n - 1` must hold.
#[inline]
pub(crate) fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let j = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    debug_assert!((0..n).contains(&j), "index {i} outside single reflection range of {n}");
    j as usize
}

/// Evaluates `f(row)` for every row and concatenates the results in row
/// order; rows run in parallel when the `parallel` feature is on.
pub(crate) fn map_rows<T: Send>(
    height: usize,
    f: impl Fn(usize) -> Result<Vec<T>> + Sync + Send,
) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    let rows: Vec<Result<Vec<T>>> = {
        use rayon::prelude::*;
        (0..height).into_par_iter().map(&f).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Result<Vec<T>>> = (0..height).map(&f).collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// Pixel positions farther than `margin` from every border.
pub fn interior(width: usize, height: usize, margin: usize) -> impl Iterator<Item = (usize, usize)> {
    let rows = margin..height.saturating_sub(margin);
    rows.flat_map(move |r| (margin..width.saturating_sub(margin)).map(move |c| (c, r)))
}
