//! Per-pixel circular-harmonic spectrum.
//!
//! `C_l(p) = rho_l^{-1/2} sum_m conj(h_l(m)) I(p + m)`, realized as one row
//! pass per Hermite order, one column pass per `(k, l-k)` pair and a complex
//! combination with `conj(Gamma)`. Borders use mirror padding.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::image::{interior, mirror};
use crate::kernel_bank::{basis_filter, KernelBank};
use crate::{BankParams, Error, GrayImage, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const SPECTRUM_MAGIC: &[u8; 4] = b"CHSF";
pub const SCORE_MAP_MAGIC: &[u8; 4] = b"CHZM";
pub const DUMP_VERSION: u32 = 1;

/// Spectrum coefficients `C_l` for `l = 0..=L` over a whole image.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumField {
    width: usize,
    height: usize,
    params: BankParams,
    /// One row-major plane per order.
    planes: Vec<Vec<Complex64>>,
}

impl SpectrumField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn max_order(&self) -> usize {
        self.params.max_order
    }

    pub fn params(&self) -> &BankParams {
        &self.params
    }

    pub fn plane(&self, l: usize) -> &[Complex64] {
        &self.planes[l]
    }

    #[inline]
    pub fn get(&self, l: usize, col: usize, row: usize) -> Complex64 {
        self.planes[l][row * self.width + col]
    }

    /// `C_0..=C_L` at one pixel.
    pub fn coeffs_at(&self, col: usize, row: usize) -> Vec<Complex64> {
        let i = row * self.width + col;
        self.planes.iter().map(|p| p[i]).collect()
    }

    /// Writes the `CHSF` dump: header then planar `(re, im)` f64 pairs.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        write_header(&mut w, SPECTRUM_MAGIC, self.width, self.height, &self.params)?;
        for plane in &self.planes {
            for v in plane {
                w.write_all(&v.re.to_le_bytes())?;
                w.write_all(&v.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_dump<R: Read>(mut r: R) -> Result<Self> {
        let (width, height, params) = read_header(&mut r, SPECTRUM_MAGIC)?;
        let mut planes = Vec::with_capacity(params.max_order + 1);
        let mut buf = [0u8; 16];
        for _ in 0..=params.max_order {
            let mut plane = Vec::with_capacity(width * height);
            for _ in 0..width * height {
                r.read_exact(&mut buf)?;
                let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
                let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
                plane.push(Complex64::new(re, im));
            }
            planes.push(plane);
        }
        Ok(Self { width, height, params, planes })
    }
}

/// Header shared by the `CHSF` and `CHZM` dumps, all little-endian:
/// magic, version u32, width u32, height u32, L u32, lambda f64, K u32.
pub fn write_header<W: Write>(
    w: &mut W,
    magic: &[u8; 4],
    width: usize,
    height: usize,
    params: &BankParams,
) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&DUMP_VERSION.to_le_bytes())?;
    w.write_all(&(width as u32).to_le_bytes())?;
    w.write_all(&(height as u32).to_le_bytes())?;
    w.write_all(&(params.max_order as u32).to_le_bytes())?;
    w.write_all(&params.lambda.to_le_bytes())?;
    w.write_all(&(params.half_width as u32).to_le_bytes())?;
    Ok(())
}

pub fn read_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<(usize, usize, BankParams)> {
    let bad = |reason: String| {
        Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, reason))
    };
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(bad(format!("bad magic {m:?}, expected {magic:?}")));
    }
    let mut u = [0u8; 4];
    let mut read_u32 = |r: &mut R| -> Result<u32> {
        r.read_exact(&mut u)?;
        Ok(u32::from_le_bytes(u))
    };
    let version = read_u32(r)?;
    if version != DUMP_VERSION {
        return Err(bad(format!("unsupported dump version {version}")));
    }
    let width = read_u32(r)? as usize;
    let height = read_u32(r)? as usize;
    let max_order = read_u32(r)? as usize;
    let mut f = [0u8; 8];
    r.read_exact(&mut f)?;
    let lambda = f64::from_le_bytes(f);
    let half_width = read_u32(r)? as usize;
    Ok((width, height, BankParams { lambda, half_width, max_order }))
}

fn check_size(image: &GrayImage, bank: &KernelBank) -> Result<()> {
    let min = bank.params().taps();
    if image.width() < min || image.height() < min {
        return Err(Error::ImageTooSmall { width: image.width(), height: image.height(), min });
    }
    Ok(())
}

/// Runs `f(row, out_row)` for every output row, in parallel when enabled.
/// Each row is written by exactly one call so the result does not depend on
/// the partitioning.
fn for_each_row<T: Send>(out: &mut [T], width: usize, f: impl Fn(usize, &mut [T]) + Sync + Send) {
    #[cfg(feature = "parallel")]
    out.par_chunks_mut(width).enumerate().for_each(|(r, chunk)| f(r, chunk));
    #[cfg(not(feature = "parallel"))]
    out.chunks_mut(width).enumerate().for_each(|(r, chunk)| f(r, chunk));
}

/// Separable spectrum: `(L+1)` row passes, `(L+1)(L+2)/2` column passes,
/// each tap pair folded by the kernel's parity.
pub fn compute_spectrum(image: &GrayImage, bank: &KernelBank) -> Result<SpectrumField> {
    check_size(image, bank)?;
    let (w, h) = (image.width(), image.height());
    let kk = bank.half_width();
    let ll = bank.max_order();

    // A_k(col, row) = sum_m H_k(m) I(col + m, row)
    let row_pass: Vec<Vec<f64>> = (0..=ll)
        .map(|k| {
            let kernel = bank.hermite(k);
            let odd = k % 2 == 1;
            let mut plane = vec![0.0; w * h];
            for_each_row(&mut plane, w, |r, out| {
                let src = image.row(r);
                for (c, o) in out.iter_mut().enumerate() {
                    let mut acc = kernel[kk] * src[c];
                    for m in 1..=kk {
                        let ahead = src[mirror(c as isize + m as isize, w)];
                        let behind = src[mirror(c as isize - m as isize, w)];
                        let pair = if odd { ahead - behind } else { ahead + behind };
                        acc += kernel[kk + m] * pair;
                    }
                    *o = acc;
                }
            });
            plane
        })
        .collect();

    // B_{k,j}(col, row) = sum_m H_j(m) A_k(col, row - m), then combined into
    // C_{k+j} with conj(Gamma). y points up, so +m walks toward row 0.
    let mut planes = Vec::with_capacity(ll + 1);
    for l in 0..=ll {
        let norm = bank.rho(l).sqrt().recip();
        let mut plane = vec![Complex64::new(0.0, 0.0); w * h];
        for_each_row(&mut plane, w, |r, out| {
            let mut b = vec![0.0; w];
            for k in 0..=l {
                let j = l - k;
                let kernel = bank.hermite(j);
                let odd = j % 2 == 1;
                let a = &row_pass[k];
                let center = &a[r * w..(r + 1) * w];
                for (c, bv) in b.iter_mut().enumerate() {
                    *bv = kernel[kk] * center[c];
                }
                for m in 1..=kk {
                    let up = mirror(r as isize - m as isize, h) * w;
                    let down = mirror(r as isize + m as isize, h) * w;
                    let hm = kernel[kk + m];
                    for (c, bv) in b.iter_mut().enumerate() {
                        let pair = if odd { a[up + c] - a[down + c] } else { a[up + c] + a[down + c] };
                        *bv += hm * pair;
                    }
                }
                let g = bank.gamma(l, k).conj();
                let (gr, gi) = (g.re as f64, g.im as f64);
                for (o, &bv) in out.iter_mut().zip(&b) {
                    o.re += gr * bv;
                    o.im += gi * bv;
                }
            }
            for o in out.iter_mut() {
                *o *= norm;
            }
        });
        planes.push(plane);
    }
    Ok(SpectrumField { width: w, height: h, params: *bank.params(), planes })
}

/// Reference realization: full 2-D correlation with each sampled polar
/// basis filter, `(L+1) M^2` taps per pixel.
pub fn direct_spectrum(image: &GrayImage, bank: &KernelBank) -> Result<SpectrumField> {
    check_size(image, bank)?;
    let (w, h) = (image.width(), image.height());
    let k = bank.half_width() as isize;
    let mut planes = Vec::with_capacity(bank.max_order() + 1);
    for l in 0..=bank.max_order() {
        let filter = basis_filter(l, bank.params())?;
        let norm = bank.rho(l).sqrt().recip();
        let mut plane = vec![Complex64::new(0.0, 0.0); w * h];
        for_each_row(&mut plane, w, |r, out| {
            for (c, o) in out.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for my in -k..=k {
                    let src = image.row(mirror(r as isize - my, h));
                    for mx in -k..=k {
                        let v = src[mirror(c as isize + mx, w)];
                        acc += filter.get(mx, my).conj() * v;
                    }
                }
                *o = acc * norm;
            }
        });
        planes.push(plane);
    }
    Ok(SpectrumField { width: w, height: h, params: *bank.params(), planes })
}

/// Largest `|a - b|` over pixels at least `margin` from the border, divided
/// by the largest `|b|` over the same pixels, taken per order and maximized.
pub fn max_relative_difference(a: &SpectrumField, b: &SpectrumField, margin: usize) -> f64 {
    assert_eq!((a.width, a.height, a.max_order()), (b.width, b.height, b.max_order()));
    let mut worst = 0.0f64;
    for l in 0..=a.max_order() {
        let (mut diff, mut scale) = (0.0f64, 0.0f64);
        for (c, r) in interior(a.width, a.height, margin) {
            let (x, y) = (a.get(l, c, r), b.get(l, c, r));
            diff = diff.max((x - y).norm());
            scale = scale.max(y.norm());
        }
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        } else if diff > 0.0 {
            return f64::INFINITY;
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_bank::build_bank;

    fn bank() -> KernelBank {
        build_bank(BankParams::new(3.0, 12, 6).unwrap()).unwrap()
    }

    #[test]
    fn zero_image_gives_zero_field() {
        let f = compute_spectrum(&GrayImage::filled(30, 30, 0.0), &bank()).unwrap();
        for l in 0..=6 {
            assert!(f.plane(l).iter().all(|v| *v == Complex64::new(0.0, 0.0)));
        }
    }

    #[test]
    fn constant_image_only_excites_dc_leaking_orders() {
        let b = bank();
        let f = compute_spectrum(&GrayImage::filled(40, 40, 100.0), &b).unwrap();
        let c0 = f.get(0, 20, 20).re;
        for l in 1..=6 {
            // the order-4 filter leaks DC through the square window
            let expect = if l == 4 { 100.0 * basis_filter(4, b.params()).unwrap().sum().re / b.rho(4).sqrt() } else { 0.0 };
            for (c, r) in interior(40, 40, 12) {
                let v = f.get(l, c, r);
                assert!((v - expect).norm() < 1e-12 * c0, "l={l}: {v}");
            }
        }
    }

    #[test]
    fn impulse_returns_normalized_center_tap() {
        let b = bank();
        let img = GrayImage::from_fn(41, 41, |c, r| if (c, r) == (20, 20) { 1.0 } else { 0.0 });
        let f = compute_spectrum(&img, &b).unwrap();
        let c0 = f.get(0, 20, 20);
        assert!((c0.re - b.rho(0).sqrt().recip()).abs() < 1e-15);
        assert!((c0.re - 0.1881).abs() < 1e-4);
        for l in 1..=6 {
            assert_eq!(f.get(l, 20, 20).norm(), 0.0);
        }
    }

    #[test]
    fn direct_impulse_response_is_conjugate_reflected_kernel() {
        let b = bank();
        let img = GrayImage::from_fn(41, 41, |c, r| if (c, r) == (20, 20) { 1.0 } else { 0.0 });
        let f = direct_spectrum(&img, &b).unwrap();
        let h2 = basis_filter(2, b.params()).unwrap();
        let norm = b.rho(2).sqrt().recip();
        // pixel at offset (mx, my) from the impulse, y up
        for (mx, my) in [(3isize, 1isize), (-2, 5), (0, -4)] {
            let col = (20 + mx) as usize;
            let row = (20 - my) as usize;
            let expect = h2.get(-mx, -my).conj() * norm;
            assert!((f.get(2, col, row) - expect).norm() < 1e-15);
        }
    }

    #[test]
    fn rejects_images_smaller_than_kernel() {
        let err = compute_spectrum(&GrayImage::filled(24, 40, 1.0), &bank()).unwrap_err();
        assert!(matches!(err, Error::ImageTooSmall { min: 25, .. }));
        assert!(direct_spectrum(&GrayImage::filled(40, 10, 1.0), &bank()).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let small = build_bank(BankParams::new(1.5, 3, 2).unwrap()).unwrap();
        let img = GrayImage::from_fn(9, 8, |c, r| (c * 7 + r * 3) as f64);
        let f = compute_spectrum(&img, &small).unwrap();
        let mut buf = Vec::new();
        f.write_dump(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"CHSF");
        assert_eq!(buf.len(), 4 + 4 * 4 + 8 + 4 + 3 * 9 * 8 * 16);
        let back = SpectrumField::read_dump(&buf[..]).unwrap();
        assert_eq!(back, f);
    }
}
