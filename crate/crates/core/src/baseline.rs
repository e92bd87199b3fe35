//! Comparison detectors: correlation against a Slepian-concentrated or a
//! least-squares wedge template, Harris, and Kitchen-Rosenfeld.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::harmonic::{s_aux, steer, Spectrum};
use crate::image::mirror;
use crate::wedge::angle_on_grid;
use crate::{Error, GrayImage, Result};

/// Default Harris sensitivity.
pub const HARRIS_K: f64 = 0.04;

/// Kitchen-Rosenfeld denominator floor, as a fraction of the squared
/// dynamic range.
pub const KR_FLOOR_REL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateKind {
    Slepian,
    LeastSquares,
}

/// Unit-energy template spectrum, `2 pi sum |t_l|^2 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicTemplate {
    pub kind: TemplateKind,
    pub spectrum: Spectrum,
    /// Leading eigenvalue / `2 pi` for Slepian templates, the inner-domain
    /// energy fraction. `None` for least-squares templates.
    pub concentration: Option<f64>,
    /// Gap between the two largest eigenvalues (Slepian only); tends to zero
    /// as the domain approaches the full circle, where every vector is optimal.
    pub eigen_gap: Option<f64>,
}

/// `2 pi sum_l |c_l|^2`, the energy of the reconstruction over the circle.
pub fn circle_energy(s: &Spectrum) -> f64 {
    2.0 * PI * s.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>()
}

/// Leading eigenvector of `[S_{l_m - l_n}(phi1)]`, the order-`L` spectrum
/// whose reconstruction concentrates most energy in `|theta| <= phi1`.
pub fn slepian_template(phi1: f64, max_order: usize) -> Result<HarmonicTemplate> {
    if !(phi1 > 0.0 && phi1 < PI) {
        return Err(Error::InvalidParameter(format!("phi1 must lie in (0, pi), got {phi1}")));
    }
    let n = 2 * max_order + 1;
    let m = DMatrix::from_fn(n, n, |i, j| s_aux(i as isize - j as isize, phi1));
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = order[0];
    let lead = eig.eigenvalues[top];
    let gap = if n > 1 { lead - eig.eigenvalues[order[1]] } else { lead };
    let v = eig.eigenvectors.column(top);

    // The leading vector of this centrosymmetric matrix is even in l.
    let ll = max_order;
    let mut nonneg: Vec<f64> = (0..=ll).map(|l| 0.5 * (v[ll + l] + v[ll - l])).collect();
    let sign = if nonneg[0] + 2.0 * nonneg[1..].iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let energy = 2.0 * PI * (nonneg[0].powi(2) + 2.0 * nonneg[1..].iter().map(|x| x * x).sum::<f64>());
    let scale = sign / energy.sqrt();
    for x in &mut nonneg {
        *x *= scale;
    }
    let spectrum = Spectrum::extend(&nonneg.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>());
    Ok(HarmonicTemplate {
        kind: TemplateKind::Slepian,
        spectrum,
        concentration: Some(lead / (2.0 * PI)),
        eigen_gap: Some(gap),
    })
}

/// Raw projection of the unit wedge indicator on `|theta| <= phi_delta`
/// onto orders `<= L`: `t_l = S_l(phi_delta) / 2 pi`.
pub fn wedge_projection(phi_delta: f64, max_order: usize) -> Spectrum {
    let nonneg: Vec<_> =
        (0..=max_order).map(|l| Complex64::new(s_aux(l as isize, phi_delta) / (2.0 * PI), 0.0)).collect();
    Spectrum::extend(&nonneg)
}

/// Mean-removed, unit-energy least-squares wedge template.
pub fn ls_template(phi_delta: f64, max_order: usize) -> Result<HarmonicTemplate> {
    if !(phi_delta > 0.0 && phi_delta < PI) {
        return Err(Error::InvalidParameter(format!("phi_delta must lie in (0, pi), got {phi_delta}")));
    }
    let raw = wedge_projection(phi_delta, max_order);
    let spectrum = normalize_ac(&raw).ok_or_else(|| {
        Error::InvalidParameter("least-squares template has no angular content (L = 0?)".into())
    })?;
    Ok(HarmonicTemplate { kind: TemplateKind::LeastSquares, spectrum, concentration: None, eigen_gap: None })
}

/// Drops `c_0` and scales to unit circle energy; `None` if nothing is left.
fn normalize_ac(s: &Spectrum) -> Option<Spectrum> {
    let mut nonneg = s.nonneg().to_vec();
    nonneg[0] = Complex64::new(0.0, 0.0);
    let ac = Spectrum::extend(&nonneg);
    let e = circle_energy(&ac);
    if e > 0.0 {
        Some(ac.scale(e.sqrt().recip()))
    } else {
        None
    }
}

/// Normalized correlation `Re(2 pi t^H steer(p, theta))` maximized over the
/// angle grid, with both sides mean-removed and unit energy. Returns
/// `(score, theta_hat)`; a flat patch scores 0.
pub fn correlation_score(s: &Spectrum, template: &HarmonicTemplate, theta_steps: usize) -> Result<(f64, f64)> {
    if s.max_order() != template.spectrum.max_order() {
        return Err(Error::OrderMismatch { spectrum: s.max_order(), template: template.spectrum.max_order() });
    }
    if theta_steps == 0 {
        return Err(Error::InvalidParameter("theta grid needs at least one angle".into()));
    }
    let (Some(patch), Some(t)) = (normalize_ac(s), normalize_ac(&template.spectrum)) else {
        return Ok((0.0, 0.0));
    };
    let mut best = (f64::NEG_INFINITY, 0.0);
    for j in 0..theta_steps {
        let theta = angle_on_grid(j, theta_steps);
        let p = steer(&patch, theta);
        let dot: Complex64 = t.coeffs().iter().zip(p.coeffs()).map(|(a, b)| a.conj() * b).sum();
        let score = (2.0 * PI * dot.re).clamp(-1.0, 1.0);
        if score > best.0 {
            best = (score, theta);
        }
    }
    Ok(best)
}

/// Sampled Gaussian smoothing and derivative kernels on `-R..=R`,
/// `R = ceil(3 sigma)`, stored for `m >= 0` only (even/odd symmetry).
#[derive(Debug, Clone)]
struct GaussKernels {
    radius: usize,
    smooth: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl GaussKernels {
    fn new(sigma: f64) -> Self {
        let radius = (3.0 * sigma).ceil().max(1.0) as usize;
        let s2 = sigma * sigma;
        let g: Vec<f64> = (0..=radius).map(|m| (-((m * m) as f64) / (2.0 * s2)).exp()).collect();
        let total = g[0] + 2.0 * g[1..].iter().sum::<f64>();
        let smooth: Vec<f64> = g.iter().map(|v| v / total).collect();

        // derivative of the smoothed signal; unit response to a unit ramp
        let mut first: Vec<f64> = (0..=radius).map(|m| m as f64 / s2 * smooth[m]).collect();
        let ramp: f64 = 2.0 * (1..=radius).map(|m| m as f64 * first[m]).sum::<f64>();
        first.iter_mut().for_each(|v| *v /= ramp);

        // zero response to constants, unit response to x^2 / 2
        let mut second: Vec<f64> =
            (0..=radius).map(|m| ((m * m) as f64 / (s2 * s2) - 1.0 / s2) * smooth[m]).collect();
        let dc = second[0] + 2.0 * second[1..].iter().sum::<f64>();
        for (v, g) in second.iter_mut().zip(&smooth) {
            *v -= dc * g;
        }
        let quad: f64 = (1..=radius).map(|m| (m * m) as f64 * second[m]).sum::<f64>();
        second.iter_mut().for_each(|v| *v /= quad);
        Self { radius, smooth, first, second }
    }
}

#[derive(Debug, Clone, Copy)]
enum Tap {
    Smooth,
    First,
    Second,
}

/// Correlation along x (`horizontal`) or along y (pointing up) with mirror
/// borders. Odd kernels act as `sum_m k(m) (f(p + m) - f(p - m))` and the
/// second derivative as `sum_m k(m) (f(p + m) + f(p - m) - 2 f(p))`, so
/// constants map to exactly zero.
fn pass(img: &GrayImage, k: &GaussKernels, tap: Tap, horizontal: bool) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let coeffs = match tap {
        Tap::Smooth => &k.smooth,
        Tap::First => &k.first,
        Tap::Second => &k.second,
    };
    GrayImage::from_fn(w, h, |c, r| {
        let at = |m: isize| {
            if horizontal {
                img.get(mirror(c as isize + m, w), r)
            } else {
                // +y is toward row 0
                img.get(c, mirror(r as isize - m, h))
            }
        };
        let center = at(0);
        let mut acc = match tap {
            Tap::Smooth => coeffs[0] * center,
            _ => 0.0,
        };
        for m in 1..=k.radius as isize {
            let pair = match tap {
                Tap::Smooth => at(m) + at(-m),
                Tap::First => at(m) - at(-m),
                // zero-DC kernel: taken about the center so offsets cancel
                Tap::Second => at(m) + at(-m) - 2.0 * center,
            };
            acc += coeffs[m as usize] * pair;
        }
        acc
    })
}

// Derivative passes always run first, on the raw samples, so an intensity
// offset cancels before any smoothing rounds it.
fn check_scale(img: &GrayImage, scale: f64) -> Result<GaussKernels> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale must be > 0, got {scale}")));
    }
    let k = GaussKernels::new(scale);
    // single reflection at the borders
    if img.width() <= k.radius || img.height() <= k.radius {
        return Err(Error::ImageTooSmall { width: img.width(), height: img.height(), min: k.radius + 1 });
    }
    Ok(k)
}

/// Harris response `det(M) - k trace(M)^2`, with Gaussian-derivative
/// gradients and a Gaussian window, both at `scale`.
pub fn harris(image: &GrayImage, scale: f64, k: f64) -> Result<GrayImage> {
    let g = check_scale(image, scale)?;
    let ix = pass(&pass(image, &g, Tap::First, true), &g, Tap::Smooth, false);
    let iy = pass(&pass(image, &g, Tap::First, false), &g, Tap::Smooth, true);
    let (w, h) = (image.width(), image.height());
    let product = |a: &GrayImage, b: &GrayImage| GrayImage::from_fn(w, h, |c, r| a.get(c, r) * b.get(c, r));
    let window = |m: &GrayImage| pass(&pass(m, &g, Tap::Smooth, true), &g, Tap::Smooth, false);
    let sxx = window(&product(&ix, &ix));
    let syy = window(&product(&iy, &iy));
    let sxy = window(&product(&ix, &iy));
    Ok(GrayImage::from_fn(w, h, |c, r| {
        let (a, b, d) = (sxx.get(c, r), syy.get(c, r), sxy.get(c, r));
        a * b - d * d - k * (a + b) * (a + b)
    }))
}

/// Kitchen-Rosenfeld cornerness
/// `(Ixx Iy^2 - 2 Ixy Ix Iy + Iyy Ix^2) / (Ix^2 + Iy^2)`.
///
/// Bright convex corners come out negative.
pub fn kitchen_rosenfeld(image: &GrayImage, scale: f64) -> Result<GrayImage> {
    let g = check_scale(image, scale)?;
    let ix = pass(&pass(image, &g, Tap::First, true), &g, Tap::Smooth, false);
    let iy = pass(&pass(image, &g, Tap::First, false), &g, Tap::Smooth, true);
    let ixx = pass(&pass(image, &g, Tap::Second, true), &g, Tap::Smooth, false);
    let iyy = pass(&pass(image, &g, Tap::Second, false), &g, Tap::Smooth, true);
    let ixy = pass(&pass(image, &g, Tap::First, true), &g, Tap::First, false);
    let (lo, hi) = image.range();
    let floor = (KR_FLOOR_REL * (hi - lo) * (hi - lo)).max(f64::MIN_POSITIVE);
    Ok(GrayImage::from_fn(image.width(), image.height(), |c, r| {
        let (x, y) = (ix.get(c, r), iy.get(c, r));
        let num = ixx.get(c, r) * y * y - 2.0 * ixy.get(c, r) * x * y + iyy.get(c, r) * x * x;
        num / (x * x + y * y).max(floor)
    }))
}
