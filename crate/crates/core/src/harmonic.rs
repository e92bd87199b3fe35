//! Single-pixel angular spectra: negative orders, reconstruction, steering,
//! and the wedge integral tables.
//!
//! Vectors indexed by wavenumber run `l = -L..=L` in ascending order, so
//! position `i` holds order `i - L`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use crate::{Error, Result};

/// Hermitian angular spectrum `c_{-L}..=c_L` with `c_{-l} = conj(c_l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    max_order: usize,
    coeffs: Vec<Complex64>,
    /// Imaginary part of `c_0` that was discarded by [`Spectrum::extend`].
    dc_residue: f64,
}

impl Spectrum {
    /// Builds the full spectrum from `c_0..=c_L`.
    pub fn extend(nonneg: &[Complex64]) -> Self {
        assert!(!nonneg.is_empty(), "need at least c_0");
        let ll = nonneg.len() - 1;
        let mut coeffs = Vec::with_capacity(2 * ll + 1);
        coeffs.extend(nonneg[1..].iter().rev().map(|c| c.conj()));
        coeffs.push(Complex64::new(nonneg[0].re, 0.0));
        coeffs.extend_from_slice(&nonneg[1..]);
        Self { max_order: ll, coeffs, dc_residue: nonneg[0].im.abs() }
    }

    pub fn zeros(max_order: usize) -> Self {
        Self::extend(&vec![Complex64::new(0.0, 0.0); max_order + 1])
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// All `2L + 1` coefficients, `l = -L..=L`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `c_l` for `-L <= l <= L`.
    pub fn get(&self, l: isize) -> Complex64 {
        self.coeffs[(l + self.max_order as isize) as usize]
    }

    /// `c_0..=c_L`.
    pub fn nonneg(&self) -> &[Complex64] {
        &self.coeffs[self.max_order..]
    }

    pub fn dc_residue(&self) -> f64 {
        self.dc_residue
    }

    pub fn scale(&self, a: f64) -> Self {
        let nonneg: Vec<_> = self.nonneg().iter().map(|c| c * a).collect();
        Self::extend(&nonneg)
    }

    /// `sum_l c_l e^{i l theta}` including the (rounding-level) imaginary part.
    pub fn reconstruct_complex(&self, theta: f64) -> Complex64 {
        let ll = self.max_order as isize;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * Complex64::from_polar(1.0, (i as isize - ll) as f64 * theta))
            .sum()
    }
}

/// Inverse circular-harmonic transform `I(theta) = sum_l c_l e^{i l theta}`.
pub fn reconstruct(s: &Spectrum, theta: f64) -> f64 {
    s.reconstruct_complex(theta).re
}

/// Phase-shifts every `c_l` by `e^{i l theta_delta}`, so that
/// `reconstruct(steer(s, a), t) == reconstruct(s, t + a)`.
pub fn steer(s: &Spectrum, theta_delta: f64) -> Spectrum {
    let nonneg: Vec<_> = s
        .nonneg()
        .iter()
        .enumerate()
        .map(|(l, c)| c * Complex64::from_polar(1.0, l as f64 * theta_delta))
        .collect();
    let mut out = Spectrum::extend(&nonneg);
    out.dc_residue = s.dc_residue;
    out
}

/// `S_l(phi) = integral of e^{i l theta} over [-phi, phi]`.
pub fn s_aux(l: isize, phi_c: f64) -> f64 {
    if l == 0 {
        2.0 * phi_c
    } else {
        2.0 * (l as f64 * phi_c).sin() / l as f64
    }
}

/// Inner/outer integral tables for one wedge geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct WedgeTemplate {
    pub phi_delta: f64,
    pub eps_delta: f64,
    pub phi1: f64,
    pub phi0: f64,
    pub sigma_min_sq: f64,
    max_order: usize,
    /// `S_l(phi1)` for `l = -L..=L`.
    pub s1: Vec<f64>,
    /// `S_l(pi) - S_l(phi0)`.
    pub s0: Vec<f64>,
    /// Row-major `(2L+1)^2`, entry `(m, n)` is `S_{l_m - l_n}(phi1)`.
    pub big_s1: Vec<f64>,
    /// Entry `(m, n)` is `S_{l_m - l_n}(pi) - S_{l_m - l_n}(phi0)`.
    pub big_s0: Vec<f64>,
    /// Toeplitz generators of the matrices, `d = 0..=2L`.
    pub(crate) lag1: Vec<f64>,
    pub(crate) lag0: Vec<f64>,
}

impl WedgeTemplate {
    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn dim(&self) -> usize {
        2 * self.max_order + 1
    }

    /// Length of the inner domain, `2 phi1`.
    pub fn inner_len(&self) -> f64 {
        2.0 * self.phi1
    }

    /// Length of the outer domain, `2 pi - 2 phi0`.
    pub fn outer_len(&self) -> f64 {
        2.0 * PI - 2.0 * self.phi0
    }
}

pub fn build_template(
    phi_delta: f64,
    eps_delta: f64,
    sigma_min_sq: f64,
    max_order: usize,
) -> Result<WedgeTemplate> {
    if !(phi_delta > 0.0 && phi_delta < PI) {
        return Err(Error::InvalidParameter(format!("phi_delta must lie in (0, pi), got {phi_delta}")));
    }
    if !(eps_delta >= 0.0 && eps_delta < phi_delta) {
        return Err(Error::InvalidParameter(format!(
            "eps_delta must lie in [0, phi_delta), got {eps_delta}"
        )));
    }
    if phi_delta + eps_delta >= PI {
        return Err(Error::InvalidParameter(format!(
            "phi_delta + eps_delta must be < pi, got {}",
            phi_delta + eps_delta
        )));
    }
    if !(sigma_min_sq >= 0.0 && sigma_min_sq.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma_min^2 must be >= 0, got {sigma_min_sq}")));
    }
    let phi1 = phi_delta - eps_delta;
    let phi0 = phi_delta + eps_delta;
    let ll = max_order as isize;
    let outer = |l: isize| s_aux(l, PI) - s_aux(l, phi0);
    let s1: Vec<f64> = (-ll..=ll).map(|l| s_aux(l, phi1)).collect();
    let s0: Vec<f64> = (-ll..=ll).map(outer).collect();
    let dim = (2 * max_order + 1) as isize;
    let mut big_s1 = Vec::with_capacity((dim * dim) as usize);
    let mut big_s0 = Vec::with_capacity((dim * dim) as usize);
    for m in 0..dim {
        for n in 0..dim {
            big_s1.push(s_aux(m - n, phi1));
            big_s0.push(outer(m - n));
        }
    }
    let lag1 = (0..dim).map(|d| s_aux(d, phi1)).collect();
    let lag0 = (0..dim).map(outer).collect();
    Ok(WedgeTemplate {
        phi_delta,
        eps_delta,
        phi1,
        phi0,
        sigma_min_sq,
        max_order,
        s1,
        s0,
        big_s1,
        big_s0,
        lag1,
        lag0,
    })
}

/// `(phi_delta, eps_delta, sigma_min^2)` as bit patterns, plus `L`.
type TemplateKey = (u64, u64, u64, usize);

/// Memoizes templates by `(phi_delta, eps_delta, sigma_min^2, L)`.
#[derive(Debug, Default, Clone)]
pub struct TemplateCache {
    inner: Arc<Mutex<HashMap<TemplateKey, Arc<WedgeTemplate>>>>,
}

impl TemplateCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(
        &self,
        phi_delta: f64,
        eps_delta: f64,
        sigma_min_sq: f64,
        max_order: usize,
    ) -> Result<Arc<WedgeTemplate>> {
        let key = (phi_delta.to_bits(), eps_delta.to_bits(), sigma_min_sq.to_bits(), max_order);
        let mut map = self.inner.lock().expect("template cache poisoned");
        if let Some(t) = map.get(&key) {
            return Ok(t.clone());
        }
        let t = Arc::new(build_template(phi_delta, eps_delta, sigma_min_sq, max_order)?);
        map.insert(key, t.clone());
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("template cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `v^T c` for a real vector indexed `l = -L..=L`.
pub fn linear_form(v: &[f64], c: &Spectrum) -> Complex64 {
    v.iter().zip(c.coeffs()).map(|(a, b)| b * *a).sum()
}

/// `c^H S c` for a real row-major matrix.
pub fn hermitian_form(matrix: &[f64], c: &Spectrum) -> Complex64 {
    let cs = c.coeffs();
    let n = cs.len();
    assert_eq!(matrix.len(), n * n);
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..n {
        let mut row = Complex64::new(0.0, 0.0);
        for k in 0..n {
            row += cs[k] * matrix[m * n + k];
        }
        acc += cs[m].conj() * row;
    }
    acc
}
