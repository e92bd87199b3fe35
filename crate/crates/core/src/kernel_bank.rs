//! Filter-bank synthesis.
//!
//! The order-`l` polar basis filter
//! `psi_l(r, theta) = r^l exp(-r^2 / 2 lambda^2) exp(i l theta)`
//! expands exactly into `l + 1` Cartesian-separable products
//! `Gamma(k, l-k) H_k(x) H_{l-k}(y)` with `H_k(x) = x^k exp(-x^2 / 2 lambda^2)`
//! and `Gamma(k, l-k) = C(l, k) i^(l-k)`. The bank stores the sampled `H_k`,
//! the `Gamma` table and the normalization `rho_l = sum |h_l|^2`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default DFT size for [`isotropy_metric`].
pub const DEFAULT_DFT_SIZE: usize = 256;

/// Number of ring samples used by [`isotropy_metric`].
const RING_SAMPLES: usize = 720;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BankParams {
    /// Spatial scale in pixels.
    pub lambda: f64,
    /// Kernel half-width; kernels have `2K + 1` taps.
    pub half_width: usize,
    /// Maximum angular wavenumber.
    pub max_order: usize,
}

impl Default for BankParams {
    fn default() -> Self {
        Self { lambda: 3.0, half_width: 12, max_order: 6 }
    }
}

impl BankParams {
    pub fn new(lambda: f64, half_width: usize, max_order: usize) -> Result<Self> {
        let p = Self { lambda, half_width, max_order };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if self.half_width < 1 {
            return Err(Error::InvalidParameter("kernel half-width K must be >= 1".into()));
        }
        // C(L, L/2) must stay exact in an i64.
        if self.max_order > 60 {
            return Err(Error::InvalidParameter(format!(
                "max order L = {} is too large (limit 60)",
                self.max_order
            )));
        }
        Ok(())
    }

    /// Kernel length `M = 2K + 1`.
    pub fn taps(&self) -> usize {
        2 * self.half_width + 1
    }

    fn check_order(&self, l: usize) -> Result<()> {
        if l > self.max_order {
            return Err(Error::InvalidParameter(format!(
                "order {l} outside 0..={}",
                self.max_order
            )));
        }
        Ok(())
    }
}

/// Exact `C(l, k) i^(l-k)`, kept as a Gaussian integer so no trig rounding
/// enters the combination step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gamma {
    pub re: i64,
    pub im: i64,
}

impl Gamma {
    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re as f64, self.im as f64)
    }

    pub fn conj(self) -> Self {
        Self { re: self.re, im: -self.im }
    }
}

fn binomial(n: usize, k: usize) -> i64 {
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i128 / (i + 1) as i128;
    }
    acc as i64
}

/// `Gamma(k, l-k)` as an exact Gaussian integer.
pub fn gamma_exact(l: usize, k: usize) -> Result<Gamma> {
    if k > l {
        return Err(Error::InvalidParameter(format!("gamma needs 0 <= k <= l, got k={k}, l={l}")));
    }
    let b = binomial(l, k);
    Ok(match (l - k) % 4 {
        0 => Gamma { re: b, im: 0 },
        1 => Gamma { re: 0, im: b },
        2 => Gamma { re: -b, im: 0 },
        _ => Gamma { re: 0, im: -b },
    })
}

/// `Gamma(k, l-k) = C(l, k) (cos(pi (l-k) / 2) + i sin(pi (l-k) / 2))`.
///
/// Signed arguments so negative `k` is reported rather than unrepresentable.
pub fn gamma_coeff(l: i64, k: i64) -> Result<Complex64> {
    if k < 0 || l < 0 || k > l {
        return Err(Error::InvalidParameter(format!("gamma needs 0 <= k <= l, got k={k}, l={l}")));
    }
    Ok(gamma_exact(l as usize, k as usize)?.to_complex())
}

#[inline]
fn hermite_value(k: usize, x: f64, lambda: f64) -> f64 {
    // powi(0) == 1 including at x = 0
    x.powi(k as i32) * (-x * x / (2.0 * lambda * lambda)).exp()
}

/// Sampled `H_k(m)` for `m = -K..=K`; entry `K + m` holds `H_k(m)`.
///
/// The spectrum passes correlate with this vector, which is the same as
/// convolving with its reversal.
pub fn hermite_kernel(k: usize, params: &BankParams) -> Result<Vec<f64>> {
    params.validate()?;
    params.check_order(k)?;
    let kk = params.half_width as isize;
    Ok((-kk..=kk).map(|m| hermite_value(k, m as f64, params.lambda)).collect())
}

/// Densely sampled order-`l` basis filter, `(2K+1)^2` complex taps.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisFilter2D {
    pub l: usize,
    pub half_width: usize,
    /// Row-major over `m_y` then `m_x`, both ascending from `-K`.
    pub values: Vec<Complex64>,
}

impl BasisFilter2D {
    pub fn taps(&self) -> usize {
        2 * self.half_width + 1
    }

    /// `h_l(m_x, m_y)` with `m` in `-K..=K` and `m_y` pointing up.
    pub fn get(&self, mx: isize, my: isize) -> Complex64 {
        let k = self.half_width as isize;
        let n = self.taps();
        self.values[(my + k) as usize * n + (mx + k) as usize]
    }

    pub fn sum(&self) -> Complex64 {
        self.values.iter().sum()
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Samples `r^l exp(-r^2 / 2 lambda^2) (cos l theta + i sin l theta)` on the
/// integer grid. Ground-truth form, used by the direct oracle and
/// diagnostics only.
pub fn basis_filter(l: usize, params: &BankParams) -> Result<BasisFilter2D> {
    params.validate()?;
    params.check_order(l)?;
    let k = params.half_width as isize;
    let two_lambda_sq = 2.0 * params.lambda * params.lambda;
    let mut values = Vec::with_capacity(params.taps() * params.taps());
    for my in -k..=k {
        for mx in -k..=k {
            let (x, y) = (mx as f64, my as f64);
            let r2 = x * x + y * y;
            let radial = r2.sqrt().powi(l as i32) * (-r2 / two_lambda_sq).exp();
            let theta = y.atan2(x);
            let phase = l as f64 * theta;
            values.push(Complex64::new(radial * phase.cos(), radial * phase.sin()));
        }
    }
    Ok(BasisFilter2D { l, half_width: params.half_width, values })
}

/// `rho_l = sum over the grid of |h_l(m_x, m_y)|^2`.
pub fn rho_norm(l: usize, params: &BankParams) -> Result<f64> {
    Ok(basis_filter(l, params)?.energy())
}

/// Immutable filter-bank data shared by every spectrum computation.
#[derive(Debug, Clone)]
pub struct KernelBank {
    params: BankParams,
    hermite: Vec<Vec<f64>>,
    /// `gamma[l][k]` for `k = 0..=l`.
    gamma: Vec<Vec<Gamma>>,
    rho: Vec<f64>,
}

impl KernelBank {
    pub fn params(&self) -> &BankParams {
        &self.params
    }

    pub fn max_order(&self) -> usize {
        self.params.max_order
    }

    pub fn half_width(&self) -> usize {
        self.params.half_width
    }

    pub fn hermite(&self, k: usize) -> &[f64] {
        &self.hermite[k]
    }

    pub fn gamma(&self, l: usize, k: usize) -> Gamma {
        self.gamma[l][k]
    }

    pub fn rho(&self, l: usize) -> f64 {
        self.rho[l]
    }

    pub fn rho_all(&self) -> &[f64] {
        &self.rho
    }

    /// Rebuilds `h_l` from the separable components,
    /// `sum_k Gamma(k, l-k) H_k(m_x) H_{l-k}(m_y)`.
    pub fn separable_filter(&self, l: usize) -> BasisFilter2D {
        let n = self.params.taps();
        let mut values = Vec::with_capacity(n * n);
        for iy in 0..n {
            for ix in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..=l {
                    let g = self.gamma[l][k].to_complex();
                    acc += g * (self.hermite[k][ix] * self.hermite[l - k][iy]);
                }
                values.push(acc);
            }
        }
        BasisFilter2D { l, half_width: self.params.half_width, values }
    }
}

/// Builds all Hermite kernels, the `Gamma` table and `rho_l` for `l = 0..=L`.
pub fn build_bank(params: BankParams) -> Result<KernelBank> {
    params.validate()?;
    let ll = params.max_order;
    let hermite = (0..=ll).map(|k| hermite_kernel(k, &params)).collect::<Result<Vec<_>>>()?;
    let gamma = (0..=ll)
        .map(|l| (0..=l).map(|k| gamma_exact(l, k)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let rho = (0..=ll).map(|l| rho_norm(l, &params)).collect::<Result<Vec<_>>>()?;

    let kk = params.half_width;
    for (k, h) in hermite.iter().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for m in 1..=kk {
            if h[kk - m] != sign * h[kk + m] {
                return Err(Error::InvalidParameter(format!(
                    "hermite kernel {k} lost its parity at m={m}"
                )));
            }
        }
    }
    if let Some(l) = rho.iter().position(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidParameter(format!("rho_{l} = {} is not positive", rho[l])));
    }
    Ok(KernelBank { params, hermite, gamma, rho })
}

/// Zero-padded `n x n` DFT of a basis filter; bin `(ix, iy)` sits at
/// `iy * n + ix` and `m_y` is the row-direction index.
fn dft2(filter: &BasisFilter2D, n: usize) -> Vec<Complex64> {
    let mut grid = vec![Complex64::new(0.0, 0.0); n * n];
    let k = filter.half_width as isize;
    for my in -k..=k {
        for mx in -k..=k {
            let iy = my.rem_euclid(n as isize) as usize;
            let ix = mx.rem_euclid(n as isize) as usize;
            grid[iy * n + ix] = filter.get(mx, my);
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    for row in grid.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); n];
    for ix in 0..n {
        for iy in 0..n {
            column[iy] = grid[iy * n + ix];
        }
        fft.process(&mut column);
        for iy in 0..n {
            grid[iy * n + ix] = column[iy];
        }
    }
    grid
}

fn check_dft_size(params: &BankParams, dft_size: usize) -> Result<()> {
    if dft_size < 4 * params.half_width {
        return Err(Error::InvalidParameter(format!(
            "dft_size {dft_size} cannot resolve a {}-tap kernel (need >= {})",
            params.taps(),
            4 * params.half_width
        )));
    }
    Ok(())
}

/// Magnitude of the order-`l` filter's frequency response on a
/// `dft_size x dft_size` grid, DC at the center, `omega_y` increasing
/// upward.
pub fn frequency_response(l: usize, params: &BankParams, dft_size: usize) -> Result<crate::GrayImage> {
    let filter = basis_filter(l, params)?;
    check_dft_size(params, dft_size)?;
    let n = dft_size;
    let grid = dft2(&filter, n);
    let half = n / 2;
    Ok(crate::GrayImage::from_fn(n, n, |c, r| {
        let ix = (c + n - half) % n;
        let iy = (half + n - r) % n;
        grid[iy * n + ix].norm()
    }))
}

/// Frequency-response isotropy of the order-`l` basis filter.
///
/// The filter is zero-padded to `dft_size^2` and transformed to find the
/// radial frequency of peak response (for `l = 0`, whose peak sits at DC,
/// the half-peak radius along `omega_x` is used instead). The response
/// magnitude is then evaluated exactly on that ring and the result is
/// `(max - min) / peak`.
pub fn isotropy_metric(l: usize, params: &BankParams, dft_size: usize) -> Result<f64> {
    let filter = basis_filter(l, params)?;
    check_dft_size(params, dft_size)?;
    let k = params.half_width as isize;
    let n = dft_size;
    let grid = dft2(&filter, n);

    let freq = |i: usize| {
        let s = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
        2.0 * std::f64::consts::PI * s / n as f64
    };
    let (mut peak, mut peak_at) = (0.0f64, (0usize, 0usize));
    for iy in 0..n {
        for ix in 0..n {
            let m = grid[iy * n + ix].norm();
            if m > peak {
                peak = m;
                peak_at = (ix, iy);
            }
        }
    }
    if peak == 0.0 {
        return Err(Error::InvalidParameter("filter has an all-zero response".into()));
    }
    let mut radius = freq(peak_at.0).hypot(freq(peak_at.1));
    if radius == 0.0 {
        // walk out along +omega_x to the half-peak crossing
        let mut i = 0;
        while i < n / 2 && grid[i].norm() > 0.5 * peak {
            i += 1;
        }
        radius = freq(i.max(1));
    }

    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for j in 0..RING_SAMPLES {
        let a = 2.0 * std::f64::consts::PI * j as f64 / RING_SAMPLES as f64;
        let (wx, wy) = (radius * a.cos(), radius * a.sin());
        let mut acc = Complex64::new(0.0, 0.0);
        for my in -k..=k {
            for mx in -k..=k {
                let phase = -(wx * mx as f64 + wy * my as f64);
                acc += filter.get(mx, my) * Complex64::from_polar(1.0, phase);
            }
        }
        let m = acc.norm();
        lo = lo.min(m);
        hi = hi.max(m);
        peak = peak.max(m);
    }
    Ok((hi - lo) / peak)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_params() -> BankParams {
        BankParams::new(3.0, 12, 6).unwrap()
    }

    #[test]
    fn frequency_response_is_centered() {
        let p = default_params();
        let r0 = frequency_response(0, &p, 64).unwrap();
        let dc = basis_filter(0, &p).unwrap().sum().re;
        assert!((r0.get(32, 32) - dc).abs() < 1e-9 * dc);
        assert_eq!(r0.range().1, r0.get(32, 32));
        let r2 = frequency_response(2, &p, 64).unwrap();
        assert!(r2.get(32, 32) < 1e-9 * r2.range().1);
        // |H_1| is even under omega -> -omega for a real-symmetric magnitude
        let r1 = frequency_response(1, &p, 64).unwrap();
        assert!((r1.get(40, 30) - r1.get(24, 34)).abs() < 1e-9 * r1.range().1);
        assert!(frequency_response(0, &p, 40).is_err());
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_coeff(0, 0).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(gamma_coeff(1, 0).unwrap(), Complex64::new(0.0, 1.0));
        assert_eq!(gamma_coeff(4, 2).unwrap(), Complex64::new(-6.0, 0.0));
        assert!(gamma_coeff(3, 4).is_err());
        assert!(gamma_coeff(3, -1).is_err());
    }

    #[test]
    fn gamma_matches_trig_form() {
        for l in 0..=12i64 {
            for k in 0..=l {
                let g = gamma_coeff(l, k).unwrap();
                let b = binomial(l as usize, k as usize) as f64;
                let a = std::f64::consts::FRAC_PI_2 * (l - k) as f64;
                assert!((g.re - b * a.cos()).abs() < 1e-9 * b);
                assert!((g.im - b * a.sin()).abs() < 1e-9 * b);
            }
        }
    }

    #[test]
    fn gamma_row_magnitudes_sum_to_power_of_two() {
        for l in 0..=20usize {
            let s: i64 = (0..=l).map(|k| {
                let g = gamma_exact(l, k).unwrap();
                g.re.abs() + g.im.abs()
            }).sum();
            assert_eq!(s, 1i64 << l);
        }
    }

    #[test]
    fn hermite_examples() {
        let p = default_params();
        let kk = p.half_width;
        assert_eq!(hermite_kernel(0, &p).unwrap()[kk], 1.0);
        let h1 = hermite_kernel(1, &p).unwrap();
        assert_eq!(h1[kk - 3], -h1[kk + 3]);
        let h2 = hermite_kernel(2, &p).unwrap();
        assert!((h2[kk + 3].abs() - 9.0 * (-0.5f64).exp()).abs() < 1e-12);
        assert!((h2[kk + 3] - 5.4588).abs() < 1e-4);
        assert!(hermite_kernel(7, &p).is_err());
    }

    #[test]
    fn basis_filter_examples() {
        let p = default_params();
        assert_eq!(basis_filter(0, &p).unwrap().get(0, 0), Complex64::new(1.0, 0.0));
        assert_eq!(basis_filter(3, &p).unwrap().get(0, 0), Complex64::new(0.0, 0.0));
        let v = basis_filter(1, &p).unwrap().get(1, 0);
        assert!((v.re - (-1.0f64 / 18.0).exp()).abs() < 1e-15);
        assert!(v.im.abs() < 1e-15);
        assert!((v.re - 0.9460).abs() < 1e-4);
    }

    #[test]
    fn rho_zero_is_near_continuum_value() {
        let p = default_params();
        let rho0 = rho_norm(0, &p).unwrap();
        // independent double sum of exp(-r^2 / lambda^2)
        let mut s = 0.0;
        for y in -12i32..=12 {
            for x in -12i32..=12 {
                s += (-((x * x + y * y) as f64) / 9.0).exp();
            }
        }
        assert!((rho0 - s).abs() < 1e-12 * s);
        assert!((rho0 - 28.27).abs() < 0.01);
        assert!((rho0 - 9.0 * std::f64::consts::PI).abs() < 0.01);
    }

    #[test]
    fn build_bank_shapes() {
        let bank = build_bank(default_params()).unwrap();
        assert_eq!((0..=6).map(|k| bank.hermite(k).len()).collect::<Vec<_>>(), vec![25; 7]);
        let gammas: usize = (0..=6).map(|l| bank.gamma[l].len()).sum();
        assert_eq!(gammas, 28);
        assert_eq!(bank.rho_all().len(), 7);
        assert!(bank.rho_all().iter().all(|&r| r > 0.0));

        let tiny = build_bank(BankParams::new(1.0, 1, 0).unwrap()).unwrap();
        assert_eq!(tiny.hermite(0).len(), 3);
        assert_eq!(tiny.rho_all().len(), 1);
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(BankParams::new(0.0, 12, 6).is_err());
        assert!(BankParams::new(-1.0, 12, 6).is_err());
        assert!(BankParams::new(3.0, 0, 6).is_err());
        assert!(BankParams::new(f64::NAN, 12, 6).is_err());
    }

    #[test]
    fn separable_reconstruction_matches_polar_sampling() {
        let p = default_params();
        let bank = build_bank(p).unwrap();
        for l in 0..=6 {
            let polar = basis_filter(l, &p).unwrap();
            let sep = bank.separable_filter(l);
            let scale = polar.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for (a, b) in polar.values.iter().zip(&sep.values) {
                assert!((a - b).norm() < 1e-12 * scale, "l={l}: {a} vs {b}");
            }
            let rho_sep = sep.energy();
            assert!((rho_sep - bank.rho(l)).abs() < 1e-12 * bank.rho(l));
        }
    }

    #[test]
    fn grid_sum_vanishes_unless_order_is_a_multiple_of_four() {
        let p = default_params();
        for l in [1, 2, 3, 5, 6] {
            let f = basis_filter(l, &p).unwrap();
            let scale = f.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(f.sum().norm() < 1e-12 * scale, "l={l} sum {}", f.sum());
        }
        // r^4 cos 4theta = x^4 - 6 x^2 y^2 + y^4 shares the square grid's
        // symmetry; on the truncated window it sums to 2 S0 S4 - 6 S2^2.
        let moment = |p: i32| -> f64 {
            (-12i32..=12).map(|m| (m as f64).powi(p) * (-(m * m) as f64 / 18.0).exp()).sum()
        };
        let lattice = 2.0 * moment(0) * moment(4) - 6.0 * moment(2) * moment(2);
        let f4 = basis_filter(4, &p).unwrap();
        assert!((f4.sum().re - lattice).abs() < 1e-9 * lattice.abs());
        assert!(f4.sum().im.abs() < 1e-9);
        assert!(lattice < -70.0 && lattice > -72.0);
    }

    #[test]
    fn reflection_parity() {
        let p = default_params();
        for l in 0..=6 {
            let f = basis_filter(l, &p).unwrap();
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            let scale = f.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for my in -12isize..=12 {
                for mx in -12isize..=12 {
                    let d = f.get(-mx, -my) - f.get(mx, my) * sign;
                    assert!(d.norm() < 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn isotropy_rejects_small_dft() {
        assert!(isotropy_metric(0, &default_params(), 40).is_err());
    }
}
