#![allow(dead_code)]

use std::f64::consts::PI;

use circharm::harmonic::reconstruct;
use circharm::{Complex64, GrayImage, Spectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WIDTHS_DEG: [f64; 5] = [45.0, 60.0, 90.0, 120.0, 135.0];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform 0..255 noise, integer valued.
pub fn noise_image(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut r = rng(seed);
    GrayImage::from_fn(width, height, |_, _| r.random_range(0..=255) as f64)
}

/// Spectrum with a positive mean and decaying random harmonics.
pub fn random_spectrum<R: Rng>(rng: &mut R, max_order: usize) -> Spectrum {
    let mut c = vec![Complex64::new(rng.random_range(50.0..200.0), 0.0)];
    for l in 1..=max_order {
        let a = 60.0 / l as f64;
        c.push(Complex64::new(rng.random_range(-a..a), rng.random_range(-a..a)));
    }
    Spectrum::extend(&c)
}

/// Spectrum of a strictly positive angular profile: the harmonics together
/// swing at most 90% of the mean, so every domain average stays well away
/// from zero and relative errors are meaningful.
pub fn intensity_spectrum<R: Rng>(rng: &mut R, max_order: usize) -> Spectrum {
    let c0: f64 = rng.random_range(60.0..200.0);
    let weights: Vec<f64> = (1..=max_order).map(|_| rng.random_range(0.0..1.0)).collect();
    let total: f64 = weights.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let mut c = vec![Complex64::new(c0, 0.0)];
    for w in weights {
        let amp = 0.45 * c0 * w / total;
        c.push(Complex64::from_polar(amp, rng.random_range(0.0..2.0 * PI)));
    }
    Spectrum::extend(&c)
}

/// Trapezoid rule with `n` points on `[a, b]`.
pub fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / (n - 1) as f64;
    let inner: f64 = (1..n - 1).map(|i| f(a + i as f64 * h)).sum();
    h * (inner + 0.5 * (f(a) + f(b)))
}

/// Mean and centered variance of the reconstruction over `[-phi1, phi1]`
/// by quadrature.
pub fn inner_moments(s: &Spectrum, phi1: f64, n: usize) -> (f64, f64) {
    let len = 2.0 * phi1;
    let mean = trapezoid(|t| reconstruct(s, t), -phi1, phi1, n) / len;
    let var = trapezoid(|t| (reconstruct(s, t) - mean).powi(2), -phi1, phi1, n) / len;
    (mean, var)
}

/// Same over `[-pi, -phi0] U [phi0, pi]`.
pub fn outer_moments(s: &Spectrum, phi0: f64, n: usize) -> (f64, f64) {
    let len = 2.0 * (PI - phi0);
    let both = |f: &dyn Fn(f64) -> f64| trapezoid(f, -PI, -phi0, n) + trapezoid(f, phi0, PI, n);
    let mean = both(&|t| reconstruct(s, t)) / len;
    let var = both(&|t| (reconstruct(s, t) - mean).powi(2)) / len;
    (mean, var)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
