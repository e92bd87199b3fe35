//! Wedge test statistic `Z_t`, orientation sweep, score maps and detections.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::harmonic::{build_template, hermitian_form, linear_form, steer, Spectrum, WedgeTemplate};
use crate::image::map_rows;
use crate::spectrum::{write_header, SCORE_MAP_MAGIC};
use crate::{BankParams, Error, Result, SpectrumField};

/// Negative variance estimates within this fraction of the second moment
/// are treated as rounding and clamped to zero.
const VARIANCE_CLAMP_REL: f64 = 1e-9;

/// Imaginary residue of the (theoretically real) forms that is flagged.
pub const IMAG_RESIDUE_LIMIT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub template: WedgeTemplate,
    /// Number of equally spaced steering angles over `[0, 2 pi)`.
    pub theta_steps: usize,
    /// Decision threshold `lambda_Delta`, applied to `Z_t` or `Z_F`.
    pub threshold: f64,
    /// Use `Z_F = Z_t^2` instead of the signed statistic.
    pub use_squared: bool,
    /// Chebyshev suppression radius in pixels; 0 disables suppression.
    pub nms_radius: usize,
    pub top_n: Option<usize>,
}

impl DetectorConfig {
    /// Operating point for a wedge of full width `width` (radians):
    /// `eps = phi / 3`, `sigma_min^2 = 255^2`, 24 steering angles.
    pub fn for_width(width: f64, max_order: usize) -> Result<Self> {
        let phi = width / 2.0;
        Ok(Self {
            template: build_template(phi, phi / 3.0, 255.0 * 255.0, max_order)?,
            theta_steps: 24,
            threshold: 0.0,
            use_squared: false,
            nms_radius: 5,
            top_n: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta_steps == 0 {
            return Err(Error::InvalidParameter("theta grid needs at least one angle".into()));
        }
        if !self.threshold.is_finite() {
            return Err(Error::InvalidParameter("threshold must be finite".into()));
        }
        Ok(())
    }

    pub fn angle(&self, j: usize) -> f64 {
        angle_on_grid(j, self.theta_steps)
    }
}

pub(crate) fn angle_on_grid(j: usize, steps: usize) -> f64 {
    2.0 * PI * j as f64 / steps as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Column index.
    pub n_x: usize,
    /// Row index.
    pub n_y: usize,
    pub z: f64,
    /// Estimated orientation in `[0, 2 pi)`, y-up convention.
    pub theta_hat: f64,
}

/// Means and variances over the inner (`1`) and outer (`0`) domains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WedgeMoments {
    pub mu1: f64,
    pub mu0: f64,
    pub var1: f64,
    pub var0: f64,
    /// Largest imaginary part discarded from the bilinear forms.
    pub imag_residue: f64,
}

impl WedgeMoments {
    pub fn z(&self, sigma_min_sq: f64) -> Result<f64> {
        let denom = self.var1 + self.var0 + sigma_min_sq;
        if denom <= 0.0 {
            return Err(Error::ZeroVariance);
        }
        Ok((self.mu1 - self.mu0) / denom.sqrt())
    }
}

fn clamp_variance(second_moment: f64, mean: f64) -> Result<f64> {
    let var = second_moment - mean * mean;
    if var >= 0.0 {
        return Ok(var);
    }
    let tol = VARIANCE_CLAMP_REL * second_moment.abs().max(mean * mean);
    if -var <= tol {
        Ok(0.0)
    } else {
        Err(Error::NegativeVariance { value: var })
    }
}

fn moments_from_forms(
    template: &WedgeTemplate,
    lin1: Complex64,
    lin0: Complex64,
    quad1: Complex64,
    quad0: Complex64,
) -> Result<WedgeMoments> {
    let (len1, len0) = (template.inner_len(), template.outer_len());
    let mu1 = lin1.re / len1;
    let mu0 = lin0.re / len0;
    let var1 = clamp_variance(quad1.re / len1, mu1)?;
    let var0 = clamp_variance(quad0.re / len0, mu0)?;
    let imag_residue = [lin1.im, lin0.im, quad1.im, quad0.im].iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(WedgeMoments { mu1, mu0, var1, var0, imag_residue })
}

fn check_order(s: &Spectrum, template: &WedgeTemplate) -> Result<()> {
    if s.max_order() != template.max_order() {
        return Err(Error::OrderMismatch { spectrum: s.max_order(), template: template.max_order() });
    }
    Ok(())
}

/// Moments of the steered spectrum by explicit vector/matrix forms.
pub fn wedge_moments(s: &Spectrum, template: &WedgeTemplate, theta_delta: f64) -> Result<WedgeMoments> {
    check_order(s, template)?;
    let c = steer(s, theta_delta);
    moments_from_forms(
        template,
        linear_form(&template.s1, &c),
        linear_form(&template.s0, &c),
        hermitian_form(&template.big_s1, &c),
        hermitian_form(&template.big_s0, &c),
    )
}

/// `Z_t = (mu1 - mu0) / sqrt(var1 + var0 + sigma_min^2)` for a wedge
/// hypothesized at orientation `theta_delta`.
pub fn z_statistic(s: &Spectrum, template: &WedgeTemplate, theta_delta: f64) -> Result<f64> {
    wedge_moments(s, template, theta_delta)?.z(template.sigma_min_sq)
}

/// Precomputed per-angle phasors for sweeping one template over a fixed
/// angle grid. Uses the Toeplitz structure of the matrices:
/// `c_t^H S c_t = S(0) R(0) + 2 Re sum_{d>0} S(d) R(d) e^{i d t}` with
/// `R(d) = sum_m conj(c_m) c_{m+d}`.
#[derive(Debug, Clone)]
pub struct SweepPlan<'a> {
    template: &'a WedgeTemplate,
    steps: usize,
    /// `phasors[j][d] = e^{i d theta_j}` for `d = 0..=2L`.
    phasors: Vec<Vec<Complex64>>,
}

impl<'a> SweepPlan<'a> {
    pub fn new(template: &'a WedgeTemplate, steps: usize) -> Self {
        let dmax = 2 * template.max_order();
        let phasors = (0..steps)
            .map(|j| {
                let t = angle_on_grid(j, steps);
                (0..=dmax).map(|d| Complex64::from_polar(1.0, d as f64 * t)).collect()
            })
            .collect();
        Self { template, steps, phasors }
    }

    /// `Z_t` at every grid angle, from `c_0..=c_L`.
    pub fn evaluate(&self, nonneg: &[Complex64], out: &mut Vec<f64>) -> Result<()> {
        let t = self.template;
        let ll = t.max_order();
        if nonneg.len() != ll + 1 {
            return Err(Error::OrderMismatch { spectrum: nonneg.len().saturating_sub(1), template: ll });
        }
        let s = Spectrum::extend(nonneg);
        let c = s.coeffs();
        let n = c.len();
        let mut lag = vec![Complex64::new(0.0, 0.0); n];
        for (d, slot) in lag.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..n - d {
                acc += c[m].conj() * c[m + d];
            }
            *slot = acc;
        }
        let c0 = s.get(0).re;
        out.clear();
        for ph in &self.phasors {
            let mut lin1 = t.s1[ll] * c0;
            let mut lin0 = t.s0[ll] * c0;
            for l in 1..=ll {
                let v = (c[ll + l] * ph[l]).re * 2.0;
                lin1 += t.s1[ll + l] * v;
                lin0 += t.s0[ll + l] * v;
            }
            let mut q1 = t.lag1[0] * lag[0].re;
            let mut q0 = t.lag0[0] * lag[0].re;
            for d in 1..n {
                let v = (lag[d] * ph[d]).re * 2.0;
                q1 += t.lag1[d] * v;
                q0 += t.lag0[d] * v;
            }
            let zero = 0.0;
            let m = moments_from_forms(
                t,
                Complex64::new(lin1, zero),
                Complex64::new(lin0, zero),
                Complex64::new(q1, zero),
                Complex64::new(q0, zero),
            )?;
            out.push(m.z(t.sigma_min_sq)?);
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

fn best_of(values: &[f64], steps: usize, squared: bool) -> (f64, f64) {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (j, &z) in values.iter().enumerate() {
        let v = if squared { z * z } else { z };
        // strict: ties keep the smallest angle
        if v > best {
            best = v;
            arg = j;
        }
    }
    (best, angle_on_grid(arg, steps))
}

/// Maximizes `Z_t` (or `Z_F`) over the configured angle grid; returns
/// `(z_best, theta_hat)`.
pub fn orientation_sweep(s: &Spectrum, config: &DetectorConfig) -> Result<(f64, f64)> {
    config.validate()?;
    check_order(s, &config.template)?;
    let plan = SweepPlan::new(&config.template, config.theta_steps);
    let mut values = Vec::with_capacity(config.theta_steps);
    plan.evaluate(s.nonneg(), &mut values)?;
    Ok(best_of(&values, config.theta_steps, config.use_squared))
}

/// Per-pixel score and orientation, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub width: usize,
    pub height: usize,
    pub z: Vec<f64>,
    pub theta: Vec<f64>,
}

impl ScoreMap {
    pub fn z_at(&self, col: usize, row: usize) -> f64 {
        self.z[row * self.width + col]
    }

    pub fn theta_at(&self, col: usize, row: usize) -> f64 {
        self.theta[row * self.width + col]
    }

    /// Position and value of the largest score (first in row-major order on
    /// ties).
    pub fn argmax(&self) -> (usize, usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, &z) in self.z.iter().enumerate() {
            if z > best.1 {
                best = (i, z);
            }
        }
        (best.0 % self.width, best.0 / self.width, best.1)
    }

    /// `CHZM` dump: the spectrum header followed by one plane of
    /// little-endian f64 scores.
    pub fn write_dump<W: Write>(&self, mut w: W, params: &BankParams) -> Result<()> {
        write_header(&mut w, SCORE_MAP_MAGIC, self.width, self.height, params)?;
        for v in &self.z {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

pub fn score_map(field: &SpectrumField, config: &DetectorConfig) -> Result<ScoreMap> {
    config.validate()?;
    if field.max_order() != config.template.max_order() {
        return Err(Error::OrderMismatch {
            spectrum: field.max_order(),
            template: config.template.max_order(),
        });
    }
    let (w, h) = (field.width(), field.height());
    let plan = SweepPlan::new(&config.template, config.theta_steps);
    let pairs = map_rows(h, |r| {
        let mut values = Vec::with_capacity(config.theta_steps);
        (0..w)
            .map(|c| {
                plan.evaluate(&field.coeffs_at(c, r), &mut values)?;
                Ok(best_of(&values, config.theta_steps, config.use_squared))
            })
            .collect()
    })?;
    let (z, theta) = pairs.into_iter().unzip();
    Ok(ScoreMap { width: w, height: h, z, theta })
}

/// Greedy non-maximum suppression over a score map: candidates above
/// `threshold` in descending score order (row-major on ties); each accepted
/// detection suppresses its Chebyshev neighborhood of `radius`.
pub fn select_detections(map: &ScoreMap, threshold: f64, radius: usize, top_n: Option<usize>) -> Vec<Detection> {
    let (w, h) = (map.width, map.height);
    let mut order: Vec<usize> = (0..map.z.len()).filter(|&i| map.z[i] > threshold).collect();
    order.sort_by(|&a, &b| map.z[b].total_cmp(&map.z[a]).then(a.cmp(&b)));
    let limit = top_n.unwrap_or(usize::MAX);
    let mut blocked = vec![false; w * h];
    let mut out = Vec::new();
    for i in order {
        if out.len() >= limit {
            break;
        }
        if blocked[i] {
            continue;
        }
        let (c, r) = (i % w, i / w);
        out.push(Detection { n_x: c, n_y: r, z: map.z[i], theta_hat: map.theta[i] });
        if radius > 0 {
            for rr in r.saturating_sub(radius)..=(r + radius).min(h - 1) {
                for cc in c.saturating_sub(radius)..=(c + radius).min(w - 1) {
                    blocked[rr * w + cc] = true;
                }
            }
        }
    }
    out
}

pub fn detect(field: &SpectrumField, config: &DetectorConfig) -> Result<Vec<Detection>> {
    let map = score_map(field, config)?;
    Ok(select_detections(&map, config.threshold, config.nms_radius, config.top_n))
}

/// CSV with header `x,y,z,theta_deg`, rows in the given order.
pub fn write_detections_csv<W: Write>(mut w: W, detections: &[Detection]) -> Result<()> {
    writeln!(w, "x,y,z,theta_deg")?;
    for d in detections {
        writeln!(w, "{},{},{},{}", d.n_x, d.n_y, d.z, d.theta_hat.to_degrees())?;
    }
    Ok(())
}
