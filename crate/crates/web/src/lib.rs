//! Browser bindings for the `circharm` library.
//!
//! Each exported operation has a plain Rust counterpart returning
//! `circharm::Result`, so the logic can be tested natively; the
//! `#[wasm_bindgen]` wrappers only convert errors.

use std::f64::consts::PI;

use circharm::harmonic::{reconstruct, Spectrum};
use circharm::kernel_bank::{basis_filter, frequency_response, DEFAULT_DFT_SIZE};
use circharm::spectrum::compute_spectrum;
use circharm::synth::{render_wedge_sized, WedgeScene};
use circharm::wedge::{score_map, z_statistic, DetectorConfig, ScoreMap};
use circharm::{BankParams, Error, GrayImage, Result, SpectrumField};
use wasm_bindgen::prelude::*;

/// Bank used by the demo for a given scale: `K = ceil(4 lambda)`, `L = 6`.
pub fn demo_params(lambda: f64) -> Result<BankParams> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    BankParams::new(lambda, (4.0 * lambda).ceil() as usize, 6)
}

/// Grayscale RGBA, `lo` black and `hi` white.
pub fn gray_rgba(values: &[f64], lo: f64, hi: f64) -> Vec<u8> {
    let span = if hi > lo { hi - lo } else { 1.0 };
    values
        .iter()
        .flat_map(|&v| {
            let g = (255.0 * (v - lo) / span).round().clamp(0.0, 255.0) as u8;
            [g, g, g, 255]
        })
        .collect()
}

/// Blue-white-red RGBA for signed data, saturating at `|v| = scale`.
pub fn diverging_rgba(values: &[f64], scale: f64) -> Vec<u8> {
    let scale = if scale > 0.0 { scale } else { 1.0 };
    values
        .iter()
        .flat_map(|&v| {
            let t = (v / scale).clamp(-1.0, 1.0);
            let fade = (255.0 * (1.0 - t.abs())).round() as u8;
            if t >= 0.0 {
                [255, fade, fade, 255]
            } else {
                [fade, fade, 255, 255]
            }
        })
        .collect()
}

fn abs_max(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Basis filter `h_l` as an upright `(2K+1)^2` RGBA image. `part` is one of
/// `re`, `im`, `mag` or `freq` (centered magnitude response).
pub fn basis_rgba(l: usize, lambda: f64, part: &str) -> Result<Vec<u8>> {
    let p = demo_params(lambda)?;
    if part == "freq" {
        let resp = frequency_response(l, &p, DEFAULT_DFT_SIZE)?;
        let (lo, hi) = resp.range();
        return Ok(gray_rgba(resp.data(), lo, hi));
    }
    let f = basis_filter(l, &p)?;
    let k = p.half_width as isize;
    // top row is +m_y
    let values: Vec<_> = (-k..=k).rev().flat_map(|my| (-k..=k).map(move |mx| (mx, my))).map(|(mx, my)| f.get(mx, my)).collect();
    Ok(match part {
        "re" => {
            let v: Vec<f64> = values.iter().map(|c| c.re).collect();
            diverging_rgba(&v, abs_max(&v))
        }
        "im" => {
            let v: Vec<f64> = values.iter().map(|c| c.im).collect();
            diverging_rgba(&v, abs_max(&v))
        }
        "mag" => {
            let v: Vec<f64> = values.iter().map(|c| c.norm()).collect();
            gray_rgba(&v, 0.0, abs_max(&v))
        }
        other => return Err(Error::InvalidParameter(format!("unknown part {other:?}"))),
    })
}

/// Side length of the images returned by [`render_basis`].
#[wasm_bindgen(js_name = basisSize)]
pub fn basis_size(lambda: f64, part: &str) -> usize {
    match (part, demo_params(lambda)) {
        ("freq", _) => DEFAULT_DFT_SIZE,
        (_, Ok(p)) => p.taps(),
        _ => 0,
    }
}

#[wasm_bindgen(js_name = renderBasis)]
pub fn render_basis(l: usize, lambda: f64, part: &str) -> std::result::Result<Vec<u8>, JsError> {
    basis_rgba(l, lambda, part).map_err(|e| JsError::new(&e.to_string()))
}

/// One synthetic wedge frame with its spectrum and score map.
#[wasm_bindgen]
pub struct WedgeDemo {
    frame: GrayImage,
    field: SpectrumField,
    config: DetectorConfig,
    map: ScoreMap,
}

impl WedgeDemo {
    /// Renders a `size^2` frame holding a wedge of full width
    /// `wedge_width_deg` pointing along `orientation_deg` (y up), apex at
    /// `(apex_dx, apex_dy)` from the center, and scores it with a template
    /// of full width `template_width_deg`.
    pub fn build(
        size: usize,
        wedge_width_deg: f64,
        orientation_deg: f64,
        apex_dx: f64,
        apex_dy: f64,
        template_width_deg: f64,
        lambda: f64,
    ) -> Result<Self> {
        let params = demo_params(lambda)?;
        if !(0.0..360.0).contains(&wedge_width_deg) || !(template_width_deg > 0.0 && template_width_deg < 360.0) {
            return Err(Error::InvalidParameter("widths must lie in (0, 360) degrees".into()));
        }
        let scene = WedgeScene {
            width: wedge_width_deg.to_radians(),
            orientation: orientation_deg.to_radians(),
            apex_radius: apex_dx.hypot(apex_dy),
            apex_angle: apex_dy.atan2(apex_dx),
        };
        let frame = render_wedge_sized(&scene, size, 4)?;
        let field = compute_spectrum(&frame, &circharm::kernel_bank::build_bank(params)?)?;
        let config = DetectorConfig::for_width(template_width_deg.to_radians(), params.max_order)?;
        let map = score_map(&field, &config)?;
        Ok(Self { frame, field, config, map })
    }

    pub fn score_map(&self) -> &ScoreMap {
        &self.map
    }

    fn check(&self, col: usize, row: usize) -> Result<()> {
        if col >= self.frame.width() || row >= self.frame.height() {
            return Err(Error::InvalidParameter(format!("pixel ({col}, {row}) is outside the frame")));
        }
        Ok(())
    }

    fn spectrum_at(&self, col: usize, row: usize) -> Result<Spectrum> {
        self.check(col, row)?;
        Ok(Spectrum::extend(&self.field.coeffs_at(col, row)))
    }

    /// Truncated angular profile `f(theta)` at a pixel, `samples` points
    /// from 0 to 2 pi (exclusive).
    pub fn angular_profile(&self, col: usize, row: usize, samples: usize) -> Result<Vec<f64>> {
        let s = self.spectrum_at(col, row)?;
        Ok((0..samples).map(|j| reconstruct(&s, 2.0 * PI * j as f64 / samples as f64)).collect())
    }

    /// `Z_t(theta)` at a pixel on a grid of `steps` steering angles.
    pub fn z_curve(&self, col: usize, row: usize, steps: usize) -> Result<Vec<f64>> {
        let s = self.spectrum_at(col, row)?;
        (0..steps).map(|j| z_statistic(&s, &self.config.template, 2.0 * PI * j as f64 / steps as f64)).collect()
    }
}

fn js_err(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
impl WedgeDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(
        size: usize,
        wedge_width_deg: f64,
        orientation_deg: f64,
        apex_dx: f64,
        apex_dy: f64,
        template_width_deg: f64,
        lambda: f64,
    ) -> std::result::Result<WedgeDemo, JsError> {
        Self::build(size, wedge_width_deg, orientation_deg, apex_dx, apex_dy, template_width_deg, lambda).map_err(js_err)
    }

    #[wasm_bindgen(getter)]
    pub fn size(&self) -> usize {
        self.frame.width()
    }

    #[wasm_bindgen(js_name = frameRgba)]
    pub fn frame_rgba(&self) -> Vec<u8> {
        gray_rgba(self.frame.data(), 0.0, 255.0)
    }

    #[wasm_bindgen(js_name = scoreRgba)]
    pub fn score_rgba(&self) -> Vec<u8> {
        diverging_rgba(&self.map.z, abs_max(&self.map.z))
    }

    /// `[col, row, z, theta_deg]` of the strongest response.
    pub fn peak(&self) -> Vec<f64> {
        let (c, r, z) = self.map.argmax();
        vec![c as f64, r as f64, z, self.map.theta_at(c, r).to_degrees()]
    }

    /// `[z, theta_deg]` at one pixel.
    #[wasm_bindgen(js_name = scoreAt)]
    pub fn score_at(&self, col: usize, row: usize) -> std::result::Result<Vec<f64>, JsError> {
        self.check(col, row).map_err(js_err)?;
        Ok(vec![self.map.z_at(col, row), self.map.theta_at(col, row).to_degrees()])
    }

    #[wasm_bindgen(js_name = angularProfile)]
    pub fn angular_profile_js(&self, col: usize, row: usize, samples: usize) -> std::result::Result<Vec<f64>, JsError> {
        self.angular_profile(col, row, samples).map_err(js_err)
    }

    #[wasm_bindgen(js_name = zCurve)]
    pub fn z_curve_js(&self, col: usize, row: usize, steps: usize) -> std::result::Result<Vec<f64>, JsError> {
        self.z_curve(col, row, steps).map_err(js_err)
    }
}
