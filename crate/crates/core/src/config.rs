//! Run configuration shared by the command-line front end.
//!
//! Angles are stored in degrees here, as they appear in config files and
//! flags; everything downstream works in radians.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::harmonic::build_template;
use crate::synth::{DetectorKind, DetectorSettings};
use crate::{BankParams, DetectorConfig, Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub bank: BankParams,
    pub detector: DetectorSection,
    pub io: IoSection,
    pub roc: RocSection,
    pub bench: BenchSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub kind: DetectorKind,
    /// Full wedge width `2 phi_delta`, degrees.
    pub width_deg: f64,
    /// `eps_delta / phi_delta`.
    pub eps_ratio: f64,
    /// Square root of the variance floor, intensity units.
    pub sigma_min: f64,
    pub theta_steps: usize,
    pub threshold: f64,
    pub use_squared: bool,
    pub nms_radius: usize,
    pub top_n: Option<usize>,
    /// Scale of the Harris / Kitchen-Rosenfeld derivatives; defaults to lambda.
    pub corner_scale: Option<f64>,
    pub harris_k: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RocSection {
    pub widths_deg: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub supersample: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub image_size: usize,
    pub repeats: usize,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            kind: DetectorKind::A,
            width_deg: 90.0,
            eps_ratio: 1.0 / 3.0,
            sigma_min: 255.0,
            theta_steps: 24,
            threshold: 0.0,
            use_squared: false,
            nms_radius: 5,
            top_n: None,
            corner_scale: None,
            harris_k: crate::baseline::HARRIS_K,
        }
    }
}

impl Default for RocSection {
    fn default() -> Self {
        Self { widths_deg: vec![45.0, 60.0, 90.0, 120.0, 135.0], trials: 10_000, seed: 1, supersample: 4 }
    }
}

impl Default for BenchSection {
    fn default() -> Self {
        Self { image_size: 512, repeats: 3 }
    }
}

impl RunConfig {
    /// Checks every field against the preconditions of the module that
    /// consumes it.
    pub fn validate(&self) -> Result<()> {
        self.bank.validate()?;
        let d = &self.detector;
        self.wedge_config()?;
        for w in &self.roc.widths_deg {
            check_width(*w)?;
        }
        if let Some(s) = d.corner_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter(format!("corner scale must be > 0, got {s}")));
            }
        }
        if self.roc.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if self.roc.supersample == 0 {
            return Err(Error::InvalidParameter("supersample must be >= 1".into()));
        }
        if self.bench.repeats == 0 {
            return Err(Error::InvalidParameter("repeats must be >= 1".into()));
        }
        if self.bench.image_size < self.bank.taps() {
            return Err(Error::InvalidParameter(format!(
                "bench image size {} is smaller than the kernel ({})",
                self.bench.image_size,
                self.bank.taps()
            )));
        }
        Ok(())
    }

    /// Wedge detector settings for `detector.width_deg`.
    pub fn wedge_config(&self) -> Result<DetectorConfig> {
        let d = &self.detector;
        check_width(d.width_deg)?;
        if !(d.eps_ratio >= 0.0 && d.eps_ratio < 1.0) {
            return Err(Error::InvalidParameter(format!("eps ratio must lie in [0, 1), got {}", d.eps_ratio)));
        }
        if !(d.sigma_min >= 0.0 && d.sigma_min.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma_min must be >= 0, got {}", d.sigma_min)));
        }
        let phi = d.width_deg.to_radians() / 2.0;
        let cfg = DetectorConfig {
            template: build_template(phi, d.eps_ratio * phi, d.sigma_min * d.sigma_min, self.bank.max_order)?,
            theta_steps: d.theta_steps,
            threshold: d.threshold,
            use_squared: d.use_squared,
            nms_radius: d.nms_radius,
            top_n: d.top_n,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn detector_settings(&self) -> DetectorSettings {
        let d = &self.detector;
        DetectorSettings {
            bank: self.bank,
            eps_ratio: d.eps_ratio,
            sigma_min: d.sigma_min,
            theta_steps: d.theta_steps,
            corner_scale: d.corner_scale.unwrap_or(self.bank.lambda),
            harris_k: d.harris_k,
        }
    }
}

fn check_width(width_deg: f64) -> Result<()> {
    if !(width_deg > 0.0 && width_deg < 360.0) {
        return Err(Error::InvalidParameter(format!("wedge width must lie in (0, 360) degrees, got {width_deg}")));
    }
    Ok(())
}
