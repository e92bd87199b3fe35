//! Circular-harmonic spectra of grayscale images, computed with
//! Cartesian-separable Laguerre-Gauss/Hermite filter banks, and a
//! variance-aware wedge detector built on top of them.
//!
//! Pipeline:
//!
//! 1. [`kernel_bank`] synthesizes the 1-D Hermite component kernels, the
//!    complex combination coefficients and the per-order normalization.
//! 2. [`spectrum`] runs two 1-D passes per component and combines them into
//!    the per-pixel spectrum `C_l`, with a direct 2-D oracle alongside.
//! 3. [`harmonic`] works on one pixel's spectrum: negative orders, angular
//!    reconstruction, steering and the wedge integral tables.
//! 4. [`wedge`] evaluates the `Z_t` statistic, sweeps orientations and
//!    emits detections.
//! 5. [`baseline`] and [`synth`] provide the comparison detectors and the
//!    synthetic ROC harness.
//!
//! Coordinates: `x` grows with the column index and `y` grows *upward*, so
//! image row `r` sits at `y = -r` relative to the row origin. Angles are
//! `atan2(y, x)` in radians.

pub mod baseline;
pub mod config;
mod error;
pub mod harmonic;
pub mod image;
pub mod kernel_bank;
pub mod pnm;
pub mod spectrum;
pub mod synth;
pub mod wedge;

pub use error::{Error, Result};
pub use harmonic::{Spectrum, WedgeTemplate};
pub use image::GrayImage;
pub use kernel_bank::{BankParams, KernelBank};
pub use spectrum::SpectrumField;
pub use wedge::{Detection, DetectorConfig};

pub use num_complex::Complex64;
