//! Synthetic wedge frames, the ROC harness, and the separable-vs-direct
//! benchmark.
//!
//! Each trial `i` of a run seeded with `seed` draws its scene from
//! `ChaCha8Rng::seed_from_u64(seed)` switched to stream `i`, so trials can be
//! evaluated in any order.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::{self, correlation_score, HarmonicTemplate};
use crate::harmonic::Spectrum;
use crate::kernel_bank::build_bank;
use crate::spectrum::{compute_spectrum, direct_spectrum, max_relative_difference};
use crate::wedge::{orientation_sweep, DetectorConfig};
use crate::{BankParams, Error, GrayImage, KernelBank, Result};

pub const FRAME_SIZE: usize = 25;
pub const FOREGROUND: f64 = 255.0;
pub const BACKGROUND: f64 = 100.0;
/// Default anti-aliasing factor of [`render_wedge`].
pub const DEFAULT_SUPERSAMPLE: usize = 4;
/// Half-width of the truth window on the wedge width.
pub const WIDTH_TOLERANCE: f64 = PI / 12.0;
pub const APEX_TOLERANCE: f64 = 2.0;

/// One random wedge. Angles in radians, y up, apex offset from the frame
/// center in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WedgeScene {
    /// Full opening angle `2 phi`.
    pub width: f64,
    pub orientation: f64,
    pub apex_radius: f64,
    pub apex_angle: f64,
}

impl WedgeScene {
    pub fn half_width(&self) -> f64 {
        0.5 * self.width
    }

    pub fn apex_offset(&self) -> (f64, f64) {
        (self.apex_radius * self.apex_angle.cos(), self.apex_radius * self.apex_angle.sin())
    }

    /// Whether `(x, y)` (y up) lies in the infinite wedge with apex `apex`.
    pub fn contains(&self, apex: (f64, f64), x: f64, y: f64) -> bool {
        let (dx, dy) = (x - apex.0, y - apex.1);
        if dx == 0.0 && dy == 0.0 {
            return true;
        }
        let diff = (dy.atan2(dx) - self.orientation).rem_euclid(2.0 * PI);
        let diff = if diff > PI { 2.0 * PI - diff } else { diff };
        diff <= self.half_width()
    }
}

/// Renders `scene` into a `size x size` frame centered on pixel
/// `(size / 2, size / 2)`: each pixel is background plus contrast times the
/// fraction of its `supersample^2` sub-pixel centers inside the wedge.
pub fn render_wedge_sized(scene: &WedgeScene, size: usize, supersample: usize) -> Result<GrayImage> {
    if supersample == 0 {
        return Err(Error::InvalidParameter("supersample must be >= 1".into()));
    }
    let center = (size / 2) as f64;
    let apex = scene.apex_offset();
    let s = supersample as f64;
    let total = (supersample * supersample) as f64;
    Ok(GrayImage::from_fn(size, size, |c, r| {
        let mut hits = 0usize;
        for i in 0..supersample {
            for j in 0..supersample {
                let x = c as f64 - center + (i as f64 + 0.5) / s - 0.5;
                let y = center - r as f64 - ((j as f64 + 0.5) / s - 0.5);
                if scene.contains(apex, x, y) {
                    hits += 1;
                }
            }
        }
        BACKGROUND + (FOREGROUND - BACKGROUND) * hits as f64 / total
    }))
}

/// 25x25 synthetic frame.
pub fn render_wedge(scene: &WedgeScene, supersample: usize) -> Result<GrayImage> {
    render_wedge_sized(scene, FRAME_SIZE, supersample)
}

/// Draws `2 phi ~ U(pi/12, pi)`, `theta ~ U(0, 2 pi)`, `r ~ U(0, 6)`,
/// `apex angle ~ U(0, 2 pi)`, in that order.
pub fn sample_scene<R: Rng + ?Sized>(rng: &mut R) -> WedgeScene {
    let width = rng.random_range(PI / 12.0..PI);
    let orientation = rng.random_range(0.0..2.0 * PI);
    let apex_radius = rng.random_range(0.0..6.0);
    let apex_angle = rng.random_range(0.0..2.0 * PI);
    WedgeScene { width, orientation, apex_radius, apex_angle }
}

/// Generator for trial `index` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A detection counts as true iff the apex is within 2 px of the frame
/// center and the widths agree to within `pi/12` (strict).
pub fn truth_label(scene: &WedgeScene, template_width: f64) -> bool {
    scene.apex_radius < APEX_TOLERANCE
        && scene.width > template_width - WIDTH_TOLERANCE
        && scene.width < template_width + WIDTH_TOLERANCE
}

/// Everything a scorer may look at for one trial.
#[derive(Debug, Clone, Copy)]
pub struct Trial<'a> {
    pub index: u64,
    pub scene: &'a WedgeScene,
    pub frame: &'a GrayImage,
}

/// Produces the statistic thresholded by the ROC sweep.
pub trait TrialScorer: Sync {
    fn score(&self, trial: &Trial<'_>) -> Result<f64>;

    fn name(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorKind {
    /// Variance-normalized wedge statistic `Z_t`.
    A,
    /// Correlation with a Slepian-concentrated template.
    B,
    /// Correlation with a least-squares wedge template.
    C,
    /// Harris.
    D,
    /// Kitchen-Rosenfeld (negated, so bright corners score high).
    E,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [Self::A, Self::B, Self::C, Self::D, Self::E];
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::A => "A",
            Self::B => "B",
            Self::C => "C",
            Self::D => "D",
            Self::E => "E",
        };
        f.write_str(s)
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Self::A),
            "B" => Ok(Self::B),
            "C" => Ok(Self::C),
            "D" => Ok(Self::D),
            "E" => Ok(Self::E),
            other => Err(Error::InvalidParameter(format!("unknown detector '{other}', expected A-E"))),
        }
    }
}

/// Settings shared by the five frame detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSettings {
    pub bank: BankParams,
    /// `eps_delta / phi_delta`.
    pub eps_ratio: f64,
    pub sigma_min: f64,
    pub theta_steps: usize,
    /// Derivative and window scale of D and E.
    pub corner_scale: f64,
    pub harris_k: f64,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        let bank = BankParams::default();
        Self {
            bank,
            eps_ratio: 1.0 / 3.0,
            sigma_min: 255.0,
            theta_steps: 24,
            corner_scale: bank.lambda,
            harris_k: baseline::HARRIS_K,
        }
    }
}

enum Engine {
    Wedge(DetectorConfig),
    Correlation(HarmonicTemplate),
    Harris,
    KitchenRosenfeld,
}

/// One of detectors A-E tuned to a wedge width, scoring any image at any
/// pixel.
pub struct FrameDetector {
    kind: DetectorKind,
    settings: DetectorSettings,
    bank: KernelBank,
    engine: Engine,
}

impl FrameDetector {
    pub fn new(kind: DetectorKind, template_width: f64, settings: DetectorSettings) -> Result<Self> {
        let bank = build_bank(settings.bank)?;
        let phi = 0.5 * template_width;
        let ll = settings.bank.max_order;
        let engine = match kind {
            DetectorKind::A => {
                let mut cfg = DetectorConfig::for_width(template_width, ll)?;
                cfg.template = crate::harmonic::build_template(
                    phi,
                    settings.eps_ratio * phi,
                    settings.sigma_min * settings.sigma_min,
                    ll,
                )?;
                cfg.theta_steps = settings.theta_steps;
                Engine::Wedge(cfg)
            }
            DetectorKind::B => Engine::Correlation(baseline::slepian_template(phi, ll)?),
            DetectorKind::C => Engine::Correlation(baseline::ls_template(phi, ll)?),
            DetectorKind::D => Engine::Harris,
            DetectorKind::E => Engine::KitchenRosenfeld,
        };
        Ok(Self { kind, settings, bank, engine })
    }

    pub fn kind(&self) -> DetectorKind {
        self.kind
    }

    pub fn bank(&self) -> &KernelBank {
        &self.bank
    }

    /// Full score map and orientation map (zeros for D and E).
    pub fn score_image(&self, image: &GrayImage) -> Result<crate::wedge::ScoreMap> {
        let (w, h) = (image.width(), image.height());
        let from_grid = |g: GrayImage, sign: f64| crate::wedge::ScoreMap {
            width: w,
            height: h,
            z: g.data().iter().map(|v| sign * v).collect(),
            theta: vec![0.0; w * h],
        };
        match &self.engine {
            Engine::Wedge(cfg) => crate::wedge::score_map(&compute_spectrum(image, &self.bank)?, cfg),
            Engine::Correlation(t) => {
                let field = compute_spectrum(image, &self.bank)?;
                let steps = self.settings.theta_steps;
                let pairs = crate::image::map_rows(h, |r| {
                    (0..w)
                        .map(|c| correlation_score(&Spectrum::extend(&field.coeffs_at(c, r)), t, steps))
                        .collect()
                })?;
                let (z, theta) = pairs.into_iter().unzip();
                Ok(crate::wedge::ScoreMap { width: w, height: h, z, theta })
            }
            Engine::Harris => Ok(from_grid(
                baseline::harris(image, self.settings.corner_scale, self.settings.harris_k)?,
                1.0,
            )),
            Engine::KitchenRosenfeld => {
                Ok(from_grid(baseline::kitchen_rosenfeld(image, self.settings.corner_scale)?, -1.0))
            }
        }
    }

    /// Score at one pixel.
    pub fn score_at(&self, image: &GrayImage, col: usize, row: usize) -> Result<f64> {
        match &self.engine {
            Engine::Wedge(cfg) => {
                let field = compute_spectrum(image, &self.bank)?;
                Ok(orientation_sweep(&Spectrum::extend(&field.coeffs_at(col, row)), cfg)?.0)
            }
            Engine::Correlation(t) => {
                let field = compute_spectrum(image, &self.bank)?;
                let s = Spectrum::extend(&field.coeffs_at(col, row));
                Ok(correlation_score(&s, t, self.settings.theta_steps)?.0)
            }
            Engine::Harris => {
                Ok(baseline::harris(image, self.settings.corner_scale, self.settings.harris_k)?.get(col, row))
            }
            Engine::KitchenRosenfeld => {
                Ok(-baseline::kitchen_rosenfeld(image, self.settings.corner_scale)?.get(col, row))
            }
        }
    }
}

impl TrialScorer for FrameDetector {
    fn score(&self, trial: &Trial<'_>) -> Result<f64> {
        let (w, h) = (trial.frame.width(), trial.frame.height());
        self.score_at(trial.frame, w / 2, h / 2)
    }

    fn name(&self) -> String {
        self.kind.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    /// Template full width `2 phi_delta`, radians.
    pub width: f64,
    /// Ascending; each is a distinct observed score.
    pub thresholds: Vec<f64>,
    /// Fraction of false trials with `score >= threshold`.
    pub pf: Vec<f64>,
    /// Fraction of true trials with `score >= threshold`.
    pub pd: Vec<f64>,
    pub auc: f64,
    pub trials: usize,
    pub positives: usize,
    pub seed: u64,
    pub supersample: usize,
    pub detector: String,
}

impl RocResult {
    /// CSV `threshold,pf,pd`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "threshold,pf,pd")?;
        for ((t, f), d) in self.thresholds.iter().zip(&self.pf).zip(&self.pd) {
            writeln!(w, "{t},{f},{d}")?;
        }
        Ok(())
    }

    pub fn summary(&self) -> RocSummary {
        RocSummary {
            width_deg: self.width.to_degrees(),
            detector: self.detector.clone(),
            trials: self.trials,
            seed: self.seed,
            auc: self.auc,
            supersample: self.supersample,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocSummary {
    pub width_deg: f64,
    pub detector: String,
    pub trials: usize,
    pub seed: u64,
    pub auc: f64,
    pub supersample: usize,
}

/// Builds the empirical ROC from labelled scores, one operating point per
/// distinct score.
pub fn roc_from_scores(scores: &[(f64, bool)]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let positives = scores.iter().filter(|s| s.1).count();
    let negatives = scores.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels { positives, negatives });
    }
    if let Some(bad) = scores.iter().find(|s| !s.0.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite score {}", bad.0)));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut thresholds, mut pf, mut pd) = (Vec::new(), Vec::new(), Vec::new());
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == t {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        thresholds.push(t);
        pf.push(fp as f64 / negatives as f64);
        pd.push(tp as f64 / positives as f64);
    }
    thresholds.reverse();
    pf.reverse();
    pd.reverse();
    Ok((thresholds, pf, pd))
}

/// Trapezoidal area under `(pf, pd)` points after adding `(0,0)` and `(1,1)`.
pub fn auc_from_points(points: &[(f64, f64)]) -> f64 {
    let mut pts = Vec::with_capacity(points.len() + 2);
    pts.push((0.0, 0.0));
    pts.extend_from_slice(points);
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.windows(2).map(|p| (p[1].0 - p[0].0) * (p[1].1 + p[0].1) * 0.5).sum()
}

pub fn auc(roc: &RocResult) -> f64 {
    let pts: Vec<_> = roc.pf.iter().copied().zip(roc.pd.iter().copied()).collect();
    auc_from_points(&pts)
}

/// Runs `trials` seeded trials for one template width and sweeps the
/// detector's center-pixel score into an ROC.
pub fn roc_run<S: TrialScorer + ?Sized>(
    detector: &S,
    template_width: f64,
    trials: usize,
    seed: u64,
    supersample: usize,
) -> Result<RocResult> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let one = |i: usize| -> Result<(f64, bool)> {
        let scene = sample_scene(&mut trial_rng(seed, i as u64));
        let frame = render_wedge(&scene, supersample)?;
        let score = detector.score(&Trial { index: i as u64, scene: &scene, frame: &frame })?;
        Ok((score, truth_label(&scene, template_width)))
    };
    #[cfg(feature = "parallel")]
    let scored: Vec<Result<(f64, bool)>> = {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let scored: Vec<Result<(f64, bool)>> = (0..trials).map(one).collect();
    let scored = scored.into_iter().collect::<Result<Vec<_>>>()?;
    let positives = scored.iter().filter(|s| s.1).count();
    let (thresholds, pf, pd) = roc_from_scores(&scored)?;
    let mut roc = RocResult {
        width: template_width,
        thresholds,
        pf,
        pd,
        auc: 0.0,
        trials,
        positives,
        seed,
        supersample,
        detector: detector.name(),
    };
    roc.auc = auc(&roc);
    Ok(roc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub image_size: usize,
    #[serde(rename = "K")]
    pub half_width: usize,
    #[serde(rename = "L")]
    pub max_order: usize,
    pub lambda: f64,
    pub t_separable_s: f64,
    pub t_direct_s: f64,
    /// `t_direct / t_separable`.
    pub ratio: f64,
    pub max_rel_err: f64,
    /// Multiply-adds per pixel, `sum_l 2 M (l + 1)`.
    pub ops_separable: usize,
    /// `(L + 1) M^2`.
    pub ops_direct: usize,
}

/// Per-filter multiply-add counts `(2 M (l + 1), M^2)`.
pub fn per_filter_ops(taps: usize, l: usize) -> (usize, usize) {
    (2 * taps * (l + 1), taps * taps)
}

/// Times both realizations on a seeded random image (best of `repeats`)
/// and checks they agree on interior pixels.
pub fn bench_compare(image_size: usize, params: BankParams, repeats: usize) -> Result<BenchReport> {
    if repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be >= 1".into()));
    }
    let bank = build_bank(params)?;
    if image_size < params.taps() {
        return Err(Error::ImageTooSmall { width: image_size, height: image_size, min: params.taps() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let image = GrayImage::from_fn(image_size, image_size, |_, _| rng.random_range(0.0..255.0));
    let time = |f: &dyn Fn() -> Result<crate::SpectrumField>| -> Result<(f64, crate::SpectrumField)> {
        let mut best = f64::INFINITY;
        let mut out = None;
        for _ in 0..repeats {
            let t0 = Instant::now();
            let field = f()?;
            best = best.min(t0.elapsed().as_secs_f64());
            out = Some(field);
        }
        Ok((best, out.expect("repeats >= 1")))
    };
    let (t_sep, sep) = time(&|| compute_spectrum(&image, &bank))?;
    let (t_dir, dir) = time(&|| direct_spectrum(&image, &bank))?;
    let m = params.taps();
    let (ops_separable, ops_direct) = (0..=params.max_order)
        .map(|l| per_filter_ops(m, l))
        .fold((0, 0), |acc, (a, b)| (acc.0 + a, acc.1 + b));
    Ok(BenchReport {
        image_size,
        half_width: params.half_width,
        max_order: params.max_order,
        lambda: params.lambda,
        t_separable_s: t_sep,
        t_direct_s: t_dir,
        ratio: t_dir / t_sep,
        max_rel_err: max_relative_difference(&sep, &dir, params.half_width),
        ops_separable,
        ops_direct,
    })
}
