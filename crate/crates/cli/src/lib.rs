//! Command-line front end for the `circharm` library.
//!
//! Settings are layered: built-in defaults, then an optional TOML file given
//! with `--config`, then individual flags. The merged configuration is
//! validated before any work starts.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use circharm::config::RunConfig;
use circharm::kernel_bank::{basis_filter, build_bank, frequency_response, isotropy_metric, DEFAULT_DFT_SIZE};
use circharm::pnm::{read_image, write_image, Normalization};
use circharm::spectrum::compute_spectrum;
use circharm::synth::{bench_compare, roc_run, DetectorKind, FrameDetector};
use circharm::wedge::{score_map, select_detections, write_detections_csv, ScoreMap};
use circharm::GrayImage;
use clap::{Args, Parser, Subcommand};

/// Exit code for bad flags or an invalid configuration.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for failures while running a valid command.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "circharm", version, about = "Circular-harmonic filter banks and wedge detection")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Basis-filter and Hermite-component galleries plus an isotropy report.
    Kernels(Common),
    /// Per-pixel spectrum of an image as a CHSF dump.
    Spectrum(Common),
    /// Score map, orientation map and detections for one image.
    Detect(Common),
    /// ROC curves and AUC on synthetic wedge frames.
    Roc(Common),
    /// Separable versus direct spectrum timing.
    Bench(Common),
    /// Print the merged configuration as TOML.
    ShowConfig(Common),
}

#[derive(Debug, Args, Default)]
struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Filter scale lambda, pixels.
    #[arg(long)]
    lambda: Option<f64>,
    /// Kernel half-width K (kernels have 2K+1 taps).
    #[arg(long)]
    kernel_half_width: Option<usize>,
    /// Maximum angular order L.
    #[arg(long)]
    max_order: Option<usize>,
    /// Full wedge width in degrees; `roc` accepts several (repeat or comma-separate).
    #[arg(long, value_delimiter = ',')]
    width_deg: Vec<f64>,
    /// Guard gap as a fraction of the half-width.
    #[arg(long)]
    eps_ratio: Option<f64>,
    /// Variance floor (standard deviation, intensity units).
    #[arg(long)]
    sigma_min: Option<f64>,
    /// Number of steering angles over the full circle.
    #[arg(long)]
    theta_steps: Option<usize>,
    /// Detection threshold on the score.
    #[arg(long, allow_negative_numbers = true)]
    threshold: Option<f64>,
    /// Keep at most this many detections.
    #[arg(long)]
    top_n: Option<usize>,
    /// Non-maximum suppression radius, pixels (0 disables).
    #[arg(long)]
    nms_radius: Option<usize>,
    /// Detector: A (wedge Z_t), B (Slepian), C (least squares), D (Harris), E (Kitchen-Rosenfeld).
    #[arg(long)]
    detector: Option<DetectorKind>,
    /// Score with Z_t^2 instead of the signed statistic.
    #[arg(long)]
    use_squared: bool,
    /// Sub-pixel samples per axis when rendering synthetic frames.
    #[arg(long)]
    supersample: Option<usize>,
    /// Synthetic trials per width.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Benchmark image side length.
    #[arg(long)]
    image_size: Option<usize>,
    /// Benchmark repetitions (best time is reported).
    #[arg(long)]
    repeats: Option<usize>,
    /// Input image (binary PGM or 8-bit grayscale PNG).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Directory for output files (created if missing).
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn set<T>(dst: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *dst = v;
    }
}

impl Common {
    fn merge(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        set(&mut cfg.bank.lambda, self.lambda);
        set(&mut cfg.bank.half_width, self.kernel_half_width);
        set(&mut cfg.bank.max_order, self.max_order);
        let d = &mut cfg.detector;
        set(&mut d.eps_ratio, self.eps_ratio);
        set(&mut d.sigma_min, self.sigma_min);
        set(&mut d.theta_steps, self.theta_steps);
        set(&mut d.threshold, self.threshold);
        set(&mut d.nms_radius, self.nms_radius);
        set(&mut d.kind, self.detector);
        if self.top_n.is_some() {
            d.top_n = self.top_n;
        }
        if self.use_squared {
            d.use_squared = true;
        }
        if let Some(&w) = self.width_deg.first() {
            d.width_deg = w;
        }
        if !self.width_deg.is_empty() {
            cfg.roc.widths_deg = self.width_deg.clone();
        }
        set(&mut cfg.roc.supersample, self.supersample);
        set(&mut cfg.roc.trials, self.trials);
        set(&mut cfg.roc.seed, self.seed);
        set(&mut cfg.bench.image_size, self.image_size);
        set(&mut cfg.bench.repeats, self.repeats);
        if self.input.is_some() {
            cfg.io.input = self.input.clone();
        }
        if self.output_dir.is_some() {
            cfg.io.output_dir = self.output_dir.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let (common, action): (&Common, fn(&RunConfig) -> Result<()>) = match &cli.command {
        Command::Kernels(c) => (c, kernels),
        Command::Spectrum(c) => (c, spectrum),
        Command::Detect(c) => (c, detect),
        Command::Roc(c) => (c, roc),
        Command::Bench(c) => (c, bench),
        Command::ShowConfig(c) => (c, show_config),
    };
    if common.width_deg.len() > 1 && !matches!(cli.command, Command::Roc(_) | Command::ShowConfig(_)) {
        eprintln!("error: only `roc` accepts more than one --width-deg");
        return EXIT_USAGE;
    }
    let cfg = match common.merge() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: invalid configuration: {e:#}");
            return EXIT_USAGE;
        }
    };
    match action(&cfg) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.io.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn input_image(cfg: &RunConfig) -> Result<GrayImage> {
    let Some(path) = &cfg.io.input else {
        bail!("this command needs --input");
    };
    read_image(path).with_context(|| format!("reading {}", path.display()))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn symmetric(grid: &GrayImage) -> Normalization {
    let (lo, hi) = grid.range();
    Normalization::Symmetric { scale: lo.abs().max(hi.abs()) }
}

fn kernels(cfg: &RunConfig) -> Result<()> {
    let dir = output_dir(cfg)?;
    let p = cfg.bank;
    let bank = build_bank(p)?;
    let n = p.taps();
    let dft = DEFAULT_DFT_SIZE.max((4 * p.half_width).next_power_of_two());
    let mut report = Vec::new();
    for l in 0..=p.max_order {
        let f = basis_filter(l, &p)?;
        let part = |g: fn(&circharm::Complex64) -> f64| {
            GrayImage::new(n, n, f.values.iter().map(g).collect::<Vec<_>>())
        };
        // rows run from +m_y at the top so the images appear upright
        let flip = |img: GrayImage| GrayImage::from_fn(n, n, |c, r| img.get(c, n - 1 - r));
        let re = flip(part(|v| v.re)?);
        let im = flip(part(|v| v.im)?);
        let mag = flip(part(|v| v.norm())?);
        write_image(&re, dir.join(format!("basis_l{l}_re.pgm")), symmetric(&re))?;
        write_image(&im, dir.join(format!("basis_l{l}_im.pgm")), symmetric(&im))?;
        write_image(&mag, dir.join(format!("basis_l{l}_mag.pgm")), Normalization::MinMax)?;
        let freq = frequency_response(l, &p, dft)?;
        write_image(&freq, dir.join(format!("basis_l{l}_freq.pgm")), Normalization::MinMax)?;
        for k in 0..=l {
            let (hx, hy) = (bank.hermite(k), bank.hermite(l - k));
            let comp = GrayImage::from_fn(n, n, |c, r| hx[c] * hy[n - 1 - r]);
            write_image(&comp, dir.join(format!("component_l{l}_k{k}.pgm")), symmetric(&comp))?;
        }
        report.push(serde_json::json!({
            "l": l,
            "rho": bank.rho(l),
            "isotropy": isotropy_metric(l, &p, dft)?,
        }));
    }
    let mut csv = String::from("m");
    for k in 0..=p.max_order {
        csv += &format!(",h{k}");
    }
    csv.push('\n');
    for (i, m) in (-(p.half_width as isize)..=p.half_width as isize).enumerate() {
        csv += &m.to_string();
        for k in 0..=p.max_order {
            csv += &format!(",{}", bank.hermite(k)[i]);
        }
        csv.push('\n');
    }
    fs::write(dir.join("hermite.csv"), csv)?;
    let summary = serde_json::json!({
        "lambda": p.lambda,
        "K": p.half_width,
        "L": p.max_order,
        "dft_size": dft,
        "orders": report,
    });
    write_json(&dir.join("isotropy.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn spectrum(cfg: &RunConfig) -> Result<()> {
    let img = input_image(cfg)?;
    let dir = output_dir(cfg)?;
    let field = compute_spectrum(&img, &build_bank(cfg.bank)?)?;
    let path = dir.join("spectrum.chsf");
    let mut out = std::io::BufWriter::new(fs::File::create(&path)?);
    field.write_dump(&mut out)?;
    std::io::Write::flush(&mut out)?;
    println!("wrote {} ({}x{}, L={})", path.display(), field.width(), field.height(), field.max_order());
    Ok(())
}

fn detect(cfg: &RunConfig) -> Result<()> {
    let img = input_image(cfg)?;
    let dir = output_dir(cfg)?;
    let width = cfg.detector.width_deg.to_radians();
    let d = &cfg.detector;
    let map: ScoreMap = match d.kind {
        DetectorKind::A => score_map(&compute_spectrum(&img, &build_bank(cfg.bank)?)?, &cfg.wedge_config()?)?,
        kind => FrameDetector::new(kind, width, cfg.detector_settings())?.score_image(&img)?,
    };
    let found = select_detections(&map, d.threshold, d.nms_radius, d.top_n);
    let mut csv = Vec::new();
    write_detections_csv(&mut csv, &found)?;
    fs::write(dir.join("detections.csv"), csv)?;
    let mut dump = Vec::new();
    map.write_dump(&mut dump, &cfg.bank)?;
    fs::write(dir.join("zmap.chzm"), dump)?;
    let z = GrayImage::new(map.width, map.height, map.z.clone())?;
    write_image(&z, dir.join("zmap.pgm"), symmetric(&z))?;
    let theta = GrayImage::new(map.width, map.height, map.theta.clone())?;
    write_image(&theta, dir.join("theta.pgm"), Normalization::Fixed { lo: 0.0, hi: 2.0 * std::f64::consts::PI })?;
    println!("{} detections (detector {}, width {} deg)", found.len(), d.kind, d.width_deg);
    Ok(())
}

fn roc(cfg: &RunConfig) -> Result<()> {
    let dir = output_dir(cfg)?;
    let kind = cfg.detector.kind;
    let mut summaries = Vec::new();
    for &w in &cfg.roc.widths_deg {
        let det = FrameDetector::new(kind, w.to_radians(), cfg.detector_settings())?;
        let result = roc_run(&det, w.to_radians(), cfg.roc.trials, cfg.roc.seed, cfg.roc.supersample)?;
        let stem = format!("roc_{kind}_{w}");
        let mut csv = Vec::new();
        result.write_csv(&mut csv)?;
        fs::write(dir.join(format!("{stem}.csv")), csv)?;
        let summary = result.summary();
        write_json(&dir.join(format!("{stem}.json")), &summary)?;
        summaries.push(summary);
    }
    println!("{}", serde_json::to_string_pretty(&summaries)?);
    Ok(())
}

fn bench(cfg: &RunConfig) -> Result<()> {
    let dir = output_dir(cfg)?;
    let report = bench_compare(cfg.bench.image_size, cfg.bank, cfg.bench.repeats)?;
    write_json(&dir.join("bench.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn show_config(cfg: &RunConfig) -> Result<()> {
    print!("{}", toml::to_string(cfg)?);
    Ok(())
}
