//! Command-line workflows: fit, fuse, bench and synth.
//!
//! Every subcommand is deterministic in its inputs, flags and seed, writes
//! its outputs atomically, and leaves a JSON run manifest next to them.
//! Exit codes are 0 on success, 2 for input or validation errors and 3 for
//! numerical failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{ensemble_summary, gaussian_summary, mc_dropout_summary, quantile_summary};
use crate::error::{Error, Result};
use crate::metrics::{
    aggregate, sample_metrics, CoverageMode, EvalOptions, GroundTruthSample, MetricReport, MetricRow,
    SampleMetrics, ViolationMode,
};
use crate::mixture::{build_mixture_table, fuse_raster, ideal_from_labels, MixtureTable, SummaryLevels, SurfaceState};
use crate::nelder_mead::SimplexOptions;
use crate::pl_density::{
    fit_from_histogram, fmt_sig17, read_densities_csv, read_histograms_csv, write_densities_csv,
    PiecewiseLinearDensity,
};
use crate::raster::{decode, encode_f32, encode_u8, ClassProbabilityRaster, GripSummaryRaster, Method};
use crate::rng::{derive_seed, domain, stream};
use crate::synth::{
    default_class_densities, generate_scene, simulate_classifier, simulate_mc_dropout, simulate_regressors,
    ClassGripGenerator, SceneConfig, SimulatorConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "roadgrip", version, about = "Grip distributions from road surface state probabilities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one piecewise-linear density per class in a histogram CSV.
    Fit {
        histograms: PathBuf,
        #[arg(long, default_value_t = crate::pl_density::DEFAULT_INTERVALS)]
        intervals: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fuse a class probability raster into a 6-channel grip summary raster.
    Fuse {
        densities: PathBuf,
        probs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the synthetic calibration benchmark.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate one synthetic scene with a simulated classifier output.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numerical(_) => EXIT_NUMERICAL,
        Error::InvalidInput(_) | Error::Format { .. } | Error::Io(_) => EXIT_INPUT,
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Fit {
            histograms,
            intervals,
            out: dest,
        } => cmd_fit(&histograms, intervals, &dest, out),
        Command::Fuse {
            densities,
            probs,
            out: dest,
        } => cmd_fuse(&densities, &probs, &dest),
        Command::Bench { config, seed, out: dir } => cmd_bench(config.as_deref(), seed, &dir, out),
        Command::Synth { config, seed, out: dir } => cmd_synth(config.as_deref(), seed, &dir),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub fnv1a64: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
}

impl RunManifest {
    fn new(subcommand: &str, config: BTreeMap<String, String>, inputs: Vec<InputDigest>, seed: Option<u64>) -> Self {
        Self {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            subcommand: subcommand.to_string(),
            config,
            inputs,
            seed,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

fn read_input(path: &Path) -> Result<(Vec<u8>, InputDigest)> {
    let bytes = fs::read(path).map_err(|e| Error::format(path, e.to_string()))?;
    let digest = InputDigest {
        path: path.display().to_string(),
        fnv1a64: format!("{:016x}", fnv1a64(&bytes)),
    };
    Ok((bytes, digest))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn cmd_fit(histograms: &Path, intervals: usize, dest: &Path, out: &mut dyn Write) -> Result<()> {
    if intervals < 2 {
        return Err(Error::invalid(format!("--intervals must be at least 2, got {intervals}")));
    }
    let (_, digest) = read_input(histograms)?;
    let hists = read_histograms_csv(histograms)?;
    let opts = SimplexOptions::default();
    let mut fitted = Vec::with_capacity(hists.len());
    let mut report = String::new();
    for h in &hists {
        let outcome = fit_from_histogram(h, intervals, &opts)?;
        writeln!(report, "{}\t{}", h.class(), fmt_sig17(outcome.objective)).expect("string write");
        fitted.push(outcome.density);
    }
    let mut csv = Vec::new();
    write_densities_csv(&mut csv, &fitted)?;

    let config = BTreeMap::from([
        ("intervals".to_string(), intervals.to_string()),
        ("out".to_string(), dest.display().to_string()),
    ]);
    let manifest = RunManifest::new("fit", config, vec![digest], None);
    write_atomic(dest, &csv)?;
    write_atomic(&manifest_path(dest), manifest.to_json().as_bytes())?;
    out.write_all(b"class\tfinal_mse\n")?;
    out.write_all(report.as_bytes())?;
    Ok(())
}

fn load_table(path: &Path) -> Result<(MixtureTable, InputDigest)> {
    let (_, digest) = read_input(path)?;
    Ok((build_mixture_table(&read_densities_csv(path)?)?, digest))
}

fn cmd_fuse(densities: &Path, probs: &Path, dest: &Path) -> Result<()> {
    let (table, d_digest) = load_table(densities)?;
    let (bytes, p_digest) = read_input(probs)?;
    let raster = decode(&bytes)
        .and_then(ClassProbabilityRaster::from_grr1)
        .map_err(|e| match e {
            Error::InvalidInput(reason) => Error::format(probs, reason),
            other => other,
        })?;
    let summary = fuse_raster(&table, &raster, &SummaryLevels::default())?;
    let encoded = encode_f32(&summary.to_grr1())?;

    let config = BTreeMap::from([("out".to_string(), dest.display().to_string())]);
    let manifest = RunManifest::new("fuse", config, vec![d_digest, p_digest], None);
    write_atomic(dest, &encoded)?;
    write_atomic(&manifest_path(dest), manifest.to_json().as_bytes())?;
    Ok(())
}

/// Parses a flat `key = value` file. `#` starts a comment; blank lines are
/// ignored; repeated keys are an error.
pub fn parse_key_values(text: &str, origin: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(origin, format!("line {}: expected `key = value`", i + 1)))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::format(origin, format!("line {}: empty key", i + 1)));
        }
        if map.insert(key.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::format(origin, format!("line {}: duplicate key {key:?}", i + 1)));
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    Fixed(Vec<(SurfaceState, f64)>),
    /// Per scene: all five classes in shuffled order with random fractions.
    Random,
}

impl Layout {
    pub fn parse(s: &str) -> Result<Self> {
        if s.trim() == "random" {
            return Ok(Layout::Random);
        }
        let mut bands = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, frac) = part
                .split_once(':')
                .ok_or_else(|| Error::invalid(format!("layout entry {part:?} is not `state:fraction`")))?;
            let frac: f64 = frac
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("layout fraction {frac:?} is not a number")))?;
            bands.push((name.parse()?, frac));
        }
        if bands.is_empty() {
            return Err(Error::invalid("layout is empty"));
        }
        Ok(Layout::Fixed(bands))
    }

    pub fn bands(&self, seed: u64, scene: u64) -> Vec<(SurfaceState, f64)> {
        match self {
            Layout::Fixed(b) => b.clone(),
            Layout::Random => {
                let mut rng = stream(seed, domain::LAYOUT, scene);
                let mut states = SurfaceState::ALL;
                states.shuffle(&mut rng);
                let raw: Vec<f64> = states.iter().map(|_| 0.05 + rng.random::<f64>()).collect();
                let total: f64 = raw.iter().sum();
                states.into_iter().zip(raw.into_iter().map(|r| r / total)).collect()
            }
        }
    }
}

impl std::fmt::Display for Layout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Layout::Random => f.write_str("random"),
            Layout::Fixed(b) => {
                let parts: Vec<String> = b.iter().map(|(s, x)| format!("{s}:{x}")).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("config key {key}: cannot parse {value:?}")))
}

fn default_layout() -> Layout {
    Layout::Fixed(SurfaceState::ALL.iter().map(|s| (*s, 0.2)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub scenes: usize,
    pub height: usize,
    pub width: usize,
    pub horizon: usize,
    pub layout: Layout,
    pub simulator: SimulatorConfig,
    pub methods: Vec<Method>,
    pub eval: EvalOptions,
    pub densities: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            scenes: 200,
            height: 560,
            width: 16,
            horizon: 60,
            layout: Layout::Random,
            simulator: SimulatorConfig::default(),
            methods: Method::ALL.to_vec(),
            eval: EvalOptions::default(),
            densities: None,
        }
    }
}

fn parse_methods(value: &str) -> Result<Vec<Method>> {
    let mut methods: Vec<Method> = Vec::new();
    for name in value.split(',').map(str::trim).filter(|n| !n.is_empty()) {
        let m: Method = name.parse()?;
        if methods.contains(&m) {
            return Err(Error::invalid(format!("method {name} listed twice")));
        }
        methods.push(m);
    }
    if methods.is_empty() {
        return Err(Error::invalid("methods list is empty"));
    }
    Ok(methods)
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::invalid(format!("config key {key}: expected true or false, got {value:?}"))),
    }
}

fn resolve_path(base: Option<&Path>, value: &str) -> PathBuf {
    let p = PathBuf::from(value);
    match base.and_then(Path::parent) {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    }
}

impl BenchConfig {
    /// Builds a config from key/value pairs; `origin` anchors relative paths.
    pub fn from_pairs(pairs: &BTreeMap<String, String>, origin: Option<&Path>) -> Result<Self> {
        let mut c = Self::default();
        for (key, value) in pairs {
            let v = value.as_str();
            match key.as_str() {
                "scenes" => c.scenes = parse_value(key, v)?,
                "height" => c.height = parse_value(key, v)?,
                "width" => c.width = parse_value(key, v)?,
                "horizon" => c.horizon = parse_value(key, v)?,
                "layout" => c.layout = Layout::parse(v)?,
                "accuracy" => c.simulator.accuracy = parse_value(key, v)?,
                "temperature" => c.simulator.temperature = parse_value(key, v)?,
                "noise_sigma" => c.simulator.noise_sigma = parse_value(key, v)?,
                "miscalibration" => c.simulator.miscalibration = parse_value(key, v)?,
                "ensemble_size" => c.simulator.ensemble_size = parse_value(key, v)?,
                "mc_dropout_samples" => c.simulator.mc_dropout_samples = parse_value(key, v)?,
                "methods" => c.methods = parse_methods(v)?,
                "clamp" => c.eval.clamp = parse_bool(key, v)?,
                "coverage" => {
                    c.eval.coverage = match v {
                        "weighted" => CoverageMode::Weighted,
                        "unweighted" => CoverageMode::Unweighted,
                        _ => return Err(Error::invalid(format!("config key coverage: unknown mode {v:?}"))),
                    }
                }
                "violations" => {
                    c.eval.violations = match v {
                        "per_sample" => ViolationMode::PerSample,
                        "pooled" => ViolationMode::Pooled,
                        _ => return Err(Error::invalid(format!("config key violations: unknown mode {v:?}"))),
                    }
                }
                "densities" => c.densities = Some(resolve_path(origin, v)),
                other => return Err(Error::invalid(format!("unknown config key {other:?}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenes == 0 {
            return Err(Error::invalid("scenes must be positive"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("methods list is empty"));
        }
        self.simulator.validate()?;
        self.scene(0, 0).validate()
    }

    pub fn scene(&self, seed: u64, index: u64) -> SceneConfig {
        SceneConfig {
            height: self.height,
            width: self.width,
            horizon: self.horizon,
            layout: self.layout.bands(seed, index),
            seed: derive_seed(seed, domain::SCENE, index),
        }
    }

    pub fn resolved(&self) -> BTreeMap<String, String> {
        let s = &self.simulator;
        let methods: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        let mut m = BTreeMap::from([
            ("scenes".to_string(), self.scenes.to_string()),
            ("height".to_string(), self.height.to_string()),
            ("width".to_string(), self.width.to_string()),
            ("horizon".to_string(), self.horizon.to_string()),
            ("layout".to_string(), self.layout.to_string()),
            ("accuracy".to_string(), s.accuracy.to_string()),
            ("temperature".to_string(), s.temperature.to_string()),
            ("noise_sigma".to_string(), s.noise_sigma.to_string()),
            ("miscalibration".to_string(), s.miscalibration.to_string()),
            ("ensemble_size".to_string(), s.ensemble_size.to_string()),
            ("mc_dropout_samples".to_string(), s.mc_dropout_samples.to_string()),
            ("methods".to_string(), methods.join(",")),
            ("clamp".to_string(), self.eval.clamp.to_string()),
            (
                "coverage".to_string(),
                match self.eval.coverage {
                    CoverageMode::Weighted => "weighted",
                    CoverageMode::Unweighted => "unweighted",
                }
                .to_string(),
            ),
            (
                "violations".to_string(),
                match self.eval.violations {
                    ViolationMode::PerSample => "per_sample",
                    ViolationMode::Pooled => "pooled",
                }
                .to_string(),
            ),
        ]);
        if let Some(p) = &self.densities {
            m.insert("densities".to_string(), p.display().to_string());
        }
        m
    }
}

/// Result of a benchmark run: one report row and the per-sample metrics of
/// each evaluated method, in configuration order.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub report: MetricReport,
    pub per_method: Vec<(Method, Vec<SampleMetrics>)>,
}

fn summarize_scene(
    method: Method,
    cfg: &BenchConfig,
    table: &MixtureTable,
    gen: &ClassGripGenerator,
    labels: &crate::raster::LabelRaster,
    seed: u64,
) -> Result<GripSummaryRaster> {
    let levels = SummaryLevels::default();
    let sim = &cfg.simulator;
    let summary = match method {
        Method::IdealGvrs => ideal_from_labels(table, labels, &levels)?,
        Method::Gvrs => fuse_raster(table, &simulate_classifier(labels, sim, seed)?, &levels)?,
        Method::Gaussian => gaussian_summary(&simulate_regressors(labels, gen, sim, seed)?.normal)?,
        Method::Quantile => quantile_summary(&simulate_regressors(labels, gen, sim, seed)?.quantile)?,
        Method::Ensemble => ensemble_summary(&simulate_regressors(labels, gen, sim, seed)?.ensemble)?,
        Method::McDropout => mc_dropout_summary(&simulate_mc_dropout(labels, gen, sim, seed)?)?,
    };
    Ok(summary.with_method(method))
}

/// Runs the benchmark on `cfg` with class densities `densities`.
pub fn run_bench(cfg: &BenchConfig, densities: &[PiecewiseLinearDensity], seed: u64) -> Result<BenchOutcome> {
    cfg.validate()?;
    let table = build_mixture_table(densities)?;
    let gen = ClassGripGenerator::new(densities.to_vec())?;

    let per_scene: Vec<Vec<SampleMetrics>> = (0..cfg.scenes)
        .into_par_iter()
        .map(|k| {
            let scene = cfg.scene(seed, k as u64);
            let (labels, sample) = generate_scene(&scene, &gen)?;
            let sample = GroundTruthSample {
                id: format!("scene-{k:06}"),
                ..sample
            };
            cfg.methods
                .iter()
                .map(|m| {
                    let summary = summarize_scene(*m, cfg, &table, &gen, &labels, scene.seed)?;
                    sample_metrics(&summary, &sample, &cfg.eval)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows: Vec<MetricRow> = Vec::with_capacity(cfg.methods.len());
    let mut per_method = Vec::with_capacity(cfg.methods.len());
    for (i, m) in cfg.methods.iter().enumerate() {
        let records: Vec<SampleMetrics> = per_scene.iter().map(|s| s[i].clone()).collect();
        rows.push(aggregate(m.name(), &records, &cfg.eval)?);
        per_method.push((*m, records));
    }
    Ok(BenchOutcome {
        report: MetricReport { rows },
        per_method,
    })
}

/// CSV with one row per sample: id, mean ground-truth grip, mean predicted P5.
pub fn scatter_csv(records: &[SampleMetrics]) -> String {
    let mut s = String::from("sample_id,gt_grip_mean,p05_mean\n");
    for r in records {
        writeln!(s, "{},{},{}", r.id, r.mean_grip, r.mean_p5).expect("string write");
    }
    s
}

fn load_config(path: Option<&Path>) -> Result<(BTreeMap<String, String>, Vec<InputDigest>)> {
    match path {
        None => Ok((BTreeMap::new(), Vec::new())),
        Some(p) => {
            let (bytes, digest) = read_input(p)?;
            let text = String::from_utf8(bytes).map_err(|_| Error::format(p, "config is not UTF-8"))?;
            Ok((parse_key_values(&text, p)?, vec![digest]))
        }
    }
}

fn load_densities(path: Option<&Path>, inputs: &mut Vec<InputDigest>) -> Result<Vec<PiecewiseLinearDensity>> {
    match path {
        None => Ok(default_class_densities().densities().to_vec()),
        Some(p) => {
            let (_, digest) = read_input(p)?;
            inputs.push(digest);
            read_densities_csv(p)
        }
    }
}

fn cmd_bench(config: Option<&Path>, seed: u64, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let (pairs, mut inputs) = load_config(config)?;
    let cfg = BenchConfig::from_pairs(&pairs, config)?;
    let densities = load_densities(cfg.densities.as_deref(), &mut inputs)?;
    let outcome = run_bench(&cfg, &densities, seed)?;
    let manifest = RunManifest::new("bench", cfg.resolved(), inputs, Some(seed));

    fs::create_dir_all(dir)?;
    write_atomic(&dir.join("report.csv"), outcome.report.to_csv().as_bytes())?;
    for (m, records) in &outcome.per_method {
        write_atomic(&dir.join(format!("scatter_{}.csv", m.name())), scatter_csv(records).as_bytes())?;
    }
    write_atomic(&dir.join("manifest.json"), manifest.to_json().as_bytes())?;
    out.write_all(outcome.report.to_table().as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub height: usize,
    pub width: usize,
    pub horizon: usize,
    pub layout: Layout,
    pub accuracy: f64,
    pub temperature: f64,
    pub densities: Option<PathBuf>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let sim = SimulatorConfig::default();
        Self {
            height: 100,
            width: 64,
            horizon: 40,
            layout: default_layout(),
            accuracy: sim.accuracy,
            temperature: sim.temperature,
            densities: None,
        }
    }
}

impl SynthConfig {
    pub fn from_pairs(pairs: &BTreeMap<String, String>, origin: Option<&Path>) -> Result<Self> {
        let mut c = Self::default();
        for (key, value) in pairs {
            let v = value.as_str();
            match key.as_str() {
                "height" => c.height = parse_value(key, v)?,
                "width" => c.width = parse_value(key, v)?,
                "horizon" => c.horizon = parse_value(key, v)?,
                "layout" => c.layout = Layout::parse(v)?,
                "accuracy" => c.accuracy = parse_value(key, v)?,
                "temperature" => c.temperature = parse_value(key, v)?,
                "densities" => c.densities = Some(resolve_path(origin, v)),
                other => return Err(Error::invalid(format!("unknown config key {other:?}"))),
            }
        }
        c.simulator().validate()?;
        c.scene(0).validate()?;
        Ok(c)
    }

    pub fn simulator(&self) -> SimulatorConfig {
        SimulatorConfig {
            accuracy: self.accuracy,
            temperature: self.temperature,
            ..SimulatorConfig::default()
        }
    }

    pub fn scene(&self, seed: u64) -> SceneConfig {
        SceneConfig {
            height: self.height,
            width: self.width,
            horizon: self.horizon,
            layout: self.layout.bands(seed, 0),
            seed,
        }
    }

    pub fn resolved(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::from([
            ("height".to_string(), self.height.to_string()),
            ("width".to_string(), self.width.to_string()),
            ("horizon".to_string(), self.horizon.to_string()),
            ("layout".to_string(), self.layout.to_string()),
            ("accuracy".to_string(), self.accuracy.to_string()),
            ("temperature".to_string(), self.temperature.to_string()),
        ]);
        if let Some(p) = &self.densities {
            m.insert("densities".to_string(), p.display().to_string());
        }
        m
    }
}

/// `row,col,grip,state` CSV of a ground-truth sample.
pub fn ground_truth_csv(sample: &GroundTruthSample) -> String {
    let mut s = String::from("row,col,grip,state\n");
    for p in &sample.pixels {
        writeln!(s, "{},{},{},{}", p.row, p.col, p.grip, p.state).expect("string write");
    }
    s
}

fn cmd_synth(config: Option<&Path>, seed: u64, dir: &Path) -> Result<()> {
    let (pairs, mut inputs) = load_config(config)?;
    let cfg = SynthConfig::from_pairs(&pairs, config)?;
    let densities = load_densities(cfg.densities.as_deref(), &mut inputs)?;
    let gen = ClassGripGenerator::new(densities)?;
    let (labels, sample) = generate_scene(&cfg.scene(seed), &gen)?;
    let probs = simulate_classifier(&labels, &cfg.simulator(), seed)?;
    let manifest = RunManifest::new("synth", cfg.resolved(), inputs, Some(seed));

    let label_bytes = encode_u8(&labels.to_grr1())?;
    let prob_bytes = encode_f32(&probs.to_grr1())?;
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join("labels.grr1"), &label_bytes)?;
    write_atomic(&dir.join("ground_truth.csv"), ground_truth_csv(&sample).as_bytes())?;
    write_atomic(&dir.join("probs.grr1"), &prob_bytes)?;
    write_atomic(&dir.join("manifest.json"), manifest.to_json().as_bytes())?;
    Ok(())
}
