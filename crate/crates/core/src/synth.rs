//! Deterministic synthetic scenes and simulated model outputs.
//!
//! Scenes are label rasters whose road area below the horizon is split into
//! horizontal bands of surface states, stacked from the bottom edge toward
//! the horizon. One ground-truth grip measurement is placed on the image
//! centerline per row, drawn from the band's class density. The simulators
//! stand in for trained networks: a classifier with controllable accuracy and
//! softmax temperature, and regression heads whose reported spread can be
//! deliberately too narrow.
//!
//! All randomness comes from counter-based streams keyed by seed, entity and
//! head, so outputs are pure functions of their inputs.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::baselines::{EnsembleStack, NormalPrediction, NormalRaster, QuantilePrediction, QuantileRaster};
use crate::error::{Error, Result};
use crate::metrics::{GroundTruthPixel, GroundTruthSample};
use crate::mixture::{SurfaceState, CLASS_COUNT};
use crate::pl_density::{parse_densities_csv, PiecewiseLinearDensity};
use crate::raster::{ClassProbabilityRaster, LabelRaster};
use crate::rng::{domain, stream};

/// Default class densities, version 1.
pub const DEFAULT_DENSITIES_CSV: &str = include_str!("../data/class_densities_v1.csv");
pub const DEFAULT_DENSITIES_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct ClassGripGenerator {
    densities: Vec<PiecewiseLinearDensity>,
}

impl ClassGripGenerator {
    /// One density per surface state, matched by class name.
    pub fn new(densities: Vec<PiecewiseLinearDensity>) -> Result<Self> {
        let mut slots: Vec<Option<PiecewiseLinearDensity>> = vec![None; CLASS_COUNT];
        for d in densities {
            let state: SurfaceState = d.class().parse()?;
            if slots[state.index()].replace(d).is_some() {
                return Err(Error::invalid(format!("duplicate density for class {state}")));
            }
        }
        let densities = slots
            .into_iter()
            .zip(SurfaceState::ALL)
            .map(|(d, s)| d.ok_or_else(|| Error::invalid(format!("missing density for class {s}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { densities })
    }

    pub fn density(&self, state: SurfaceState) -> &PiecewiseLinearDensity {
        &self.densities[state.index()]
    }

    pub fn densities(&self) -> &[PiecewiseLinearDensity] {
        &self.densities
    }

    /// Inverse-cdf draw from a class density.
    pub fn draw(&self, state: SurfaceState, u: f64) -> f64 {
        self.density(state).quantile(u.clamp(0.0, 1.0)).expect("u clamped to [0, 1]")
    }
}

/// The shipped default class densities.
pub fn default_class_densities() -> ClassGripGenerator {
    let densities = parse_densities_csv(DEFAULT_DENSITIES_CSV, Path::new("class_densities_v1.csv"))
        .expect("bundled density table is valid");
    ClassGripGenerator::new(densities).expect("bundled density table covers every class")
}

/// `n` inverse-cdf draws from `density`, reproducible from `seed`.
pub fn draw_samples(density: &PiecewiseLinearDensity, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, domain::GRIP, u64::MAX);
    (0..n)
        .map(|_| density.quantile(rng.random::<f64>()).expect("u in [0, 1)"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    pub horizon: usize,
    /// Bands from the bottom edge toward the horizon, with their share of rows.
    pub layout: Vec<(SurfaceState, f64)>,
    pub seed: u64,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("scene dimensions must be positive"));
        }
        if self.horizon >= self.height {
            return Err(Error::invalid("horizon row must be above the bottom row"));
        }
        if self.layout.is_empty() {
            return Err(Error::invalid("scene layout is empty"));
        }
        if self.layout.iter().any(|(_, f)| !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::invalid("layout fractions must be non-negative"));
        }
        let total: f64 = self.layout.iter().map(|(_, f)| f).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("layout fractions sum to {total}, expected 1")));
        }
        Ok(())
    }
}

/// Generates the label raster and the ground-truth sample of one scene.
pub fn generate_scene(cfg: &SceneConfig, gen: &ClassGripGenerator) -> Result<(LabelRaster, GroundTruthSample)> {
    cfg.validate()?;
    let rows = cfg.height - cfg.horizon;
    let mut bounds = Vec::with_capacity(cfg.layout.len());
    let mut acc = 0.0;
    for (_, f) in &cfg.layout {
        acc += f;
        bounds.push(((acc * rows as f64).round() as usize).min(rows));
    }
    *bounds.last_mut().expect("non-empty layout") = rows;
    let far = cfg.layout.last().expect("non-empty layout").0;
    let state_at = |offset_from_bottom: usize| {
        bounds
            .iter()
            .position(|b| offset_from_bottom < *b)
            .map(|i| cfg.layout[i].0)
            .unwrap_or(far)
    };

    let mut labels = Vec::with_capacity(cfg.height * cfg.width);
    for r in 0..cfg.height {
        let state = state_at(cfg.height - 1 - r);
        labels.extend(std::iter::repeat_n(state, cfg.width));
    }
    let labels = LabelRaster::new(cfg.height, cfg.width, labels)?;

    let col = cfg.width / 2;
    let pixels = (cfg.horizon..cfg.height)
        .map(|row| {
            let state = labels.get(row, col);
            let u: f64 = stream(cfg.seed, domain::GRIP, row as u64).random();
            GroundTruthPixel {
                row,
                col,
                grip: gen.draw(state, u),
                state,
            }
        })
        .collect();
    let sample = GroundTruthSample::new(
        format!("scene-{:020}", cfg.seed),
        cfg.height,
        cfg.width,
        cfg.horizon,
        pixels,
    )?;
    Ok((labels, sample))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatorConfig {
    pub accuracy: f64,
    pub temperature: f64,
    pub noise_sigma: f64,
    /// Reported sigma is the true sigma divided by this factor.
    pub miscalibration: f64,
    pub ensemble_size: usize,
    pub mc_dropout_samples: usize,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self {
            accuracy: 0.95,
            temperature: 0.5,
            noise_sigma: 0.02,
            miscalibration: 1.0,
            ensemble_size: 5,
            mc_dropout_samples: 10,
        }
    }
}

impl SimulatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(Error::invalid(format!("accuracy {} outside [0, 1]", self.accuracy)));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::invalid("temperature must be positive"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise sigma must be non-negative"));
        }
        if !(self.miscalibration.is_finite() && self.miscalibration > 0.0) {
            return Err(Error::invalid("miscalibration factor must be positive"));
        }
        if self.ensemble_size < 2 || self.mc_dropout_samples < 2 {
            return Err(Error::invalid("ensembles need at least 2 members"));
        }
        Ok(())
    }
}

/// Simulated segmentation output. The emitted class equals the label with
/// probability `accuracy`, otherwise it is one of the other classes chosen
/// uniformly. Logits are 1 for the emitted class and 0 elsewhere, divided by
/// the temperature and passed through a softmax.
pub fn simulate_classifier(labels: &LabelRaster, cfg: &SimulatorConfig, seed: u64) -> Result<ClassProbabilityRaster> {
    cfg.validate()?;
    let others = (CLASS_COUNT - 1) as f64;
    let damp = (-1.0 / cfg.temperature).exp();
    let top = 1.0 / (1.0 + others * damp);
    let rest = damp * top;

    let mut probs = Vec::with_capacity(labels.labels().len() * CLASS_COUNT);
    for (i, truth) in labels.labels().iter().enumerate() {
        let mut rng = stream(seed, domain::CLASSIFIER, i as u64);
        let emitted = if rng.random::<f64>() < cfg.accuracy {
            truth.index()
        } else {
            let k = rng.random_range(0..CLASS_COUNT - 1);
            if k >= truth.index() {
                k + 1
            } else {
                k
            }
        };
        probs.extend((0..CLASS_COUNT).map(|c| if c == emitted { top } else { rest }));
    }
    ClassProbabilityRaster::new(labels.height(), labels.width(), probs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressorOutputs {
    pub normal: NormalRaster,
    pub quantile: QuantileRaster,
    pub ensemble: EnsembleStack,
}

struct ClassStats {
    mean: f64,
    sigma: f64,
    q_low: f64,
    q_high: f64,
}

fn class_stats(gen: &ClassGripGenerator) -> Vec<ClassStats> {
    SurfaceState::ALL
        .iter()
        .map(|s| {
            let d = gen.density(*s);
            ClassStats {
                mean: d.mean(),
                sigma: d.std_dev(),
                q_low: d.quantile(0.05).expect("valid level"),
                q_high: d.quantile(0.95).expect("valid level"),
            }
        })
        .collect()
}

fn member_stack(
    labels: &LabelRaster,
    stats: &[ClassStats],
    cfg: &SimulatorConfig,
    seed: u64,
    head: u64,
    members: usize,
) -> Result<EnsembleStack> {
    let n = labels.labels().len();
    let mut out = vec![Vec::with_capacity(n); members];
    for (i, s) in labels.labels().iter().enumerate() {
        let st = &stats[s.index()];
        let spread = st.sigma / cfg.miscalibration;
        let mut rng = stream(seed, head, i as u64);
        for m in out.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            m.push(st.mean + spread * z);
        }
    }
    EnsembleStack::new(labels.height(), labels.width(), out)
}

/// Simulated Gaussian head, quantile head and ensemble for every pixel,
/// each based on the analytic statistics of the pixel's true class density.
pub fn simulate_regressors(
    labels: &LabelRaster,
    gen: &ClassGripGenerator,
    cfg: &SimulatorConfig,
    seed: u64,
) -> Result<RegressorOutputs> {
    cfg.validate()?;
    let stats = class_stats(gen);
    let f = cfg.miscalibration;

    let mut normal = Vec::with_capacity(labels.labels().len());
    let mut quantile = Vec::with_capacity(labels.labels().len());
    for (i, s) in labels.labels().iter().enumerate() {
        let st = &stats[s.index()];
        let z: f64 = stream(seed, domain::NORMAL_HEAD, i as u64).sample(StandardNormal);
        let sigma = st.sigma / f;
        normal.push(NormalPrediction {
            mu: st.mean + cfg.noise_sigma * z,
            log_var: 2.0 * sigma.ln(),
        });
        quantile.push(QuantilePrediction {
            q_low: st.mean + (st.q_low - st.mean) / f,
            q_high: st.mean + (st.q_high - st.mean) / f,
        });
    }

    Ok(RegressorOutputs {
        normal: NormalRaster {
            height: labels.height(),
            width: labels.width(),
            preds: normal,
        },
        quantile: QuantileRaster {
            height: labels.height(),
            width: labels.width(),
            preds: quantile,
        },
        ensemble: member_stack(labels, &stats, cfg, seed, domain::ENSEMBLE, cfg.ensemble_size)?,
    })
}

/// Simulated MC-dropout samples; same construction as the ensemble with its
/// own stream and sample count.
pub fn simulate_mc_dropout(
    labels: &LabelRaster,
    gen: &ClassGripGenerator,
    cfg: &SimulatorConfig,
    seed: u64,
) -> Result<EnsembleStack> {
    cfg.validate()?;
    let stats = class_stats(gen);
    member_stack(labels, &stats, cfg, seed, domain::MC_DROPOUT, cfg.mc_dropout_samples)
}
