//! Grip probability distributions from road surface state probabilities.
//!
//! Each pixel's class probabilities are fused with per-class piecewise-linear
//! grip densities into a full grip distribution, from which the mean, median,
//! 5th/95th percentiles and a central sigma interval are extracted. The crate
//! also carries the four regression-style baselines (ensembles, MC dropout,
//! Gaussian head, quantile head) with their training losses, a calibration
//! metric suite, and a deterministic synthetic data generator.

pub mod baselines;
pub mod cli;
pub mod error;
pub mod metrics;
pub mod mixture;
pub mod nelder_mead;
pub mod pl_density;
pub mod raster;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use mixture::{MixtureTable, SurfaceState};
pub use pl_density::{GripHistogram, PiecewiseLinearDensity};
pub use raster::{ClassProbabilityRaster, GripSummary, GripSummaryRaster, LabelRaster};
