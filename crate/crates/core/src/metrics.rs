//! Calibration metrics for grip predictions.
//!
//! Metrics are computed per sample with row-dependent pixel weights and then
//! averaged over samples. Intervals are clamped to the evaluation range
//! before coverage is measured.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mixture::SurfaceState;
use crate::raster::GripSummaryRaster;

/// Floor on the raw weight of pixels at (or above) the horizon.
pub const WEIGHT_FLOOR: f64 = 1e-3;

pub const EVAL_MIN: f64 = 0.1;
pub const EVAL_LOWER_MAX: f64 = 0.81;
pub const EVAL_MAX: f64 = 0.82;

pub const REPORT_HEADER: &str =
    "method,rmse_mean,rmse_median,F_sigma,F_90,F_over_P5,mean_interval_len,mean_P5,viol_p50,viol_p70,viol_p90";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthPixel {
    pub row: usize,
    pub col: usize,
    pub grip: f64,
    pub state: SurfaceState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthSample {
    pub id: String,
    pub height: usize,
    pub width: usize,
    pub horizon: usize,
    pub pixels: Vec<GroundTruthPixel>,
}

impl GroundTruthSample {
    pub fn new(
        id: impl Into<String>,
        height: usize,
        width: usize,
        horizon: usize,
        pixels: Vec<GroundTruthPixel>,
    ) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::invalid("a sample needs at least one ground-truth pixel"));
        }
        if horizon >= height {
            return Err(Error::invalid("horizon row must lie inside the image"));
        }
        for p in &pixels {
            if p.row >= height || p.col >= width {
                return Err(Error::invalid(format!("pixel ({}, {}) out of bounds", p.row, p.col)));
            }
            if !(p.grip.is_finite() && (0.0..=1.0).contains(&p.grip)) {
                return Err(Error::invalid(format!("grip {} outside [0, 1]", p.grip)));
            }
        }
        Ok(Self {
            id: id.into(),
            height,
            width,
            horizon,
            pixels,
        })
    }
}

/// Weights decreasing linearly from the bottom row to the horizon, scaled to mean one.
pub fn pixel_weights(sample: &GroundTruthSample) -> Result<Vec<f64>> {
    if sample.pixels.iter().all(|p| p.row <= sample.horizon) {
        return Err(Error::invalid("all ground-truth pixels lie at or above the horizon"));
    }
    let bottom = (sample.height - 1) as f64;
    let horizon = sample.horizon as f64;
    let raw: Vec<f64> = sample
        .pixels
        .iter()
        .map(|p| ((p.row as f64 - horizon) / (bottom - horizon)).max(WEIGHT_FLOOR))
        .collect();
    let total: f64 = raw.iter().sum();
    let n = raw.len() as f64;
    Ok(raw.into_iter().map(|r| r * n / total).collect())
}

/// Clamps an interval to the evaluation range: the lower bound to
/// [0.1, 0.81], the upper bound to [0.1, 0.81] unless it exceeds 0.81, in
/// which case it becomes 0.82.
pub fn clamp_interval_for_eval(low: f64, high: f64) -> (f64, f64) {
    let lo = low.clamp(EVAL_MIN, EVAL_LOWER_MAX);
    let hi = if high > EVAL_LOWER_MAX {
        EVAL_MAX
    } else {
        high.clamp(EVAL_MIN, EVAL_LOWER_MAX)
    };
    (lo, hi.max(lo))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoverageMode {
    #[default]
    Weighted,
    Unweighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ViolationMode {
    /// Percentiles per sample, averaged over samples with violations.
    #[default]
    PerSample,
    /// Percentiles over all violating pixels of all samples.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub clamp: bool,
    pub coverage: CoverageMode,
    pub violations: ViolationMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            clamp: true,
            coverage: CoverageMode::Weighted,
            violations: ViolationMode::PerSample,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleMetrics {
    pub id: String,
    pub wmse_mean: f64,
    pub wmse_median: Option<f64>,
    pub frac_sigma: Option<f64>,
    pub frac_90: f64,
    pub frac_over_p5: f64,
    pub mean_interval_len: f64,
    pub mean_p5: f64,
    /// `P5 - g` for every pixel with `g < P5`, unweighted.
    pub violations: Vec<f64>,
    /// Weighted mean ground-truth grip.
    pub mean_grip: f64,
}

pub fn sample_metrics(
    summary: &GripSummaryRaster,
    sample: &GroundTruthSample,
    opts: &EvalOptions,
) -> Result<SampleMetrics> {
    if summary.height != sample.height || summary.width != sample.width {
        return Err(Error::invalid(format!(
            "summary is {}x{}, sample {} is {}x{}",
            summary.height, summary.width, sample.id, sample.height, sample.width
        )));
    }
    let weights = pixel_weights(sample)?;
    let interval = |lo: f64, hi: f64| {
        if opts.clamp {
            clamp_interval_for_eval(lo, hi)
        } else {
            (lo, hi)
        }
    };

    let n = weights.len() as f64;
    let mut sq_mean = 0.0;
    let mut sq_median = 0.0;
    let mut in_sigma = 0.0;
    let mut in_90 = 0.0;
    let mut over_p5 = 0.0;
    let mut coverage_total = 0.0;
    let mut len_sum = 0.0;
    let mut p5_sum = 0.0;
    let mut grip_sum = 0.0;
    let mut violations = Vec::new();

    for (px, w) in sample.pixels.iter().zip(&weights) {
        let s = summary.get(px.row, px.col).ok_or_else(|| {
            Error::invalid(format!("summary lacks pixel ({}, {})", px.row, px.col))
        })?;
        let g = px.grip;
        let cw = match opts.coverage {
            CoverageMode::Weighted => *w,
            CoverageMode::Unweighted => 1.0,
        };
        coverage_total += cw;

        sq_mean += w * (g - s.mean) * (g - s.mean);
        if summary.has_median {
            sq_median += w * (g - s.median) * (g - s.median);
        }
        let (lo, hi) = interval(s.p05, s.p95);
        if lo <= g && g <= hi {
            in_90 += cw;
        }
        if g > lo {
            over_p5 += cw;
        } else if g < lo {
            violations.push(lo - g);
        }
        if summary.has_sigma {
            let (slo, shi) = interval(s.sigma_low, s.sigma_high);
            if slo <= g && g <= shi {
                in_sigma += cw;
            }
        }
        len_sum += w * (hi - lo);
        p5_sum += w * lo;
        grip_sum += w * g;
    }

    Ok(SampleMetrics {
        id: sample.id.clone(),
        wmse_mean: sq_mean / n,
        wmse_median: summary.has_median.then_some(sq_median / n),
        frac_sigma: summary.has_sigma.then_some(in_sigma / coverage_total),
        frac_90: in_90 / coverage_total,
        frac_over_p5: over_p5 / coverage_total,
        mean_interval_len: len_sum / n,
        mean_p5: p5_sum / n,
        violations,
        mean_grip: grip_sum / n,
    })
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn mean_of(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        None
    } else {
        Some(compensated_sum(v.iter().copied()) / v.len() as f64)
    }
}

/// Percentile with linear interpolation between order statistics
/// (position `q * (n - 1)` in the sorted list).
pub fn percentile_linear(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub method: String,
    pub rmse_mean: f64,
    pub rmse_median: Option<f64>,
    /// Percentages.
    pub f_sigma: Option<f64>,
    pub f_90: f64,
    pub f_over_p5: f64,
    pub mean_interval_len: f64,
    pub mean_p5: f64,
    pub viol_p50: Option<f64>,
    pub viol_p70: Option<f64>,
    pub viol_p90: Option<f64>,
}

const VIOLATION_LEVELS: [f64; 3] = [0.5, 0.7, 0.9];

/// Averages per-sample metrics over the test set, in sample-id order.
pub fn aggregate(method: &str, records: &[SampleMetrics], opts: &EvalOptions) -> Result<MetricRow> {
    if records.is_empty() {
        return Err(Error::invalid("no sample metrics to aggregate"));
    }
    let mut sorted: Vec<&SampleMetrics> = records.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));

    let all = |f: fn(&SampleMetrics) -> f64| mean_of(sorted.iter().map(|r| f(r))).unwrap();
    let optional = |f: fn(&SampleMetrics) -> Option<f64>| -> Option<f64> {
        sorted.iter().map(|r| f(r)).collect::<Option<Vec<f64>>>().and_then(mean_of)
    };

    let violation_percentiles: [Option<f64>; 3] = match opts.violations {
        ViolationMode::PerSample => {
            let per_sample: Vec<Vec<f64>> = sorted
                .iter()
                .filter(|r| !r.violations.is_empty())
                .map(|r| {
                    let mut v = r.violations.clone();
                    v.sort_by(f64::total_cmp);
                    v
                })
                .collect();
            VIOLATION_LEVELS.map(|q| mean_of(per_sample.iter().filter_map(|v| percentile_linear(v, q))))
        }
        ViolationMode::Pooled => {
            let mut pooled: Vec<f64> = sorted.iter().flat_map(|r| r.violations.iter().copied()).collect();
            pooled.sort_by(f64::total_cmp);
            VIOLATION_LEVELS.map(|q| percentile_linear(&pooled, q))
        }
    };

    Ok(MetricRow {
        method: method.to_string(),
        rmse_mean: all(|r| r.wmse_mean).sqrt(),
        rmse_median: optional(|r| r.wmse_median).map(f64::sqrt),
        f_sigma: optional(|r| r.frac_sigma).map(|f| 100.0 * f),
        f_90: 100.0 * all(|r| r.frac_90),
        f_over_p5: 100.0 * all(|r| r.frac_over_p5),
        mean_interval_len: all(|r| r.mean_interval_len),
        mean_p5: all(|r| r.mean_p5),
        viol_p50: violation_percentiles[0],
        viol_p70: violation_percentiles[1],
        viol_p90: violation_percentiles[2],
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl MetricRow {
    fn cells(&self) -> [Option<f64>; 10] {
        [
            Some(self.rmse_mean),
            self.rmse_median,
            self.f_sigma,
            Some(self.f_90),
            Some(self.f_over_p5),
            Some(self.mean_interval_len),
            Some(self.mean_p5),
            self.viol_p50,
            self.viol_p70,
            self.viol_p90,
        ]
    }
}

impl MetricReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.method);
            for c in row.cells() {
                out.push(',');
                out.push_str(&cell(c));
            }
            out.push('\n');
        }
        out
    }

    /// Aligned plain-text table; absent cells shown as `-`.
    pub fn to_table(&self) -> String {
        let header: Vec<&str> = REPORT_HEADER.split(',').collect();
        let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for r in &self.rows {
            let mut line = vec![r.method.clone()];
            line.extend(r.cells().iter().map(|c| match c {
                Some(v) => format!("{v:.4}"),
                None => "-".to_string(),
            }));
            rows.push(line);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|i| rows.iter().map(|r| r[i].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in rows {
            for (i, c) in r.iter().enumerate() {
                if i == 0 {
                    let _ = write!(out, "{c:<w$}", w = widths[i]);
                } else {
                    let _ = write!(out, "  {c:>w$}", w = widths[i]);
                }
            }
            out.push('\n');
        }
        out
    }
}
