//! Fusion of class probabilities with per-class grip densities.
//!
//! For class probabilities `p_c` and class densities `q_c`, the grip
//! distribution of a pixel is `sum_c p_c * q_c(g)`. A mixture of
//! piecewise-linear densities is piecewise linear on the union of all class
//! knots, so the table below stores, for every union segment, each class's
//! pdf at both segment ends and each class's cdf at every union knot. A
//! pixel's cdf at a knot is then a K-term dot product and its percentiles
//! follow from a bracket search plus one quadratic solve, without ever
//! materializing the per-pixel density.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pl_density::{quantile_on, PiecewiseLinearDensity, SegmentGrid};
use crate::raster::{check_probabilities, ClassProbabilityRaster, GripSummary, GripSummaryRaster, LabelRaster};

pub const CLASS_COUNT: usize = 5;

const KNOT_DEDUP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum SurfaceState {
    /// Dry and moist merged.
    Dry = 0,
    Wet = 1,
    Snowy = 2,
    Icy = 3,
    Slushy = 4,
}

impl SurfaceState {
    pub const ALL: [SurfaceState; CLASS_COUNT] = [
        SurfaceState::Dry,
        SurfaceState::Wet,
        SurfaceState::Snowy,
        SurfaceState::Icy,
        SurfaceState::Slushy,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::invalid(format!("surface state code {code} outside 0..4")))
    }

    pub fn name(self) -> &'static str {
        match self {
            SurfaceState::Dry => "dry",
            SurfaceState::Wet => "wet",
            SurfaceState::Snowy => "snowy",
            SurfaceState::Icy => "icy",
            SurfaceState::Slushy => "slushy",
        }
    }
}

impl fmt::Display for SurfaceState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SurfaceState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown surface state {s:?}")))
    }
}

/// Probability levels extracted per pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryLevels {
    pub low: f64,
    pub high: f64,
    pub sigma_low: f64,
    pub sigma_high: f64,
}

impl Default for SummaryLevels {
    fn default() -> Self {
        Self {
            low: 0.05,
            high: 0.95,
            sigma_low: 0.158655,
            sigma_high: 0.841345,
        }
    }
}

impl SummaryLevels {
    fn validate(&self) -> Result<()> {
        let ordered = 0.0 < self.low
            && self.low <= self.sigma_low
            && self.sigma_low <= 0.5
            && 0.5 <= self.sigma_high
            && self.sigma_high <= self.high
            && self.high < 1.0;
        if ordered {
            Ok(())
        } else {
            Err(Error::invalid("summary levels must satisfy 0 < low <= sigma_low <= 0.5 <= sigma_high <= high < 1"))
        }
    }
}

type ClassRow = [f64; CLASS_COUNT];

#[derive(Debug, Clone)]
pub struct MixtureTable {
    knots: Vec<f64>,
    /// Per union segment: each class's pdf at the segment start.
    left: Vec<ClassRow>,
    /// Per union segment: each class's pdf at the segment end.
    right: Vec<ClassRow>,
    /// Per union knot: each class's cdf.
    cdf: Vec<ClassRow>,
    means: ClassRow,
    densities: Vec<PiecewiseLinearDensity>,
}

#[inline]
fn dot(p: &ClassRow, row: &ClassRow) -> f64 {
    let mut acc = 0.0;
    for c in 0..CLASS_COUNT {
        acc += p[c] * row[c];
    }
    acc
}

/// Builds the precomputed table. Each density's class name must be one of
/// the five surface states, each appearing exactly once.
pub fn build_mixture_table(densities: &[PiecewiseLinearDensity]) -> Result<MixtureTable> {
    let mut slots: [Option<&PiecewiseLinearDensity>; CLASS_COUNT] = Default::default();
    for d in densities {
        let state: SurfaceState = d.class().parse()?;
        if slots[state.index()].replace(d).is_some() {
            return Err(Error::invalid(format!("duplicate density for class {state}")));
        }
    }
    let ordered: Vec<PiecewiseLinearDensity> = slots
        .iter()
        .zip(SurfaceState::ALL)
        .map(|(d, s)| d.cloned().ok_or_else(|| Error::invalid(format!("missing density for class {s}"))))
        .collect::<Result<_>>()?;

    let mut all: Vec<f64> = ordered.iter().flat_map(|d| d.knots().iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    let mut knots: Vec<f64> = Vec::with_capacity(all.len());
    for k in all {
        match knots.last() {
            Some(prev) if k - prev <= KNOT_DEDUP_TOL => {}
            _ => knots.push(k),
        }
    }

    let segments = knots.len() - 1;
    let mut left = vec![[0.0; CLASS_COUNT]; segments];
    let mut right = vec![[0.0; CLASS_COUNT]; segments];
    let mut cdf = vec![[0.0; CLASS_COUNT]; knots.len()];
    let mut means = [0.0; CLASS_COUNT];
    for (c, d) in ordered.iter().enumerate() {
        for j in 0..segments {
            left[j][c] = d.pdf_right_limit(knots[j]);
            right[j][c] = d.pdf_left_limit(knots[j + 1]);
        }
        for (j, k) in knots.iter().enumerate() {
            cdf[j][c] = d.cdf(*k);
        }
        means[c] = d.mean();
    }

    Ok(MixtureTable {
        knots,
        left,
        right,
        cdf,
        means,
        densities: ordered,
    })
}

impl MixtureTable {
    pub fn union_knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn class_density(&self, state: SurfaceState) -> &PiecewiseLinearDensity {
        &self.densities[state.index()]
    }

    pub fn class_mean(&self, state: SurfaceState) -> f64 {
        self.means[state.index()]
    }

    /// Class cdf at every union knot.
    pub fn class_cdf_row(&self, state: SurfaceState) -> Vec<f64> {
        self.cdf.iter().map(|r| r[state.index()]).collect()
    }

    /// Class pdf at every union knot (right limit, last knot left limit).
    pub fn class_pdf_row(&self, state: SurfaceState) -> Vec<f64> {
        let c = state.index();
        let mut row: Vec<f64> = self.left.iter().map(|r| r[c]).collect();
        row.push(self.right[self.right.len() - 1][c]);
        row
    }

    /// Mixture density for one pixel, restated on the union knots.
    pub fn fuse(&self, probs: &[f64]) -> Result<PiecewiseLinearDensity> {
        let p = normalized(probs)?;
        let left = self.left.iter().map(|r| dot(&p, r)).collect();
        let right = self.right.iter().map(|r| dot(&p, r)).collect();
        let cumulative = self.cdf.iter().map(|r| dot(&p, r)).collect();
        Ok(PiecewiseLinearDensity::from_parts(
            "mixture".to_string(),
            self.knots.clone(),
            left,
            right,
            cumulative,
            dot(&p, &self.means),
        ))
    }

    /// Summary of one pixel without materializing its density.
    pub fn summarize(&self, probs: &[f64], levels: &SummaryLevels) -> Result<GripSummary> {
        let p = normalized(probs)?;
        Ok(self.summarize_normalized(&p, levels))
    }

    fn summarize_normalized(&self, p: &ClassRow, levels: &SummaryLevels) -> GripSummary {
        let grid = PixelGrid { table: self, p };
        GripSummary {
            mean: dot(p, &self.means),
            median: quantile_on(&grid, 0.5),
            p05: quantile_on(&grid, levels.low),
            p95: quantile_on(&grid, levels.high),
            sigma_low: quantile_on(&grid, levels.sigma_low),
            sigma_high: quantile_on(&grid, levels.sigma_high),
        }
    }
}

fn normalized(probs: &[f64]) -> Result<ClassRow> {
    if probs.len() != CLASS_COUNT {
        return Err(Error::invalid(format!(
            "expected {CLASS_COUNT} class probabilities, got {}",
            probs.len()
        )));
    }
    let sum = check_probabilities(probs)?;
    let mut p = [0.0; CLASS_COUNT];
    for (o, v) in p.iter_mut().zip(probs) {
        *o = v / sum;
    }
    Ok(p)
}

struct PixelGrid<'a> {
    table: &'a MixtureTable,
    p: &'a ClassRow,
}

impl SegmentGrid for PixelGrid<'_> {
    fn segments(&self) -> usize {
        self.table.left.len()
    }
    #[inline]
    fn knot(&self, i: usize) -> f64 {
        self.table.knots[i]
    }
    #[inline]
    fn cumulative(&self, i: usize) -> f64 {
        dot(self.p, &self.table.cdf[i])
    }
    #[inline]
    fn segment_values(&self, seg: usize) -> (f64, f64) {
        (dot(self.p, &self.table.left[seg]), dot(self.p, &self.table.right[seg]))
    }
}

/// Fuses every pixel of a probability raster, single-threaded.
pub fn fuse_raster(
    table: &MixtureTable,
    raster: &ClassProbabilityRaster,
    levels: &SummaryLevels,
) -> Result<GripSummaryRaster> {
    fuse_raster_with_workers(table, raster, levels, 1)
}

const CHUNK: usize = 4096;

/// Fuses every pixel using `workers` threads. Output is independent of `workers`.
pub fn fuse_raster_with_workers(
    table: &MixtureTable,
    raster: &ClassProbabilityRaster,
    levels: &SummaryLevels,
    workers: usize,
) -> Result<GripSummaryRaster> {
    levels.validate()?;
    let n = raster.pixels();
    let mut out = vec![GripSummary::NAN; n];

    let fill = |(chunk_idx, chunk): (usize, &mut [GripSummary])| -> Result<()> {
        let base = chunk_idx * CHUNK;
        for (k, slot) in chunk.iter_mut().enumerate() {
            let p = normalized(raster.pixel(base + k))?;
            *slot = table.summarize_normalized(&p, levels);
        }
        Ok(())
    };

    if workers <= 1 {
        out.chunks_mut(CHUNK).enumerate().try_for_each(fill)?;
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
        pool.install(|| out.par_chunks_mut(CHUNK).enumerate().try_for_each(fill))?;
    }
    Ok(GripSummaryRaster::full(raster.height(), raster.width(), out))
}

/// Fuses the one-hot encoding of ground-truth labels.
pub fn ideal_from_labels(
    table: &MixtureTable,
    labels: &LabelRaster,
    levels: &SummaryLevels,
) -> Result<GripSummaryRaster> {
    fuse_raster(table, &ClassProbabilityRaster::one_hot(labels), levels)
}
