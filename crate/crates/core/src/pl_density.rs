//! Piecewise-linear probability densities on the grip axis.
//!
//! A density is stored segment by segment: each segment carries the pdf value
//! at its start and end, so the representation can also hold the jumps that
//! appear when densities with different supports are mixed. Densities built
//! from knot values are continuous. The cumulative mass at every knot is
//! cached, which makes `cdf` a single quadratic evaluation and `quantile` a
//! bracket search plus one quadratic solve.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nelder_mead::{self, ObjectiveSpec, SimplexOptions};

/// Default number of linear segments used when fitting class densities.
pub const DEFAULT_INTERVALS: usize = 20;

const SLOPE_EPS: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearDensity {
    class: String,
    knots: Vec<f64>,
    /// pdf at the start of each segment (right limit at `knots[i]`).
    left: Vec<f64>,
    /// pdf at the end of each segment (left limit at `knots[i + 1]`).
    right: Vec<f64>,
    cumulative: Vec<f64>,
    mean: f64,
}

/// Read access to a segmented density without materializing it.
pub(crate) trait SegmentGrid {
    fn segments(&self) -> usize;
    fn knot(&self, i: usize) -> f64;
    fn cumulative(&self, i: usize) -> f64;
    fn segment_values(&self, seg: usize) -> (f64, f64);
}

impl SegmentGrid for PiecewiseLinearDensity {
    fn segments(&self) -> usize {
        self.left.len()
    }
    fn knot(&self, i: usize) -> f64 {
        self.knots[i]
    }
    fn cumulative(&self, i: usize) -> f64 {
        self.cumulative[i]
    }
    fn segment_values(&self, seg: usize) -> (f64, f64) {
        (self.left[seg], self.right[seg])
    }
}

/// Mass of a segment between its start and offset `t`.
#[inline]
fn partial_mass(y0: f64, y1: f64, h: f64, t: f64) -> f64 {
    let slope = (y1 - y0) / h;
    t * (y0 + 0.5 * slope * t)
}

/// Smallest grid point whose cumulative mass reaches `p`.
pub(crate) fn quantile_on<G: SegmentGrid>(grid: &G, p: f64) -> f64 {
    let n = grid.segments();
    if p <= 0.0 {
        return grid.knot(0);
    }
    // First knot index j >= 1 with cumulative(j) >= p.
    let (mut lo, mut hi) = (1, n + 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if grid.cumulative(mid) >= p {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    if lo > n {
        return grid.knot(n);
    }
    // Exact hit: the root below would lose half its digits where the density vanishes.
    if grid.cumulative(lo) == p {
        return grid.knot(lo);
    }
    let seg = lo - 1;
    let start = grid.knot(seg);
    let h = grid.knot(lo) - start;
    let (y0, y1) = grid.segment_values(seg);
    let slope = (y1 - y0) / h;
    let r = p - grid.cumulative(seg);
    let t = if slope.abs() < SLOPE_EPS {
        if y0 > 0.0 {
            r / y0
        } else {
            h
        }
    } else {
        // Root of 0.5*slope*t^2 + y0*t - r = 0 in the cancellation-free form.
        let disc = (y0 * y0 + 2.0 * slope * r).max(0.0);
        let denom = y0 + disc.sqrt();
        if denom > 0.0 {
            2.0 * r / denom
        } else {
            h
        }
    };
    start + t.clamp(0.0, h)
}

impl PiecewiseLinearDensity {
    /// Builds a continuous density from knot positions and pdf values at the knots.
    pub fn build(
        class: impl Into<String>,
        knots: Vec<f64>,
        densities: Vec<f64>,
        auto_normalize: bool,
    ) -> Result<Self> {
        if knots.len() != densities.len() {
            return Err(Error::invalid(format!(
                "{} knots but {} density values",
                knots.len(),
                densities.len()
            )));
        }
        if knots.len() < 2 {
            return Err(Error::invalid("a density needs at least two knots"));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::invalid("knots must be finite"));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("knots must be strictly increasing"));
        }
        if densities.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::invalid("densities must be finite and non-negative"));
        }
        if densities.iter().all(|d| *d == 0.0) {
            return Err(Error::invalid("densities are all zero"));
        }

        let integral: f64 = knots
            .windows(2)
            .zip(densities.windows(2))
            .map(|(k, d)| 0.5 * (d[0] + d[1]) * (k[1] - k[0]))
            .sum();
        if !auto_normalize && (integral - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "density integrates to {integral}, expected 1"
            )));
        }
        let scaled: Vec<f64> = densities.iter().map(|d| d / integral).collect();
        let left = scaled[..scaled.len() - 1].to_vec();
        let right = scaled[1..].to_vec();
        Ok(Self::from_segments(class.into(), knots, left, right))
    }

    fn from_segments(class: String, knots: Vec<f64>, left: Vec<f64>, right: Vec<f64>) -> Self {
        let mut cumulative = Vec::with_capacity(knots.len());
        cumulative.push(0.0);
        let mut acc = 0.0;
        let mut mean = 0.0;
        for i in 0..left.len() {
            let x0 = knots[i];
            let h = knots[i + 1] - x0;
            let (y0, y1) = (left[i], right[i]);
            let slope = (y1 - y0) / h;
            acc += partial_mass(y0, y1, h, h);
            cumulative.push(acc);
            mean += x0 * (y0 * h + 0.5 * slope * h * h)
                + 0.5 * y0 * h * h
                + slope * h * h * h / 3.0;
        }
        Self {
            class,
            knots,
            left,
            right,
            cumulative,
            mean,
        }
    }

    /// Assembles a density from precomputed segment data. Used by the
    /// mixture code, which derives cumulative mass and mean by linearity.
    pub(crate) fn from_parts(
        class: String,
        knots: Vec<f64>,
        left: Vec<f64>,
        right: Vec<f64>,
        cumulative: Vec<f64>,
        mean: f64,
    ) -> Self {
        debug_assert_eq!(knots.len(), left.len() + 1);
        debug_assert_eq!(cumulative.len(), knots.len());
        Self {
            class,
            knots,
            left,
            right,
            cumulative,
            mean,
        }
    }

    pub fn class(&self) -> &str {
        &self.class
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// pdf value at each knot. At a jump the value of the segment starting
    /// at that knot is reported; the final knot reports the last segment's end.
    pub fn knot_values(&self) -> Vec<f64> {
        let mut v = self.left.clone();
        v.push(*self.right.last().expect("at least one segment"));
        v
    }

    pub fn is_continuous(&self) -> bool {
        self.right[..self.right.len() - 1]
            .iter()
            .zip(&self.left[1..])
            .all(|(a, b)| a == b)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    pub fn segment_count(&self) -> usize {
        self.left.len()
    }

    /// Trapezoid integral of the pdf.
    pub fn integral(&self) -> f64 {
        self.knots
            .windows(2)
            .zip(self.left.iter().zip(&self.right))
            .map(|(k, (a, b))| 0.5 * (a + b) * (k[1] - k[0]))
            .sum()
    }

    fn locate(&self, g: f64) -> usize {
        // Segment i with knots[i] <= g < knots[i + 1], clamped to the last segment.
        let idx = self.knots.partition_point(|k| *k <= g);
        idx.saturating_sub(1).min(self.left.len() - 1)
    }

    pub fn pdf(&self, g: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(g >= lo && g <= hi) {
            return 0.0;
        }
        if g == hi {
            return self.right[self.right.len() - 1];
        }
        let i = self.locate(g);
        let t = (g - self.knots[i]) / (self.knots[i + 1] - self.knots[i]);
        self.left[i] + t * (self.right[i] - self.left[i])
    }

    /// pdf just to the right of `g`.
    pub(crate) fn pdf_right_limit(&self, g: f64) -> f64 {
        let (lo, hi) = self.support();
        if g < lo || g >= hi {
            return 0.0;
        }
        let i = self.locate(g);
        let t = (g - self.knots[i]) / (self.knots[i + 1] - self.knots[i]);
        self.left[i] + t * (self.right[i] - self.left[i])
    }

    /// pdf just to the left of `g`.
    pub(crate) fn pdf_left_limit(&self, g: f64) -> f64 {
        let (lo, hi) = self.support();
        if g <= lo || g > hi {
            return 0.0;
        }
        // Segment i with knots[i] < g <= knots[i + 1].
        let i = self.knots.partition_point(|k| *k < g) - 1;
        let t = (g - self.knots[i]) / (self.knots[i + 1] - self.knots[i]);
        self.left[i] + t * (self.right[i] - self.left[i])
    }

    pub fn cdf(&self, g: f64) -> f64 {
        let (lo, hi) = self.support();
        if g.is_nan() {
            return f64::NAN;
        }
        if g <= lo {
            return 0.0;
        }
        if g >= hi {
            return 1.0;
        }
        let i = self.locate(g);
        let h = self.knots[i + 1] - self.knots[i];
        let c = self.cumulative[i] + partial_mass(self.left[i], self.right[i], h, g - self.knots[i]);
        c.clamp(0.0, 1.0)
    }

    /// Smallest grip value whose cdf reaches `p`. On zero-density plateaus the
    /// left edge of the plateau is returned.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
        }
        Ok(quantile_on(self, p))
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn median(&self) -> f64 {
        quantile_on(self, 0.5)
    }

    /// (mean, median)
    pub fn moments(&self) -> (f64, f64) {
        (self.mean(), self.median())
    }

    /// Analytic `E[g^2]`.
    pub fn second_moment(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.left.len() {
            let x0 = self.knots[i];
            let h = self.knots[i + 1] - x0;
            let y0 = self.left[i];
            let m = (self.right[i] - y0) / h;
            let (h2, h3) = (h * h, h * h * h);
            acc += x0 * x0 * (y0 * h + 0.5 * m * h2)
                + 2.0 * x0 * (0.5 * y0 * h2 + m * h3 / 3.0)
                + (y0 * h3 / 3.0 + 0.25 * m * h3 * h);
        }
        acc
    }

    pub fn variance(&self) -> f64 {
        (self.second_moment() - self.mean * self.mean).max(0.0)
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GripHistogram {
    class: String,
    edges: Vec<f64>,
    counts: Vec<f64>,
}

impl GripHistogram {
    pub fn new(class: impl Into<String>, edges: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || counts.len() + 1 != edges.len() {
            return Err(Error::invalid(format!(
                "histogram needs bins + 1 edges, got {} edges for {} bins",
                edges.len(),
                counts.len()
            )));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("histogram edges must be finite and strictly increasing"));
        }
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::invalid("histogram counts must be finite and non-negative"));
        }
        if counts.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid("histogram is empty"));
        }
        Ok(Self {
            class: class.into(),
            edges,
            counts,
        })
    }

    /// Bins `samples` into `bins` equal-width bins over `[lo, hi]`.
    /// Samples outside the range are dropped; `hi` itself lands in the last bin.
    pub fn from_samples(
        class: impl Into<String>,
        samples: &[f64],
        lo: f64,
        hi: f64,
        bins: usize,
    ) -> Result<Self> {
        if bins == 0 || hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::invalid("histogram range must be non-empty with at least one bin"));
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0.0; bins];
        for &s in samples {
            if s >= lo && s <= hi {
                let b = (((s - lo) / width) as usize).min(bins - 1);
                counts[b] += 1.0;
            }
        }
        Self::new(class, edges, counts)
    }

    pub fn class(&self) -> &str {
        &self.class
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// count / (total * bin width) per bin.
    pub fn densities(&self) -> Vec<f64> {
        let total: f64 = self.counts.iter().sum();
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(c, w)| c / (total * (w[1] - w[0])))
            .collect()
    }

    /// Range spanned by the bins with non-zero counts.
    pub fn occupied_support(&self) -> (f64, f64) {
        let first = self.counts.iter().position(|c| *c > 0.0).unwrap_or(0);
        let last = self.counts.iter().rposition(|c| *c > 0.0).unwrap_or(self.bins() - 1);
        (self.edges[first], self.edges[last + 1])
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub density: PiecewiseLinearDensity,
    /// Objective at the equal-spacing initialization.
    pub initial_objective: f64,
    pub objective: f64,
    pub evaluations: usize,
    pub converged: bool,
}

const WIDTH_FLOOR: f64 = 1e-6;
const INFEASIBLE: f64 = 1e10;

struct FitProblem {
    lo: f64,
    hi: f64,
    intervals: usize,
    centers: Vec<f64>,
    target: Vec<f64>,
}

impl FitProblem {
    fn dimension(&self) -> usize {
        2 * self.intervals
    }

    /// Knots from n-1 free width parameters (the last width is fixed) and
    /// densities from n+1 square-root parameters.
    fn decode(&self, params: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.intervals;
        let (width_params, density_params) = params.split_at(n - 1);
        let widths: Vec<f64> = width_params
            .iter()
            .map(|w| w * w + WIDTH_FLOOR)
            .chain(std::iter::once(1.0 + WIDTH_FLOOR))
            .collect();
        let total: f64 = widths.iter().sum();
        let span = self.hi - self.lo;
        let mut knots = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        knots.push(self.lo);
        for w in &widths[..n - 1] {
            acc += w;
            knots.push(self.lo + span * (acc / total));
        }
        knots.push(self.hi);
        let densities = density_params.iter().map(|d| d * d).collect();
        (knots, densities)
    }

    fn objective(&self, params: &[f64]) -> f64 {
        let (knots, mut densities) = self.decode(params);
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return INFEASIBLE;
        }
        let integral: f64 = knots
            .windows(2)
            .zip(densities.windows(2))
            .map(|(k, d)| 0.5 * (d[0] + d[1]) * (k[1] - k[0]))
            .sum();
        if !(integral.is_finite() && integral > 0.0) {
            return INFEASIBLE;
        }
        densities.iter_mut().for_each(|d| *d /= integral);

        let mut seg = 0;
        let mut sse = 0.0;
        for (&x, &h) in self.centers.iter().zip(&self.target) {
            let model = if x < knots[0] || x > knots[knots.len() - 1] {
                0.0
            } else {
                while seg + 2 < knots.len() && x >= knots[seg + 1] {
                    seg += 1;
                }
                let t = (x - knots[seg]) / (knots[seg + 1] - knots[seg]);
                densities[seg] + t * (densities[seg + 1] - densities[seg])
            };
            sse += (h - model) * (h - model);
        }
        sse / self.centers.len() as f64
    }
}

/// Fits an `n_intervals`-segment density to a histogram by jointly optimizing
/// interior knot positions and knot densities with Nelder–Mead.
///
/// The support is pinned to the range of occupied bins. The objective is the
/// mean squared difference between the histogram density and the normalized
/// piecewise-linear pdf at every bin center.
pub fn fit_from_histogram(
    hist: &GripHistogram,
    n_intervals: usize,
    opts: &SimplexOptions,
) -> Result<FitOutcome> {
    if n_intervals < 2 {
        return Err(Error::invalid("at least two intervals are required"));
    }
    if hist.bins() < n_intervals + 1 {
        return Err(Error::invalid(format!(
            "histogram has {} bins; fitting {n_intervals} intervals needs at least {}",
            hist.bins(),
            n_intervals + 1
        )));
    }
    let (lo, hi) = hist.occupied_support();
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    if hi - lo <= scale * f64::EPSILON * n_intervals as f64 {
        return Err(Error::invalid("histogram support is too narrow to fit"));
    }

    let problem = FitProblem {
        lo,
        hi,
        intervals: n_intervals,
        centers: hist.centers(),
        target: hist.densities(),
    };

    let hist_density = hist.densities();
    let mut x0 = vec![1.0; n_intervals - 1];
    for i in 0..=n_intervals {
        let knot = lo + (hi - lo) * (i as f64 / n_intervals as f64);
        let bin = hist
            .edges()
            .partition_point(|e| *e <= knot)
            .saturating_sub(1)
            .min(hist.bins() - 1);
        x0.push(hist_density[bin].sqrt());
    }

    let initial_objective = problem.objective(&x0);
    let spec = ObjectiveSpec::new(problem.dimension(), |p: &[f64]| problem.objective(p));
    let result = nelder_mead::minimize(&spec, &x0, opts)?;
    if !result.value.is_finite() || result.value >= INFEASIBLE {
        return Err(Error::Numerical(format!(
            "fit for class {} did not reach a feasible density",
            hist.class()
        )));
    }
    let (knots, densities) = problem.decode(&result.point);
    let density = PiecewiseLinearDensity::build(hist.class(), knots, densities, true)?;
    Ok(FitOutcome {
        density,
        initial_objective,
        objective: result.value,
        evaluations: result.evaluations,
        converged: result.converged,
    })
}

/// Formats a value with 17 significant digits in plain decimal notation.
pub(crate) fn fmt_sig17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (16 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

pub const DENSITY_HEADER: [&str; 3] = ["class", "knot_x", "density"];
pub const HISTOGRAM_HEADER: [&str; 4] = ["class", "bin_left", "bin_right", "count"];

/// Writes densities as `class,knot_x,density`, sorted by class then knot.
pub fn write_densities_csv<W: Write>(out: W, densities: &[PiecewiseLinearDensity]) -> Result<()> {
    let mut sorted: Vec<&PiecewiseLinearDensity> = densities.iter().collect();
    sorted.sort_by(|a, b| a.class().cmp(b.class()));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(DENSITY_HEADER).map_err(csv_io)?;
    for d in sorted {
        for (k, v) in d.knots().iter().zip(d.knot_values()) {
            w.write_record([d.class(), &fmt_sig17(*k), &fmt_sig17(v)])
                .map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn read_rows<R: Read>(
    mut r: csv::Reader<R>,
    path: &Path,
    header: &[&str],
) -> Result<Vec<csv::StringRecord>> {
    let found = r.headers().map_err(|e| Error::format(path, e.to_string()))?.clone();
    if found.iter().map(str::trim).ne(header.iter().copied()) {
        return Err(Error::format(
            path,
            format!("expected header `{}`", header.join(",")),
        ));
    }
    r.records()
        .map(|rec| rec.map_err(|e| Error::format(path, e.to_string())))
        .collect()
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path)?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn parse_field(path: &Path, line: usize, name: &str, s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| {
        Error::format(path, format!("record {line}: column {name} is not a number: {s:?}"))
    })
}

/// Groups consecutive rows by their class column, rejecting a class that
/// reappears after another class.
fn group_by_class(path: &Path, rows: &[csv::StringRecord]) -> Result<Vec<(String, Vec<usize>)>> {
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let class = row[0].trim().to_string();
        if class.is_empty() {
            return Err(Error::format(path, format!("record {}: empty class", i + 1)));
        }
        match groups.last_mut() {
            Some((c, idx)) if *c == class => idx.push(i),
            _ => {
                if groups.iter().any(|(c, _)| *c == class) {
                    return Err(Error::format(path, format!("rows for class {class} are not contiguous")));
                }
                groups.push((class, vec![i]));
            }
        }
    }
    Ok(groups)
}

/// Reads a density file; each class is normalized on load.
pub fn read_densities_csv(path: &Path) -> Result<Vec<PiecewiseLinearDensity>> {
    parse_densities(open_csv(path)?, path)
}

/// Parses density CSV text; `origin` names the source in error messages.
pub fn parse_densities_csv(text: &str, origin: &Path) -> Result<Vec<PiecewiseLinearDensity>> {
    let reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    parse_densities(reader, origin)
}

fn parse_densities<R: Read>(reader: csv::Reader<R>, path: &Path) -> Result<Vec<PiecewiseLinearDensity>> {
    let rows = read_rows(reader, path, &DENSITY_HEADER)?;
    let mut out = Vec::new();
    for (class, idx) in group_by_class(path, &rows)? {
        let mut knots = Vec::with_capacity(idx.len());
        let mut values = Vec::with_capacity(idx.len());
        for i in idx {
            knots.push(parse_field(path, i + 1, "knot_x", &rows[i][1])?);
            values.push(parse_field(path, i + 1, "density", &rows[i][2])?);
        }
        let d = PiecewiseLinearDensity::build(class.clone(), knots, values, true)
            .map_err(|e| Error::format(path, format!("class {class}: {e}")))?;
        out.push(d);
    }
    if out.is_empty() {
        return Err(Error::format(path, "no densities"));
    }
    Ok(out)
}

pub fn write_histograms_csv<W: Write>(out: W, histograms: &[GripHistogram]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(HISTOGRAM_HEADER).map_err(csv_io)?;
    for h in histograms {
        for (e, c) in h.edges().windows(2).zip(h.counts()) {
            w.write_record([h.class(), &fmt_sig17(e[0]), &fmt_sig17(e[1]), &fmt_sig17(*c)])
                .map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a histogram file. Bins of a class must be listed in order and be
/// contiguous (`bin_right` of one row equals `bin_left` of the next).
pub fn read_histograms_csv(path: &Path) -> Result<Vec<GripHistogram>> {
    let rows = read_rows(open_csv(path)?, path, &HISTOGRAM_HEADER)?;
    let mut out = Vec::new();
    for (class, idx) in group_by_class(path, &rows)? {
        let mut edges = Vec::with_capacity(idx.len() + 1);
        let mut counts = Vec::with_capacity(idx.len());
        for i in idx {
            let left = parse_field(path, i + 1, "bin_left", &rows[i][1])?;
            let right = parse_field(path, i + 1, "bin_right", &rows[i][2])?;
            let count = parse_field(path, i + 1, "count", &rows[i][3])?;
            match edges.last() {
                None => edges.push(left),
                Some(prev) if *prev == left => {}
                Some(_) => {
                    return Err(Error::format(
                        path,
                        format!("record {}: bins of class {class} are not contiguous", i + 1),
                    ))
                }
            }
            edges.push(right);
            counts.push(count);
        }
        let h = GripHistogram::new(class.clone(), edges, counts)
            .map_err(|e| Error::format(path, format!("class {class}: {e}")))?;
        out.push(h);
    }
    if out.is_empty() {
        return Err(Error::format(path, "no histograms"));
    }
    Ok(out)
}
