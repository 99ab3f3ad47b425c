//! Raster containers and the GRR1 binary format.
//!
//! GRR1 layout (all integers little-endian):
//!
//! | bytes | content                                        |
//! |-------|------------------------------------------------|
//! | 0..4  | magic `GRR1`                                   |
//! | 4     | version, always 1                              |
//! | 5     | dtype: 1 = f32, 2 = u8                         |
//! | 6..8  | channel count (u16)                            |
//! | 8..12 | height (u32)                                   |
//! | 12..16| width (u32)                                    |
//! | 16..  | row-major height x width x channels payload    |

use std::path::Path;

use crate::error::{Error, Result};
use crate::mixture::{SurfaceState, CLASS_COUNT};

pub const MAGIC: &[u8; 4] = b"GRR1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;
pub const SUMMARY_CHANNELS: usize = 6;

/// Slack allowed on the channel sum of a probability pixel.
pub const PROBABILITY_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 1,
    U8 = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<T>,
}

impl<T> Grid<T> {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::invalid("raster dimensions must be positive"));
        }
        if data.len() != height * width * channels {
            return Err(Error::invalid(format!(
                "raster payload has {} values, expected {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn pixel(&self, i: usize) -> &[T] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Grr1 {
    F32(Grid<f32>),
    U8(Grid<u8>),
}

fn header(dtype: DType, height: usize, width: usize, channels: usize) -> Result<Vec<u8>> {
    let channels = u16::try_from(channels).map_err(|_| Error::invalid("too many channels"))?;
    let height = u32::try_from(height).map_err(|_| Error::invalid("raster too tall"))?;
    let width = u32::try_from(width).map_err(|_| Error::invalid("raster too wide"))?;
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(dtype as u8);
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&height.to_le_bytes());
    out.extend_from_slice(&width.to_le_bytes());
    Ok(out)
}

pub fn encode_f32(grid: &Grid<f32>) -> Result<Vec<u8>> {
    let mut out = header(DType::F32, grid.height, grid.width, grid.channels)?;
    out.reserve(grid.data.len() * 4);
    for v in &grid.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn encode_u8(grid: &Grid<u8>) -> Result<Vec<u8>> {
    let mut out = header(DType::U8, grid.height, grid.width, grid.channels)?;
    out.extend_from_slice(&grid.data);
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Grr1> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::invalid("truncated GRR1 header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::invalid("bad magic, not a GRR1 raster"));
    }
    if bytes[4] != VERSION {
        return Err(Error::invalid(format!("unsupported GRR1 version {}", bytes[4])));
    }
    let channels = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    let count = height
        .checked_mul(width)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| Error::invalid("GRR1 dimensions overflow"))?;
    let elem = match bytes[5] {
        1 => 4,
        2 => 1,
        d => return Err(Error::invalid(format!("unknown GRR1 dtype {d}"))),
    };
    if payload.len() != count * elem {
        return Err(Error::invalid(format!(
            "GRR1 payload has {} bytes, expected {}",
            payload.len(),
            count * elem
        )));
    }
    match bytes[5] {
        1 => {
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(Grr1::F32(Grid::new(height, width, channels, data)?))
        }
        _ => Ok(Grr1::U8(Grid::new(height, width, channels, payload.to_vec())?)),
    }
}

pub fn read_grr1(path: &Path) -> Result<Grr1> {
    let bytes = std::fs::read(path)?;
    decode(&bytes).map_err(|e| Error::format(path, e.to_string()))
}

/// Per-pixel class probabilities, `CLASS_COUNT` channels in `SurfaceState` code order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbabilityRaster {
    height: usize,
    width: usize,
    probs: Vec<f64>,
}

impl ClassProbabilityRaster {
    pub fn new(height: usize, width: usize, probs: Vec<f64>) -> Result<Self> {
        let grid = Grid::new(height, width, CLASS_COUNT, probs)?;
        for i in 0..grid.pixels() {
            check_probabilities(grid.pixel(i))
                .map_err(|e| Error::invalid(format!("pixel {i}: {e}")))?;
        }
        Ok(Self {
            height,
            width,
            probs: grid.data,
        })
    }

    pub fn one_hot(labels: &LabelRaster) -> Self {
        let mut probs = vec![0.0; labels.labels().len() * CLASS_COUNT];
        for (i, s) in labels.labels().iter().enumerate() {
            probs[i * CLASS_COUNT + s.code() as usize] = 1.0;
        }
        Self {
            height: labels.height(),
            width: labels.width(),
            probs,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.probs[i * CLASS_COUNT..(i + 1) * CLASS_COUNT]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn from_grr1(raster: Grr1) -> Result<Self> {
        match raster {
            Grr1::F32(g) if g.channels == CLASS_COUNT => {
                Self::new(g.height, g.width, g.data.iter().map(|v| *v as f64).collect())
            }
            Grr1::F32(g) => Err(Error::invalid(format!(
                "probability raster has {} channels, expected {CLASS_COUNT}",
                g.channels
            ))),
            Grr1::U8(_) => Err(Error::invalid("probability raster must have dtype f32")),
        }
    }

    pub fn to_grr1(&self) -> Grid<f32> {
        Grid {
            height: self.height,
            width: self.width,
            channels: CLASS_COUNT,
            data: self.probs.iter().map(|v| *v as f32).collect(),
        }
    }
}

/// Checks one probability vector: non-negative, finite, sums to one within slack.
pub fn check_probabilities(p: &[f64]) -> Result<f64> {
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("probabilities must be finite and non-negative"));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_SLACK {
        return Err(Error::invalid(format!("probabilities sum to {sum}")));
    }
    Ok(sum)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRaster {
    height: usize,
    width: usize,
    labels: Vec<SurfaceState>,
}

impl LabelRaster {
    pub fn new(height: usize, width: usize, labels: Vec<SurfaceState>) -> Result<Self> {
        let g = Grid::new(height, width, 1, labels)?;
        Ok(Self {
            height,
            width,
            labels: g.data,
        })
    }

    pub fn from_codes(height: usize, width: usize, codes: &[u8]) -> Result<Self> {
        let labels = codes
            .iter()
            .map(|c| SurfaceState::from_code(*c))
            .collect::<Result<Vec<_>>>()?;
        Self::new(height, width, labels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[SurfaceState] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> SurfaceState {
        self.labels[row * self.width + col]
    }

    pub fn from_grr1(raster: Grr1) -> Result<Self> {
        match raster {
            Grr1::U8(g) if g.channels == 1 => Self::from_codes(g.height, g.width, &g.data),
            _ => Err(Error::invalid("label raster must be u8 with one channel")),
        }
    }

    pub fn to_grr1(&self) -> Grid<u8> {
        Grid {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.labels.iter().map(|s| s.code()).collect(),
        }
    }
}

/// Summary of one pixel's grip distribution. Fields a method cannot
/// provide are NaN; see `GripSummaryRaster::has_median` / `has_sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripSummary {
    pub mean: f64,
    pub median: f64,
    pub p05: f64,
    pub p95: f64,
    pub sigma_low: f64,
    pub sigma_high: f64,
}

impl GripSummary {
    pub const NAN: GripSummary = GripSummary {
        mean: f64::NAN,
        median: f64::NAN,
        p05: f64::NAN,
        p95: f64::NAN,
        sigma_low: f64::NAN,
        sigma_high: f64::NAN,
    };

    pub fn channels(&self) -> [f64; SUMMARY_CHANNELS] {
        [
            self.mean,
            self.median,
            self.p05,
            self.p95,
            self.sigma_low,
            self.sigma_high,
        ]
    }
}

/// Which predictor produced a summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Ensemble,
    McDropout,
    Gaussian,
    Quantile,
    Gvrs,
    IdealGvrs,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Ensemble,
        Method::McDropout,
        Method::Gaussian,
        Method::Quantile,
        Method::Gvrs,
        Method::IdealGvrs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ensemble => "ensemble",
            Method::McDropout => "mc_dropout",
            Method::Gaussian => "gaussian",
            Method::Quantile => "quantile",
            Method::Gvrs => "gvrs",
            Method::IdealGvrs => "ideal_gvrs",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GripSummaryRaster {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<GripSummary>,
    pub has_median: bool,
    pub has_sigma: bool,
    /// Per-pixel quantile-crossing flags; empty for methods that cannot cross.
    pub crossed: Vec<bool>,
    pub method: Option<Method>,
}

impl GripSummaryRaster {
    pub fn full(height: usize, width: usize, pixels: Vec<GripSummary>) -> Self {
        debug_assert_eq!(pixels.len(), height * width);
        Self {
            height,
            width,
            pixels,
            has_median: true,
            has_sigma: true,
            crossed: Vec::new(),
            method: None,
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = Some(method);
        self
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&GripSummary> {
        if row < self.height && col < self.width {
            self.pixels.get(row * self.width + col)
        } else {
            None
        }
    }

    pub fn crossing_rate(&self) -> f64 {
        if self.crossed.is_empty() {
            return 0.0;
        }
        self.crossed.iter().filter(|c| **c).count() as f64 / self.crossed.len() as f64
    }

    pub fn to_grr1(&self) -> Grid<f32> {
        let data = self
            .pixels
            .iter()
            .flat_map(|s| s.channels())
            .map(|v| v as f32)
            .collect();
        Grid {
            height: self.height,
            width: self.width,
            channels: SUMMARY_CHANNELS,
            data,
        }
    }

    pub fn from_grr1(raster: Grr1) -> Result<Self> {
        let g = match raster {
            Grr1::F32(g) if g.channels == SUMMARY_CHANNELS => g,
            _ => return Err(Error::invalid("summary raster must be f32 with 6 channels")),
        };
        let pixels: Vec<GripSummary> = g
            .data
            .chunks_exact(SUMMARY_CHANNELS)
            .map(|c| GripSummary {
                mean: c[0] as f64,
                median: c[1] as f64,
                p05: c[2] as f64,
                p95: c[3] as f64,
                sigma_low: c[4] as f64,
                sigma_high: c[5] as f64,
            })
            .collect();
        let has_median = pixels.iter().all(|p| !p.median.is_nan());
        let has_sigma = pixels.iter().all(|p| !p.sigma_low.is_nan());
        Ok(Self {
            height: g.height,
            width: g.width,
            pixels,
            has_median,
            has_sigma,
            crossed: Vec::new(),
            method: None,
        })
    }
}
