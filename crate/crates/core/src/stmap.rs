//! Grid data model: regions, per-slot demand maps, sequences, Min-Max
//! scaling and sliding-window datasets.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ExternalFactorFrame;

/// A lat/lon bounding box split into `rows × cols` uniform cells. Rows run
/// along latitude, columns along longitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lat_start: f64,
    pub lon_start: f64,
    pub lat_end: f64,
    pub lon_end: f64,
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    pub fn new(
        lat_start: f64,
        lon_start: f64,
        lat_end: f64,
        lon_end: f64,
        rows: usize,
        cols: usize,
    ) -> Result<Self> {
        let g = Self {
            lat_start,
            lon_start,
            lat_end,
            lon_end,
            rows,
            cols,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.lat_start, self.lat_end, self.lon_start, self.lon_end]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.lat_start >= self.lat_end || self.lon_start >= self.lon_end {
            return Err(Error::InvalidArgument(format!(
                "grid bounding box must satisfy start < end on both axes, got lat [{}, {}] lon [{}, {}]",
                self.lat_start, self.lat_end, self.lon_start, self.lon_end
            )));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid must have at least one row and column, got {}×{}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    pub fn regions(&self) -> usize {
        self.rows * self.cols
    }

    /// Lower latitude boundary of row `r`; `row_edge(rows)` is `lat_end`.
    pub fn row_edge(&self, r: usize) -> f64 {
        edge(self.lat_start, self.lat_end, r, self.rows)
    }

    /// Lower longitude boundary of column `c`; `col_edge(cols)` is `lon_end`.
    pub fn col_edge(&self, c: usize) -> f64 {
        edge(self.lon_start, self.lon_end, c, self.cols)
    }

    /// Cell containing the point. Cells are half-open `[low, high)` except
    /// that the outer top/right boundary belongs to the last cell.
    pub fn locate(&self, lat: f64, lon: f64) -> Option<(usize, usize)> {
        let r = axis_index(lat, self.lat_start, self.lat_end, self.rows)?;
        let c = axis_index(lon, self.lon_start, self.lon_end, self.cols)?;
        Some((r, c))
    }
}

fn edge(start: f64, end: f64, i: usize, n: usize) -> f64 {
    if i == n {
        end
    } else {
        start + (end - start) * (i as f64) / (n as f64)
    }
}

fn axis_index(v: f64, start: f64, end: f64, n: usize) -> Option<usize> {
    if !(v >= start && v <= end) {
        return None;
    }
    let guess = (((v - start) / (end - start)) * n as f64).floor();
    let mut i = (guess.max(0.0) as usize).min(n - 1);
    // The float guess can be off by one near a boundary; settle against the
    // exact edges.
    while i > 0 && v < edge(start, end, i, n) {
        i -= 1;
    }
    while i + 1 < n && v >= edge(start, end, i + 1, n) {
        i += 1;
    }
    Some(i)
}

/// One `rows × cols` demand map for an hourly slot, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StMap {
    pub rows: usize,
    pub cols: usize,
    pub slot: i64,
    pub values: Vec<f64>,
}

impl StMap {
    pub fn new(rows: usize, cols: usize, slot: i64, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::shape("StMap::new", &[rows, cols], &[values.len()]));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("StMap::new"));
        }
        Ok(Self {
            rows,
            cols,
            slot,
            values,
        })
    }

    pub fn zeros(rows: usize, cols: usize, slot: i64) -> Self {
        Self {
            rows,
            cols,
            slot,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    fn same_shape(&self, other: &StMap) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

/// Time-ordered maps with consecutive slot indices over one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StSequence {
    rows: usize,
    cols: usize,
    maps: Vec<StMap>,
}

impl StSequence {
    pub fn new(rows: usize, cols: usize, maps: Vec<StMap>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("sequence grid must be non-empty".into()));
        }
        for (i, m) in maps.iter().enumerate() {
            if m.rows != rows || m.cols != cols {
                return Err(Error::shape("StSequence::new", &[rows, cols], &[m.rows, m.cols]));
            }
            if i > 0 && m.slot != maps[i - 1].slot + 1 {
                return Err(Error::Data(format!(
                    "slot indices must increase by one: {} follows {}",
                    m.slot,
                    maps[i - 1].slot
                )));
            }
        }
        Ok(Self { rows, cols, maps })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn maps(&self) -> &[StMap] {
        &self.maps
    }

    /// Slot index of the first map.
    pub fn epoch_slot(&self) -> i64 {
        self.maps.first().map_or(0, |m| m.slot)
    }

    pub fn total_demand(&self) -> f64 {
        self.maps.iter().map(StMap::total).sum()
    }

    /// Writes the binary container: magic `STSQ`, u32 version, u64 rows,
    /// u64 cols, u64 slots, i64 epoch slot, then row-major little-endian f64
    /// values map by map.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(CONTAINER_MAGIC)?;
        w.write_all(&CONTAINER_VERSION.to_le_bytes())?;
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        w.write_all(&(self.cols as u64).to_le_bytes())?;
        w.write_all(&(self.maps.len() as u64).to_le_bytes())?;
        w.write_all(&self.epoch_slot().to_le_bytes())?;
        for m in &self.maps {
            for v in &m.values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != CONTAINER_MAGIC {
            return Err(Error::Data("not a sequence container (bad magic)".into()));
        }
        let version = u32::from_le_bytes(read_array(&mut r)?);
        if version != CONTAINER_VERSION {
            return Err(Error::Data(format!(
                "unsupported container version {version}"
            )));
        }
        let rows = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let cols = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let slots = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let epoch = i64::from_le_bytes(read_array(&mut r)?);
        let mut maps = Vec::with_capacity(slots);
        for s in 0..slots {
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                values.push(f64::from_le_bytes(read_array(&mut r)?));
            }
            maps.push(StMap::new(rows, cols, epoch + s as i64, values)?);
        }
        Self::new(rows, cols, maps)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

const CONTAINER_MAGIC: &[u8; 4] = b"STSQ";
const CONTAINER_VERSION: u32 = 1;

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Data(format!("truncated sequence container: {e}")))
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(r, &mut buf)?;
    Ok(buf)
}

/// Global Min-Max scaler onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub data_min: f64,
    pub data_max: f64,
}

impl MinMaxScaler {
    /// Extrema over every entry of every map.
    pub fn fit<'a>(maps: impl IntoIterator<Item = &'a StMap>) -> Result<Self> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut seen = false;
        for m in maps {
            for &v in &m.values {
                lo = lo.min(v);
                hi = hi.max(v);
                seen = true;
            }
        }
        if !seen {
            return Err(Error::NoTrainingData);
        }
        Ok(Self {
            data_min: lo,
            data_max: hi,
        })
    }

    fn range(&self) -> f64 {
        self.data_max - self.data_min
    }

    /// Maps into `[0, 1]`, clamping values outside the fitted range. A
    /// degenerate scaler (`max == min`) sends everything to 0.
    pub fn normalize_value(&self, x: f64) -> f64 {
        let range = self.range();
        if range <= 0.0 {
            return 0.0;
        }
        ((x - self.data_min) / range).clamp(0.0, 1.0)
    }

    pub fn denormalize_value(&self, y: f64) -> f64 {
        let range = self.range();
        if range <= 0.0 {
            return self.data_min;
        }
        y * range + self.data_min
    }

    pub fn normalize(&self, map: &StMap) -> StMap {
        StMap {
            values: map.values.iter().map(|&v| self.normalize_value(v)).collect(),
            ..map.clone()
        }
    }

    pub fn denormalize(&self, map: &StMap) -> StMap {
        StMap {
            values: map.values.iter().map(|&v| self.denormalize_value(v)).collect(),
            ..map.clone()
        }
    }
}

/// Stride-1 sliding windows over a sequence: each sample is `T` consecutive
/// history maps, their factor frames, and the map of the following slot.
///
/// Samples are stored as start offsets into a shared sequence so that
/// train/test splits and rollout ground truth stay cheap.
#[derive(Debug, Clone)]
pub struct WindowedDataset {
    seq: Arc<StSequence>,
    factors: Arc<Vec<ExternalFactorFrame>>,
    window: usize,
    starts: Vec<usize>,
}

impl WindowedDataset {
    pub fn new(seq: StSequence, factors: Vec<ExternalFactorFrame>, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidArgument("window length must be at least 1".into()));
        }
        if seq.len() < window + 1 {
            return Err(Error::SequenceTooShort {
                needed: window + 1,
                available: seq.len(),
            });
        }
        if factors.len() != seq.len() {
            return Err(Error::Data(format!(
                "{} factor frames for {} maps",
                factors.len(),
                seq.len()
            )));
        }
        let starts = (0..seq.len() - window).collect();
        Ok(Self {
            seq: Arc::new(seq),
            factors: Arc::new(factors),
            window,
            starts,
        })
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn sequence(&self) -> &StSequence {
        &self.seq
    }

    pub fn frames(&self) -> &[ExternalFactorFrame] {
        &self.factors
    }

    pub fn start(&self, i: usize) -> usize {
        self.starts[i]
    }

    pub fn history(&self, i: usize) -> &[StMap] {
        let s = self.starts[i];
        &self.seq.maps()[s..s + self.window]
    }

    pub fn factors(&self, i: usize) -> &[ExternalFactorFrame] {
        let s = self.starts[i];
        &self.factors[s..s + self.window]
    }

    pub fn target(&self, i: usize) -> &StMap {
        &self.seq.maps()[self.starts[i] + self.window]
    }

    /// Ground truth for horizons `1..=steps`, if the sequence extends that far.
    pub fn future(&self, i: usize, steps: usize) -> Option<&[StMap]> {
        let from = self.starts[i] + self.window;
        self.seq.maps().get(from..from + steps)
    }

    /// Number of ground-truth maps from sample `i`'s target to the end of
    /// the sequence.
    pub fn horizon(&self, i: usize) -> usize {
        self.seq.len() - self.starts[i] - self.window
    }

    /// Longest rollout horizon any sample has ground truth for.
    pub fn max_horizon(&self) -> usize {
        (0..self.len()).map(|i| self.horizon(i)).max().unwrap_or(0)
    }

    /// Subset of samples by position, sharing the underlying sequence.
    pub fn select(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            seq: Arc::clone(&self.seq),
            factors: Arc::clone(&self.factors),
            window: self.window,
            starts: self.starts[range].to_vec(),
        }
    }
}

pub(crate) fn maps_match(a: &StMap, b: &StMap) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::shape("map pair", &[a.rows, a.cols], &[b.rows, b.cols]));
    }
    Ok(())
}
