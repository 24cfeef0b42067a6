//! Trip-record CSV parsing, aggregation into hourly demand maps, and
//! construction of per-slot external factor frames.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Datelike, NaiveDateTime, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stmap::{GridSpec, StMap, StSequence};

const SECONDS_PER_SLOT: i64 = 3600;

/// Which CSV columns hold the pickup time and coordinates. Taxi and bike
/// exports name these differently.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMapping {
    pub time: String,
    pub lat: String,
    pub lon: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            time: "pickup_datetime".into(),
            lat: "pickup_latitude".into(),
            lon: "pickup_longitude".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripRecord {
    /// Seconds since the Unix epoch, timestamps read as UTC.
    pub pickup_time: i64,
    pub pickup_lat: f64,
    pub pickup_lon: f64,
}

impl TripRecord {
    /// Hour slot index counted from the Unix epoch.
    pub fn slot(&self) -> i64 {
        self.pickup_time.div_euclid(SECONDS_PER_SLOT)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedTrips {
    pub records: Vec<TripRecord>,
    pub rows: usize,
    pub malformed: usize,
}

/// Parses `YYYY-MM-DD HH:MM:SS`, the `T`-separated variant, or RFC 3339.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc().timestamp());
        }
    }
    DateTime::parse_from_rfc3339(s).ok().map(|t| t.timestamp())
}

/// Hour slot of a timestamp string.
pub fn slot_of(s: &str) -> Option<i64> {
    parse_timestamp(s).map(|t| t.div_euclid(SECONDS_PER_SLOT))
}

/// Reads trip records in file order. Rows with an unparseable timestamp or
/// non-finite coordinates are skipped and counted; if more than half of the
/// rows are malformed the file is rejected.
pub fn parse_trips(path: &Path, columns: &ColumnMapping) -> Result<ParsedTrips> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Data(format!("{}: no column named `{name}`", path.display()))
        })
    };
    let (ti, lai, loi) = (find(&columns.time)?, find(&columns.lat)?, find(&columns.lon)?);

    let mut out = ParsedTrips::default();
    for row in reader.records() {
        out.rows += 1;
        let Ok(row) = row else {
            out.malformed += 1;
            continue;
        };
        let parsed = (|| {
            let pickup_time = parse_timestamp(row.get(ti)?)?;
            let pickup_lat: f64 = row.get(lai)?.parse().ok()?;
            let pickup_lon: f64 = row.get(loi)?.parse().ok()?;
            (pickup_lat.is_finite() && pickup_lon.is_finite()).then_some(TripRecord {
                pickup_time,
                pickup_lat,
                pickup_lon,
            })
        })();
        match parsed {
            Some(r) => out.records.push(r),
            None => out.malformed += 1,
        }
    }
    if out.malformed * 2 > out.rows {
        return Err(Error::FormatMismatch {
            path: path.to_path_buf(),
            malformed: out.malformed,
            total: out.rows,
        });
    }
    if out.malformed > 0 {
        log::warn!(
            "{}: skipped {} malformed rows of {}",
            path.display(),
            out.malformed,
            out.rows
        );
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Aggregated {
    pub sequence: StSequence,
    pub kept: usize,
    pub out_of_box: usize,
    pub out_of_window: usize,
}

/// Counts pickups per `(slot, cell)` for slots `start_slot..=end_slot`.
/// Records outside the bounding box or the slot window are dropped and
/// counted.
pub fn aggregate<'a>(
    records: impl IntoIterator<Item = &'a TripRecord>,
    grid: &GridSpec,
    start_slot: i64,
    end_slot: i64,
) -> Result<Aggregated> {
    grid.validate()?;
    if start_slot > end_slot {
        return Err(Error::InvalidArgument(format!(
            "start slot {start_slot} is after end slot {end_slot}"
        )));
    }
    let slots = (end_slot - start_slot + 1) as usize;
    let mut counts = vec![0u64; slots * grid.regions()];
    let (mut kept, mut out_of_box, mut out_of_window) = (0, 0, 0);
    for r in records {
        let slot = r.slot();
        if slot < start_slot || slot > end_slot {
            out_of_window += 1;
            continue;
        }
        let Some((row, col)) = grid.locate(r.pickup_lat, r.pickup_lon) else {
            out_of_box += 1;
            continue;
        };
        counts[(slot - start_slot) as usize * grid.regions() + row * grid.cols + col] += 1;
        kept += 1;
    }
    let maps = counts
        .chunks(grid.regions())
        .enumerate()
        .map(|(i, c)| StMap {
            rows: grid.rows,
            cols: grid.cols,
            slot: start_slot + i as i64,
            values: c.iter().map(|&v| v as f64).collect(),
        })
        .collect();
    Ok(Aggregated {
        sequence: StSequence::new(grid.rows, grid.cols, maps)?,
        kept,
        out_of_box,
        out_of_window,
    })
}

/// External signals for one slot: a static per-region PoI density, a weather
/// vector of fixed arity, and a weekend flag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExternalFactorFrame {
    pub poi: Vec<f64>,
    pub weather: Vec<f64>,
    pub is_weekend: f64,
}

/// Weekend flag for an hour slot counted from the Unix epoch (UTC calendar).
pub fn is_weekend_slot(slot: i64) -> bool {
    let day = slot.div_euclid(24);
    match DateTime::from_timestamp(day * 86_400, 0) {
        Some(t) => matches!(t.weekday(), Weekday::Sat | Weekday::Sun),
        None => false,
    }
}

/// Hourly weather table keyed by slot. Every non-timestamp column is a
/// weather feature.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherTable {
    pub features: Vec<String>,
    pub rows: BTreeMap<i64, Vec<f64>>,
}

impl WeatherTable {
    pub fn read(path: &Path, time_column: &str) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let headers = reader.headers()?.clone();
        let ti = headers.iter().position(|h| h == time_column).ok_or_else(|| {
            Error::Data(format!("{}: no column named `{time_column}`", path.display()))
        })?;
        let features: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != ti)
            .map(|(_, h)| h.to_string())
            .collect();
        let mut rows = BTreeMap::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            let bad = || Error::Data(format!("{}: bad weather row {}", path.display(), line + 2));
            let slot = slot_of(rec.get(ti).ok_or_else(bad)?).ok_or_else(bad)?;
            let values = rec
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != ti)
                .map(|(_, v)| v.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(bad)?;
            if values.len() != features.len() {
                return Err(bad());
            }
            rows.insert(slot, values);
        }
        Ok(Self { features, rows })
    }

    /// Weather for each slot in `slots`, carrying the most recent earlier
    /// observation forward over gaps. Slots before the first observation
    /// take the first observation.
    pub fn resolve(&self, slots: std::ops::RangeInclusive<i64>) -> Result<Vec<Vec<f64>>> {
        let first = self
            .rows
            .values()
            .next()
            .ok_or_else(|| Error::Data("no weather coverage".into()))?;
        Ok(slots
            .map(|s| {
                self.rows
                    .range(..=s)
                    .next_back()
                    .map_or_else(|| first.clone(), |(_, v)| v.clone())
            })
            .collect())
    }
}

/// Per-region PoI values from a CSV with `row,col,value` columns.
pub fn read_poi(path: &Path, grid: &GridSpec) -> Result<Vec<f64>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut poi = vec![f64::NAN; grid.regions()];
    #[derive(Deserialize)]
    struct Row {
        row: usize,
        col: usize,
        value: f64,
    }
    for rec in reader.deserialize::<Row>() {
        let r = rec?;
        if r.row >= grid.rows || r.col >= grid.cols {
            return Err(Error::Data(format!(
                "{}: region ({}, {}) outside the {}×{} grid",
                path.display(),
                r.row,
                r.col,
                grid.rows,
                grid.cols
            )));
        }
        if !(r.value.is_finite() && r.value >= 0.0) {
            return Err(Error::Data(format!(
                "{}: PoI value for ({}, {}) must be finite and non-negative",
                path.display(),
                r.row,
                r.col
            )));
        }
        poi[r.row * grid.cols + r.col] = r.value;
    }
    if let Some(i) = poi.iter().position(|v| v.is_nan()) {
        return Err(Error::Data(format!(
            "{}: no PoI value for region ({}, {})",
            path.display(),
            i / grid.cols,
            i % grid.cols
        )));
    }
    Ok(poi)
}

/// One factor frame per slot from weather, PoI and the calendar.
pub fn build_factors(
    weather: &WeatherTable,
    poi: &[f64],
    slots: std::ops::RangeInclusive<i64>,
) -> Result<Vec<ExternalFactorFrame>> {
    let resolved = weather.resolve(slots.clone())?;
    Ok(slots
        .zip(resolved)
        .map(|(s, w)| ExternalFactorFrame {
            poi: poi.to_vec(),
            weather: w,
            is_weekend: if is_weekend_slot(s) { 1.0 } else { 0.0 },
        })
        .collect())
}

/// Convenience wrapper reading both factor sources from disk.
pub fn build_factors_from_files(
    weather_path: &Path,
    time_column: &str,
    poi_path: &Path,
    grid: &GridSpec,
    slots: std::ops::RangeInclusive<i64>,
) -> Result<Vec<ExternalFactorFrame>> {
    let weather = WeatherTable::read(weather_path, time_column)?;
    let poi = read_poi(poi_path, grid)?;
    build_factors(&weather, &poi, slots)
}

/// Frames with zero PoI, no weather and calendar-derived weekend flags, for
/// datasets without auxiliary sources.
pub fn calendar_only_factors(grid: &GridSpec, slots: std::ops::RangeInclusive<i64>) -> Vec<ExternalFactorFrame> {
    slots
        .map(|s| ExternalFactorFrame {
            poi: vec![0.0; grid.regions()],
            weather: vec![],
            is_weekend: if is_weekend_slot(s) { 1.0 } else { 0.0 },
        })
        .collect()
}
