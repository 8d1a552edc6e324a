//! County-level CSV schemas.
//!
//! ```text
//! locations.csv      county_id, x_km, y_km [, state]
//! yield.csv          county_id, year, yield_bu_ac, harvest_acres   (last two may be empty)
//! temperature.csv    county_id, year, day, tmax_c, tmin_c          (day 1..=365)
//! precipitation.csv  county_id, year, month, precip_mm             (monthly means)
//!                or  county_id, year, day, precip_mm               (daily, auto-detected)
//! ```
//!
//! Headers are mandatory, numbers use `.` as the decimal separator.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use log::warn;

use super::dataset::{DatasetMeta, Record, RecordFlags, SpatialDataset};
use super::DataError;
use crate::basis::day_to_time;
use crate::functional::FunctionalSample;
use crate::geometry::Point;

pub const DAYS_PER_YEAR: u32 = 365;
/// Longest run of missing days that is filled by linear interpolation.
pub const MAX_INTERPOLATED_GAP: usize = 14;
/// A month of daily precipitation with more missing days is flagged.
pub const MAX_MISSING_DAYS_PER_MONTH: usize = 7;
pub const MONTH_LENGTHS: [u32; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

pub const CURVE_NAMES: [&str; 2] = ["tmax_c", "tmin_c"];
pub const RESPONSE_UNITS: &str = "bu/ac";

pub fn scalar_names() -> Vec<String> {
    (1..=12).map(|m| format!("precip_{m:02}")).collect()
}

/// Month (1..=12) of a day of a 365-day year.
pub fn month_of_day(day: u32) -> u32 {
    let mut end = 0;
    for (i, len) in MONTH_LENGTHS.iter().enumerate() {
        end += len;
        if day <= end {
            return i as u32 + 1;
        }
    }
    12
}

/// Paths of the four input tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub locations: PathBuf,
    pub yields: PathBuf,
    pub temperature: PathBuf,
    pub precipitation: PathBuf,
}

impl DatasetPaths {
    /// The conventional file names inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let d = dir.as_ref();
        Self {
            locations: d.join("locations.csv"),
            yields: d.join("yield.csv"),
            temperature: d.join("temperature.csv"),
            precipitation: d.join("precipitation.csv"),
        }
    }
}

struct Table {
    file: String,
    headers: Vec<String>,
    rows: Vec<(usize, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, DataError> {
        let file = path.display().to_string();
        let mut text = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|source| DataError::Io {
                path: file.clone(),
                source,
            })?;
        Self::parse(&file, text.as_bytes())
    }

    fn parse(file: &str, bytes: &[u8]) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_error(file, 1, e))?
            .iter()
            .map(|h| h.trim_start_matches('\u{feff}').to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            rows.push((line, rec.map_err(|e| csv_error(file, line, e))?));
        }
        Ok(Self {
            file: file.to_string(),
            headers,
            rows,
        })
    }

    fn has(&self, column: &str) -> bool {
        self.headers.iter().any(|h| h == column)
    }

    fn col(&self, column: &str) -> Result<usize, DataError> {
        self.headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| DataError::Schema {
                file: self.file.clone(),
                line: 1,
                column: column.to_string(),
                message: "missing column".into(),
            })
    }

    fn text<'a>(&self, rec: &'a csv::StringRecord, line: usize, col: usize) -> Result<&'a str, DataError> {
        rec.get(col).ok_or_else(|| DataError::Schema {
            file: self.file.clone(),
            line,
            column: self.headers[col].clone(),
            message: "field missing".into(),
        })
    }

    fn float(&self, rec: &csv::StringRecord, line: usize, col: usize) -> Result<f64, DataError> {
        self.opt_float(rec, line, col)?.ok_or_else(|| DataError::Schema {
            file: self.file.clone(),
            line,
            column: self.headers[col].clone(),
            message: "value is empty".into(),
        })
    }

    fn opt_float(&self, rec: &csv::StringRecord, line: usize, col: usize) -> Result<Option<f64>, DataError> {
        let s = self.text(rec, line, col)?;
        if s.is_empty() {
            return Ok(None);
        }
        let v: f64 = s.parse().map_err(|_| self.bad(line, col, format!("cannot parse '{s}' as a number")))?;
        if !v.is_finite() {
            return Err(self.bad(line, col, format!("non-finite value '{s}'")));
        }
        Ok(Some(v))
    }

    fn int(&self, rec: &csv::StringRecord, line: usize, col: usize) -> Result<i64, DataError> {
        let s = self.text(rec, line, col)?;
        s.parse()
            .map_err(|_| self.bad(line, col, format!("cannot parse '{s}' as an integer")))
    }

    fn bad(&self, line: usize, col: usize, message: String) -> DataError {
        DataError::Schema {
            file: self.file.clone(),
            line,
            column: self.headers[col].clone(),
            message,
        }
    }
}

fn csv_error(file: &str, line: usize, e: csv::Error) -> DataError {
    DataError::Csv {
        file: file.to_string(),
        line: e.position().map_or(line, |p| p.line() as usize),
        message: e.to_string(),
    }
}

type Key = (String, i32);

struct Location {
    point: Point,
    state: Option<String>,
}

fn read_locations(t: &Table) -> Result<HashMap<String, Location>, DataError> {
    let (c_id, c_x, c_y) = (t.col("county_id")?, t.col("x_km")?, t.col("y_km")?);
    let c_state = if t.has("state") { Some(t.col("state")?) } else { None };
    let mut out = HashMap::new();
    for (line, rec) in &t.rows {
        let id = t.text(rec, *line, c_id)?.to_string();
        let point = Point::new(t.float(rec, *line, c_x)?, t.float(rec, *line, c_y)?);
        let state = match c_state {
            Some(c) => Some(t.text(rec, *line, c)?.to_string()).filter(|s| !s.is_empty()),
            None => None,
        };
        if out.insert(id.clone(), Location { point, state }).is_some() {
            return Err(DataError::Schema {
                file: t.file.clone(),
                line: *line,
                column: "county_id".into(),
                message: format!("duplicate county '{id}'"),
            });
        }
    }
    Ok(out)
}

fn year_of(t: &Table, rec: &csv::StringRecord, line: usize, col: usize) -> Result<i32, DataError> {
    let y = t.int(rec, line, col)?;
    i32::try_from(y).map_err(|_| t.bad(line, col, format!("year {y} out of range")))
}

fn day_of(t: &Table, rec: &csv::StringRecord, line: usize, col: usize) -> Result<u32, DataError> {
    let d = t.int(rec, line, col)?;
    if d == 366 {
        return Err(DataError::LeapDay {
            file: t.file.clone(),
            line,
        });
    }
    if !(1..=DAYS_PER_YEAR as i64).contains(&d) {
        return Err(t.bad(line, col, format!("day {d} outside 1..=365")));
    }
    Ok(d as u32)
}

/// Fill a 365-day series with gaps of at most [`MAX_INTERPOLATED_GAP`] days.
/// Interior gaps are interpolated linearly; leading and trailing gaps repeat
/// the nearest observation. Returns `None` when a gap is too long.
pub fn fill_daily(days: &BTreeMap<u32, f64>) -> Option<Vec<f64>> {
    let observed: Vec<(u32, f64)> = days.iter().map(|(d, v)| (*d, *v)).collect();
    let (first, last) = (observed.first()?, observed.last()?);
    if (first.0 - 1) as usize > MAX_INTERPOLATED_GAP || (DAYS_PER_YEAR - last.0) as usize > MAX_INTERPOLATED_GAP {
        return None;
    }
    let mut out = vec![0.0; DAYS_PER_YEAR as usize];
    for d in 1..first.0 {
        out[d as usize - 1] = first.1;
    }
    for w in observed.windows(2) {
        let ((d0, v0), (d1, v1)) = (w[0], w[1]);
        if (d1 - d0 - 1) as usize > MAX_INTERPOLATED_GAP {
            return None;
        }
        for d in d0..d1 {
            let frac = (d - d0) as f64 / (d1 - d0) as f64;
            out[d as usize - 1] = if d == d0 { v0 } else { v0 + frac * (v1 - v0) };
        }
    }
    out[last.0 as usize - 1] = last.1;
    for d in last.0 + 1..=DAYS_PER_YEAR {
        out[d as usize - 1] = last.1;
    }
    Some(out)
}

fn daily_grid() -> Vec<f64> {
    (1..=DAYS_PER_YEAR).map(day_to_time).collect()
}

/// Load and join the four tables into a dataset sorted by `(county_id, year)`.
///
/// Records keep missing yields (prediction-only). A record is dropped with a
/// warning when it has no temperature rows, a temperature gap longer than
/// [`MAX_INTERPOLATED_GAP`] days, or no precipitation rows.
pub fn load_dataset(paths: &DatasetPaths) -> Result<SpatialDataset, DataError> {
    let locations = Table::read(&paths.locations)?;
    let yields = Table::read(&paths.yields)?;
    let temperature = Table::read(&paths.temperature)?;
    let precipitation = Table::read(&paths.precipitation)?;
    assemble(&locations, &yields, &temperature, &precipitation)
}

fn assemble(locations: &Table, yields: &Table, temperature: &Table, precipitation: &Table) -> Result<SpatialDataset, DataError> {
    let locs = read_locations(locations)?;

    // yield.csv
    let (c_id, c_year, c_y, c_w) = (
        yields.col("county_id")?,
        yields.col("year")?,
        yields.col("yield_bu_ac")?,
        yields.col("harvest_acres")?,
    );
    let mut yield_rows: BTreeMap<Key, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for (line, rec) in &yields.rows {
        let key = (yields.text(rec, *line, c_id)?.to_string(), year_of(yields, rec, *line, c_year)?);
        let y = yields.opt_float(rec, *line, c_y)?;
        let w = yields.opt_float(rec, *line, c_w)?;
        if w.is_some_and(|w| w < 0.0) {
            return Err(yields.bad(*line, c_w, "harvest acreage must be nonnegative".into()));
        }
        if !locs.contains_key(&key.0) {
            return Err(DataError::UnknownCounty { county_id: key.0 });
        }
        if yield_rows.insert(key.clone(), (y, w)).is_some() {
            return Err(DataError::DuplicateKey {
                county_id: key.0,
                year: key.1,
            });
        }
    }

    // temperature.csv
    let (t_id, t_year, t_day) = (temperature.col("county_id")?, temperature.col("year")?, temperature.col("day")?);
    let t_cols: Vec<usize> = CURVE_NAMES.iter().map(|c| temperature.col(c)).collect::<Result<_, _>>()?;
    let mut temps: HashMap<Key, Vec<BTreeMap<u32, f64>>> = HashMap::new();
    for (line, rec) in &temperature.rows {
        let key = (temperature.text(rec, *line, t_id)?.to_string(), year_of(temperature, rec, *line, t_year)?);
        let day = day_of(temperature, rec, *line, t_day)?;
        let entry = temps
            .entry(key.clone())
            .or_insert_with(|| vec![BTreeMap::new(); CURVE_NAMES.len()]);
        for (k, col) in t_cols.iter().enumerate() {
            let v = temperature.float(rec, *line, *col)?;
            if entry[k].insert(day, v).is_some() {
                return Err(DataError::Schema {
                    file: temperature.file.clone(),
                    line: *line,
                    column: "day".into(),
                    message: format!("duplicate day {day} for ({}, {})", key.0, key.1),
                });
            }
        }
    }

    // precipitation.csv
    let p_daily = precipitation.has("day");
    if !p_daily && !precipitation.has("month") {
        return Err(DataError::Schema {
            file: precipitation.file.clone(),
            line: 1,
            column: "month".into(),
            message: "expected a 'month' or 'day' column".into(),
        });
    }
    let (p_id, p_year, p_val) = (
        precipitation.col("county_id")?,
        precipitation.col("year")?,
        precipitation.col("precip_mm")?,
    );
    let p_time = precipitation.col(if p_daily { "day" } else { "month" })?;
    let mut precip: HashMap<Key, BTreeMap<u32, f64>> = HashMap::new();
    for (line, rec) in &precipitation.rows {
        let key = (precipitation.text(rec, *line, p_id)?.to_string(), year_of(precipitation, rec, *line, p_year)?);
        let idx = if p_daily {
            day_of(precipitation, rec, *line, p_time)?
        } else {
            let m = precipitation.int(rec, *line, p_time)?;
            if !(1..=12).contains(&m) {
                return Err(precipitation.bad(*line, p_time, format!("month {m} outside 1..=12")));
            }
            m as u32
        };
        let v = precipitation.float(rec, *line, p_val)?;
        if precip.entry(key.clone()).or_default().insert(idx, v).is_some() {
            return Err(DataError::Schema {
                file: precipitation.file.clone(),
                line: *line,
                column: precipitation.headers[p_time].clone(),
                message: format!("duplicate entry {idx} for ({}, {})", key.0, key.1),
            });
        }
    }

    let grid = daily_grid();
    let mut records = Vec::with_capacity(yield_rows.len());
    for ((county_id, year), (response, weight)) in yield_rows {
        let key = (county_id.clone(), year);
        let Some(series) = temps.get(&key) else {
            warn!("dropping ({county_id}, {year}): no temperature rows");
            continue;
        };
        let mut curves = Vec::with_capacity(series.len());
        for s in series {
            match fill_daily(s) {
                Some(values) => curves.push(
                    FunctionalSample::new(grid.clone(), values).map_err(|e| DataError::Inconsistent(e.to_string()))?,
                ),
                None => break,
            }
        }
        if curves.len() != series.len() {
            warn!("dropping ({county_id}, {year}): temperature gap longer than {MAX_INTERPOLATED_GAP} days");
            continue;
        }
        let Some(p) = precip.get(&key) else {
            warn!("dropping ({county_id}, {year}): no precipitation rows");
            continue;
        };
        let (scalars, incomplete) = if p_daily { monthly_means(p) } else { monthly_values(p) };
        let loc = &locs[&county_id];
        records.push(Record {
            county_id,
            year,
            location: loc.point,
            response,
            curves,
            scalars,
            weight,
            state: loc.state.clone(),
            flags: RecordFlags {
                incomplete_scalars: incomplete,
            },
        });
    }
    SpatialDataset::new(
        records,
        DatasetMeta {
            response_units: RESPONSE_UNITS.into(),
            curve_names: CURVE_NAMES.iter().map(|s| s.to_string()).collect(),
            scalar_names: scalar_names(),
            anomaly: false,
            year_means: BTreeMap::new(),
        },
    )
}

/// Monthly means of daily values; months with more than
/// [`MAX_MISSING_DAYS_PER_MONTH`] missing days set the flag.
pub fn monthly_means(daily: &BTreeMap<u32, f64>) -> (Vec<f64>, bool) {
    let mut sums = [0.0; 12];
    let mut counts = [0usize; 12];
    for (d, v) in daily {
        let m = month_of_day(*d) as usize - 1;
        sums[m] += v;
        counts[m] += 1;
    }
    let mut incomplete = false;
    let means = (0..12)
        .map(|m| {
            if MONTH_LENGTHS[m] as usize - counts[m] > MAX_MISSING_DAYS_PER_MONTH {
                incomplete = true;
            }
            if counts[m] == 0 {
                0.0
            } else {
                sums[m] / counts[m] as f64
            }
        })
        .collect();
    (means, incomplete)
}

fn monthly_values(monthly: &BTreeMap<u32, f64>) -> (Vec<f64>, bool) {
    let mut incomplete = false;
    let values = (1..=12)
        .map(|m| match monthly.get(&m) {
            Some(v) => *v,
            None => {
                incomplete = true;
                0.0
            }
        })
        .collect();
    (values, incomplete)
}

fn create(path: &Path) -> Result<File, DataError> {
    File::create(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> DataError {
    DataError::Csv {
        file: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    }
}

/// Write `ds` in the four-table schema (monthly precipitation). Curves must
/// be on the 365-day grid; the first two curves are written as
/// `tmax_c`, `tmin_c`.
pub fn write_dataset(ds: &SpatialDataset, paths: &DatasetPaths) -> Result<(), DataError> {
    if ds.n_curves() != CURVE_NAMES.len() || ds.n_scalars() != 12 {
        return Err(DataError::Inconsistent(format!(
            "CSV schema needs 2 curves and 12 monthly scalars, dataset has {} and {}",
            ds.n_curves(),
            ds.n_scalars()
        )));
    }
    let grid = daily_grid();
    let mut sites: BTreeMap<&str, (Point, Option<&str>)> = BTreeMap::new();
    for r in ds.records() {
        sites.insert(&r.county_id, (r.location, r.state.as_deref()));
        for c in &r.curves {
            if c.grid() != grid.as_slice() {
                return Err(DataError::Inconsistent(format!(
                    "record ({}, {}) is not on the 365-day grid",
                    r.county_id, r.year
                )));
            }
        }
    }
    let with_state = sites.values().any(|(_, s)| s.is_some());

    let mut w = csv::Writer::from_writer(create(&paths.locations)?);
    let mut header = vec!["county_id", "x_km", "y_km"];
    if with_state {
        header.push("state");
    }
    w.write_record(&header).map_err(|e| write_err(&paths.locations, e))?;
    for (id, (p, state)) in &sites {
        let mut row = vec![id.to_string(), p.x.to_string(), p.y.to_string()];
        if with_state {
            row.push(state.unwrap_or("").to_string());
        }
        w.write_record(&row).map_err(|e| write_err(&paths.locations, e))?;
    }
    w.flush().map_err(|e| write_err(&paths.locations, e))?;

    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    let mut w = csv::Writer::from_writer(create(&paths.yields)?);
    w.write_record(["county_id", "year", "yield_bu_ac", "harvest_acres"])
        .map_err(|e| write_err(&paths.yields, e))?;
    for r in ds.records() {
        w.write_record([r.county_id.clone(), r.year.to_string(), opt(r.response), opt(r.weight)])
            .map_err(|e| write_err(&paths.yields, e))?;
    }
    w.flush().map_err(|e| write_err(&paths.yields, e))?;

    let mut out = std::io::BufWriter::new(create(&paths.temperature)?);
    let io = |e: std::io::Error| DataError::Io {
        path: paths.temperature.display().to_string(),
        source: e,
    };
    writeln!(out, "county_id,year,day,tmax_c,tmin_c").map_err(io)?;
    for r in ds.records() {
        let (a, b) = (r.curves[0].values(), r.curves[1].values());
        for d in 0..DAYS_PER_YEAR as usize {
            writeln!(out, "{},{},{},{},{}", r.county_id, r.year, d + 1, a[d], b[d]).map_err(io)?;
        }
    }
    out.flush().map_err(io)?;

    let mut w = csv::Writer::from_writer(create(&paths.precipitation)?);
    w.write_record(["county_id", "year", "month", "precip_mm"])
        .map_err(|e| write_err(&paths.precipitation, e))?;
    for r in ds.records() {
        for (m, v) in r.scalars.iter().enumerate() {
            w.write_record([r.county_id.clone(), r.year.to_string(), (m + 1).to_string(), v.to_string()])
                .map_err(|e| write_err(&paths.precipitation, e))?;
        }
    }
    w.flush().map_err(|e| write_err(&paths.precipitation, e))?;
    Ok(())
}

#[cfg(test)]
pub(crate) fn assemble_from_strings(
    locations: &str,
    yields: &str,
    temperature: &str,
    precipitation: &str,
) -> Result<SpatialDataset, DataError> {
    assemble(
        &Table::parse("locations.csv", locations.as_bytes())?,
        &Table::parse("yield.csv", yields.as_bytes())?,
        &Table::parse("temperature.csv", temperature.as_bytes())?,
        &Table::parse("precipitation.csv", precipitation.as_bytes())?,
    )
}
