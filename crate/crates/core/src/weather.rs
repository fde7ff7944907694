//! Hourly weather and plant-load series: CSV ingestion, validation,
//! synthetic generation and monthly aggregation.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Weibull};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Error)]
pub enum WeatherError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: missing column `{column}`")]
    MissingColumn { column: String },
    #[error("row {row}: cannot parse `{value}` in column `{column}`")]
    Parse { row: usize, column: String, value: String },
    #[error("row {row}: timestamp not strictly increasing")]
    Sequence { row: usize },
    #[error("row {row}: gap in hourly cadence")]
    Gap { row: usize },
    #[error("row {row}: {field} = {value} violates its bounds")]
    Validation { row: usize, field: &'static str, value: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("series is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    pub timestamp: NaiveDateTime,
    /// W/m²
    pub ghi: f64,
    pub dni: f64,
    pub dhi: f64,
    /// °C
    pub t_ambient: f64,
    /// m/s at the measurement height
    pub wind_10m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Site {
    pub latitude: f64,
    pub longitude: f64,
    pub hub_height: f64,
    pub measurement_height: f64,
}

impl Default for Site {
    /// Adrar, Algeria.
    fn default() -> Self {
        Self {
            latitude: 27.87,
            longitude: -0.29,
            hub_height: 80.0,
            measurement_height: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherSeries {
    pub records: Vec<WeatherRecord>,
    pub site: Site,
}

fn check_record(row: usize, r: &WeatherRecord) -> Result<(), WeatherError> {
    let checks: [(&'static str, f64, bool); 5] = [
        ("ghi", r.ghi, r.ghi >= 0.0),
        ("dni", r.dni, r.dni >= 0.0),
        ("dhi", r.dhi, r.dhi >= 0.0),
        ("wind_10m", r.wind_10m, r.wind_10m >= 0.0),
        ("t_ambient", r.t_ambient, (-60.0..=70.0).contains(&r.t_ambient)),
    ];
    for (field, value, ok) in checks {
        if !ok || !value.is_finite() {
            return Err(WeatherError::Validation { row, field, value });
        }
    }
    Ok(())
}

/// Rows are numbered from 1 (first data row after the header).
fn check_cadence(row: usize, prev: NaiveDateTime, next: NaiveDateTime) -> Result<(), WeatherError> {
    let step = next - prev;
    if step <= Duration::zero() {
        Err(WeatherError::Sequence { row })
    } else if step != Duration::hours(1) {
        Err(WeatherError::Gap { row })
    } else {
        Ok(())
    }
}

impl WeatherSeries {
    pub fn new(records: Vec<WeatherRecord>, site: Site) -> Result<Self, WeatherError> {
        let s = Self { records, site };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), WeatherError> {
        if self.records.is_empty() {
            return Err(WeatherError::Empty);
        }
        if !(self.site.hub_height > 0.0 && self.site.measurement_height > 0.0) {
            return Err(WeatherError::Domain("site heights must be positive".into()));
        }
        for (k, r) in self.records.iter().enumerate() {
            check_record(k + 1, r)?;
            if k > 0 {
                check_cadence(k + 1, self.records[k - 1].timestamp, r.timestamp)?;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemperatureUnit {
    #[default]
    Celsius,
    Kelvin,
    Fahrenheit,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedUnit {
    #[default]
    MetersPerSecond,
    KilometersPerHour,
}

/// Maps canonical channels to the header names of a particular file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeatherSchema {
    pub timestamp: String,
    pub ghi: String,
    pub dni: String,
    pub dhi: String,
    pub temperature: String,
    pub wind: String,
    pub temperature_unit: TemperatureUnit,
    pub wind_unit: SpeedUnit,
}

impl Default for WeatherSchema {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            ghi: "ghi_wm2".into(),
            dni: "dni_wm2".into(),
            dhi: "dhi_wm2".into(),
            temperature: "temp_c".into(),
            wind: "wind10m_ms".into(),
            temperature_unit: TemperatureUnit::Celsius,
            wind_unit: SpeedUnit::MetersPerSecond,
        }
    }
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    const FORMATS: [&str; 5] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M",
        "%Y-%m-%dT%H",
    ];
    FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn format_timestamp(t: &NaiveDateTime) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize, WeatherError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| WeatherError::MissingColumn { column: name.to_string() })
}

fn cell(rec: &csv::StringRecord, idx: usize) -> &str {
    rec.get(idx).unwrap_or("").trim()
}

fn parse_number(row: usize, column: &str, raw: &str) -> Result<f64, WeatherError> {
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| WeatherError::Parse {
            row,
            column: column.to_string(),
            value: raw.to_string(),
        })
}

fn open(path: &Path) -> Result<std::fs::File, WeatherError> {
    std::fs::File::open(path).map_err(|source| WeatherError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_weather_csv(path: &Path, schema: &WeatherSchema, site: Site) -> Result<WeatherSeries, WeatherError> {
    read_weather_csv(open(path)?, schema, site)
}

pub fn read_weather_csv<R: Read>(reader: R, schema: &WeatherSchema, site: Site) -> Result<WeatherSeries, WeatherError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let it = column_index(&headers, &schema.timestamp)?;
    let ig = column_index(&headers, &schema.ghi)?;
    let idn = column_index(&headers, &schema.dni)?;
    let idh = column_index(&headers, &schema.dhi)?;
    let itc = column_index(&headers, &schema.temperature)?;
    let iw = column_index(&headers, &schema.wind)?;
    let mut records: Vec<WeatherRecord> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = k + 1;
        let ts_raw = cell(&rec, it);
        let timestamp = parse_timestamp(ts_raw).ok_or_else(|| WeatherError::Parse {
            row,
            column: schema.timestamp.clone(),
            value: ts_raw.to_string(),
        })?;
        let t_raw = parse_number(row, &schema.temperature, cell(&rec, itc))?;
        let w_raw = parse_number(row, &schema.wind, cell(&rec, iw))?;
        let r = WeatherRecord {
            timestamp,
            ghi: parse_number(row, &schema.ghi, cell(&rec, ig))?,
            dni: parse_number(row, &schema.dni, cell(&rec, idn))?,
            dhi: parse_number(row, &schema.dhi, cell(&rec, idh))?,
            t_ambient: match schema.temperature_unit {
                TemperatureUnit::Celsius => t_raw,
                TemperatureUnit::Kelvin => t_raw - 273.15,
                TemperatureUnit::Fahrenheit => (t_raw - 32.0) * 5.0 / 9.0,
            },
            wind_10m: match schema.wind_unit {
                SpeedUnit::MetersPerSecond => w_raw,
                SpeedUnit::KilometersPerHour => w_raw / 3.6,
            },
        };
        check_record(row, &r)?;
        if let Some(prev) = records.last() {
            check_cadence(row, prev.timestamp, r.timestamp)?;
        }
        records.push(r);
    }
    if records.is_empty() {
        return Err(WeatherError::Empty);
    }
    Ok(WeatherSeries { records, site })
}

/// Writes the canonical schema. Numbers use the shortest round-trip
/// representation, so reloading reproduces every value bit-exactly.
pub fn write_weather_csv<W: Write>(series: &WeatherSeries, writer: W) -> Result<(), WeatherError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "ghi_wm2", "dni_wm2", "dhi_wm2", "temp_c", "wind10m_ms"])?;
    for r in &series.records {
        w.write_record([
            format_timestamp(&r.timestamp),
            r.ghi.to_string(),
            r.dni.to_string(),
            r.dhi.to_string(),
            r.t_ambient.to_string(),
            r.wind_10m.to_string(),
        ])?;
    }
    w.flush().map_err(|source| WeatherError::Io {
        path: "<writer>".into(),
        source,
    })
}

/// Power-law wind shear from the measurement height to the hub.
pub fn shear_to_hub(wind: f64, h_meas: f64, h_hub: f64, alpha_shear: f64) -> Result<f64, WeatherError> {
    if !(h_meas > 0.0 && h_hub > 0.0) {
        return Err(WeatherError::Domain(format!("heights must be positive (got {h_meas}, {h_hub})")));
    }
    if !(0.0..=1.0).contains(&alpha_shear) {
        return Err(WeatherError::Domain(format!("shear exponent {alpha_shear} outside [0, 1]")));
    }
    Ok(wind * (h_hub / h_meas).powf(alpha_shear))
}

/// Daily irradiance and temperature envelope of the synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClearSkyProfile {
    pub start: NaiveDate,
    /// Clear-sky noon GHI, W/m².
    pub peak_ghi: f64,
    pub sunrise_hour: f64,
    pub sunset_hour: f64,
    /// Share of GHI that is diffuse.
    pub diffuse_fraction: f64,
    /// Lower bound of the per-day clearness factor drawn uniformly in `[min, 1]`.
    pub min_clearness: f64,
    pub t_mean: f64,
    pub t_amplitude: f64,
    pub t_peak_hour: f64,
    pub t_noise_std: f64,
}

impl Default for ClearSkyProfile {
    /// A January day in the Algerian Sahara.
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date"),
            peak_ghi: 800.0,
            sunrise_hour: 7.5,
            sunset_hour: 18.0,
            diffuse_fraction: 0.15,
            min_clearness: 0.8,
            t_mean: 13.0,
            t_amplitude: 8.0,
            t_peak_hour: 15.0,
            t_noise_std: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeibullParams {
    /// Shape
    pub k: f64,
    /// Scale, m/s
    pub c: f64,
}

impl Default for WeibullParams {
    fn default() -> Self {
        Self { k: 2.0, c: 6.8 }
    }
}

fn half_sine(hour: f64, rise: f64, set: f64) -> f64 {
    if hour <= rise || hour >= set {
        0.0
    } else {
        (PI * (hour - rise) / (set - rise)).sin()
    }
}

/// Deterministic synthetic hourly weather at `site`.
pub fn synth_weather(
    days: u32,
    clear_sky: &ClearSkyProfile,
    weibull: &WeibullParams,
    seed: u64,
    site: Site,
) -> Result<WeatherSeries, WeatherError> {
    if days == 0 {
        return Err(WeatherError::Domain("days must be at least 1".into()));
    }
    if !(weibull.k > 0.0 && weibull.c > 0.0) {
        return Err(WeatherError::Domain(format!(
            "Weibull parameters must be positive (k = {}, c = {})",
            weibull.k, weibull.c
        )));
    }
    if !(clear_sky.sunrise_hour < clear_sky.sunset_hour && clear_sky.peak_ghi >= 0.0) {
        return Err(WeatherError::Domain(
            "clear-sky profile needs sunrise < sunset and peak_ghi ≥ 0".into(),
        ));
    }
    let wind = Weibull::new(weibull.c, weibull.k).map_err(|e| WeatherError::Domain(e.to_string()))?;
    let noise = Normal::new(0.0, clear_sky.t_noise_std.max(0.0)).map_err(|e| WeatherError::Domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = clear_sky.start.and_hms_opt(0, 0, 0).expect("midnight exists");
    let mut records = Vec::with_capacity(days as usize * 24);
    let min_clear = clear_sky.min_clearness.clamp(0.0, 1.0);
    for day in 0..days {
        let clearness = if min_clear < 1.0 { rng.random_range(min_clear..=1.0) } else { 1.0 };
        for hour in 0..24u32 {
            let timestamp = start + Duration::hours((day * 24 + hour) as i64);
            let env = half_sine(hour as f64, clear_sky.sunrise_hour, clear_sky.sunset_hour);
            let ghi = clear_sky.peak_ghi * clearness * env;
            let dhi = clear_sky.diffuse_fraction.clamp(0.0, 1.0) * ghi;
            let dni = if env > 0.0 { (ghi - dhi) / env.max(0.2) } else { 0.0 };
            let phase = 2.0 * PI * (hour as f64 - clear_sky.t_peak_hour) / 24.0;
            let t_ambient = (clear_sky.t_mean + clear_sky.t_amplitude * phase.cos() + noise.sample(&mut rng)).clamp(-60.0, 70.0);
            let wind_10m = wind.sample(&mut rng);
            records.push(WeatherRecord {
                timestamp,
                ghi,
                dni,
                dhi,
                t_ambient,
                wind_10m,
            });
        }
    }
    WeatherSeries::new(records, site)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelValues {
    pub ghi: f64,
    pub dni: f64,
    pub dhi: f64,
    pub t_ambient: f64,
    pub wind_10m: f64,
}

impl ChannelValues {
    fn of(r: &WeatherRecord) -> Self {
        Self {
            ghi: r.ghi,
            dni: r.dni,
            dhi: r.dhi,
            t_ambient: r.t_ambient,
            wind_10m: r.wind_10m,
        }
    }

    fn zip(self, o: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            ghi: f(self.ghi, o.ghi),
            dni: f(self.dni, o.dni),
            dhi: f(self.dhi, o.dhi),
            t_ambient: f(self.t_ambient, o.t_ambient),
            wind_10m: f(self.wind_10m, o.wind_10m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlySummary {
    pub year: i32,
    pub month: u32,
    pub hours: usize,
    pub mean: ChannelValues,
    pub max: ChannelValues,
}

pub fn monthly_aggregate(series: &WeatherSeries) -> Result<Vec<MonthlySummary>, WeatherError> {
    if series.records.is_empty() {
        return Err(WeatherError::Empty);
    }
    let mut groups: BTreeMap<(i32, u32), (usize, ChannelValues, ChannelValues)> = BTreeMap::new();
    for r in &series.records {
        let key = (r.timestamp.year(), r.timestamp.month());
        let v = ChannelValues::of(r);
        groups
            .entry(key)
            .and_modify(|(n, sum, max)| {
                *n += 1;
                *sum = sum.zip(v, |a, b| a + b);
                *max = max.zip(v, f64::max);
            })
            .or_insert((1, v, v));
    }
    Ok(groups
        .into_iter()
        .map(|((year, month), (n, sum, max))| MonthlySummary {
            year,
            month,
            hours: n,
            mean: sum.zip(sum, |a, _| a / n as f64),
            max,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadRecord {
    pub timestamp: NaiveDateTime,
    /// MW
    pub demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSeries {
    pub records: Vec<LoadRecord>,
}

impl LoadSeries {
    pub fn new(records: Vec<LoadRecord>) -> Result<Self, WeatherError> {
        if records.is_empty() {
            return Err(WeatherError::Empty);
        }
        for (k, r) in records.iter().enumerate() {
            if !(r.demand >= 0.0 && r.demand.is_finite()) {
                return Err(WeatherError::Validation {
                    row: k + 1,
                    field: "demand_mw",
                    value: r.demand,
                });
            }
            if k > 0 {
                check_cadence(k + 1, records[k - 1].timestamp, r.timestamp)?;
            }
        }
        Ok(Self { records })
    }
}

pub fn load_load_csv(path: &Path) -> Result<LoadSeries, WeatherError> {
    read_load_csv(open(path)?)
}

pub fn read_load_csv<R: Read>(reader: R) -> Result<LoadSeries, WeatherError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let it = column_index(&headers, "timestamp")?;
    let id = column_index(&headers, "demand_mw")?;
    let mut records = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = k + 1;
        let raw = cell(&rec, it);
        let timestamp = parse_timestamp(raw).ok_or_else(|| WeatherError::Parse {
            row,
            column: "timestamp".into(),
            value: raw.to_string(),
        })?;
        records.push(LoadRecord {
            timestamp,
            demand: parse_number(row, "demand_mw", cell(&rec, id))?,
        });
    }
    LoadSeries::new(records)
}

pub fn write_load_csv<W: Write>(series: &LoadSeries, writer: W) -> Result<(), WeatherError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "demand_mw"])?;
    for r in &series.records {
        w.write_record([format_timestamp(&r.timestamp), r.demand.to_string()])?;
    }
    w.flush().map_err(|source| WeatherError::Io {
        path: "<writer>".into(),
        source,
    })
}

/// Two-humped daily demand with a night trough, scaled between `base_mw`
/// and `peak_mw`, plus seeded multiplicative noise.
pub fn synth_load(start: NaiveDate, days: u32, base_mw: f64, peak_mw: f64, seed: u64) -> Result<LoadSeries, WeatherError> {
    if days == 0 || !(base_mw >= 0.0 && peak_mw >= base_mw) {
        return Err(WeatherError::Domain("need days ≥ 1 and 0 ≤ base ≤ peak".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t0 = start.and_hms_opt(0, 0, 0).expect("midnight exists");
    let bump = |h: f64, centre: f64, width: f64| (-((h - centre) / width).powi(2)).exp();
    let records = (0..days * 24)
        .map(|k| {
            let timestamp = t0 + Duration::hours(k as i64);
            let h = timestamp.hour() as f64;
            let shape = (0.55 * bump(h, 13.0, 3.5) + bump(h, 20.5, 2.5)).min(1.0);
            let jitter: f64 = rng.random_range(0.95..=1.05);
            LoadRecord {
                timestamp,
                demand: (base_mw + (peak_mw - base_mw) * shape) * jitter,
            }
        })
        .collect();
    LoadSeries::new(records)
}
