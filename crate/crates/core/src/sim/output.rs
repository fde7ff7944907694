//! Time-indexed run outputs and their CSV/JSON forms.

use super::SimError;
use crate::weather::{format_timestamp, parse_timestamp};
use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

/// A named series; the unit is part of the name (`pv_power_mw`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimOutput {
    /// Seconds from the start of the run.
    pub time: Vec<f64>,
    /// Calendar stamps for hourly runs.
    pub timestamps: Option<Vec<NaiveDateTime>>,
    pub channels: Vec<Channel>,
}

impl SimOutput {
    pub fn with_channels(names: &[&str], timestamps: bool) -> Self {
        Self {
            time: Vec::new(),
            timestamps: timestamps.then(Vec::new),
            channels: names
                .iter()
                .map(|n| Channel {
                    name: (*n).to_string(),
                    values: Vec::new(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.iter().find(|c| c.name == name).map(|c| c.values.as_slice())
    }

    /// Appends one row; `values` follows the channel order.
    pub fn push(&mut self, t: f64, stamp: Option<NaiveDateTime>, values: &[f64]) {
        debug_assert_eq!(values.len(), self.channels.len());
        self.time.push(t);
        if let (Some(ts), Some(s)) = (self.timestamps.as_mut(), stamp) {
            ts.push(s);
        }
        for (c, v) in self.channels.iter_mut().zip(values) {
            c.values.push(*v);
        }
    }

    /// Equal channel lengths and strictly increasing time.
    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.time.len();
        if self.channels.iter().any(|c| c.values.len() != n) || self.timestamps.as_ref().is_some_and(|t| t.len() != n) {
            return Err(SimError::Format("channel lengths differ".into()));
        }
        if self.time.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SimError::Format("time is not strictly increasing".into()));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SimError> {
        self.validate()?;
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["time_s".to_string()];
        if self.timestamps.is_some() {
            header.push("timestamp".into());
        }
        header.extend(self.channels.iter().map(|c| c.name.clone()));
        wr.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![fmt_f64(self.time[k])];
            if let Some(ts) = &self.timestamps {
                row.push(format_timestamp(&ts[k]));
            }
            row.extend(self.channels.iter().map(|c| fmt_f64(c.values[k])));
            wr.write_record(&row)?;
        }
        wr.flush().map_err(|e| SimError::io("<writer>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, SimError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("time_s") {
            return Err(SimError::Format("first column must be time_s".into()));
        }
        let stamped = headers.get(1) == Some("timestamp");
        let first = if stamped { 2 } else { 1 };
        let names: Vec<&str> = headers.iter().skip(first).collect();
        let mut out = Self::with_channels(&names, stamped);
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64, SimError> {
                let s = rec.get(i).unwrap_or("");
                parse_f64(s).ok_or_else(|| SimError::Format(format!("row {}: bad number '{s}'", k + 1)))
            };
            let t = num(0)?;
            let stamp = if stamped {
                let s = rec.get(1).unwrap_or("");
                Some(parse_timestamp(s).ok_or_else(|| SimError::Format(format!("row {}: bad timestamp '{s}'", k + 1)))?)
            } else {
                None
            };
            let values = (first..first + names.len()).map(num).collect::<Result<Vec<_>, _>>()?;
            out.push(t, stamp, &values);
        }
        out.validate()?;
        Ok(out)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<(), SimError> {
        self.validate()?;
        let doc = SimOutputJson {
            schema_version: SCHEMA_VERSION,
            kind: "sim_output".into(),
            time_s: self.time.clone(),
            timestamps: self.timestamps.as_ref().map(|v| v.iter().map(format_timestamp).collect()),
            channels: self
                .channels
                .iter()
                .map(|c| JsonChannel {
                    name: c.name.clone(),
                    values: c.values.iter().map(|v| v.is_finite().then_some(*v)).collect(),
                })
                .collect(),
        };
        write_json_doc(&doc, w)
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self, SimError> {
        let doc: SimOutputJson = serde_json::from_reader(r).map_err(|e| SimError::Format(e.to_string()))?;
        if doc.schema_version != SCHEMA_VERSION || doc.kind != "sim_output" {
            return Err(SimError::Format("unsupported document kind or schema version".into()));
        }
        let timestamps = match doc.timestamps {
            Some(v) => Some(
                v.iter()
                    .map(|s| parse_timestamp(s).ok_or_else(|| SimError::Format(format!("bad timestamp '{s}'"))))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            None => None,
        };
        let out = Self {
            time: doc.time_s,
            timestamps,
            channels: doc
                .channels
                .into_iter()
                .map(|c| Channel {
                    name: c.name,
                    values: c.values.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
                })
                .collect(),
        };
        out.validate()?;
        Ok(out)
    }

    pub fn emit(&self, format: OutputFormat, path: &Path) -> Result<(), SimError> {
        let w = create(path)?;
        match format {
            OutputFormat::Csv => self.write_csv(w),
            OutputFormat::Json => self.write_json(w),
        }
        .map_err(|e| e.with_path(path))
    }

    /// Reads a file written by [`SimOutput::emit`], choosing the format by extension.
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let f = File::open(path).map_err(|e| SimError::io(path.display(), e))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::read_json(f),
            _ => Self::read_csv(f),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonChannel {
    name: String,
    values: Vec<Option<f64>>,
}

#[derive(Serialize, Deserialize)]
struct SimOutputJson {
    schema_version: u32,
    kind: String,
    time_s: Vec<f64>,
    timestamps: Option<Vec<String>>,
    channels: Vec<JsonChannel>,
}

/// Shortest representation that parses back to the same bits.
pub(crate) fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:?}")
    }
}

pub(crate) fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "NaN" => Some(f64::NAN),
        _ => s.parse().ok(),
    }
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>, SimError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir.display(), e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| SimError::io(path.display(), e))
}

pub(crate) fn write_json_doc<T: Serialize, W: Write>(doc: &T, mut w: W) -> Result<(), SimError> {
    serde_json::to_writer_pretty(&mut w, doc).map_err(|e| SimError::Format(e.to_string()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| SimError::io("<writer>", e))
}
