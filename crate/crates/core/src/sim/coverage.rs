//! Share of a reference plant's hourly output matched by the hybrid plant.

use super::output::{create, fmt_f64, write_json_doc, OutputFormat, SCHEMA_VERSION};
use super::{SimError, SimOutput};
use crate::weather::{format_timestamp, LoadSeries};
use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

pub const TOTAL_CHANNEL: &str = "total_mw";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub timestamp: NaiveDateTime,
    pub hybrid_mw: f64,
    pub reference_mw: f64,
    /// `None` where the reference is zero.
    pub coverage_pct: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub hours: usize,
    pub undefined_hours: usize,
    pub min_pct: Option<f64>,
    pub max_pct: Option<f64>,
    pub mean_pct: Option<f64>,
    /// Energy ratio over hours with a positive reference.
    pub energy_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
}

impl CoverageReport {
    pub fn summary(&self) -> CoverageSummary {
        let defined: Vec<f64> = self.rows.iter().filter_map(|r| r.coverage_pct).collect();
        let (mut e_h, mut e_r) = (0.0, 0.0);
        for r in self.rows.iter().filter(|r| r.coverage_pct.is_some()) {
            e_h += r.hybrid_mw;
            e_r += r.reference_mw;
        }
        CoverageSummary {
            hours: self.rows.len(),
            undefined_hours: self.rows.len() - defined.len(),
            min_pct: defined.iter().copied().reduce(f64::min),
            max_pct: defined.iter().copied().reduce(f64::max),
            mean_pct: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
            energy_pct: (e_r > 0.0).then(|| 100.0 * e_h / e_r),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SimError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["timestamp", "hybrid_mw", "reference_mw", "coverage_pct"])?;
        for r in &self.rows {
            wr.write_record([
                format_timestamp(&r.timestamp),
                fmt_f64(r.hybrid_mw),
                fmt_f64(r.reference_mw),
                r.coverage_pct.map(fmt_f64).unwrap_or_default(),
            ])?;
        }
        wr.flush().map_err(|e| SimError::io("<writer>", e))
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<(), SimError> {
        #[derive(Serialize)]
        struct Row {
            timestamp: String,
            hybrid_mw: f64,
            reference_mw: f64,
            coverage_pct: Option<f64>,
        }
        #[derive(Serialize)]
        struct Doc {
            schema_version: u32,
            kind: &'static str,
            summary: CoverageSummary,
            rows: Vec<Row>,
        }
        let doc = Doc {
            schema_version: SCHEMA_VERSION,
            kind: "coverage_report",
            summary: self.summary(),
            rows: self
                .rows
                .iter()
                .map(|r| Row {
                    timestamp: format_timestamp(&r.timestamp),
                    hybrid_mw: r.hybrid_mw,
                    reference_mw: r.reference_mw,
                    coverage_pct: r.coverage_pct,
                })
                .collect(),
        };
        write_json_doc(&doc, w)
    }

    pub fn emit(&self, format: OutputFormat, path: &Path) -> Result<(), SimError> {
        let w = create(path)?;
        match format {
            OutputFormat::Csv => self.write_csv(w),
            OutputFormat::Json => self.write_json(w),
        }
        .map_err(|e| e.with_path(path))
    }
}

/// Hour-by-hour `100·hybrid/reference`. Both series must carry the same
/// timestamps in the same order.
pub fn coverage_analysis(hybrid: &SimOutput, reference: &LoadSeries) -> Result<CoverageReport, SimError> {
    hybrid.validate()?;
    let stamps = hybrid
        .timestamps
        .as_ref()
        .ok_or_else(|| SimError::Alignment("hybrid output has no timestamps".into()))?;
    let total = hybrid
        .channel(TOTAL_CHANNEL)
        .ok_or_else(|| SimError::Alignment(format!("hybrid output lacks channel {TOTAL_CHANNEL}")))?;
    if stamps.len() != reference.records.len() {
        return Err(SimError::Alignment(format!(
            "hybrid has {} hours, reference has {}",
            stamps.len(),
            reference.records.len()
        )));
    }
    let rows = stamps
        .iter()
        .zip(total)
        .zip(&reference.records)
        .enumerate()
        .map(|(k, ((ts, h), r))| {
            if *ts != r.timestamp {
                return Err(SimError::Alignment(format!(
                    "row {}: {} vs {}",
                    k + 1,
                    format_timestamp(ts),
                    format_timestamp(&r.timestamp)
                )));
            }
            Ok(CoverageRow {
                timestamp: *ts,
                hybrid_mw: *h,
                reference_mw: r.demand,
                coverage_pct: (r.demand > 0.0).then(|| 100.0 * h / r.demand),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CoverageReport { rows })
}
