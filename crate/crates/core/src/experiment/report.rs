//! Campaign artifacts: `records.csv`, `summary.json` and per-optimizer
//! convergence histories.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::campaign::{Campaign, RunRecord, RunStatus};
use crate::evaluation::RouteMetrics;
use crate::planning::{history_csv, Algorithm};

pub const RECORDS_HEADER: [&str; 12] = [
    "run",
    "optimizer",
    "status",
    "feasible",
    "cost",
    "weight",
    "tasks",
    "time_s",
    "distance_m",
    "violation_s",
    "wall_clock_s",
    "replans",
];

/// Columns excluded when comparing two campaigns for determinism.
pub const WALL_CLOCK_COLUMNS: [&str; 1] = ["wall_clock_s"];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: row {row}: {message}")]
    Malformed { path: String, row: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Sample standard deviation (zero for a single value).
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Self { mean, std, min, max })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSummary {
    pub runs: usize,
    pub failed_runs: usize,
    pub feasible_runs: usize,
    /// Feasible runs over all runs, failed ones included.
    pub feasibility_rate: f64,
    /// Mean violation over successful runs.
    pub mean_violation_s: f64,
    /// Mean |time - t_available| / t_available over feasible runs.
    pub mean_budget_gap: Option<f64>,
    /// Statistics over successful runs, keyed by records.csv column name.
    pub metrics: BTreeMap<String, Stats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub t_available_s: f64,
    pub optimizers: BTreeMap<String, OptimizerSummary>,
}

const STAT_COLUMNS: [&str; 8] = ["cost", "weight", "tasks", "time_s", "distance_m", "violation_s", "wall_clock_s", "replans"];

fn column(record: &RunRecord, name: &str) -> f64 {
    let m = &record.metrics;
    match name {
        "cost" => m.cost,
        "weight" => m.weight,
        "tasks" => m.tasks_completed as f64,
        "time_s" => m.travel_time,
        "distance_m" => m.distance,
        "violation_s" => m.violation,
        "wall_clock_s" => record.wall_clock_s,
        "replans" => record.replans as f64,
        _ => unreachable!("unknown column {name}"),
    }
}

impl Summary {
    pub fn from_records(records: &[RunRecord], t_available: f64) -> Self {
        let mut groups: BTreeMap<String, Vec<&RunRecord>> = BTreeMap::new();
        for r in records {
            groups.entry(r.optimizer.to_string()).or_default().push(r);
        }
        let optimizers = groups
            .into_iter()
            .map(|(tag, rs)| {
                let ok: Vec<&RunRecord> = rs.iter().copied().filter(|r| r.status == RunStatus::Ok).collect();
                let feasible: Vec<&RunRecord> = ok.iter().copied().filter(|r| r.metrics.feasible).collect();
                let violations: Vec<f64> = ok.iter().map(|r| r.metrics.violation).collect();
                let gaps: Vec<f64> = feasible
                    .iter()
                    .map(|r| (r.metrics.travel_time - t_available).abs() / t_available)
                    .collect();
                let metrics = STAT_COLUMNS
                    .iter()
                    .filter_map(|&c| {
                        let values: Vec<f64> = ok.iter().map(|r| column(r, c)).collect();
                        Stats::of(&values).map(|s| (c.to_string(), s))
                    })
                    .collect();
                let summary = OptimizerSummary {
                    runs: rs.len(),
                    failed_runs: rs.len() - ok.len(),
                    feasible_runs: feasible.len(),
                    feasibility_rate: feasible.len() as f64 / rs.len() as f64,
                    mean_violation_s: Stats::of(&violations).map_or(0.0, |s| s.mean),
                    mean_budget_gap: Stats::of(&gaps).map(|s| s.mean),
                    metrics,
                };
                (tag, summary)
            })
            .collect();
        Self { t_available_s: t_available, optimizers }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

fn record_row(r: &RunRecord) -> [String; 12] {
    let m = &r.metrics;
    [
        r.run.to_string(),
        r.optimizer.to_string(),
        r.status.to_string(),
        m.feasible.to_string(),
        format!("{:.6}", m.cost),
        format!("{:.6}", m.weight),
        m.tasks_completed.to_string(),
        format!("{:.6}", m.travel_time),
        format!("{:.6}", m.distance),
        format!("{:.6}", m.violation),
        format!("{:.6}", r.wall_clock_s),
        r.replans.to_string(),
    ]
}

pub fn write_records<W: std::io::Write>(records: &[RunRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORDS_HEADER)?;
    for r in records {
        w.write_record(record_row(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn records_csv(records: &[RunRecord]) -> String {
    let mut buf = Vec::new();
    write_records(records, &mut buf).expect("in-memory CSV");
    String::from_utf8(buf).expect("CSV is UTF-8")
}

fn parse_row(row: &csv::StringRecord) -> Result<RunRecord, String> {
    if row.len() != RECORDS_HEADER.len() {
        return Err(format!("expected {} fields, found {}", RECORDS_HEADER.len(), row.len()));
    }
    let f = |i: usize| -> Result<f64, String> { row[i].parse().map_err(|e| format!("{}: {e}", RECORDS_HEADER[i])) };
    let u = |i: usize| -> Result<usize, String> { row[i].parse().map_err(|e| format!("{}: {e}", RECORDS_HEADER[i])) };
    Ok(RunRecord {
        run: u(0)?,
        optimizer: row[1].parse::<Algorithm>()?,
        status: row[2].parse::<RunStatus>()?,
        metrics: RouteMetrics {
            feasible: row[3].parse().map_err(|e| format!("feasible: {e}"))?,
            cost: f(4)?,
            weight: f(5)?,
            tasks_completed: u(6)?,
            travel_time: f(7)?,
            distance: f(8)?,
            violation: f(9)?,
        },
        wall_clock_s: f(10)?,
        replans: u(11)?,
    })
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<RunRecord>, ReportError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|source| ReportError::Csv { path: name.clone(), source })?;
    let header = reader.headers().map_err(|source| ReportError::Csv { path: name.clone(), source })?;
    if header.iter().ne(RECORDS_HEADER) {
        return Err(ReportError::Malformed { path: name, row: 0, message: "unexpected header".into() });
    }
    reader
        .records()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|source| ReportError::Csv { path: name.clone(), source })?;
            parse_row(&row).map_err(|message| ReportError::Malformed { path: name.clone(), row: i + 1, message })
        })
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    std::fs::write(path, contents).map_err(|source| ReportError::Io { path: path.display().to_string(), source })
}

/// Writes `records.csv`, `summary.json` and `history_<optimizer>.csv` for
/// each given history into `out_dir`, creating it if needed.
pub fn emit_reports(
    records: &[RunRecord],
    summary: &Summary,
    histories: &[(Algorithm, &[f64])],
    out_dir: impl AsRef<Path>,
) -> Result<(), ReportError> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Io { path: dir.display().to_string(), source })?;
    write_file(&dir.join("records.csv"), &records_csv(records))?;
    write_file(&dir.join("summary.json"), &summary.to_json())?;
    for (algorithm, history) in histories {
        write_file(&dir.join(format!("history_{algorithm}.csv")), &history_csv(history))?;
    }
    Ok(())
}

pub fn emit_campaign(campaign: &Campaign, t_available: f64, out_dir: impl AsRef<Path>) -> Result<Summary, ReportError> {
    let summary = Summary::from_records(&campaign.records, t_available);
    emit_reports(&campaign.records, &summary, &campaign.last_histories(), out_dir)?;
    Ok(summary)
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<Summary, ReportError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|source| ReportError::Json { path: path.display().to_string(), source })
}
