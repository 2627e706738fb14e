//! Metrics table, correlation matrix and report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{align, mae, predicted_ema, rmse, spearman, AlignMode, Alignment, EmaDim, EvalError, GroundTruthEma};
use crate::engine::RunLog;
use crate::student::Dimension;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimMetrics {
    pub mae: f64,
    pub rmse: f64,
    /// Pairs scored.
    pub n: usize,
}

/// Scores for one model run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub label: String,
    /// `None` when no student had truth for the dimension.
    pub dims: BTreeMap<EmaDim, Option<DimMetrics>>,
    #[serde(default)]
    pub excluded: BTreeMap<EmaDim, usize>,
    #[serde(default)]
    pub n_students: usize,
}

impl RunMetrics {
    pub fn from_alignment(label: &str, a: &Alignment) -> Result<Self, EvalError> {
        let mut dims = BTreeMap::new();
        let mut excluded = BTreeMap::new();
        let mut students = std::collections::BTreeSet::new();
        for (dim, d) in &a.dims {
            let pairs = d.values();
            let m = if pairs.is_empty() {
                None
            } else {
                Some(DimMetrics {
                    mae: mae(&pairs)?,
                    rmse: rmse(&pairs)?,
                    n: pairs.len(),
                })
            };
            dims.insert(*dim, m);
            excluded.insert(*dim, d.excluded.len());
            students.extend(d.pairs.iter().map(|p| p.uid.clone()));
        }
        Ok(RunMetrics {
            label: label.to_string(),
            dims,
            excluded,
            n_students: students.len(),
        })
    }
}

/// Aligns one run with the truth and scores it.
pub fn evaluate_run(
    label: &str,
    log: &RunLog,
    truth: &[GroundTruthEma],
    mode: AlignMode,
) -> Result<(RunMetrics, Alignment), EvalError> {
    let a = align(&predicted_ema(log), truth, mode)?;
    Ok((RunMetrics::from_alignment(label, &a)?, a))
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.3}"))
}

/// Markdown table: one row per EMA dimension, an MAE and RMSE column per run.
pub fn render_metrics_table(runs: &[RunMetrics]) -> String {
    let mut s = String::from("| Status |");
    for r in runs {
        let _ = write!(s, " {0} MAE | {0} RMSE |", r.label);
    }
    s.push_str("\n|---|");
    for _ in runs {
        s.push_str("---:|---:|");
    }
    for dim in EmaDim::ALL {
        let _ = write!(s, "\n| {} |", dim.label());
        for r in runs {
            let m = r.dims.get(&dim).copied().flatten();
            let _ = write!(s, " {} | {} |", cell(m.map(|m| m.mae)), cell(m.map(|m| m.rmse)));
        }
    }
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationMode {
    /// One observation per student-week.
    StudentWeek,
    /// One observation per student: term means.
    StudentMean,
}

impl CorrelationMode {
    pub const ALL: [CorrelationMode; 2] = [CorrelationMode::StudentWeek, CorrelationMode::StudentMean];

    pub fn as_str(self) -> &'static str {
        match self {
            CorrelationMode::StudentWeek => "student-week",
            CorrelationMode::StudentMean => "student-mean",
        }
    }
}

pub const CORRELATION_ROWS: [Dimension; 3] = [Dimension::Happy, Dimension::Knowledge, Dimension::Stamina];
pub const CORRELATION_COLS: [EmaDim; 3] = [EmaDim::Social, EmaDim::Sleep, EmaDim::Stress];

/// Spearman rho of status rows against predicted EMA columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub mode: CorrelationMode,
    pub n: usize,
    pub rows: Vec<Dimension>,
    pub cols: Vec<EmaDim>,
    /// `None` where rho is undefined (constant series).
    pub cells: Vec<Vec<Option<f64>>>,
}

/// `None` when fewer than three observations are available.
pub fn correlation_matrix(log: &RunLog, mode: CorrelationMode) -> Option<CorrelationMatrix> {
    // (row values, col values) per observation
    let obs: Vec<([f64; 3], [f64; 3])> = match mode {
        CorrelationMode::StudentWeek => log
            .outcomes()
            .map(|o| {
                (
                    CORRELATION_ROWS.map(|d| o.status_after.get(d) as f64),
                    CORRELATION_COLS.map(|d| d.of_ema(&o.ema)),
                )
            })
            .collect(),
        CorrelationMode::StudentMean => log
            .students
            .iter()
            .filter(|s| !s.outcomes.is_empty())
            .map(|s| {
                let n = s.outcomes.len() as f64;
                let rows = CORRELATION_ROWS
                    .map(|d| s.outcomes.iter().map(|o| o.status_after.get(d) as f64).sum::<f64>() / n);
                let cols = CORRELATION_COLS.map(|d| s.outcomes.iter().map(|o| d.of_ema(&o.ema)).sum::<f64>() / n);
                (rows, cols)
            })
            .collect(),
    };
    if obs.len() < 3 {
        return None;
    }
    let cells = (0..3)
        .map(|r| {
            let x: Vec<f64> = obs.iter().map(|o| o.0[r]).collect();
            (0..3)
                .map(|c| {
                    let y: Vec<f64> = obs.iter().map(|o| o.1[c]).collect();
                    spearman(&x, &y).ok()
                })
                .collect()
        })
        .collect();
    Some(CorrelationMatrix {
        mode,
        n: obs.len(),
        rows: CORRELATION_ROWS.to_vec(),
        cols: CORRELATION_COLS.to_vec(),
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCorrelations {
    pub label: String,
    pub matrices: Vec<CorrelationMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub alignment: AlignMode,
    pub alignment_note: String,
    pub runs: Vec<RunMetrics>,
    pub correlations: Vec<RunCorrelations>,
    /// Free-form echo of the inputs (run log paths, config hashes).
    pub config: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub table: PathBuf,
    pub spearman: PathBuf,
    pub summary: PathBuf,
}

fn correlation_markdown(c: &RunCorrelations, out: &mut String) {
    for m in &c.matrices {
        let _ = write!(
            out,
            "\n### {} ({}, n = {})\n\n| | {} |\n|---|{}\n",
            c.label,
            m.mode.as_str(),
            m.n,
            m.cols.iter().map(|d| d.key()).collect::<Vec<_>>().join(" | "),
            "---:|".repeat(m.cols.len())
        );
        for (r, row) in m.rows.iter().zip(&m.cells) {
            let vals: Vec<String> = row.iter().map(|v| cell(*v)).collect();
            let _ = writeln!(out, "| {} | {} |", r.key(), vals.join(" | "));
        }
    }
}

/// The markdown report: alignment note, metrics table, exclusions and the
/// correlation matrices.
pub fn render_report_markdown(report: &EvalReport) -> String {
    let mut s = format!(
        "# EMA prediction report\n\nAlignment: {}\n\n",
        report.alignment_note
    );
    s.push_str(&render_metrics_table(&report.runs));
    s.push_str("\nExcluded students (no ground truth for the dimension):\n\n");
    for r in &report.runs {
        let ex: Vec<String> = EmaDim::ALL
            .iter()
            .map(|d| format!("{} {}", d.key(), r.excluded.get(d).copied().unwrap_or(0)))
            .collect();
        let _ = writeln!(s, "- {}: {}", r.label, ex.join(", "));
    }
    s.push_str("\n## Spearman correlation (status vs. predicted EMA)\n");
    if report.correlations.iter().all(|c| c.matrices.is_empty()) {
        s.push_str("\nOmitted: fewer than three observations.\n");
    }
    for c in &report.correlations {
        correlation_markdown(c, &mut s);
    }
    s
}

/// Long-form CSV: `run,mode,n,row,<col>...`, with `NA` for undefined cells.
pub fn render_spearman_csv(report: &EvalReport) -> String {
    let mut s = String::from("run,mode,n,row,");
    s.push_str(&CORRELATION_COLS.map(|d| d.key()).join(","));
    s.push('\n');
    for c in &report.correlations {
        for m in &c.matrices {
            for (r, row) in m.rows.iter().zip(&m.cells) {
                let vals: Vec<String> = row
                    .iter()
                    .map(|v| v.map_or_else(|| "NA".into(), |v| format!("{v:.6}")))
                    .collect();
                let _ = writeln!(s, "{},{},{},{},{}", c.label, m.mode.as_str(), m.n, r.key(), vals.join(","));
            }
        }
    }
    s
}

/// Writes `report.md`, `spearman.csv` and `summary.json` into `out_dir`.
pub fn emit_eval_report(report: &EvalReport, out_dir: &Path) -> Result<ReportPaths, EvalError> {
    let io = |p: &Path, e: std::io::Error| EvalError::Io(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(out_dir).map_err(|e| io(out_dir, e))?;
    let paths = ReportPaths {
        table: out_dir.join("report.md"),
        spearman: out_dir.join("spearman.csv"),
        summary: out_dir.join("summary.json"),
    };
    std::fs::write(&paths.table, render_report_markdown(report)).map_err(|e| io(&paths.table, e))?;
    std::fs::write(&paths.spearman, render_spearman_csv(report)).map_err(|e| io(&paths.spearman, e))?;
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    std::fs::write(&paths.summary, json).map_err(|e| io(&paths.summary, e))?;
    Ok(paths)
}
