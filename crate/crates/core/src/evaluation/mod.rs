//! Comparison of simulated EMA answers with ground truth.
//!
//! The default alignment is cumulative: each student's predicted weekly
//! values and their truth responses are reduced to term means, and the
//! per-student mean pairs are scored. Per-observation alignment pairs each
//! truth week with the prediction for the same week instead.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EmaRecord, EmaScales, RunLog};
use crate::student::Dimension;

pub mod metrics;
pub mod report;

pub use metrics::{average_ranks, mae, rmse, spearman};
pub use report::{
    correlation_matrix, emit_eval_report, evaluate_run, render_metrics_table, CorrelationMatrix,
    CorrelationMode, DimMetrics, EvalReport, RunMetrics,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no pairs to score")]
    Empty,
    #[error("series lengths differ ({x} vs {y})")]
    LengthMismatch { x: usize, y: usize },
    #[error("need at least 3 observations, got {0}")]
    TooShort(usize),
    #[error("correlation undefined for a constant series")]
    Constant,
    #[error("series contains a non-finite value")]
    NonFinite,
    #[error("ground truth schema: {0}")]
    Schema(String),
    #[error("ground truth line {line}: {reason}")]
    Data { line: u64, reason: String },
    #[error("no student has both predictions and ground truth")]
    NoStudents,
    #[error("io: {0}")]
    Io(String),
}

/// The three EMA dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmaDim {
    Stress,
    Sleep,
    Social,
}

impl EmaDim {
    pub const ALL: [EmaDim; 3] = [EmaDim::Stress, EmaDim::Sleep, EmaDim::Social];

    pub fn key(self) -> &'static str {
        match self {
            EmaDim::Stress => "stress",
            EmaDim::Sleep => "sleep",
            EmaDim::Social => "social",
        }
    }

    /// Row label in the metrics table.
    pub fn label(self) -> &'static str {
        match self {
            EmaDim::Stress => "Stress level",
            EmaDim::Sleep => "Sleep level",
            EmaDim::Social => "Social level",
        }
    }

    pub fn status_dimension(self) -> Dimension {
        match self {
            EmaDim::Stress => Dimension::Stress,
            EmaDim::Sleep => Dimension::Sleep,
            EmaDim::Social => Dimension::Social,
        }
    }

    pub fn of_ema(self, e: &EmaRecord) -> f64 {
        match self {
            EmaDim::Stress => e.stress_level,
            EmaDim::Sleep => e.sleep_level,
            EmaDim::Social => e.social_level,
        }
    }

    pub fn of_truth(self, t: &GroundTruthEma) -> Option<f64> {
        match self {
            EmaDim::Stress => t.stress,
            EmaDim::Sleep => t.sleep,
            EmaDim::Social => t.social,
        }
    }
}

impl fmt::Display for EmaDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEma {
    pub uid: String,
    pub week: u32,
    pub stress: Option<f64>,
    pub sleep: Option<f64>,
    pub social: Option<f64>,
}

const TRUTH_HEADER: [&str; 5] = ["uid", "week", "stress", "sleep", "social"];

/// Reads `uid,week,stress,sleep,social` CSV. Blank cells are missing
/// responses; values outside `scales` (when given) are rejected.
pub fn parse_ground_truth<R: Read>(
    input: R,
    scales: Option<&EmaScales>,
) -> Result<Vec<GroundTruthEma>, EvalError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(|e| EvalError::Schema(e.to_string()))?;
    if header.iter().ne(TRUTH_HEADER) {
        return Err(EvalError::Schema(format!(
            "expected header `{}`, found `{}`",
            TRUTH_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| EvalError::Schema(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |reason: String| EvalError::Data { line, reason };
        let uid = rec[0].to_string();
        if uid.is_empty() {
            return Err(bad("empty uid".into()));
        }
        let week: u32 = rec[1]
            .parse()
            .map_err(|_| bad(format!("bad week `{}`", &rec[1])))?;
        let mut vals = [None; 3];
        for (i, dim) in EmaDim::ALL.iter().enumerate() {
            let cell = &rec[2 + i];
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| bad(format!("bad {dim} value `{cell}`")))?;
            if !v.is_finite() {
                return Err(bad(format!("bad {dim} value `{cell}`")));
            }
            if let Some(s) = scales {
                let scale = match dim {
                    EmaDim::Stress => s.stress,
                    EmaDim::Sleep => s.sleep,
                    EmaDim::Social => s.social,
                };
                if !scale.contains(v) {
                    return Err(bad(format!(
                        "{dim} value {v} outside [{}, {}]",
                        scale.min, scale.max
                    )));
                }
            }
            vals[i] = Some(v);
        }
        out.push(GroundTruthEma {
            uid,
            week,
            stress: vals[0],
            sleep: vals[1],
            social: vals[2],
        });
    }
    Ok(out)
}

pub fn load_ground_truth(
    path: &Path,
    scales: Option<&EmaScales>,
) -> Result<Vec<GroundTruthEma>, EvalError> {
    let f = std::fs::File::open(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    parse_ground_truth(f, scales)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignMode {
    /// Per-student term means.
    #[default]
    Cumulative,
    /// Week-matched pairs; several truth answers in one week are averaged.
    PerObservation,
}

impl AlignMode {
    pub fn describe(self) -> &'static str {
        match self {
            AlignMode::Cumulative => {
                "cumulative: per-student term mean of predicted vs. term mean of ground truth"
            }
            AlignMode::PerObservation => {
                "per-observation: prediction and ground truth matched by student and week"
            }
        }
    }
}

impl FromStr for AlignMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cumulative" => Ok(AlignMode::Cumulative),
            "per-observation" => Ok(AlignMode::PerObservation),
            other => Err(format!("unknown alignment `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub uid: String,
    /// `None` for cumulative pairs.
    pub week: Option<u32>,
    pub predicted: f64,
    pub truth: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DimAlignment {
    pub pairs: Vec<AlignedPair>,
    /// Predicted students with no usable truth for this dimension.
    pub excluded: Vec<String>,
}

impl DimAlignment {
    pub fn values(&self) -> Vec<(f64, f64)> {
        self.pairs.iter().map(|p| (p.predicted, p.truth)).collect()
    }

    pub fn n_students(&self) -> usize {
        let mut uids: Vec<&str> = self.pairs.iter().map(|p| p.uid.as_str()).collect();
        uids.dedup();
        uids.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub mode: AlignMode,
    pub dims: BTreeMap<EmaDim, DimAlignment>,
    /// Truth uids with no predictions at all.
    pub unmatched_truth: Vec<String>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pairs predictions with truth per dimension.
///
/// A student without truth for a dimension is excluded from that dimension
/// only. Fails when no dimension has any pair.
pub fn align(
    predicted: &[EmaRecord],
    truth: &[GroundTruthEma],
    mode: AlignMode,
) -> Result<Alignment, EvalError> {
    let mut pred: BTreeMap<&str, BTreeMap<u32, &EmaRecord>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for p in predicted {
        let e = pred.entry(p.uid.as_str()).or_insert_with(|| {
            order.push(p.uid.as_str());
            BTreeMap::new()
        });
        e.insert(p.week, p);
    }
    let mut unmatched: Vec<String> = truth
        .iter()
        .filter(|t| !pred.contains_key(t.uid.as_str()))
        .map(|t| t.uid.clone())
        .collect();
    unmatched.sort();
    unmatched.dedup();

    let mut dims = BTreeMap::new();
    for dim in EmaDim::ALL {
        let mut d = DimAlignment::default();
        for &uid in &order {
            let weeks = &pred[uid];
            let answers: Vec<(u32, f64)> = truth
                .iter()
                .filter(|t| t.uid == uid)
                .filter_map(|t| dim.of_truth(t).map(|v| (t.week, v)))
                .collect();
            let before = d.pairs.len();
            match mode {
                AlignMode::Cumulative => {
                    if !answers.is_empty() {
                        let p: Vec<f64> = weeks.values().map(|e| dim.of_ema(e)).collect();
                        let t: Vec<f64> = answers.iter().map(|a| a.1).collect();
                        d.pairs.push(AlignedPair {
                            uid: uid.to_string(),
                            week: None,
                            predicted: mean(&p),
                            truth: mean(&t),
                        });
                    }
                }
                AlignMode::PerObservation => {
                    let mut by_week: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
                    for (w, v) in answers {
                        by_week.entry(w).or_default().push(v);
                    }
                    for (w, vals) in by_week {
                        if let Some(e) = weeks.get(&w) {
                            d.pairs.push(AlignedPair {
                                uid: uid.to_string(),
                                week: Some(w),
                                predicted: dim.of_ema(e),
                                truth: mean(&vals),
                            });
                        }
                    }
                }
            }
            if d.pairs.len() == before {
                d.excluded.push(uid.to_string());
            }
        }
        dims.insert(dim, d);
    }
    if dims.values().all(|d| d.pairs.is_empty()) {
        return Err(EvalError::NoStudents);
    }
    Ok(Alignment {
        mode,
        dims,
        unmatched_truth: unmatched,
    })
}

/// Every EMA record in a run log, in run order.
pub fn predicted_ema(log: &RunLog) -> Vec<EmaRecord> {
    log.outcomes().map(|o| o.ema.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ema(uid: &str, week: u32, v: f64) -> EmaRecord {
        EmaRecord {
            uid: uid.into(),
            week,
            stress_level: v,
            sleep_level: v,
            social_level: v,
        }
    }

    fn truth(uid: &str, week: u32, stress: Option<f64>, sleep: Option<f64>, social: Option<f64>) -> GroundTruthEma {
        GroundTruthEma {
            uid: uid.into(),
            week,
            stress,
            sleep,
            social,
        }
    }

    #[test]
    fn parses_blanks_and_rejects_schema() {
        let csv = "uid,week,stress,sleep,social\nu01,1,3,,2.5\nu01,2,,,\n";
        let t = parse_ground_truth(csv.as_bytes(), None).unwrap();
        assert_eq!(t[0], truth("u01", 1, Some(3.0), None, Some(2.5)));
        assert_eq!(t[1], truth("u01", 2, None, None, None));

        let err = parse_ground_truth("uid,week,stress,sleep\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, EvalError::Schema(_)));

        let scales = EmaScales::default();
        let err = parse_ground_truth("uid,week,stress,sleep,social\nu01,1,9,,\n".as_bytes(), Some(&scales))
            .unwrap_err();
        assert_eq!(
            err,
            EvalError::Data { line: 2, reason: "stress value 9 outside [1, 5]".into() }
        );
    }

    #[test]
    fn identity_pair() {
        let a = align(&[ema("u01", 1, 3.0)], &[truth("u01", 4, Some(3.0), Some(3.0), Some(3.0))], AlignMode::Cumulative).unwrap();
        let p = &a.dims[&EmaDim::Stress].pairs[0];
        assert_eq!((p.predicted, p.truth), (3.0, 3.0));
    }

    #[test]
    fn stress_only_truth_excludes_from_other_dims() {
        let a = align(
            &[ema("u01", 1, 3.0)],
            &[truth("u01", 1, Some(2.0), None, None)],
            AlignMode::Cumulative,
        )
        .unwrap();
        assert_eq!(a.dims[&EmaDim::Stress].excluded.len(), 0);
        assert_eq!(a.dims[&EmaDim::Sleep].excluded, vec!["u01".to_string()]);
        assert_eq!(a.dims[&EmaDim::Social].excluded.len(), 1);
    }

    #[test]
    fn sparse_means_match_naive() {
        let mut pred = Vec::new();
        let mut tr = Vec::new();
        for s in 0..5u32 {
            let uid = format!("u{:02}", s + 1);
            for w in 1..=10u32 {
                pred.push(ema(&uid, w, ((s * 7 + w * 3) % 9) as f64 / 2.0 + 1.0));
                if (s + w) % 3 == 0 {
                    tr.push(truth(&uid, w, Some(((s + w) % 5 + 1) as f64), None, None));
                }
            }
        }
        let a = align(&pred, &tr, AlignMode::Cumulative).unwrap();
        for p in &a.dims[&EmaDim::Stress].pairs {
            let mut ps = 0.0;
            let mut pn = 0.0;
            for e in pred.iter().filter(|e| e.uid == p.uid) {
                ps += e.stress_level;
                pn += 1.0;
            }
            let mut ts = 0.0;
            let mut tn = 0.0;
            for t in tr.iter().filter(|t| t.uid == p.uid) {
                ts += t.stress.unwrap();
                tn += 1.0;
            }
            assert!((p.predicted - ps / pn).abs() < 1e-12);
            assert!((p.truth - ts / tn).abs() < 1e-12);
        }
        let d = &a.dims[&EmaDim::Stress];
        assert_eq!(d.pairs.len() + d.excluded.len(), 5);
    }

    #[test]
    fn per_observation_matches_weeks() {
        let pred = vec![ema("u01", 1, 2.0), ema("u01", 2, 4.0)];
        let tr = vec![
            truth("u01", 2, Some(3.0), None, None),
            truth("u01", 2, Some(5.0), None, None),
            truth("u01", 9, Some(1.0), None, None),
        ];
        let a = align(&pred, &tr, AlignMode::PerObservation).unwrap();
        let pairs = &a.dims[&EmaDim::Stress].pairs;
        assert_eq!(pairs.len(), 1);
        assert_eq!((pairs[0].week, pairs[0].predicted, pairs[0].truth), (Some(2), 4.0, 4.0));
    }

    #[test]
    fn nothing_to_align() {
        assert_eq!(
            align(&[ema("u01", 1, 3.0)], &[truth("u02", 1, Some(1.0), None, None)], AlignMode::Cumulative)
                .unwrap_err(),
            EvalError::NoStudents
        );
    }
}
