//! Sensing ingestion: activity and GPS logs bucketed into 7x24 week grids.
//!
//! Every in-window sample lands in exactly one hourly cell. Cells that saw
//! nothing stay `None` and are left out of the weekly routine report.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SECS_PER_HOUR: i64 = 3_600;
pub const SECS_PER_DAY: i64 = 86_400;
pub const SECS_PER_WEEK: i64 = 604_800;
pub const DAYS: usize = 7;
pub const HOURS: usize = 24;

const EARTH_RADIUS_M: f64 = 6_371_000.0;

pub const UNKNOWN_LOCATION: &str = "unknown";
pub const UNMAPPED_DESCRIPTION: &str = "off-campus or unmapped area";
pub const NO_FIX_DESCRIPTION: &str = "no location data";

#[derive(Debug, Error)]
pub enum SensingError {
    #[error("unreadable header: {0}")]
    Header(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("zone table: {0}")]
    Zones(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("grid file {path}: {reason}")]
    Grid { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Activity,
    Gps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SensingSample {
    Activity { timestamp: i64, activity_code: u8 },
    Gps { timestamp: i64, lat: f64, lon: f64 },
}

impl SensingSample {
    pub fn timestamp(&self) -> i64 {
        match *self {
            SensingSample::Activity { timestamp, .. } | SensingSample::Gps { timestamp, .. } => {
                timestamp
            }
        }
    }

    fn sort_key(&self) -> (i64, u8, u64, u64) {
        match *self {
            SensingSample::Activity {
                timestamp,
                activity_code,
            } => (timestamp, 0, activity_code as u64, 0),
            SensingSample::Gps { timestamp, lat, lon } => {
                (timestamp, 1, lat.to_bits(), lon.to_bits())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedLog {
    pub samples: Vec<SensingSample>,
    pub rejects: Vec<Reject>,
}

fn normalize_header(h: &str) -> String {
    h.trim().to_ascii_lowercase().replace([' ', '-'], "_")
}

fn find_column(headers: &[String], names: &[&str]) -> Option<usize> {
    headers.iter().position(|h| names.contains(&h.as_str()))
}

/// Parses an activity (`timestamp,activity_inference`) or GPS
/// (`timestamp,latitude,longitude`) CSV. Columns are found by header name, so
/// wider StudentLife exports also load. Bad rows go to `rejects` with their
/// line number; samples come back sorted by timestamp.
pub fn parse_sensing_log<R: Read>(input: R, kind: SampleKind) -> Result<ParsedLog, SensingError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| SensingError::Header(e.to_string()))?
        .iter()
        .map(normalize_header)
        .collect();

    let ts_col = find_column(&headers, &["timestamp", "time"])
        .ok_or_else(|| SensingError::Header(format!("no timestamp column in {headers:?}")))?;
    let value_cols: Vec<usize> = match kind {
        SampleKind::Activity => vec![find_column(&headers, &["activity_inference", "activity"])
            .ok_or_else(|| SensingError::Header("no activity_inference column".into()))?],
        SampleKind::Gps => vec![
            find_column(&headers, &["latitude", "lat"])
                .ok_or_else(|| SensingError::Header("no latitude column".into()))?,
            find_column(&headers, &["longitude", "lon", "lng"])
                .ok_or_else(|| SensingError::Header("no longitude column".into()))?,
        ],
    };

    let mut out = ParsedLog::default();
    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                out.rejects.push(Reject {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        match parse_row(&record, ts_col, &value_cols, kind) {
            Ok(s) => out.samples.push(s),
            Err(reason) => out.rejects.push(Reject { line, reason }),
        }
    }
    out.samples.sort_by_key(SensingSample::timestamp);
    Ok(out)
}

fn parse_row(
    record: &csv::StringRecord,
    ts_col: usize,
    value_cols: &[usize],
    kind: SampleKind,
) -> Result<SensingSample, String> {
    let field = |i: usize, name: &str| {
        record
            .get(i)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| format!("missing {name}"))
    };
    let timestamp: i64 = field(ts_col, "timestamp")?
        .parse()
        .map_err(|_| "bad timestamp".to_string())?;
    match kind {
        SampleKind::Activity => {
            let activity_code = field(value_cols[0], "activity")?
                .parse()
                .map_err(|_| "bad activity code".to_string())?;
            Ok(SensingSample::Activity {
                timestamp,
                activity_code,
            })
        }
        SampleKind::Gps => {
            let lat: f64 = field(value_cols[0], "latitude")?
                .parse()
                .map_err(|_| "bad latitude".to_string())?;
            let lon: f64 = field(value_cols[1], "longitude")?
                .parse()
                .map_err(|_| "bad longitude".to_string())?;
            if !(-90.0..=90.0).contains(&lat) {
                return Err("lat out of range".into());
            }
            if !(-180.0..=180.0).contains(&lon) {
                return Err("lon out of range".into());
            }
            Ok(SensingSample::Gps { timestamp, lat, lon })
        }
    }
}

pub fn read_sensing_file(path: &Path, kind: SampleKind) -> Result<ParsedLog, SensingError> {
    parse_sensing_log(std::fs::File::open(path)?, kind)
}

/// Sorts and drops exact duplicate samples.
pub fn dedup_samples(mut samples: Vec<SensingSample>) -> Vec<SensingSample> {
    samples.sort_by_key(SensingSample::sort_key);
    samples.dedup_by_key(|s| s.sort_key());
    samples
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationZone {
    pub label: String,
    pub description: String,
    pub lat: f64,
    pub lon: f64,
    pub radius_m: f64,
}

impl LocationZone {
    pub fn validate(&self) -> Result<(), SensingError> {
        if self.label.trim().is_empty() {
            return Err(SensingError::Zones("zone label is empty".into()));
        }
        if !(self.radius_m > 0.0) {
            return Err(SensingError::Zones(format!(
                "zone `{}` radius must be positive",
                self.label
            )));
        }
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(SensingError::Zones(format!(
                "zone `{}` center out of range",
                self.label
            )));
        }
        Ok(())
    }
}

pub fn load_zones(path: &Path) -> Result<Vec<LocationZone>, SensingError> {
    let text = std::fs::read_to_string(path)?;
    let zones: Vec<LocationZone> =
        serde_json::from_str(&text).map_err(|e| SensingError::Zones(e.to_string()))?;
    if zones.is_empty() {
        return Err(SensingError::Zones("zone table is empty".into()));
    }
    zones.iter().try_for_each(LocationZone::validate)?;
    Ok(zones)
}

/// Great-circle distance in meters.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = (lat2 - lat1).to_radians();
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Place {
    pub label: String,
    pub description: String,
}

impl Place {
    fn unmapped() -> Self {
        Place {
            label: UNKNOWN_LOCATION.into(),
            description: UNMAPPED_DESCRIPTION.into(),
        }
    }
}

/// Nearest zone whose radius covers the point; first zone wins on ties.
pub fn resolve_location(lat: f64, lon: f64, zones: &[LocationZone]) -> Place {
    let mut best: Option<(f64, &LocationZone)> = None;
    for z in zones {
        let d = haversine_m(lat, lon, z.lat, z.lon);
        if d > z.radius_m {
            continue;
        }
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, z));
        }
    }
    best.map_or_else(Place::unmapped, |(_, z)| Place {
        label: z.label.clone(),
        description: z.description.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    /// Majority activity code; `None` when only GPS fell in this hour.
    pub activity: Option<u8>,
    /// Place of the GPS fix nearest the middle of the hour.
    pub location: Option<Place>,
    /// Number of samples bucketed into the cell.
    pub samples: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekGrid {
    pub uid: String,
    pub week_index: u32,
    pub cells: [[Option<CellEntry>; HOURS]; DAYS],
}

impl WeekGrid {
    pub fn empty(uid: &str, week_index: u32) -> Self {
        WeekGrid {
            uid: uid.to_string(),
            week_index,
            cells: std::array::from_fn(|_| std::array::from_fn(|_| None)),
        }
    }

    /// Non-null cells as `(day, hour, entry)`, day-major.
    pub fn occupied(&self) -> impl Iterator<Item = (usize, usize, &CellEntry)> {
        self.cells.iter().enumerate().flat_map(|(d, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(h, c)| c.as_ref().map(|c| (d, h, c)))
        })
    }

    pub fn sample_count(&self) -> u64 {
        self.occupied().map(|(_, _, c)| c.samples as u64).sum()
    }

    /// Hours spent per location label, most hours first, then by label.
    pub fn location_hours(&self) -> Vec<(String, u32)> {
        let mut hours: BTreeMap<&str, u32> = BTreeMap::new();
        for (_, _, c) in self.occupied() {
            if let Some(p) = &c.location {
                *hours.entry(p.label.as_str()).or_default() += 1;
            }
        }
        let mut v: Vec<_> = hours.into_iter().map(|(l, h)| (l.to_string(), h)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketResult {
    pub grids: Vec<WeekGrid>,
    pub in_window: u64,
    pub discarded: u64,
}

/// Seconds since the epoch for UTC midnight of `date`.
pub fn term_start_epoch(date: NaiveDate) -> i64 {
    date.and_hms_opt(0, 0, 0)
        .expect("midnight is valid")
        .and_utc()
        .timestamp()
}

/// Cell coordinates `(week (1-based), day, hour)` of a timestamp, or `None`
/// outside `[term_start, term_start + n_weeks weeks)`.
pub fn cell_of(t: i64, term_start: i64, n_weeks: u32) -> Option<(u32, usize, usize)> {
    let dt = t - term_start;
    if dt < 0 || dt >= n_weeks as i64 * SECS_PER_WEEK {
        return None;
    }
    let week = (dt / SECS_PER_WEEK) as u32 + 1;
    let day = ((dt % SECS_PER_WEEK) / SECS_PER_DAY) as usize;
    let hour = ((dt % SECS_PER_DAY) / SECS_PER_HOUR) as usize;
    Some((week, day, hour))
}

#[derive(Default)]
struct CellAccumulator {
    activities: Vec<(i64, u8)>,
    fixes: Vec<(i64, f64, f64)>,
}

/// Buckets samples into `n_weeks` grids starting at `term_start` (UTC seconds,
/// midnight aligned). Out-of-window samples are counted and dropped.
///
/// Within a cell the activity is the majority code (earliest sample breaks
/// ties) and the location is resolved from the fix closest to the half hour.
pub fn bucket_weeks(
    uid: &str,
    samples: &[SensingSample],
    zones: &[LocationZone],
    term_start: i64,
    n_weeks: u32,
) -> Result<BucketResult, SensingError> {
    if n_weeks < 1 {
        return Err(SensingError::Argument("n_weeks must be at least 1".into()));
    }
    if term_start.rem_euclid(SECS_PER_DAY) != 0 {
        return Err(SensingError::Argument(
            "term_start must be midnight aligned".into(),
        ));
    }

    let mut ordered: Vec<&SensingSample> = samples.iter().collect();
    ordered.sort_by_key(|s| s.timestamp());

    let mut acc: HashMap<(u32, usize, usize), CellAccumulator> = HashMap::new();
    let (mut in_window, mut discarded) = (0u64, 0u64);
    for s in ordered {
        let Some(key) = cell_of(s.timestamp(), term_start, n_weeks) else {
            discarded += 1;
            continue;
        };
        in_window += 1;
        let cell = acc.entry(key).or_default();
        match *s {
            SensingSample::Activity {
                timestamp,
                activity_code,
            } => cell.activities.push((timestamp, activity_code)),
            SensingSample::Gps { timestamp, lat, lon } => cell.fixes.push((timestamp, lat, lon)),
        }
    }

    let mut grids: Vec<WeekGrid> = (1..=n_weeks).map(|w| WeekGrid::empty(uid, w)).collect();
    for ((week, day, hour), cell) in acc {
        let start = term_start
            + (week as i64 - 1) * SECS_PER_WEEK
            + day as i64 * SECS_PER_DAY
            + hour as i64 * SECS_PER_HOUR;
        let midpoint = start + SECS_PER_HOUR / 2;
        let location = cell
            .fixes
            .iter()
            .min_by_key(|(t, _, _)| ((t - midpoint).abs(), *t))
            .map(|&(_, lat, lon)| resolve_location(lat, lon, zones));
        grids[week as usize - 1].cells[day][hour] = Some(CellEntry {
            activity: majority_activity(&cell.activities),
            location,
            samples: (cell.activities.len() + cell.fixes.len()) as u32,
        });
    }
    Ok(BucketResult {
        grids,
        in_window,
        discarded,
    })
}

/// `samples` must be in timestamp order.
fn majority_activity(samples: &[(i64, u8)]) -> Option<u8> {
    let mut counts: HashMap<u8, (usize, usize)> = HashMap::new();
    for (i, &(_, code)) in samples.iter().enumerate() {
        counts.entry(code).or_insert((0, i)).0 += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(code, _)| code)
}

/// Activity code to label; defaults to the StudentLife inference codes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActivityLabels(pub BTreeMap<u8, String>);

impl Default for ActivityLabels {
    fn default() -> Self {
        ActivityLabels(
            [(0, "stationary"), (1, "walking"), (2, "running"), (3, "unknown")]
                .into_iter()
                .map(|(c, l)| (c, l.to_string()))
                .collect(),
        )
    }
}

impl ActivityLabels {
    pub fn label(&self, code: u8) -> String {
        self.0
            .get(&code)
            .cloned()
            .unwrap_or_else(|| format!("unknown-activity({code})"))
    }
}

fn report_field(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            '|' => '/',
            '{' => '(',
            '}' => ')',
            '\n' | '\r' => ' ',
            c => c,
        })
        .collect()
}

/// One `Timestamp | Activity | Location | Location description` line per
/// non-null cell, ordered by day then hour.
pub fn render_weekly_report(grid: &WeekGrid, labels: &ActivityLabels) -> String {
    grid.occupied()
        .map(|(day, hour, c)| {
            let activity = c
                .activity
                .map_or_else(|| UNKNOWN_LOCATION.to_string(), |a| labels.label(a));
            let (label, description) = match &c.location {
                Some(p) => (p.label.as_str(), p.description.as_str()),
                None => (UNKNOWN_LOCATION, NO_FIX_DESCRIPTION),
            };
            format!(
                "Week {} Day {} {:02}:00 | {} | {} | {}",
                grid.week_index,
                day,
                hour,
                report_field(&activity),
                report_field(label),
                report_field(description)
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Per-student ingestion counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub uid: String,
    pub activity_samples: u64,
    pub gps_samples: u64,
    pub duplicates: u64,
    pub in_window: u64,
    pub discarded: u64,
    /// `(file, line, reason)` for every rejected row.
    pub rejects: Vec<(String, u64, String)>,
}

/// Parses one student's activity and GPS logs (either may be absent) and
/// buckets them into weekly grids.
pub fn ingest_student(
    uid: &str,
    activity: Option<&Path>,
    gps: Option<&Path>,
    zones: &[LocationZone],
    term_start: NaiveDate,
    n_weeks: u32,
) -> Result<(Vec<WeekGrid>, IngestSummary), SensingError> {
    let mut summary = IngestSummary {
        uid: uid.to_string(),
        ..Default::default()
    };
    let mut samples = Vec::new();
    for (path, kind) in [(activity, SampleKind::Activity), (gps, SampleKind::Gps)] {
        let Some(path) = path else { continue };
        let log = read_sensing_file(path, kind)?;
        let n = log.samples.len() as u64;
        match kind {
            SampleKind::Activity => summary.activity_samples = n,
            SampleKind::Gps => summary.gps_samples = n,
        }
        summary.rejects.extend(
            log.rejects
                .into_iter()
                .map(|r| (path.display().to_string(), r.line, r.reason)),
        );
        samples.extend(log.samples);
    }
    let before = samples.len();
    let samples = dedup_samples(samples);
    summary.duplicates = (before - samples.len()) as u64;
    let b = bucket_weeks(uid, &samples, zones, term_start_epoch(term_start), n_weeks)?;
    summary.in_window = b.in_window;
    summary.discarded = b.discarded;
    Ok((b.grids, summary))
}

/// Writes each grid to `<dir>/<uid>/week<NN>.json`.
pub fn save_grids(dir: &Path, grids: &[WeekGrid]) -> Result<(), SensingError> {
    for g in grids {
        let sub = dir.join(&g.uid);
        std::fs::create_dir_all(&sub)?;
        let mut json = serde_json::to_string(g).expect("grid serializes");
        json.push('\n');
        std::fs::write(sub.join(format!("week{:02}.json", g.week_index)), json)?;
    }
    Ok(())
}

/// Reads every grid written by [`save_grids`], keyed by uid, sorted by week.
pub fn load_grids(dir: &Path) -> Result<BTreeMap<String, Vec<WeekGrid>>, SensingError> {
    let mut out: BTreeMap<String, Vec<WeekGrid>> = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        for f in std::fs::read_dir(entry.path())? {
            let path = f?.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let bad = |reason: String| SensingError::Grid {
                path: path.display().to_string(),
                reason,
            };
            let text = std::fs::read_to_string(&path)?;
            let g: WeekGrid = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
            if g.uid != entry.file_name().to_string_lossy() {
                return Err(bad(format!("uid {} does not match its directory", g.uid)));
            }
            out.entry(g.uid.clone()).or_default().push(g);
        }
    }
    for grids in out.values_mut() {
        grids.sort_by_key(|g| g.week_index);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const T0: i64 = 1_364_169_600; // 2013-03-25 00:00 UTC

    fn zone(label: &str, lat: f64, lon: f64, radius_m: f64) -> LocationZone {
        LocationZone {
            label: label.into(),
            description: format!("{label} description"),
            lat,
            lon,
            radius_m,
        }
    }

    fn campus() -> Vec<LocationZone> {
        vec![
            zone("library", 43.7053, -72.2886, 80.0),
            zone("gym", 43.7030, -72.2840, 120.0),
        ]
    }

    #[test]
    fn header_only_is_empty() {
        let p = parse_sensing_log("timestamp,activity_inference\n".as_bytes(), SampleKind::Activity)
            .unwrap();
        assert!(p.samples.is_empty() && p.rejects.is_empty());
    }

    #[test]
    fn rows_sorted_ascending() {
        let csv = "timestamp,activity_inference\n30,1\n10,0\n20,2\n";
        let p = parse_sensing_log(csv.as_bytes(), SampleKind::Activity).unwrap();
        let ts: Vec<_> = p.samples.iter().map(|s| s.timestamp()).collect();
        assert_eq!(ts, vec![10, 20, 30]);
    }

    #[test]
    fn bad_latitude_rejected_with_line() {
        let csv = "timestamp,latitude,longitude\n10,43.7,-72.2\n11,91.0,-72.2\n12,abc,1\n";
        let p = parse_sensing_log(csv.as_bytes(), SampleKind::Gps).unwrap();
        assert_eq!(p.samples.len(), 1);
        assert_eq!(
            p.rejects,
            vec![
                Reject { line: 3, reason: "lat out of range".into() },
                Reject { line: 4, reason: "bad latitude".into() },
            ]
        );
    }

    #[test]
    fn studentlife_style_headers_accepted() {
        let csv = "time,provider,network_type,accuracy,latitude,longitude\n5,gps,,10,43.7,-72.2\n";
        let p = parse_sensing_log(csv.as_bytes(), SampleKind::Gps).unwrap();
        assert_eq!(p.samples.len(), 1);
        let csv = "timestamp, activity inference\n5,1\n";
        assert_eq!(
            parse_sensing_log(csv.as_bytes(), SampleKind::Activity).unwrap().samples.len(),
            1
        );
    }

    #[test]
    fn missing_header_column_is_format_error() {
        let err = parse_sensing_log("foo,bar\n1,2\n".as_bytes(), SampleKind::Gps).unwrap_err();
        assert!(matches!(err, SensingError::Header(_)));
    }

    #[test]
    fn zone_center_resolves_to_zone() {
        let z = campus();
        assert_eq!(resolve_location(43.7030, -72.2840, &z).label, "gym");
    }

    #[test]
    fn far_point_is_unknown() {
        let p = resolve_location(40.0, -70.0, &campus());
        assert_eq!(p.label, UNKNOWN_LOCATION);
        assert_eq!(p.description, UNMAPPED_DESCRIPTION);
    }

    #[test]
    fn overlapping_zones_pick_nearer_center() {
        let zones = vec![
            zone("a", 43.7000, -72.2900, 500.0),
            zone("b", 43.7020, -72.2900, 500.0),
        ];
        // Point 0.0012 deg north of a, 0.0008 south of b.
        let p = resolve_location(43.7012, -72.2900, &zones);
        let brute = zones
            .iter()
            .map(|z| (haversine_m(43.7012, -72.2900, z.lat, z.lon), &z.label))
            .filter(|(d, _)| *d <= 500.0)
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
            .unwrap();
        assert_eq!(&p.label, brute.1);
        assert_eq!(p.label, "b");
    }

    #[test]
    fn equal_distance_prefers_first_zone() {
        let zones = vec![zone("first", 0.0, 0.001, 500.0), zone("second", 0.0, -0.001, 500.0)];
        assert_eq!(resolve_location(0.0, 0.0, &zones).label, "first");
    }

    #[test]
    fn origin_and_integer_division() {
        assert_eq!(cell_of(T0, T0, 10), Some((1, 0, 0)));
        assert_eq!(cell_of(T0 + 8 * SECS_PER_DAY + 3 * SECS_PER_HOUR, T0, 10), Some((2, 1, 3)));
        assert_eq!(cell_of(T0 - 1, T0, 10), None);
        assert_eq!(cell_of(T0 + 10 * SECS_PER_WEEK, T0, 10), None);
    }

    #[test]
    fn bucketing_rejects_bad_arguments() {
        assert!(bucket_weeks("u01", &[], &campus(), T0, 0).is_err());
        assert!(bucket_weeks("u01", &[], &campus(), T0 + 5, 1).is_err());
    }

    #[test]
    fn majority_with_earliest_tie_break() {
        let base = T0 + 14 * SECS_PER_HOUR;
        let samples = [
            SensingSample::Activity { timestamp: base + 10, activity_code: 2 },
            SensingSample::Activity { timestamp: base + 5, activity_code: 1 },
            SensingSample::Activity { timestamp: base + 20, activity_code: 1 },
            SensingSample::Activity { timestamp: base + 30, activity_code: 2 },
        ];
        let r = bucket_weeks("u01", &samples, &campus(), T0, 1).unwrap();
        let c = r.grids[0].cells[0][14].as_ref().unwrap();
        assert_eq!(c.activity, Some(1));
        assert_eq!(c.samples, 4);
        assert!(c.location.is_none());
    }

    #[test]
    fn location_from_fix_nearest_midpoint() {
        let base = T0 + SECS_PER_DAY + 9 * SECS_PER_HOUR;
        let samples = [
            SensingSample::Gps { timestamp: base + 60, lat: 43.7030, lon: -72.2840 },
            SensingSample::Gps { timestamp: base + 1790, lat: 43.7053, lon: -72.2886 },
        ];
        let r = bucket_weeks("u01", &samples, &campus(), T0, 1).unwrap();
        let c = r.grids[0].cells[1][9].as_ref().unwrap();
        assert_eq!(c.location.as_ref().unwrap().label, "library");
        assert_eq!(c.activity, None);
    }

    #[test]
    fn empty_grid_renders_empty_report() {
        assert_eq!(render_weekly_report(&WeekGrid::empty("u01", 1), &ActivityLabels::default()), "");
    }

    #[test]
    fn single_cell_line_format() {
        let mut g = WeekGrid::empty("u01", 1);
        g.cells[2][14] = Some(CellEntry {
            activity: Some(1),
            location: Some(Place { label: "library".into(), description: "Baker-Berry Library".into() }),
            samples: 2,
        });
        assert_eq!(
            render_weekly_report(&g, &ActivityLabels::default()),
            "Week 1 Day 2 14:00 | walking | library | Baker-Berry Library"
        );
    }

    #[test]
    fn unknown_code_and_missing_fix_render() {
        let mut g = WeekGrid::empty("u01", 3);
        g.cells[0][1] = Some(CellEntry { activity: Some(9), location: None, samples: 1 });
        g.cells[0][2] = Some(CellEntry {
            activity: None,
            location: Some(Place { label: "x|y".into(), description: "{z}".into() }),
            samples: 1,
        });
        let r = render_weekly_report(&g, &ActivityLabels::default());
        assert_eq!(
            r,
            "Week 3 Day 0 01:00 | unknown-activity(9) | unknown | no location data\n\
             Week 3 Day 0 02:00 | unknown | x/y | (z)"
        );
    }

    #[test]
    fn location_hours_ranked() {
        let mut g = WeekGrid::empty("u01", 1);
        let place = |l: &str| Some(Place { label: l.into(), description: String::new() });
        g.cells[0][0] = Some(CellEntry { activity: None, location: place("dorm"), samples: 1 });
        g.cells[0][1] = Some(CellEntry { activity: None, location: place("dorm"), samples: 1 });
        g.cells[0][2] = Some(CellEntry { activity: None, location: place("gym"), samples: 1 });
        g.cells[0][3] = Some(CellEntry { activity: None, location: place("cafe"), samples: 1 });
        assert_eq!(
            g.location_hours(),
            vec![("dorm".into(), 2), ("cafe".into(), 1), ("gym".into(), 1)]
        );
    }

    fn arb_sample() -> impl Strategy<Value = SensingSample> {
        let ts = (T0 - 2 * SECS_PER_DAY)..(T0 + 3 * SECS_PER_WEEK);
        prop_oneof![
            (ts.clone(), 0u8..5).prop_map(|(timestamp, activity_code)| SensingSample::Activity {
                timestamp,
                activity_code
            }),
            (ts, 43.70f64..43.71, -72.29f64..-72.28)
                .prop_map(|(timestamp, lat, lon)| SensingSample::Gps { timestamp, lat, lon }),
        ]
    }

    proptest! {
        #[test]
        fn bucketing_conserves_samples(samples in proptest::collection::vec(arb_sample(), 0..400)) {
            let r = bucket_weeks("u01", &samples, &campus(), T0, 2).unwrap();
            let naive_in = samples.iter().filter(|s| cell_of(s.timestamp(), T0, 2).is_some()).count() as u64;
            let cells: u64 = r.grids.iter().map(WeekGrid::sample_count).sum();
            prop_assert_eq!(r.in_window, naive_in);
            prop_assert_eq!(cells, naive_in);
            prop_assert_eq!(cells + r.discarded, samples.len() as u64);
        }

        #[test]
        fn dedup_then_bucket_is_stable(samples in proptest::collection::vec(arb_sample(), 0..200)) {
            let once = dedup_samples(samples.clone());
            let mut doubled = samples.clone();
            doubled.extend(samples.iter().copied());
            let twice = dedup_samples(doubled);
            let a = bucket_weeks("u01", &once, &campus(), T0, 2).unwrap();
            let b = bucket_weeks("u01", &twice, &campus(), T0, 2).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn resolve_matches_brute_force(
            lat in 43.69f64..43.72,
            lon in -72.30f64..-72.27,
            centers in proptest::collection::vec((43.69f64..43.72, -72.30f64..-72.27, 50.0f64..1500.0), 1..8),
        ) {
            let zones: Vec<_> = centers.iter().enumerate()
                .map(|(i, &(a, o, r))| zone(&format!("z{i}"), a, o, r))
                .collect();
            let mut best: Option<(f64, usize)> = None;
            for (i, z) in zones.iter().enumerate() {
                let d = haversine_m(lat, lon, z.lat, z.lon);
                if d <= z.radius_m && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, i));
                }
            }
            let expected = best.map_or(UNKNOWN_LOCATION.to_string(), |(_, i)| zones[i].label.clone());
            prop_assert_eq!(resolve_location(lat, lon, &zones).label, expected);
        }

        #[test]
        fn report_lines_are_well_formed(
            samples in proptest::collection::vec(arb_sample(), 0..300),
            label in "[ -~]{1,12}",
        ) {
            let mut zones = campus();
            zones[0].label = label.clone();
            zones[0].description = format!("{{{label}}}|");
            let r = bucket_weeks("u01", &samples, &zones, T0, 2).unwrap();
            for g in &r.grids {
                let report = render_weekly_report(g, &ActivityLabels::default());
                let lines: Vec<_> = report.lines().collect();
                prop_assert_eq!(lines.len(), g.occupied().count());
                for line in lines {
                    prop_assert_eq!(line.matches('|').count(), 3);
                    prop_assert!(!line.contains(['{', '}']), "brace in {:?}", line);
                }
            }
        }
    }
}
