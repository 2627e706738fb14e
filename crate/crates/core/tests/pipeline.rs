mod common;

use std::collections::BTreeMap;

use studentsim::assessment::load_exam_bank;
use studentsim::engine::{read_run_log, write_run_log, SimConfig};
use studentsim::evaluation::{
    evaluate_run, load_ground_truth, render_metrics_table, AlignMode, EmaDim,
};
use studentsim::fixtures::{self, FixturePaths};
use studentsim::sensing::{ingest_student, load_grids, load_zones, save_grids, WeekGrid};
use studentsim::student::load_profiles;

fn on_disk(seed: u64, n: usize) -> (tempfile::TempDir, fixtures::FixtureSet, FixturePaths) {
    let dir = tempfile::tempdir().unwrap();
    let set = fixtures::generate(seed, n, &SimConfig::default());
    let paths = fixtures::write_fixtures(dir.path(), &set).unwrap();
    (dir, set, paths)
}

#[test]
fn written_fixtures_load_back() {
    let (_dir, set, paths) = on_disk(42, 4);
    assert_eq!(load_profiles(&paths.profiles).unwrap(), set.profiles);
    assert_eq!(load_zones(&paths.zones).unwrap(), set.zones);
    assert_eq!(load_exam_bank(&paths.exam_bank).unwrap(), set.bank);
    assert_eq!(SimConfig::load(&paths.config).unwrap(), set.config);
    assert_eq!(load_ground_truth(&paths.ground_truth, None).unwrap(), set.truth);
}

#[test]
fn ingest_from_files_matches_in_memory_buckets() {
    let (dir, set, paths) = on_disk(42, 4);
    let expected = common::grids_for(&set);
    let grid_dir = dir.path().join("grids");
    for p in &set.profiles {
        let csv = format!("{}.csv", p.uid);
        let (grids, summary) = ingest_student(
            &p.uid,
            Some(&paths.activity_dir.join(&csv)),
            Some(&paths.gps_dir.join(&csv)),
            &set.zones,
            p.term_start,
            set.config.n_weeks,
        )
        .unwrap();
        assert!(summary.rejects.is_empty(), "{:?}", summary.rejects);
        assert_eq!(
            summary.in_window + summary.discarded + summary.duplicates,
            summary.activity_samples + summary.gps_samples
        );
        assert_eq!(grids, expected[&p.uid]);
        save_grids(&grid_dir, &grids).unwrap();
    }
    let loaded: BTreeMap<String, Vec<WeekGrid>> = load_grids(&grid_dir).unwrap();
    assert_eq!(loaded, expected);
}

#[test]
fn run_log_survives_disk() {
    let (_, out) = common::fixture_run(42, 3, &SimConfig::default());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run_log.json");
    write_run_log(&path, &out.run_log).unwrap();
    assert_eq!(read_run_log(&path).unwrap(), out.run_log);
}

#[test]
fn fixture_evaluation_table() {
    let (set, out) = common::fixture_run(42, fixtures::DEFAULT_COHORT, &SimConfig::default());
    let (metrics, alignment) = evaluate_run("mock", &out.run_log, &set.truth, AlignMode::Cumulative).unwrap();
    // the last fixture student only reports stress
    assert_eq!(metrics.excluded[&EmaDim::Stress], 0);
    assert_eq!(metrics.excluded[&EmaDim::Sleep], 1);
    assert_eq!(metrics.excluded[&EmaDim::Social], 1);
    assert_eq!(alignment.dims[&EmaDim::Stress].pairs.len(), 26);
    for m in metrics.dims.values() {
        let m = m.unwrap();
        assert!(m.rmse >= m.mae);
    }
    common::check_golden("fixture_table.md", &render_metrics_table(&[metrics])).unwrap();

    let (per_obs, _) = evaluate_run("mock", &out.run_log, &set.truth, AlignMode::PerObservation).unwrap();
    let n = per_obs.dims[&EmaDim::Stress].unwrap().n;
    assert!(n > 26, "per-observation pairs {n}");
}
