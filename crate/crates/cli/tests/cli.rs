use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_studentsim"));
    c.env_remove("RUST_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new(students: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let w = Workspace { dir };
        let o = run(&["gen-fixtures", "--out", s(&w.fx()), "--students", &students.to_string()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        w
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn fx(&self) -> PathBuf {
        self.path("fx")
    }

    fn fxp(&self, rel: &str) -> PathBuf {
        self.fx().join(rel)
    }

    fn ingest_with(&self, config: &Path, out: &str) -> Output {
        run(&[
            "ingest",
            "--config",
            s(config),
            "--profiles",
            s(&self.fxp("profiles.json")),
            "--zones",
            s(&self.fxp("zones.json")),
            "--activity-dir",
            s(&self.fxp("sensing/activity")),
            "--gps-dir",
            s(&self.fxp("sensing/gps")),
            "--out",
            s(&self.path(out)),
        ])
    }

    fn ingest(&self) -> Output {
        self.ingest_with(&self.fxp("config.toml"), "grids")
    }

    fn simulate_with(&self, config: &Path, grids: &str, out: &str, extra: &[&str]) -> Output {
        let mut args = vec![
            "simulate",
            "--config",
            s(config),
            "--profiles",
            s(&self.fxp("profiles.json")),
            "--grids",
            s(&self.path(grids)),
            "--exam-bank",
            s(&self.fxp("exam_bank.json")),
            "--out",
            s(&self.path(out)),
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
        args.extend(extra.iter().map(|a| a.to_string()));
        bin().args(&args).output().unwrap()
    }

    fn simulate(&self, out: &str) -> Output {
        self.simulate_with(&self.fxp("config.toml"), "grids", out, &[])
    }

    fn write_config(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }
}

#[test]
fn full_pipeline() {
    let w = Workspace::new(4);
    let o = w.ingest();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(w.path("grids/u01/week01.json").exists());
    assert!(w.path("grids/ingest_summary.json").exists());

    let o = w.simulate("run");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("week_outcomes: 40"), "{out}");
    assert!(out.contains("exam_results: 24"), "{out}");
    assert!(out.contains("project_results: 4"), "{out}");

    let o = run(&[
        "evaluate",
        "--run",
        &format!("mock={}", s(&w.path("run/run_log.json"))),
        "--truth",
        s(&w.fxp("ground_truth.csv")),
        "--out",
        s(&w.path("eval")),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let md = std::fs::read_to_string(w.path("eval/report.md")).unwrap();
    assert!(md.contains("| Status | mock MAE | mock RMSE |"), "{md}");
    assert!(md.contains("| Stress level |"));
    let csv = std::fs::read_to_string(w.path("eval/spearman.csv")).unwrap();
    assert!(csv.starts_with("run,mode,n,row,social,sleep,stress\n"));
    assert!(csv.contains("mock,student-week,40,happy,"), "{csv}");

    let o = run(&["report", "--run-log", s(&w.path("run/run_log.json")), "--out", s(&w.path("report"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let timelines = std::fs::read_to_string(w.path("report/timelines.csv")).unwrap();
    assert_eq!(timelines.lines().count(), 41);
    let scores = std::fs::read_to_string(w.path("report/scores.csv")).unwrap();
    assert!(scores.starts_with("uid,exam_week2,exam_week3,exam_week4,exam_week5,exam_week6,exam_week7,project,cumulative,failed_weeks\n"));
    assert_eq!(scores.lines().count(), 5);
}

#[test]
fn simulate_is_deterministic() {
    let w = Workspace::new(3);
    assert_eq!(code(&w.ingest()), 0);
    assert_eq!(code(&w.simulate("a")), 0);
    assert_eq!(code(&w.simulate("b")), 0);
    for f in ["run_log.json", "transcript.jsonl"] {
        let a = std::fs::read(w.path("a").join(f)).unwrap();
        let b = std::fs::read(w.path("b").join(f)).unwrap();
        assert!(a == b, "{f} differs between runs");
    }
}

#[test]
fn seed_override_changes_the_run() {
    let w = Workspace::new(2);
    assert_eq!(code(&w.ingest()), 0);
    assert_eq!(code(&w.simulate("a")), 0);
    assert_eq!(code(&w.simulate_with(&w.fxp("config.toml"), "grids", "b", &["--seed", "7"])), 0);
    let a = std::fs::read_to_string(w.path("a/run_log.json")).unwrap();
    let b = std::fs::read_to_string(w.path("b/run_log.json")).unwrap();
    assert!(b.contains("\"seed\": 7"));
    assert_ne!(a, b);
}

#[test]
fn missing_input_is_a_usage_error() {
    let w = Workspace::new(1);
    let o = w.ingest_with(&w.path("nope.toml"), "grids");
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("config not found"), "{}", stderr(&o));

    let o = run(&["simulate", "--config", "x.toml"]);
    assert_eq!(code(&o), 1);
    let o = run(&["frobnicate"]);
    assert_eq!(code(&o), 1);
    let o = run(&["--help"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn corrupt_rows_are_listed_and_fail_ingest() {
    let w = Workspace::new(2);
    let f = w.fxp("sensing/activity/u02.csv");
    let mut text = std::fs::read_to_string(&f).unwrap();
    text.push_str("not-a-time,0\n1364200000,9x\n");
    std::fs::write(&f, text).unwrap();

    let o = w.ingest();
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let err = stderr(&o);
    assert_eq!(err.lines().filter(|l| l.starts_with("rejected ")).count(), 2, "{err}");
    assert!(err.contains("u02.csv"));
    // the valid rows were still bucketed
    assert!(w.path("grids/u02/week01.json").exists());

    let mut args: Vec<String> = [
        "ingest",
        "--config",
        s(&w.fxp("config.toml")),
        "--profiles",
        s(&w.fxp("profiles.json")),
        "--zones",
        s(&w.fxp("zones.json")),
        "--activity-dir",
        s(&w.fxp("sensing/activity")),
        "--gps-dir",
        s(&w.fxp("sensing/gps")),
        "--out",
        s(&w.path("grids2")),
    ]
    .into_iter()
    .map(String::from)
    .collect();
    args.extend(["--max-rejects".into(), "2".into()]);
    let o = bin().args(&args).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn empty_logs_give_null_grids_and_a_warning() {
    let w = Workspace::new(2);
    for kind in ["activity", "gps"] {
        let f = w.fxp(&format!("sensing/{kind}/u01.csv"));
        let header = std::fs::read_to_string(&f).unwrap().lines().next().unwrap().to_string();
        std::fs::write(&f, format!("{header}\n")).unwrap();
    }
    let o = w.ingest();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("no sensing samples"), "{}", stderr(&o));
    assert!(stdout(&o).contains("empty_students: [\"u01\"]"), "{}", stdout(&o));
    let week: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(w.path("grids/u01/week03.json")).unwrap()).unwrap();
    let cells = week["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 7);
    assert!(cells.iter().all(|day| day.as_array().unwrap().iter().all(|c| c.is_null())));

    let o = w.simulate("run");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn live_provider_without_key_is_a_config_error() {
    let w = Workspace::new(1);
    assert_eq!(code(&w.ingest()), 0);
    let cfg = w.write_config(
        "live.toml",
        "[provider]\nkind = \"live\"\nprofile = \"remote\"\n\n[[provider.profiles]]\n\
         name = \"remote\"\nstyle = \"openai\"\nendpoint = \"http://127.0.0.1:9/v1\"\n\
         model_id = \"some-model\"\napi_key = \"${STUDENTSIM_TEST_UNSET_KEY}\"\n",
    );
    let o = bin()
        .env_remove("STUDENTSIM_TEST_UNSET_KEY")
        .args(["simulate", "--config", s(&cfg)])
        .args(["--profiles", s(&w.fxp("profiles.json")), "--grids", s(&w.path("grids"))])
        .args(["--exam-bank", s(&w.fxp("exam_bank.json")), "--out", s(&w.path("run"))])
        .output()
        .unwrap();
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("STUDENTSIM_TEST_UNSET_KEY"), "{}", stderr(&o));
    assert!(!w.path("run/run_log.json").exists());

    let o = w.simulate_with(&w.fxp("config.toml"), "grids", "run", &["--provider", "nobody"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn unreachable_provider_is_a_transport_error() {
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let w = Workspace::new(1);
    let cfg = w.write_config(
        "live.toml",
        &format!(
            "n_weeks = 1\nexam_weeks = []\nproject_week = 0\n\n[provider]\nkind = \"live\"\nprofile = \"remote\"\n\n\
             [[provider.profiles]]\nname = \"remote\"\nstyle = \"openai\"\n\
             endpoint = \"http://127.0.0.1:{port}/v1\"\nmodel_id = \"some-model\"\n\
             api_key = \"${{STUDENTSIM_TEST_KEY}}\"\ntimeout_secs = 2\n\n\
             [provider.profiles.retry]\nmax_attempts = 1\n"
        ),
    );
    assert_eq!(code(&w.ingest_with(&cfg, "grids")), 0);
    let o = bin()
        .env("STUDENTSIM_TEST_KEY", "test-key")
        .args(["simulate", "--config", s(&cfg)])
        .args(["--profiles", s(&w.fxp("profiles.json")), "--grids", s(&w.path("grids"))])
        .args(["--exam-bank", s(&w.fxp("exam_bank.json")), "--out", s(&w.path("run"))])
        .output()
        .unwrap();
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let transcript = std::fs::read_to_string(w.path("run/transcript.jsonl")).unwrap();
    assert!(!transcript.contains("test-key"));
}

#[test]
fn single_week_run_has_no_assessments() {
    let w = Workspace::new(2);
    let cfg = w.write_config("one.toml", "n_weeks = 1\nexam_weeks = []\nproject_week = 0\n");
    assert_eq!(code(&w.ingest_with(&cfg, "grids")), 0);
    assert!(!w.path("grids/u01/week02.json").exists());
    let o = w.simulate_with(&cfg, "grids", "run", &["--summary-format", "json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(summary["week_outcomes"], 2);
    assert_eq!(summary["exam_results"], 0);
    assert_eq!(summary["project_results"], 0);
}

#[test]
fn evaluate_compares_runs_and_skips_students_without_truth() {
    let w = Workspace::new(3);
    assert_eq!(code(&w.ingest()), 0);
    assert_eq!(code(&w.simulate("a")), 0);
    assert_eq!(code(&w.simulate_with(&w.fxp("config.toml"), "grids", "b", &["--seed", "9"])), 0);

    // drop every truth row for u03
    let truth = std::fs::read_to_string(w.fxp("ground_truth.csv")).unwrap();
    let kept: String = truth.lines().filter(|l| !l.starts_with("u03,")).map(|l| format!("{l}\n")).collect();
    std::fs::write(w.path("truth.csv"), kept).unwrap();

    let o = run(&[
        "--summary-format",
        "json",
        "evaluate",
        "--run",
        &format!("first={}", s(&w.path("a/run_log.json"))),
        "--run",
        &format!("second={}", s(&w.path("b/run_log.json"))),
        "--truth",
        s(&w.path("truth.csv")),
        "--config",
        s(&w.fxp("config.toml")),
        "--alignment",
        "per-observation",
        "--out",
        s(&w.path("eval")),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(summary["alignment"], "per-observation");
    assert_eq!(summary["metrics"]["first"]["excluded"]["stress"], 1);
    let md = std::fs::read_to_string(w.path("eval/report.md")).unwrap();
    assert!(md.contains("| Status | first MAE | first RMSE | second MAE | second RMSE |"), "{md}");
    assert!(stderr(&o).contains("excluded from"));
}

#[test]
fn truth_schema_mismatch_is_a_data_error() {
    let w = Workspace::new(1);
    assert_eq!(code(&w.ingest()), 0);
    assert_eq!(code(&w.simulate("run")), 0);
    std::fs::write(w.path("bad.csv"), "uid,week,stress,sleep\nu01,1,3,4\n").unwrap();
    let o = run(&[
        "evaluate",
        "--run",
        s(&w.path("run/run_log.json")),
        "--truth",
        s(&w.path("bad.csv")),
        "--out",
        s(&w.path("eval")),
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));

    std::fs::write(w.path("range.csv"), "uid,week,stress,sleep,social\nu01,1,9,4,3\n").unwrap();
    let o = run(&[
        "evaluate",
        "--run",
        s(&w.path("run/run_log.json")),
        "--truth",
        s(&w.path("range.csv")),
        "--config",
        s(&w.fxp("config.toml")),
        "--out",
        s(&w.path("eval")),
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn report_rejects_unknown_student() {
    let w = Workspace::new(1);
    assert_eq!(code(&w.ingest()), 0);
    assert_eq!(code(&w.simulate("run")), 0);
    let o = run(&[
        "report",
        "--run-log",
        s(&w.path("run/run_log.json")),
        "--out",
        s(&w.path("r")),
        "--uid",
        "u99",
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn custom_templates_directory() {
    let w = Workspace::new(1);
    assert_eq!(code(&w.ingest()), 0);
    let o = w.simulate_with(&w.fxp("config.toml"), "grids", "run", &["--templates", s(&w.path("no-such-dir"))]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}
