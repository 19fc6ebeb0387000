use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_partgrasp"));
    c.env_remove("PARTGRASP_ENDPOINTS_DETECT")
        .env_remove("PARTGRASP_ENDPOINTS_SEGMENT")
        .env_remove("PARTGRASP_ENDPOINTS_GRASP");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name).display().to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn listing(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path.clone());
            }
            out.push(path);
        }
    }
    out.sort();
    out
}

/// Two single-object scenes rendered at the default rig.
fn dataset(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    let o = run(&["gen-scenes", "--scenes", "2", "--objects", "1", "--seed", "3", "--out", p(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    data
}

fn manifest_prompt(data: &Path) -> (String, String) {
    let doc: toml::Value = toml::from_str(&std::fs::read_to_string(data.join("manifest.toml")).unwrap()).unwrap();
    let first = &doc["samples"][0];
    (first["object"].as_str().unwrap().into(), first["part"].as_str().unwrap().into())
}

fn grasp_args<'a>(data: &'a Path, object: &'a str, part: &'a str) -> Vec<String> {
    [
        "grasp",
        "--rgb",
        p(&data.join("rgb/0000.png")),
        "--depth",
        p(&data.join("depth/0000.png")),
        "--intrinsics",
        p(&data.join("intrinsics.toml")),
        "--scene",
        p(&data.join("scenes/0000.toml")),
        "--object",
        object,
        "--part",
        part,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[test]
fn trials_report_reproduces_the_percentage_rows() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report");
    let o = run(&["trials-report", "--log", &fixture("table3_trials.csv"), "--report", p(&report)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with(
        "outcome,individual,table_clearing\n\
         Success,69.52,54.67\n\
         GraspDepthIssue,11.43,19.33\n"
    ));
    assert!(out.contains("CorrectPart,88.57,82.00\n"));
    let csv = std::fs::read_to_string(report.join("trial_report.csv")).unwrap();
    assert!(out.starts_with(&csv));
    assert!(report.join("sankey_individual.json").is_file());
}

#[test]
fn grasp_with_oracle_backends_writes_a_plan() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let (object, part) = manifest_prompt(&data);
    let plan = dir.path().join("out/plan.json");
    let mut args = grasp_args(&data, &object, &part);
    args.extend(["--backends".into(), "oracle".into(), "--out".into(), p(&plan).into()]);
    let o = bin().args(&args).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&plan).unwrap()).unwrap();
    assert_eq!(doc["frame"], "world");
    assert_eq!(doc["grasp"]["q"].as_array().unwrap().len(), 4);
    assert!(doc["timings_ms"]["total"].as_f64().unwrap() < 800.0);
    assert!(dir.path().join("out/plan_mask.png").is_file());
}

#[test]
fn absent_object_is_a_detector_failure() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let o = bin().args(grasp_args(&data, "unicorn", "horn")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("FAIL stage=Detector: "), "{}", stderr(&o));
}

#[test]
fn missing_depth_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let (object, part) = manifest_prompt(&data);
    let mut args = grasp_args(&data, &object, &part);
    args[4] = p(&dir.path().join("nope.png")).into();
    let o = bin().args(&args).output().unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["grasp"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--scenes", "2", "--faults", "gremlins", "--report", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_small_campaigns() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    let o = run(&["simulate", "--scenes", "0", "--report", p(&empty)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(empty.join("trial_report.json").is_file());

    let report = dir.path().join("five");
    let o = run(&["--jobs", "2", "simulate", "--scenes", "5", "--objects", "1", "--seed", "7", "--report", p(&report)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json: Value = serde_json::from_str(&std::fs::read_to_string(report.join("trial_report.json")).unwrap()).unwrap();
    assert!(json["scenarios"][0]["counts"]["Success"].as_u64().unwrap() >= 4);
    let log = std::fs::read_to_string(report.join("trials.csv")).unwrap();
    assert_eq!(log.lines().count(), 6);
}

#[test]
fn eval_seg_with_oracle_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let report = dir.path().join("seg");
    let o = run(&["eval-seg", "--manifest", p(&data.join("manifest.toml")), "--backends", "oracle", "--augment", "--report", p(&report)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("samples scored: 12 (0 failures)"), "{}", stdout(&o));
    assert!(stdout(&o).contains("mIoU single: 1.0000"), "{}", stdout(&o));
    assert!(report.join("seg_report.csv").is_file());
}

#[test]
fn dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let before = listing(dir.path());
    let (object, part) = manifest_prompt(&data);
    let mut args = vec!["--dry-run".to_string()];
    args.extend(grasp_args(&data, &object, &part));
    args.extend(["--out".into(), p(&dir.path().join("plan.json")).into()]);
    assert!(bin().args(&args).output().unwrap().status.success());
    for a in [
        vec!["--dry-run", "simulate", "--scenes", "2", "--report", p(&dir.path().join("sim"))],
        vec!["--dry-run", "gen-scenes", "--scenes", "1", "--out", p(&dir.path().join("gen"))],
        vec!["--dry-run", "trials-report", "--log", &fixture("table3_trials.csv"), "--report", p(&dir.path().join("tr"))],
    ] {
        let o = run(&a);
        assert!(o.status.success(), "{a:?}: {}", stderr(&o));
        assert!(stdout(&o).contains("dry run: would write"));
    }
    assert_eq!(listing(dir.path()), before);
}

struct Child(std::process::Child);

impl Drop for Child {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn remote_backends_match_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let mut server = Child(
        bin()
            .args(["serve-mock", "--listen", "127.0.0.1:0", "--scenes-dir", p(&data.join("scenes"))])
            .stdout(Stdio::piped())
            .spawn()
            .unwrap(),
    );
    let mut line = String::new();
    BufReader::new(server.0.stdout.as_mut().unwrap()).read_line(&mut line).unwrap();
    let url = line.trim().rsplit(' ').next().unwrap().to_string();
    assert!(url.starts_with("http://127.0.0.1:"), "{line}");

    let (object, part) = manifest_prompt(&data);
    let plan = |backends: &str, out: &Path| {
        let mut args = grasp_args(&data, &object, &part);
        args.extend(["--backends".into(), backends.into(), "--out".into(), p(out).into()]);
        let o = bin()
            .args(&args)
            .env("PARTGRASP_ENDPOINTS_DETECT", &url)
            .env("PARTGRASP_ENDPOINTS_SEGMENT", &url)
            .env("PARTGRASP_ENDPOINTS_GRASP", &url)
            .output()
            .unwrap();
        assert!(o.status.success(), "{backends}: {}", stderr(&o));
        let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
        let doc = doc.as_object_mut().unwrap();
        for volatile in ["timings_ms", "backends", "part_mask"] {
            doc.remove(volatile);
        }
        (Value::Object(doc.clone()), std::fs::read(out.with_file_name(format!(
            "{}_mask.png",
            out.file_stem().unwrap().to_str().unwrap()
        ))).unwrap())
    };
    let local = plan("oracle", &dir.path().join("local.json"));
    let remote = plan("remote", &dir.path().join("remote.json"));
    assert_eq!(local, remote);
}
