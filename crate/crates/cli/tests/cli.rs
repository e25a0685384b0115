use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use meanfield_cli::cli::{compare_tables, read_table};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_meanfield"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Vec<u8> {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn error_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {}", String::from_utf8_lossy(&out.stderr)))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a config and generates `sub-<n>_ses-0.spdt` archives for the given
/// seeds, returning their paths.
fn generate(dir: &Path, seeds: &[u64]) -> Vec<PathBuf> {
    seeds
        .iter()
        .map(|seed| {
            let cfg = dir.join(format!("gen-{seed}.cfg"));
            std::fs::write(
                &cfg,
                format!(
                    "generator = \"riemannian-gaussian\"\nseed = {seed}\ntrials_per_class = 15\ndim = 4\n\
                     center = \"random\"\nsigma = [0.15, 0.4]\n"
                ),
            )
            .unwrap();
            let out = dir.join(format!("sub-{seed:02}_ses-0.spdt"));
            ok(&["gen", "--config", s(&cfg), "--out", s(&out)]);
            out
        })
        .collect()
}

fn eval(archives: &[PathBuf], pipeline: &str, threads: &str, out: &Path) {
    let mut args = vec!["eval", "--pipeline", pipeline, "--seed", "11", "--threads", threads, "--out", s(out), "--archive"];
    args.extend(archives.iter().map(|p| s(p)));
    ok(&args);
}

#[test]
fn eval_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let archives = generate(dir.path(), &[1, 2, 3]);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    eval(&archives, "MF", "1", &a);
    eval(&archives, "MF", "3", &b);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let table: Value = serde_json::from_slice(&std::fs::read(&a).unwrap()).unwrap();
    assert_eq!(table["schema_version"], 1);
    assert_eq!(table["rows"].as_array().unwrap().len(), 15);
}

#[test]
fn comparing_a_table_with_itself_gives_zero_effects() {
    let dir = tempfile::tempdir().unwrap();
    let archives = generate(dir.path(), &[4, 5]);
    let t = dir.path().join("t.json");
    eval(&archives, "MDM", "2", &t);
    let report: Value = serde_json::from_slice(&ok(&["compare", "--a", s(&t), "--b", s(&t), "--json"])).unwrap();
    for d in report["datasets"].as_array().unwrap() {
        assert_eq!(d["smd"], 0.0);
    }
    assert_eq!(report["meta_smd"], 0.0);
}

#[test]
fn compare_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let archives = generate(dir.path(), &[6, 7, 8, 9]);
    let (a, b) = (dir.path().join("mdm.json"), dir.path().join("mf.json"));
    eval(&archives, "MDM", "2", &a);
    eval(&archives, "MF", "2", &b);
    let report_path = dir.path().join("report.json");
    let table = String::from_utf8(ok(&["compare", "--a", s(&a), "--b", s(&b), "--out", s(&report_path)])).unwrap();
    let cli: meanfield_stats::MetaReport = serde_json::from_slice(&std::fs::read(&report_path).unwrap()).unwrap();
    let api = compare_tables(&read_table(&a).unwrap(), &read_table(&b).unwrap()).unwrap();
    assert_eq!(cli, api);
    assert!(table.starts_with("MF vs MDM"));
    assert!(table.lines().any(|l| l.starts_with("meta-effect")));
    assert!(table.lines().any(|l| l.starts_with("synthetic")));
}

#[test]
fn mean_output_can_be_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let archive = &generate(dir.path(), &[3])[0];
    let saved = dir.path().join("mean.spdt");
    let first: Value = serde_json::from_slice(&ok(&[
        "mean", "--archive", s(archive), "--h", "-0.5", "--class", "1", "--robust", "--out", s(&saved),
    ]))
    .unwrap();
    assert_eq!(first["class"], 1);
    assert!(first["kept"].as_array().unwrap().iter().all(|i| i.as_u64().unwrap() >= 15));
    // the mean of a single matrix is that matrix
    let again: Value = serde_json::from_slice(&ok(&["mean", "--archive", s(&saved), "--h", "0.25"])).unwrap();
    let (m1, m2) = (first["matrix"].as_array().unwrap(), again["matrix"].as_array().unwrap());
    for (r1, r2) in m1.iter().zip(m2) {
        for (x, y) in r1.as_array().unwrap().iter().zip(r2.as_array().unwrap()) {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }
}

#[test]
fn exit_codes_and_error_json() {
    let out = run(&["eval", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "usage");

    let dir = tempfile::tempdir().unwrap();
    let archive = &generate(dir.path(), &[2])[0];
    let mut bytes = std::fs::read(archive).unwrap();
    let n = bytes.len();
    bytes[n - 10] ^= 0xFF;
    let broken = dir.path().join("broken.spdt");
    std::fs::write(&broken, &bytes).unwrap();
    let out = run(&["mean", "--archive", s(&broken), "--h", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["error"]["kind"], "corrupt_archive");
    assert_eq!(err["error"]["offset"], (n - 4) as u64);

    let out = run(&["mean", "--archive", s(archive), "--h", "0.1", "--max-iterations", "1"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(error_json(&out)["error"]["kind"], "numerical");

    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "generator = \"riemannian-gaussian\"\nseed = 1\n").unwrap();
    let out = run(&["gen", "--config", s(&cfg), "--out", s(&dir.path().join("x.spdt"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "config");
}

#[test]
fn selftest_passes() {
    let out = String::from_utf8(ok(&["selftest"])).unwrap();
    assert!(out.lines().all(|l| l.starts_with("pass")), "{out}");
}

#[test]
fn mixed_source_config_generates_time_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("m.cfg");
    std::fs::write(
        &cfg,
        "generator = \"mixed-sources\"\nseed = 5\ntrials_per_class = 12\nchannels = 6\nsamples = 80\n\
         source_std = [[1, 1, 1], [1, 2, 1]]\n",
    )
    .unwrap();
    let out = dir.path().join("sub-1_ses-1.spdt");
    ok(&["gen", "--config", s(&cfg), "--out", s(&out)]);
    let t: Value = serde_json::from_slice(&ok(&["eval", "--archive", s(&out), "--pipeline", "TS+LR", "--seed", "1"])).unwrap();
    let rows = t["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r["auc"].is_number() && r["subject"] == "1" && r["session"] == "1"));
}
