use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use care2vec::synthetic::{scadi_like, to_csv, SyntheticOptions};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_care2vec"));
    c.env_remove("SCADI_CSV").env_remove("CARE2VEC_OUT_DIR");
    c
}

fn write_data(dir: &Path) -> PathBuf {
    let path = dir.join("scadi.csv");
    std::fs::write(&path, to_csv(&scadi_like(&SyntheticOptions::default(), 42))).unwrap();
    path
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

#[test]
fn validate_prints_the_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let o = run(&["validate", "--data", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "70 rows, 205 features, classes: 2/7/1/12/3/29/16");
}

#[test]
fn missing_data_file_fails_with_a_clear_message() {
    let o = run(&["validate", "--data", "/nonexistent/SCADI.csv"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("data file not found: /nonexistent/SCADI.csv"), "{}", stderr(&o));

    let o = bin().args(["run", "--method", "tree"]).env("SCADI_CSV", "/nonexistent/x.csv").output().unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/nonexistent/x.csv"));
}

#[test]
fn invalid_flags_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let d = data.to_str().unwrap();
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    for bad in [
        vec!["run", "--data", d, "--out", o, "--method", "care2vec", "--dim", "12"],
        vec!["run", "--data", d, "--out", o, "--method", "ann", "--nodes", "77"],
        vec!["run", "--data", d, "--out", o, "--method", "tree", "--k", "1"],
        vec!["run", "--data", d, "--out", o, "--method", "tree", "--k", "71"],
        vec!["run", "--data", d, "--out", o, "--method", "tree", "--dim", "4"],
        vec!["run", "--data", d, "--out", o, "--method", "care2vec", "--lr", "0"],
        vec!["reproduce", "--data", d, "--out", o, "--tables", "5"],
    ] {
        let r = run(&bad);
        assert!(!r.status.success(), "accepted {bad:?}");
        assert!(stderr(&r).starts_with("error"), "{bad:?}: {}", stderr(&r));
    }
    assert!(!out.exists() || std::fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn tree_runs_are_byte_identical_and_echo_settings() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let mut files = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        let o = run(&[
            "run", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap(),
            "--method", "tree", "--task", "binary", "--seed", "7", "--max-depth", "4",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("mean AUC"));
        let stem = out.join("run-tree-binary-seed7");
        files.push(
            ["csv", "txt"]
                .map(|ext| std::fs::read(stem.with_extension(ext)).unwrap())
                .into_iter()
                .chain([std::fs::read(out.join("run-tree-binary-seed7-roc.csv")).unwrap()])
                .collect::<Vec<_>>(),
        );
    }
    assert_eq!(files[0], files[1]);

    let csv = String::from_utf8(files[0][0].clone()).unwrap();
    for line in ["# method: tree", "# task: binary", "# k: 10", "# seed: 7", "# rng: ", "max_depth"] {
        assert!(csv.contains(line), "missing {line} in\n{csv}");
    }
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "fold,n_test,accuracy,auc");
    assert_eq!(rows.len(), 11);
    assert!(rows[1..].iter().all(|r| r.split(',').nth(1) == Some("7")));
}

#[test]
fn care2vec_run_with_parallel_folds_matches_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let mut csvs = Vec::new();
    for jobs in ["1", "4"] {
        let out = dir.path().join(format!("jobs{jobs}"));
        let o = run(&[
            "run", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--method", "care2vec",
            "--dim", "8", "--nodes", "40", "--layers", "1", "--epochs", "3", "--ae-epochs", "2", "--jobs", jobs,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        csvs.push(std::fs::read_to_string(out.join("run-care2vec-8-40x1-multi-seed0.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert!(csvs[0].contains("# param leakage: per-fold"));
    assert!(csvs[0].contains("# param dim: 8"));
}

#[test]
fn reproduce_writes_tables_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let out = dir.path().join("out");
    let o = run(&[
        "reproduce", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--epochs", "1", "--ae-epochs", "1", "--seeds", "1,2,3", "--jobs", "0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["table1", "table2", "table3", "table4"] {
        assert!(out.join(format!("{f}.csv")).exists());
        assert!(out.join(format!("{f}.txt")).exists());
    }
    let t2 = std::fs::read_to_string(out.join("table2.csv")).unwrap();
    let header = t2.lines().find(|l| l.starts_with("method,")).unwrap();
    assert!(header.starts_with("method,task,seed_1,seed_2,seed_3,median_cv"), "{header}");
    // 4 dims times the rows (40,1), (100,1), (300,1), (300,2)
    assert_eq!(t2.lines().filter(|l| l.starts_with('"')).count(), 16);

    let cmp = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    let best = cmp.lines().find(|l| l.contains(",care2vec-32-300x2,mean_cv,")).unwrap();
    assert!(best.contains(",84.29,"), "{best}");
    let grid = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    assert!(grid.contains("# seeds: 1,2,3"));
    assert!(grid.contains("# leakage: per-fold"));
}

#[test]
fn reproduce_subset_only_writes_requested_tables() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let out = dir.path().join("out");
    let o = run(&[
        "reproduce", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--epochs", "1", "--ae-epochs", "1", "--tables", "4",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("table4.csv").exists());
    assert!(!out.join("table1.csv").exists());
    let t4 = std::fs::read_to_string(out.join("table4.txt")).unwrap();
    assert!(t4.contains("Decision tree"), "{t4}");
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let out = dir.path().join("env-out");
    let o = bin()
        .args(["run", "--method", "tree", "--max-depth", "2"])
        .env("SCADI_CSV", &data)
        .env("CARE2VEC_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("run-tree-multi-seed0.csv").exists());
}
