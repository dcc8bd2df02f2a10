use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_flipgnn"));
    c.env_remove("FLIPGNN_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn flipgnn")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small synthetic dataset with a labelled pool for the label sweep.
fn synth(dir: &Path, seed: u64) -> PathBuf {
    let out = dir.join(format!("synth-{seed}"));
    ok(&[
        "synth",
        "--out",
        s(&out),
        "--seed",
        &seed.to_string(),
        "--n",
        "160",
        "--num-features",
        "120",
        "--signature-dims-per-class",
        "20",
        "--train-per-class",
        "5",
        "--eval-per-class",
        "10",
        "--intra-p",
        "0.08",
        "--inter-p",
        "0.01",
    ]);
    out
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_is_reproducible() {
    let t = TempDir::new().unwrap();
    let a = synth(t.path(), 7);
    let b = t.path().join("again");
    fs::create_dir(&b).unwrap();
    let b = synth(&b, 7);
    assert_eq!(files(&a), files(&b));
    assert!(a.join("config.resolved").exists());
    let c = synth(t.path(), 8);
    assert_ne!(files(&a), files(&c));
}

#[test]
fn analyze_reports_fields_and_missing_files() {
    let t = TempDir::new().unwrap();
    let d = synth(t.path(), 1);
    let v: serde_json::Value = serde_json::from_str(&ok(&["analyze", s(&d)])).unwrap();
    for key in ["z_by_hop", "homophily", "n", "m", "F", "C"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["n"], 160);
    fs::remove_file(d.join("labels.tsv")).unwrap();
    let out = run(&["analyze", s(&d)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("labels.tsv"));
}

#[test]
fn train_outputs_are_reproducible() {
    let t = TempDir::new().unwrap();
    let d = synth(t.path(), 2);
    let args = |out: &Path| {
        vec![
            "train".to_string(),
            "--data".into(),
            s(&d).into(),
            "--model".into(),
            "gcn".into(),
            "--flip".into(),
            "on".into(),
            "--alpha".into(),
            "0.1".into(),
            "--beta".into(),
            "0.01".into(),
            "--epochs".into(),
            "15".into(),
            "--out".into(),
            s(out).into(),
        ]
    };
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for out in [&a, &b] {
        let argv = args(out);
        ok(&argv.iter().map(String::as_str).collect::<Vec<_>>());
    }
    assert_eq!(files(&a), files(&b));

    let result = json(&a.join("result.json"));
    for key in ["best_val", "test_at_best_val", "alpha", "beta", "seed", "config_hash"] {
        assert!(result.get(key).is_some(), "missing {key}");
    }
    assert_eq!(result["alpha"], 0.1);
    let metrics = fs::read_to_string(a.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next(), Some("epoch,half,loss,val_acc,test_acc"));
    assert_eq!(lines.count(), 30);

    // The resolved config alone reproduces the run.
    let c = t.path().join("c");
    ok(&[
        "train",
        "--data",
        s(&d),
        "--config",
        s(&a.join("config.resolved")),
        "--out",
        s(&c),
    ]);
    assert_eq!(files(&a), files(&c));
}

#[test]
fn alpha_without_flip_is_a_usage_error() {
    let t = TempDir::new().unwrap();
    let d = synth(t.path(), 3);
    let out_dir = t.path().join("out");
    let out = run(&["train", "--data", s(&d), "--flip", "off", "--alpha", "2", "--out", s(&out_dir)]);
    assert_eq!(code(&out), 2);
    assert!(!out_dir.exists());
}

#[test]
fn config_file_rules() {
    let t = TempDir::new().unwrap();
    let d = synth(t.path(), 4);
    let cfg = t.path().join("run.cfg");
    fs::write(&cfg, "# plain mlp\nmodel = mlp\nepochs = 5\n").unwrap();
    let out = t.path().join("out");
    ok(&["train", "--data", s(&d), "--config", s(&cfg), "--epochs", "3", "--out", s(&out)]);
    let resolved = fs::read_to_string(out.join("config.resolved")).unwrap();
    assert!(resolved.contains("model = mlp\n"));
    assert!(resolved.contains("epochs = 3\n"));

    fs::write(&cfg, "modle = mlp\n").unwrap();
    let bad = run(&["train", "--data", s(&d), "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&bad), 2);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("modle"));
}

#[test]
fn seed_environment_fallback() {
    let t = TempDir::new().unwrap();
    let d = synth(t.path(), 5);
    let out = t.path().join("out");
    let status = bin()
        .args(["train", "--data", s(&d), "--epochs", "2", "--out", s(&out)])
        .env("FLIPGNN_SEED", "42")
        .output()
        .unwrap();
    assert!(status.status.success());
    assert_eq!(json(&out.join("result.json"))["seed"], 42);
    let status = bin()
        .args(["train", "--data", s(&d), "--epochs", "2", "--seed", "3", "--out", s(&out)])
        .env("FLIPGNN_SEED", "42")
        .output()
        .unwrap();
    assert!(status.status.success());
    assert_eq!(json(&out.join("result.json"))["seed"], 3);
}

#[test]
fn single_cell_grid_matches_train() {
    let t = TempDir::new().unwrap();
    let d = synth(t.path(), 6);
    let g = t.path().join("grid");
    let tr = t.path().join("train");
    let common = ["--data", s(&d), "--model", "mlp", "--epochs", "10"];
    let mut grid_args = vec!["grid"];
    grid_args.extend(common);
    grid_args.extend(["--alphas", "1", "--betas", "0.1", "--seeds", "4", "--out", s(&g)]);
    ok(&grid_args);
    let mut train_args = vec!["train"];
    train_args.extend(common);
    train_args.extend(["--flip", "on", "--alpha", "1", "--beta", "0.1", "--seed", "4", "--out", s(&tr)]);
    ok(&train_args);
    let report = json(&g.join("grid.json"));
    let result = json(&tr.join("result.json"));
    assert_eq!(report["cells"][0]["mean_val"], result["best_val"]);
    assert_eq!(report["cells"][0]["mean_test"], result["test_at_best_val"]);

    let bad = run(&["grid", "--data", s(&d), "--alphas", "1,x", "--out", s(&g)]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn gradstats_csv_shape() {
    let t = TempDir::new().unwrap();
    let d = synth(t.path(), 7);
    let out = t.path().join("gs");
    ok(&["gradstats", "--data", s(&d), "--epochs", "4", "--out", s(&out)]);
    let csv = fs::read_to_string(out.join("gradstats.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epoch,space,type,mean_abs_grad,std"));
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(rows.len(), 4 * 2 * 4);
    for epoch in 1..=4 {
        let of_epoch: Vec<_> = rows.iter().filter(|r| r[0] == epoch.to_string()).collect();
        assert_eq!(of_epoch.len(), 8);
        for space in ["original", "flipped"] {
            let types: Vec<&str> = of_epoch
                .iter()
                .filter(|r| r[1] == space)
                .map(|r| r[2].as_str())
                .collect();
            assert_eq!(types, ["T1", "T2", "T3", "T4"]);
        }
    }
    for r in &rows {
        assert!(r[3].parse::<f64>().unwrap() >= 0.0 && r[4].parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn studies_write_tables() {
    let t = TempDir::new().unwrap();
    let d = synth(t.path(), 8);
    let sh = t.path().join("shift");
    let stdout = ok(&[
        "shift-study", "--data", s(&d), "--model", "mlp", "--epochs", "10", "--s", "0,0.5",
        "--seeds", "0,1", "--out", s(&sh),
    ]);
    assert!(stdout.contains("non-increasing:"));
    assert_eq!(fs::read_to_string(sh.join("shift.csv")).unwrap().lines().count(), 3);

    let var = t.path().join("var");
    ok(&[
        "variance", "--data", s(&d), "--epochs", "5", "--seeds", "0,1,2,3,4", "--out", s(&var),
    ]);
    let report = json(&var.join("variance.json"));
    assert_eq!(report["methods"].as_array().unwrap().len(), 2);
    let too_few = run(&["variance", "--data", s(&d), "--seeds", "0,1", "--out", s(&var)]);
    assert_eq!(code(&too_few), 2);

    let sw = t.path().join("sweep");
    ok(&[
        "sweep-labels", "--data", s(&d), "--epochs", "5", "--labels", "2,5", "--seeds", "0",
        "--out", s(&sw),
    ]);
    assert_eq!(fs::read_to_string(sw.join("sweep.csv")).unwrap().lines().count(), 3);
    let short = run(&["sweep-labels", "--data", s(&d), "--labels", "500", "--out", s(&sw)]);
    assert_eq!(code(&short), 2);
}

#[test]
fn divergence_exits_with_one() {
    let t = TempDir::new().unwrap();
    let d = synth(t.path(), 9);
    let out = run(&[
        "train", "--data", s(&d), "--lr", "1e308", "--epochs", "20", "--out",
        s(&t.path().join("o")),
    ]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
}
