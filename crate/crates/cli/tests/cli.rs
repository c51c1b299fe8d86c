use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_metaforests"));
    c.env_remove("METAFORESTS_THREADS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

const SMALL: &[&str] = &["--iterations", "4", "--n-trees", "5"];

fn synth_small(dir: &Path) {
    ok(
        dir,
        &[
            "synth",
            "--per-domain",
            "80",
            "--dim",
            "6",
            "--out",
            "d.csv",
        ],
    );
}

#[test]
fn synth_writes_expected_rows_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let msg = ok(
        d,
        &[
            "synth",
            "--domains",
            "4",
            "--classes",
            "3",
            "--dim",
            "10",
            "--per-domain",
            "300",
            "--shift",
            "2.0",
            "--seed",
            "7",
            "--out",
            "a.csv",
        ],
    );
    assert!(msg.contains("1200 rows"));
    ok(
        d,
        &[
            "synth",
            "--domains",
            "4",
            "--classes",
            "3",
            "--dim",
            "10",
            "--per-domain",
            "300",
            "--shift",
            "2.0",
            "--seed",
            "7",
            "--out",
            "b.csv",
        ],
    );
    let a = std::fs::read(d.join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1201);
    assert!(text.starts_with("f0,f1,f2,f3,f4,f5,f6,f7,f8,f9,label,domain\n"));

    let out = run(d, &["synth", "--domains", "2", "--out", "c.csv"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid synthetic spec"));
}

#[test]
fn custom_column_names() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "--per-domain",
            "40",
            "--dim",
            "3",
            "--label-col",
            "y",
            "--domain-col",
            "site",
            "--out",
            "d.csv",
        ],
    );
    let text = std::fs::read_to_string(d.join("d.csv")).unwrap();
    assert!(text.starts_with("f0,f1,f2,y,site\n"));
    let mut args = vec![
        "train",
        "--data",
        "d.csv",
        "--target",
        "d0",
        "--out",
        "m.json",
        "--label-col",
        "y",
        "--domain-col",
        "site",
    ];
    args.extend_from_slice(SMALL);
    ok(d, &args);
    let out = run(
        d,
        &[
            "train", "--data", "d.csv", "--target", "d0", "--out", "m.json",
        ],
    );
    assert_eq!(code(&out), 3);
}

#[test]
fn train_eval_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_small(d);

    let mut args = vec![
        "train",
        "--data",
        "d.csv",
        "--target",
        "d3",
        "--algo",
        "meta_forests",
        "--out",
        "m.json",
        "--iterations",
        "5",
        "--n-trees",
        "4",
    ];
    let summary = ok(d, &args);
    assert!(
        summary.starts_with("meta_forests: 10 forests, 40 trees"),
        "{summary}"
    );
    assert!(summary.contains("weight entropy"));

    args[6] = "baseline_rf";
    args[8] = "b.json";
    let summary = ok(d, &args);
    // matched budget: 5 iterations x 2 forests x 4 trees
    assert!(
        summary.starts_with("baseline_rf: 1 forests, 40 trees"),
        "{summary}"
    );

    let out = run(
        d,
        &[
            "eval", "--model", "m.json", "--data", "d.csv", "--domain", "d3", "--report", "e.json",
        ],
    );
    assert!(out.status.success());
    assert!(out.stderr.is_empty());
    let text = String::from_utf8(out.stdout).unwrap();
    let first = text.lines().next().unwrap();
    let acc: f64 = first
        .split("accuracy ")
        .nth(1)
        .unwrap()
        .split(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(
        first
            .split("accuracy ")
            .nth(1)
            .unwrap()
            .split(' ')
            .next()
            .unwrap()
            .len(),
        6
    );
    assert_eq!(text.lines().count(), 2 + 3);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("e.json")).unwrap()).unwrap();
    assert_eq!(report["samples"], 80);
    assert_eq!(report["training_source"], false);

    let out = run(
        d,
        &[
            "eval", "--model", "m.json", "--data", "d.csv", "--domain", "d0",
        ],
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("warning:"));

    let dump = ok(d, &["inspect", "--model", "m.json"]);
    let rows: Vec<&str> = dump
        .lines()
        .filter(|l| l.trim_end().ends_with(" 4") && !l.contains("nats"))
        .collect();
    assert_eq!(rows.len(), 10, "{dump}");
    let weights: Vec<f64> = rows
        .iter()
        .map(|l| l.split_whitespace().nth(4).unwrap().parse().unwrap())
        .collect();
    assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-5);
    assert!(dump.contains("weight sum 1.000000"));
    assert!(dump.contains("meta-task log"));

    let sorted = ok(d, &["inspect", "--model", "m.json", "--sort", "weight"]);
    let w: Vec<f64> = sorted
        .lines()
        .filter(|l| l.trim_end().ends_with(" 4") && !l.contains("nats"))
        .map(|l| l.split_whitespace().nth(4).unwrap().parse().unwrap())
        .collect();
    assert_eq!(w.len(), 10);
    assert!(w.windows(2).all(|p| p[0] >= p[1]), "{w:?}");

    let base = ok(d, &["inspect", "--model", "b.json"]);
    assert!(base.contains("pooled"));
    assert!(!base.contains("meta-task log"));
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_small(d);
    ok(
        d,
        &[
            "synth",
            "--per-domain",
            "30",
            "--dim",
            "4",
            "--out",
            "d4.csv",
        ],
    );
    let mut args = vec![
        "train", "--data", "d.csv", "--target", "d3", "--out", "m.json",
    ];
    args.extend_from_slice(SMALL);
    ok(d, &args);

    let out = run(
        d,
        &[
            "train", "--data", "d.csv", "--target", "nowhere", "--out", "x.json",
        ],
    );
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown domain `nowhere`"));

    let out = run(
        d,
        &[
            "eval", "--model", "m.json", "--data", "d4.csv", "--domain", "d0",
        ],
    );
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension mismatch"));

    std::fs::write(d.join("bad.json"), b"{\"format_version\":1,\"model\":").unwrap();
    let out = run(d, &["inspect", "--model", "bad.json"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupt model file"));

    let model = std::fs::read_to_string(d.join("m.json")).unwrap();
    std::fs::write(
        d.join("v9.json"),
        model.replacen("\"format_version\":1", "\"format_version\":9", 1),
    )
    .unwrap();
    let out = run(
        d,
        &[
            "eval", "--model", "v9.json", "--data", "d.csv", "--domain", "d3",
        ],
    );
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("version 9"));

    let out = run(d, &["inspect", "--model", "missing.json"]);
    assert_eq!(code(&out), 4);

    let out = run(
        d,
        &["lodo", "--data", "d.csv", "--algos", "baseline_rf,svm"],
    );
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["baseline_rf", "meta_forests", "meta_forests_shared_seed"] {
        assert!(err.contains(name), "{err}");
    }

    let out = run(
        d,
        &[
            "train", "--data", "d.csv", "--target", "d3", "--out", "x.json", "--beta", "-1",
        ],
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("meta.beta"));

    let out = run(d, &["train", "--bogus"]);
    assert_eq!(code(&out), 2);

    std::fs::write(d.join("bad.toml"), "[meta]\nalpah = -1\n").unwrap();
    let out = run(d, &["--config", "bad.toml", "lodo", "--data", "d.csv"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpah"));

    std::fs::write(d.join("broken.csv"), "f0,label,domain\n1.0,a,x\nzz,b,y\n").unwrap();
    let out = run(d, &["lodo", "--data", "broken.csv"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn lodo_reports_and_config_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_small(d);
    std::fs::write(
        d.join("run.toml"),
        "[run]\nrepeats = 2\nseed = 5\nalgos = [\"meta_forests\"]\n[meta]\niterations = 3\n[forest]\nn_trees = 4\n",
    )
    .unwrap();
    let table = ok(
        d,
        &[
            "--config", "run.toml", "lodo", "--data", "d.csv", "--json", "r.json", "--csv", "r.csv",
        ],
    );
    assert!(table.contains("meta_forests,d0,"));
    assert!(!table.contains("baseline_rf"));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("r.json")).unwrap()).unwrap();
    let alg = &report["algorithms"][0];
    assert_eq!(alg["repeats"], 2);
    assert_eq!(alg["base_seed"], 5);
    assert_eq!(alg["algorithm"]["config"]["iterations"], 3);
    assert_eq!(alg["algorithm"]["config"]["forest"]["n_trees"], 4);

    // Flags beat the file.
    ok(
        d,
        &[
            "--config",
            "run.toml",
            "lodo",
            "--data",
            "d.csv",
            "--repeats",
            "1",
            "--n-trees",
            "3",
            "--algos",
            "baseline_rf,meta_forests",
            "--json",
            "r2.json",
            "--csv",
            "r2.csv",
        ],
    );
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("r2.json")).unwrap()).unwrap();
    assert_eq!(report["algorithms"].as_array().unwrap().len(), 2);
    let base = &report["algorithms"][0];
    assert_eq!(base["repeats"], 1);
    // matched budget: 3 iterations x 2 forests x 3 trees
    assert_eq!(base["algorithm"]["config"]["n_trees"], 18);
    let csv = std::fs::read_to_string(d.join("r2.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
    for line in csv.lines().skip(1) {
        assert!(line.ends_with(",0.0,1"), "{line}");
    }
}

#[test]
fn thread_env_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_small(d);
    let common = [
        "lodo",
        "--data",
        "d.csv",
        "--repeats",
        "1",
        "--iterations",
        "2",
        "--n-trees",
        "3",
    ];
    let mut a: Vec<&str> = common.to_vec();
    a.extend(["--json", "a.json", "--csv", "a.csv"]);
    let out = bin()
        .current_dir(d)
        .args(&a)
        .env("METAFORESTS_THREADS", "3")
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = bin()
        .current_dir(d)
        .args(&a)
        .env("METAFORESTS_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    let mut b: Vec<&str> = common.to_vec();
    b.extend(["--json", "b.json", "--csv", "b.csv", "--threads", "2"]);
    let out = bin()
        .current_dir(d)
        .args(&b)
        .env("METAFORESTS_THREADS", "lots")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(d.join("a.json")).unwrap(),
        std::fs::read(d.join("b.json")).unwrap()
    );
}
