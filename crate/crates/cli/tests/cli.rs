use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_switchdetect"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("SWITCHDETECT_STORE").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn generate(dir: &Path, name: &str, experiment: &str, n: usize, seed: u64) -> PathBuf {
    let path = dir.join(name);
    let o = run(&[
        "generate",
        "--experiment",
        experiment,
        "--n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

fn field(out: &str, key: &str) -> String {
    out.lines()
        .find_map(|l| l.strip_prefix(key).filter(|r| r.starts_with(' ')).map(|r| r.trim().to_string()))
        .unwrap_or_else(|| panic!("no {key} in\n{out}"))
}

#[test]
fn detect_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "m.txt", "mixture", 400, 11);
    let args = ["detect", "--input", data.to_str().unwrap(), "--C", "0.08", "--profile", "--format", "json"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    for key in ["decision", "j_stat", "b_star_n", "n1", "n2", "threshold_c", "theta", "profile"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["profile"].as_array().unwrap().len(), 512);
}

#[test]
fn h0_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    // A 5% test rejects about one null sample in twenty; this seed is a typical one.
    let data = generate(dir.path(), "h0.txt", "normal", 1000, 1);
    let o = run(&["detect", "--input", data.to_str().unwrap(), "--kappa", "0.04", "--B", "50", "--C", "0.038"]);
    assert!(o.status.success());
    assert_eq!(field(&stdout(&o), "decision"), "AcceptH0");
}

#[test]
fn negative_threshold_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "m.txt", "normal", 50, 1);
    let o = run(&["detect", "--input", data.to_str().unwrap(), "--C", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("threshold must be positive"));
}

#[test]
fn exit_codes_for_data_and_calibration_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "1\n2\nnot-a-number\n").unwrap();
    let o = run(&["detect", "--input", bad.to_str().unwrap(), "--C", "0.1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let data = generate(dir.path(), "m.txt", "normal", 50, 1);
    let store = dir.path().join("empty.jsonl");
    let o = run(&["detect", "--input", data.to_str().unwrap(), "--p", "0.95", "--store", store.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn null_sample_is_accepted_at_calibrated_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("cal.jsonl");
    let o = run(&[
        "calibrate", "--experiment", "normal", "--n", "300", "--trials", "400", "--p", "0.99", "--seed", "5", "--store",
        store.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // A second identical run leaves the store unchanged.
    let before = std::fs::read_to_string(&store).unwrap();
    let again = run(&[
        "calibrate", "--experiment", "normal", "--n", "300", "--trials", "400", "--p", "0.99", "--seed", "5", "--store",
        store.to_str().unwrap(),
    ]);
    assert!(stdout(&again).contains("already present"));
    assert_eq!(before, std::fs::read_to_string(&store).unwrap());

    let data = generate(dir.path(), "h0.txt", "normal", 300, 99);
    let o = run(&["detect", "--input", data.to_str().unwrap(), "--p", "0.99", "--store", store.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(field(&out, "decision"), "AcceptH0");
    assert!(field(&out, "threshold_source").starts_with("store, n = 300"));
}

#[test]
fn reproduce_table_one_runs() {
    let o = run(&["reproduce", "--table", "1", "--trials", "200", "--seed", "7", "--format", "csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert!(lines.next().unwrap().starts_with("table,section,quantity,N,"));
    assert_eq!(lines.filter(|l| l.starts_with("1,main,C p=")).count(), 18);
    assert_eq!(run(&["reproduce", "--table", "1", "--trials", "200", "--seed", "7", "--format", "csv"]).stdout, o.stdout);
}

#[test]
fn every_subcommand_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let uni = generate(d, "u.txt", "mixture", 300, 2);
    let var = generate(d, "v.txt", "variance", 300, 2);
    let vec = generate(d, "b.txt", "bivariate-full", 300, 2);
    let reg = generate(d, "r.txt", "regression", 200, 2);
    let cls = generate(d, "c.txt", "multiclass", 400, 2);
    let f0 = d.join("f0.txt");
    let grid: String = (0..=160).map(|i| {
        let x = -8.0 + 0.1 * i as f64;
        format!("{x} {}\n", (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt())
    }).collect();
    std::fs::write(&f0, grid).unwrap();
    let s = |p: &PathBuf| p.to_str().unwrap().to_string();
    let cases: Vec<Vec<String>> = vec![
        vec!["detect".into(), "--input".into(), s(&uni), "--C".into(), "0.1".into()],
        vec!["detect-var".into(), "--input".into(), s(&var), "--C".into(), "0.2".into()],
        vec!["detect-var".into(), "--input".into(), s(&var), "--C".into(), "0.2".into(), "--f0".into(), "normal".into()],
        vec!["detect-mv".into(), "--input".into(), s(&vec), "--C".into(), "0.05".into(), "--coords".into(), "1".into()],
        vec!["detect-reg".into(), "--input".into(), s(&reg), "--C".into(), "0.3,0.3".into()],
        vec!["detect-reg".into(), "--input".into(), s(&reg), "--C".into(), "0.3,0.3".into(), "--partial-residual".into()],
        vec!["peel".into(), "--input".into(), s(&cls), "--C".into(), "0.08".into()],
        vec!["estimate".into(), "--input".into(), s(&uni), "--C".into(), "0.05".into(), "--f0".into(), "normal".into()],
        vec!["estimate".into(), "--input".into(), s(&uni), "--C".into(), "0.05".into(), "--f0".into(), s(&f0)],
        vec!["oracle".into(), "psi".into(), "--b".into(), "1".into()],
        vec!["oracle".into(), "bstar".into()],
        vec!["oracle".into(), "j".into(), "--f0".into(), "normal:0:1".into()],
    ];
    for args in &cases {
        for format in ["human", "csv", "tsv", "json"] {
            let mut a: Vec<&str> = args.iter().map(String::as_str).collect();
            a.extend(["--format", format]);
            let o = run(&a);
            assert!(o.status.success(), "{a:?}: {}", String::from_utf8_lossy(&o.stderr));
            assert!(!o.stdout.is_empty(), "{a:?}");
            if format == "json" {
                serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap();
            }
        }
    }
}
