use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brepgraph"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Value of `key` in the first line that has it.
fn value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines()
        .flat_map(|l| l.split_whitespace())
        .find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
}

#[test]
fn parse_prints_counts() {
    let o = run(&["parse", path_str(&fixture("cube.brep.json"))]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(value(&out, "faces"), Some("6"));
    assert_eq!(value(&out, "edges"), Some("12"));
}

#[test]
fn malformed_input_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.brep.json");
    fs::write(&bad, "{ not json").unwrap();
    let o = run(&["parse", path_str(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn validate_reports_errors_and_exits_one() {
    let text = fs::read_to_string(fixture("cube.brep.json")).unwrap();
    let broken = text.replacen("\"x_axis\": [0.0, 1.0, 0.0]", "\"x_axis\": [0.0, 2.0, 0.0]", 1);
    assert_ne!(text, broken);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.brep.json");
    fs::write(&path, broken).unwrap();

    let o = run(&["validate", path_str(&path)]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("severity=error entity=surfaces[0]"), "{out}");
    assert_eq!(value(&out, "valid"), Some("false"));

    let o = run(&["validate", path_str(&fixture("cube.brep.json"))]);
    assert!(o.status.success());
    assert_eq!(value(&stdout(&o), "errors"), Some("0"));
}

#[test]
fn seam_edges_are_warnings_only() {
    let o = run(&["validate", path_str(&fixture("cylinder.brep.json"))]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(value(&out, "warnings"), Some("1"));
    assert!(out.contains("severity=warning entity=edges[2]"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["sample"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["check-grad", "--n", "x"]).status.code(), Some(2));
}

#[test]
fn sample_writes_dataset_and_prints_resolutions() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let o = run(&["sample", path_str(&fixture("cube.brep.json")), "-o", path_str(&out_dir)]);
    assert!(o.status.success());
    let out = stdout(&o);
    let faces: Vec<&str> = out.lines().filter(|l| l.contains(" face=")).collect();
    assert_eq!(faces.len(), 6);
    // Equal face areas put every face at the top of the range.
    assert!(faces.iter().all(|l| l.ends_with("n_s=32")));
    assert!(out_dir.join("manifest.json").is_file());
    assert!(out_dir.join("data.shard").is_file());

    let manifest = fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"item_count\": 1,"));
    assert!(manifest.contains("\"n_max_face\": 32,"));

    let o = run(&["stats", path_str(&out_dir)]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("item=0 name=unit_cube nodes=6 arcs=12 isolated=0 components=1 degrees=4:6"), "{out}");
    assert!(out.contains("items=1 nodes=6 arcs=12 tokens=0"));
}

#[test]
fn sampler_flags_reach_the_sampler() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "sample",
        path_str(&fixture("cylinder.brep.json")),
        "-o",
        path_str(dir.path()),
        "--nmin",
        "8",
        "--nmax",
        "8",
        "--mmin",
        "20",
        "--mmax",
        "20",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    // Resolutions are clamped to [16, 32] whatever the flags say.
    assert!(out.lines().filter(|l| l.contains(" face=")).all(|l| l.ends_with("n_s=16")));
    assert!(out.lines().filter(|l| l.contains(" edge=")).all(|l| l.ends_with("m_c=20")));
}

#[test]
fn graph_skips_seams() {
    let o = run(&["graph", path_str(&fixture("cylinder.brep.json"))]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(value(&out, "nodes"), Some("3"));
    assert_eq!(value(&out, "arcs"), Some("2"));
    assert_eq!(value(&out, "seam_edges"), Some("1"));
}

#[test]
fn encode_is_deterministic_and_params_reload() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cube = fixture("cube.brep.json");
    let encode = |out: &str, extra: &[&str]| {
        let out_dir = d.join(out);
        let mut args = vec!["encode", path_str(&cube), "-o", path_str(&out_dir)];
        args.extend_from_slice(extra);
        let o = run(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (stdout(&o), fs::read(out_dir.join("data.shard")).unwrap())
    };
    let params = d.join("params.bin");
    let (text, a) = encode("a", &["--seed", "5", "--d", "32", "--save-params", path_str(&params)]);
    assert_eq!(value(&text, "valid_len"), Some("6"));
    let (_, b) = encode("b", &["--seed", "5", "--d", "32"]);
    let (_, c) = encode("c", &["--params", path_str(&params)]);
    let (_, other) = encode("other", &["--seed", "6", "--d", "32"]);
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_ne!(a, other);

    let o = run(&["stats", path_str(&d.join("a"))]);
    assert_eq!(value(&stdout(&o), "tokens"), Some("1"));
}

#[test]
fn encode_accepts_dataset_directories() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    let two = [fixture("cube.brep.json"), fixture("torus.brep.json")];
    let o = run(&["sample", path_str(&two[0]), path_str(&two[1]), "-o", path_str(&ds)]);
    assert!(o.status.success());
    let enc = dir.path().join("enc");
    let o = run(&["encode", path_str(&ds), "-o", path_str(&enc), "--d", "8"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("item=0 name=unit_cube nodes=6"));
    assert!(out.contains("item=1 name=torus nodes=1"));
    assert_eq!(value(out.lines().last().unwrap(), "items"), Some("2"));
}

#[test]
fn check_grad_default_passes() {
    let o = run(&["check-grad", "--n", "4", "--d", "8", "--tau", "0.5", "--seed", "7"]);
    assert!(o.status.success());
    let err: f64 = value(&stdout(&o), "grad_err").unwrap().parse().unwrap();
    assert!(err <= 1e-5);
}

#[test]
fn check_grad_exit_code_tracks_threshold() {
    // A coarse step at a sharp temperature has a large truncation error.
    let o = run(&["check-grad", "--tau", "0.05", "--eps", "1e-2"]);
    let err: f64 = value(&stdout(&o), "grad_err").unwrap().parse().unwrap();
    assert!(err > 1e-5, "{err}");
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn loss_reads_saved_batch() {
    let dir = tempfile::tempdir().unwrap();
    let batch = dir.path().join("batch.bin");
    let o = run(&["check-grad", "--n", "3", "--d", "5", "--seed", "1", "--save", path_str(&batch)]);
    assert!(o.status.success());
    let o = run(&["loss", path_str(&batch)]);
    assert!(o.status.success());
    let out = stdout(&o);
    let line = out.lines().next().unwrap();
    assert!(line.starts_with("loss=") && line.contains(" grad_err="), "{line}");
    let loss: f64 = value(line, "loss").unwrap().parse().unwrap();
    assert!(loss > 0.0);

    fs::write(&batch, b"BRPG").unwrap();
    assert_eq!(run(&["loss", path_str(&batch)]).status.code(), Some(1));
}

#[test]
fn mqe_check_reports_every_property() {
    let o = run(&["mqe-check", "--seed", "11", "--trials", "3"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines.iter().all(|l| l.ends_with("=pass")), "{out}");
}

#[test]
fn stats_on_missing_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["stats", path_str(&dir.path().join("absent"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("manifest.json"));
}
