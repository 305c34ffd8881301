//! End-to-end tests of the setevolve binary: exit codes, output files, and
//! byte-level reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_setevolve"))
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("read {name}: {e}"))
}

#[test]
fn bench_writes_report_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    for out in [&out_a, &out_b] {
        let output = run(&[
            "bench",
            "--m",
            "8",
            "--evolution",
            "local",
            "--timestamps",
            "20",
            "--samples-per-t",
            "8",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&output), 0, "{output:?}");
    }
    assert_eq!(read(&out_a, "report.txt"), read(&out_b, "report.txt"));

    // report JSON matches apart from wall-clock runtimes
    let strip = |text: &str| -> serde_json::Value {
        let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
        for row in v["rows"].as_array_mut().unwrap() {
            row["runtimeSeconds"] = 0.0.into();
        }
        v
    };
    assert_eq!(
        strip(&read(&out_a, "report.json")),
        strip(&read(&out_b, "report.json"))
    );
    let table = read(&out_a, "report.txt");
    assert!(table.contains("SetEvolve") && table.contains("Static"));
}

#[test]
fn bench_rejects_degenerate_config() {
    let tmp = tempfile::tempdir().unwrap();
    let output = run(&["bench", "--m", "1", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(exit_code(&output), 2);
}

fn write_panel(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

const SMALL_PANEL: &str = r#"{"timestamps":[1.0,2.0],"entityNames":["alpha","beta","gamma"],
"counts":[[[1,0,2],[2,1,0],[0,2,1],[3,1,2]],[[1,2,0],[0,1,2],[2,0,1]]]}"#;

#[test]
fn estimate_writes_series_and_dot_per_timestamp() {
    let tmp = tempfile::tempdir().unwrap();
    let panel = write_panel(tmp.path(), "panel.json", SMALL_PANEL);
    let out = tmp.path().join("out");
    let output = run(&[
        "estimate",
        "--panel",
        panel.to_str().unwrap(),
        "--lambda",
        "0.3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "{output:?}");
    let series = read(&out, "series.json");
    assert!(series.contains("\"perTimestamp\""));
    assert!(out.join("network_t1.dot").exists());
    assert!(out.join("network_t2.dot").exists());
}

#[test]
fn estimate_full_shrinkage_gives_edgeless_graphs() {
    let tmp = tempfile::tempdir().unwrap();
    let panel = write_panel(tmp.path(), "panel.json", SMALL_PANEL);
    let out = tmp.path().join("out");
    let output = run(&[
        "estimate",
        "--panel",
        panel.to_str().unwrap(),
        "--lambda",
        "1e9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "{output:?}");
    for name in ["network_t1.dot", "network_t2.dot"] {
        let dot = read(&out, name);
        assert!(!dot.contains("--"), "{name} should have no edges:\n{dot}");
    }
}

#[test]
fn estimate_names_rejected_entity() {
    let tmp = tempfile::tempdir().unwrap();
    let panel = write_panel(
        tmp.path(),
        "panel.json",
        r#"{"timestamps":[1.0],"entityNames":["flat","ok"],"counts":[[[5,1],[5,2],[5,0]]]}"#,
    );
    let output = run(&[
        "estimate",
        "--panel",
        panel.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 1);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("flat"), "stderr: {stderr}");
}

#[test]
fn estimate_rejects_malformed_panel() {
    let tmp = tempfile::tempdir().unwrap();
    let panel = write_panel(tmp.path(), "panel.json", "{ not json");
    let output = run(&[
        "estimate",
        "--panel",
        panel.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 2);
}

#[test]
fn query_toy_corpus_end_to_end_and_deterministic() {
    let corpus = data_dir().join("toy_corpus.jsonl");
    let vocab = data_dir().join("toy_vocab.tsv");
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let mut stdouts = vec![];
    for out in [&out_a, &out_b] {
        let output = run(&[
            "query",
            "--corpus",
            corpus.to_str().unwrap(),
            "--vocab",
            vocab.to_str().unwrap(),
            "--query",
            "networks",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&output), 0, "{output:?}");
        stdouts.push(String::from_utf8_lossy(&output.stdout).to_string());
    }
    assert!(stdouts[0].contains("n* = 35"), "stdout: {}", stdouts[0]);
    assert_eq!(stdouts[0], stdouts[1]);
    for name in ["gamma_curve.csv", "panel.json", "series.json"] {
        assert_eq!(
            read(&out_a, name),
            read(&out_b, name),
            "{name} must be reproducible"
        );
    }
    let dots: Vec<_> = std::fs::read_dir(&out_a)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".dot"))
        .collect();
    assert_eq!(dots.len(), 4, "one DOT file per timestamp window");
}

#[test]
fn query_without_hits_exits_with_no_cutoff() {
    let corpus = data_dir().join("toy_corpus.jsonl");
    let vocab = data_dir().join("toy_vocab.tsv");
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let output = run(&[
        "query",
        "--corpus",
        corpus.to_str().unwrap(),
        "--vocab",
        vocab.to_str().unwrap(),
        "--query",
        "zzzmissing",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 3, "{output:?}");
    assert!(read(&out, "gamma_curve.csv").starts_with("n,unionSize"));
}
