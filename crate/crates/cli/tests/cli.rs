use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use netfusion_core::discrimination::CvReport;
use netfusion_core::evaluation::VariantReport;
use netfusion_core::manifest::DatasetManifest;
use netfusion_core::synth::{generate, SynthSpec};

fn netfusion(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netfusion")).args(args).output().unwrap()
}

fn synth(dir: &Path) -> String {
    let out = dir.join("data");
    let o = netfusion(&[
        "synth",
        "--r",
        "10",
        "--n-per-class",
        "8",
        "--clusters",
        "2",
        "--n-disc",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out.join("manifest.csv").to_str().unwrap().to_string()
}

const SMALL: [&str; 6] = ["--knn", "4", "--n-star", "5", "--clusters", "2"];

#[test]
fn argument_errors_exit_2() {
    let o = netfusion(&["estimate", "--class", "A", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    assert_eq!(netfusion(&["classify", "--manifest", "m", "--out", "r", "--folds", "1"]).status.code(), Some(2));
    let o = netfusion(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn pipeline_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let o = netfusion(&["estimate", "--manifest", missing.to_str().unwrap(), "--class", "A", "--out", "x"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let manifest = synth(dir.path());
    let out = dir.path().join("atlas");
    let o = netfusion(&["estimate", "--manifest", &manifest, "--class", "Z", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    // knn larger than r - 1
    let o = netfusion(&["estimate", "--manifest", &manifest, "--class", "A", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn estimate_writes_a_symmetric_atlas_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("atlas{run}"));
        let mut args = vec!["estimate", "--manifest", &manifest, "--class", "B", "--out", out.to_str().unwrap()];
        args.extend(SMALL);
        let o = netfusion(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let csv = out.join("atlas_B_multi.csv");
        let text = fs::read_to_string(&csv).unwrap();
        let rows: Vec<Vec<f64>> = text.lines().map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
        for (k, row) in rows.iter().enumerate() {
            for (l, v) in row.iter().enumerate() {
                assert!((v - rows[l][k]).abs() <= 1e-10);
            }
        }
        let sidecar: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("atlas_B_multi.json")).unwrap()).unwrap();
        assert_eq!(sidecar["kernel_mode"], "multi");
        assert_eq!(sidecar["input_digest"].as_str().unwrap().len(), 64);
        outputs.push((text, fs::read(out.join("atlas_B_multi.json")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn classify_reports_and_exports_edges() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let report = dir.path().join("report.json");
    let edges = dir.path().join("edges.csv");
    let mut args = vec![
        "classify",
        "--manifest",
        &manifest,
        "--nf",
        "3",
        "--folds",
        "4",
        "--out",
        report.to_str().unwrap(),
        "--edges-csv",
        edges.to_str().unwrap(),
    ];
    args.extend(SMALL);
    let o = netfusion(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let parsed: CvReport = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed.folds.len(), 4);
    assert_eq!(parsed.positive_label, "A");
    let csv = fs::read_to_string(&edges).unwrap();
    assert!(csv.starts_with("fold,rank,k,l,score\n"));
    assert_eq!(csv.lines().count(), 1 + 4 * 3);
}

#[test]
fn compare_emits_rows_per_class_and_mode() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let out = dir.path().join("cmp");
    let mut args = vec!["compare", "--manifest", &manifest, "--modes", "multi,degree", "--out", out.to_str().unwrap()];
    args.extend(SMALL);
    let o = netfusion(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: VariantReport = serde_json::from_str(&fs::read_to_string(out.join("variants.json")).unwrap()).unwrap();
    assert_eq!(report.rows.len(), 4);
    assert_eq!(report.win_rates.len(), 1);
    assert!(!report.note.is_empty());
    let csv = fs::read_to_string(out.join("variants.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn synth_spec_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec { r: 7, n_per_class: 4, n_c: 2, n_disc: 3, delta: 0.4, noise: 0.02, seed: 9 };
    let spec_path = dir.path().join("spec.json");
    fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    let out = dir.path().join("d");
    let o = netfusion(&["synth", "--spec", spec_path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let expected = generate(&spec).unwrap();
    let manifest = DatasetManifest::load(out.join("manifest.csv")).unwrap();
    let pops = manifest.load_populations().unwrap();
    assert_eq!(pops["A"], expected.class_a);
    assert_eq!(pops["B"], expected.class_b);
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("ground_truth.json")).unwrap()).unwrap();
    assert_eq!(truth["edges"].as_array().unwrap().len(), 3);
}
