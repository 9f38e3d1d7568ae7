mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ilc::synthetic::{write_synthetic, SyntheticConfig};
use ilc::Domain;

fn ilc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ilc"))
        .args(args)
        .current_dir(dir)
        .env_remove("ILC_CACHE_DIR")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = ilc(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const TINY: [&str; 14] = [
    "--embed-dim",
    "8",
    "--hidden",
    "8",
    "--layers",
    "1",
    "--max-len",
    "32",
    "--epochs",
    "3",
    "--lr",
    "0.01",
    "--seed",
    "2",
];

#[test]
fn step_by_step_commands_compose() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let syn = SyntheticConfig {
        docs_per_domain: 150,
        ..SyntheticConfig::default()
    };
    write_synthetic(dir, &[Domain::Email, Domain::News], &syn).unwrap();

    for d in ["email", "news"] {
        let domain = if d == "email" { "Email" } else { "News" };
        let report = ok(
            dir,
            &[
                "corpus",
                "load",
                "--input",
                &format!("{d}.jsonl"),
                "--format",
                "jsonl",
                "--domain",
                domain,
                "--seed",
                "1",
                "--out",
                &format!("{d}.prepared.jsonl"),
            ],
        );
        assert!(report.contains("kept 150 (train 96 val 24 test 30)"), "{report}");
        let mut args = vec![
            "train-encoder",
            "--corpus",
            &*format!("{d}.prepared.jsonl"),
            "--out",
            &*format!("{d}.ilcm"),
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
        args.extend(TINY.iter().map(|s| s.to_string()));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let report: serde_json::Value = serde_json::from_str(&ok(dir, &refs)).unwrap();
        assert!(report["f1_positive"].is_number());
        ok(
            dir,
            &[
                "extract",
                "--model",
                &format!("{d}.ilcm"),
                "--corpus",
                "email.prepared.jsonl",
                "--out",
                &format!("{d}_on_email.ilcf"),
            ],
        );
    }

    let select = [
        "--store",
        "email_on_email.ilcf",
        "--store",
        "news_on_email.ilcf",
        "--target",
        "Email",
        "--encoders",
        "lstm:News:2,lstm:Email:2",
    ];
    let mut concat = vec!["concat"];
    concat.extend(select);
    concat.extend(["--out", "test.csv"]);
    assert!(ok(dir, &concat).contains("ILC-EN: 30 rows x 16 columns"));
    let csv = fs::read_to_string(dir.join("test.csv")).unwrap();
    assert_eq!(csv.lines().count(), 31);

    let mut head = vec!["train-head"];
    head.extend(select);
    head.extend(["--out", "head.ilcm", "--epochs", "5", "--zscore"]);
    ok(dir, &head);

    ok(
        dir,
        &[
            "eval",
            "--model",
            "email.ilcm",
            "--corpus",
            "email.prepared.jsonl",
            "--out",
            "baseline.json",
        ],
    );
    let eval = ok(
        dir,
        &[
            "eval",
            "--head",
            "head.ilcm",
            "--store",
            "email_on_email.ilcf",
            "--store",
            "news_on_email.ilcf",
            "--baseline",
            "baseline.json",
        ],
    );
    let report: serde_json::Value = serde_json::from_str(&eval).unwrap();
    assert_eq!(
        report["tp"].as_u64().unwrap() + report["fp"].as_u64().unwrap() + report["fn"].as_u64().unwrap() + report["tn"].as_u64().unwrap(),
        30
    );
    assert_eq!(report["baseline_name"], "baseline");

    let mut project = vec!["project"];
    project.extend(select);
    project.extend(["--out", "scatter"]);
    ok(dir, &project);
    let svg = fs::read_to_string(dir.join("scatter.svg")).unwrap();
    assert!(svg.contains("fill=\"red\"") && svg.contains("fill=\"blue\""));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("scatter.json")).unwrap()).unwrap();
    assert_eq!(summary["name"], "ILC-EN");
    assert_eq!(summary["points"], 30);
}

#[test]
fn exit_codes_separate_invalid_input_from_runtime_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let path = common::write_synthetic_experiment(dir, 1, 120, "E+Q", false, 2);
    let out = ilc(dir, &["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"Q\""));
    let out = ilc(dir, &["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let out = ilc(dir, &["validate", "--config", "absent.conf"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ilc(dir, &["extract", "--model", "absent.ilcm", "--corpus", "absent.jsonl", "--out", "x.ilcf"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_reports_cached_stages_on_the_second_call() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let path = common::write_synthetic_experiment(dir, 1, 120, "E+N", false, 2);
    let conf = path.to_str().unwrap();
    assert!(ok(dir, &["validate", "--config", conf]).contains("ok"));
    let cold = ok(dir, &["run", "--config", conf, "--cache-dir", "c"]);
    assert!(cold.contains(" cold "), "{cold}");
    let first = fs::read(dir.join("run/metrics.json")).unwrap();
    let warm = ok(dir, &["run", "--config", conf, "--cache-dir", "c"]);
    assert!(!warm.contains(" cold "), "{warm}");
    assert_eq!(fs::read(dir.join("run/metrics.json")).unwrap(), first);
    assert!(fs::read_to_string(dir.join("run/manifest.json")).unwrap().contains("config_hash"));
}
