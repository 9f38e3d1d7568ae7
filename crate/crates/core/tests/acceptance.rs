//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ilc::config::load_config;
use ilc::corpus::{docs_in_split, split_corpus, Document, Domain, Label, LabelMap, Split};
use ilc::eval::{improvement, MetricsReport};
use ilc::pipeline::{run_pipeline, MetricsFile, RunOptions};
use ilc::projection::{centroid_distance, separation_change, ProjectedPoint, Projection2D};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let lstm = (0..25).map(common::lstm_gradient_error).fold(0.0, f64::max);
    let mlp = (0..25).map(common::mlp_gradient_error).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    check(
        lstm < 1e-4 && mlp < 1e-4 && secs < 60.0,
        format!("25+25 instances, worst relative error LSTM {lstm:.2e} MLP {mlp:.2e}, {secs:.1}s"),
    )
}

fn metrics() -> Outcome {
    let failures: Vec<String> = (0..1000).filter_map(common::metric_oracle_mismatch).collect();
    let at = |f1: f64| MetricsReport {
        f1_positive: f1,
        ..MetricsReport::from_counts(0, 0, 0, 1)
    };
    let delta = improvement(&at(0.8099), &at(0.8759));
    check(
        failures.is_empty() && delta == 6.60,
        format!("1000 vectors, {} mismatches; improvement(0.8099, 0.8759) = {delta:+.2}", failures.len()),
    )
}

fn ilc_structure() -> Outcome {
    let violations: Vec<String> = (0..200).filter_map(|s| common::ilc_structure_violation(s * 7919 + 1)).collect();
    let (named, removed) = common::missing_pairs_case();
    check(
        violations.is_empty() && named == removed,
        format!("200 specs, {} violations; missing pairs named {:?}", violations.len(), named),
    )
}

fn svd() -> Outcome {
    let oracle = (0..20).map(common::svd_oracle_error).fold(0.0, f64::max);
    let rank2 = (0..20).map(common::rank2_distance_error).fold(0.0, f64::max);
    let point = |x, y, label| ProjectedPoint { x, y, label };
    let proj = Projection2D {
        points: vec![point(0.0, 0.0, Label::NonDeceptive), point(3.0, 4.0, Label::Deceptive)],
        basis: [vec![1.0, 0.0], vec![0.0, 1.0]],
        mean: vec![0.0; 2],
        singular_values: [1.0, 1.0],
        total_variance: 2.0,
    };
    let d = centroid_distance(&proj).map_err(|e| e.to_string())?;
    let change = separation_change(2.0, 3.0046).map_err(|e| e.to_string())?;
    check(
        oracle < 1e-6 && rank2 < 1e-8 && d == 5.0 && change == 50.23,
        format!("eigen oracle {oracle:.1e}, rank-2 distance error {rank2:.1e}, distance {d}, change {change:+.2}%"),
    )
}

const SEEDS: u64 = 5;

fn synthetic_direction(root: &Path) -> Outcome {
    let start = Instant::now();
    let domains = [Domain::Email, Domain::News, Domain::Tweet];
    let mut sums = [[0.0f64; 2]; 3];
    for seed in 0..SEEDS {
        let dir = root.join(format!("direction{seed}"));
        let path = common::write_synthetic_experiment(&dir, seed, 2000, "E+T+N", false, 15);
        let cfg = load_config(&path).map_err(|e| e.to_string())?;
        let m = run_pipeline(&cfg, &RunOptions::default()).map_err(|e| e.to_string())?;
        let file: MetricsFile =
            serde_json::from_slice(&fs::read(m.output.join("metrics.json")).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        for t in &file.targets {
            let k = domains.iter().position(|&d| d == t.domain).ok_or("unexpected target")?;
            for (j, col) in ["Baseline", "ILC-ETN"].iter().enumerate() {
                let cell = t.cells.iter().find(|c| c.column == *col).ok_or("missing column")?;
                sums[k][j] += cell.report.f1_positive;
            }
        }
    }
    let n = SEEDS as f64;
    let secs = start.elapsed().as_secs_f64();
    let parts: Vec<String> = domains
        .iter()
        .zip(&sums)
        .map(|(d, s)| format!("{d} {:.4}->{:.4}", s[0] / n, s[1] / n))
        .collect();
    let ok = sums.iter().all(|s| s[1] >= s[0]) && secs < 900.0;
    check(
        ok,
        format!("mean F1 baseline->ILC-ETN over {SEEDS} seeds: {}; {secs:.0}s", parts.join(", ")),
    )
}

fn determinism(root: &Path) -> Outcome {
    let dir = root.join("determinism");
    let path = common::write_synthetic_experiment(&dir, 11, 1000, "E+T+N", true, 15);
    let run = || -> Result<(f64, Vec<u8>), String> {
        let start = Instant::now();
        let out = Command::new(env!("CARGO_BIN_EXE_ilc"))
            .args(["run", "--config", path.to_str().unwrap()])
            .env_remove("ILC_CACHE_DIR")
            .output()
            .map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).into_owned());
        }
        Ok((secs, fs::read(dir.join("run/metrics.json")).map_err(|e| e.to_string())?))
    };
    let (cold, first) = run()?;
    let (warm, second) = run()?;
    let speedup = cold / warm;
    check(
        first == second && speedup >= 5.0,
        format!(
            "metrics.json identical: {}; cold {cold:.2}s, cached {warm:.3}s, speedup {speedup:.0}x",
            first == second
        ),
    )
}

fn label_mapping() -> Outcome {
    let map = LabelMap::liar();
    let honest = ["true", "mostly-true"].iter().all(|l| map.get(l) == Some(Label::NonDeceptive));
    let deceptive = ["half-true", "barely-true", "false", "pants-fire"]
        .iter()
        .all(|l| map.get(l) == Some(Label::Deceptive));
    let docs: Vec<Document> = (0..10_000)
        .map(|i| Document {
            id: format!("w{i:05}"),
            domain: Domain::Wikipedia,
            text: "x".into(),
            label: if i % 4 == 0 { Label::Deceptive } else { Label::NonDeceptive },
            split: None,
        })
        .collect();
    let out = split_corpus(docs, 0.8, 0.2, 0).map_err(|e| e.to_string())?;
    let sizes = [Split::Train, Split::Val, Split::Test].map(|s| docs_in_split(&out, s).len());
    check(
        honest && deceptive && sizes == [6400, 1600, 2000],
        format!("LIAR 2 non-deceptive + 4 deceptive: {}; 10,000 -> {sizes:?}", honest && deceptive),
    )
}

fn main() {
    let root = tempfile::tempdir().expect("temporary directory");
    let criteria: Vec<Criterion> = vec![
        ("gradient correctness", Box::new(gradients)),
        ("metric oracle", Box::new(metrics)),
        ("ILC structural properties", Box::new(ilc_structure)),
        ("SVD oracle", Box::new(svd)),
        ("synthetic end-to-end direction", Box::new(|| synthetic_direction(root.path()))),
        ("determinism and caching", Box::new(|| determinism(root.path()))),
        ("label mapping and split arithmetic", Box::new(label_mapping)),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
