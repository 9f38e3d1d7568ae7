//! Three synthetic domains, one LSTM per domain, and an ILC head over all
//! three, repeated over several seeds.
//!
//! cargo run --release --example synthetic_transfer -- [seeds] [docs_per_domain]

use std::fs;

use ilc::config::load_config;
use ilc::pipeline::{run_pipeline, MetricsFile, RunOptions};
use ilc::synthetic::{write_synthetic, SyntheticConfig};
use ilc::Domain;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2);
    let docs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2000);
    let domains = [Domain::Email, Domain::News, Domain::Tweet];
    let root = tempfile::tempdir()?;

    let mut sums = [[0.0f64; 2]; 3];
    for seed in 0..seeds {
        let dir = root.path().join(format!("seed{seed}"));
        let syn = SyntheticConfig {
            docs_per_domain: docs,
            seed,
            ..SyntheticConfig::default()
        };
        write_synthetic(&dir, &domains, &syn)?;
        let mut text = format!("[experiment]\nseed = {seed}\noutput = run\n\n");
        for d in domains {
            let lower = d.name().to_lowercase();
            text += &format!("[corpus.{d}]\npath = {lower}.jsonl\nformat = jsonl\n\n");
            text += &format!("[encoder.{lower}]\ndomain = {d}\nembed_dim = 16\nhidden = 16\nmax_len = 40\nepochs = 15\npatience = 3\nlr = 0.01\n\n");
        }
        text += "[head]\nlr = 0.003\nepochs = 60\npatience = 8\n\n[ilc]\ncombinations = E+T+N\n\n[projection]\nenabled = false\n";
        let path = dir.join("experiment.conf");
        fs::write(&path, text)?;

        let start = std::time::Instant::now();
        let cfg = load_config(&path)?;
        let manifest = run_pipeline(&cfg, &RunOptions::default())?;
        let metrics: MetricsFile = serde_json::from_str(&fs::read_to_string(manifest.output.join("metrics.json"))?)?;
        println!("seed {seed} ({:.1}s)", start.elapsed().as_secs_f64());
        print!("{}", fs::read_to_string(manifest.output.join("table.md"))?);
        for (k, t) in metrics.targets.iter().enumerate() {
            for (j, col) in ["Baseline", "ILC-ETN"].iter().enumerate() {
                let cell = t.cells.iter().find(|c| c.column == *col).expect("both columns are planned");
                sums[k][j] += cell.report.f1_positive;
            }
        }
    }
    println!("mean positive-class F1 over {seeds} seeds");
    for (k, d) in domains.iter().enumerate() {
        let n = seeds as f64;
        println!("{d:<8} baseline {:.4}  ILC-ETN {:.4}", sums[k][0] / n, sums[k][1] / n);
    }
    Ok(())
}
