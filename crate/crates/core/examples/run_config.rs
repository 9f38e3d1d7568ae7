//! Run a full experiment from a config file, or from a generated synthetic
//! one when no path is given. A second run is served from the cache.
//!
//! cargo run --release --example run_config [config]

use std::fs;

use ilc::config::{load_config, validate_config};
use ilc::pipeline::{run_pipeline, RunOptions};
use ilc::synthetic::{write_synthetic, SyntheticConfig};
use ilc::Domain;

const GENERATED: &str = "[experiment]
seed = 1
output = run

[corpus.Email]
path = email.jsonl
format = jsonl

[corpus.News]
path = news.jsonl
format = jsonl

[encoder.email]
domain = Email
embed_dim = 16
hidden = 16
max_len = 40
epochs = 5
lr = 0.01

[encoder.news]
domain = News
embed_dim = 16
hidden = 16
max_len = 40
epochs = 5
lr = 0.01

[head]
lr = 0.003
epochs = 40

[ilc]
combinations = EN

[projection]
enabled = true
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => {
            let syn = SyntheticConfig {
                docs_per_domain: 800,
                ..SyntheticConfig::default()
            };
            write_synthetic(tmp.path(), &[Domain::Email, Domain::News], &syn)?;
            let p = tmp.path().join("experiment.conf");
            fs::write(&p, GENERATED)?;
            p
        }
    };
    let diags = validate_config(&path)?;
    if !diags.is_empty() {
        for d in diags {
            eprintln!("{d}");
        }
        std::process::exit(1);
    }
    let cfg = load_config(&path)?;
    for pass in ["first", "second"] {
        let m = run_pipeline(&cfg, &RunOptions::default())?;
        let cold = m
            .stages
            .iter()
            .filter(|s| !matches!(s.status, ilc::pipeline::StageStatus::Cached))
            .count();
        let secs: f64 = m.stages.iter().map(|s| s.seconds).sum();
        println!("{pass} run: {} stages, {cold} computed, {secs:.2}s", m.stages.len());
        if pass == "first" {
            print!("{}", fs::read_to_string(m.output.join("table.md"))?);
            println!("{}", fs::read_to_string(m.output.join("projections/Email/projection.json"))?);
        }
    }
    Ok(())
}
