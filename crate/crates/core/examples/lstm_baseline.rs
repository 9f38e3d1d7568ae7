//! Train a self-domain LSTM baseline on one synthetic domain, evaluate it on
//! the held-out split, and reload it from its checkpoint.
//!
//! cargo run --release --example lstm_baseline

use ilc::corpus::{docs_in_split, split_corpus, Split};
use ilc::eval::compute_metrics;
use ilc::lstm::{train_lstm_baseline, LstmConfig, LstmEncoder};
use ilc::synthetic::{synthetic_domain, SyntheticConfig};
use ilc::Domain;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let docs = synthetic_domain(Domain::Tweet, 0, 3, &SyntheticConfig::default())?;
    let docs = split_corpus(docs, 0.8, 0.2, 1)?;
    let cfg = LstmConfig {
        embed_dim: 16,
        hidden: 16,
        max_len: 40,
        max_epochs: 15,
        lr: 0.01,
        seed: 1,
        ..LstmConfig::default()
    };
    let trained = train_lstm_baseline(
        &docs_in_split(&docs, Split::Train),
        &docs_in_split(&docs, Split::Val),
        Domain::Tweet,
        &cfg,
    )?;
    for log in &trained.history {
        println!(
            "epoch {:>2}  loss {:.4}  val F1 {:.4}",
            log.epoch,
            log.train_loss,
            log.val_f1.unwrap_or(f64::NAN)
        );
    }
    println!("kept epoch {}", trained.best_epoch);

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("tweet.ilcm");
    trained.encoder.save(&path)?;
    let encoder = LstmEncoder::load(&path)?;
    let test = docs_in_split(&docs, Split::Test);
    let labels: Vec<_> = test.iter().map(|d| d.label).collect();
    let report = compute_metrics(&encoder.predict_docs(&test)?, &labels)?;
    println!("{} test: F1 {:.4}  ACC {:.4}", encoder.id, report.f1_positive, report.accuracy);
    Ok(())
}
