//! Fit a classifier head on concatenated vectors from a feature store file,
//! with and without z-scoring.
//!
//! cargo run --release --example head_training

use ilc::corpus::Split;
use ilc::features::{read_store, write_store, IlcSpec, RepresentationRecord};
use ilc::head::{fit_head, Head};
use ilc::mlp::MlpConfig;
use ilc::rng;
use ilc::{Domain, Label};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Two encoders; only the second one carries signal, on a large scale.
    let mut prng = rng::seeded(4);
    let mut records = Vec::new();
    for i in 0..400 {
        let label = if i % 3 == 0 { Label::Deceptive } else { Label::NonDeceptive };
        let split = [Split::Train, Split::Train, Split::Train, Split::Val, Split::Test][i % 5];
        let shift = if label == Label::Deceptive { 40.0 } else { 0.0 };
        for (enc, dim, scale) in [("lstm:Email:4", 6, 0.0), ("lstm:Tweet:4", 3, 1.0)] {
            let vec = (0..dim).map(|_| (rng::uniform(&mut prng, -50.0, 50.0) + scale * shift) as f32).collect();
            records.push(RepresentationRecord {
                doc_id: format!("e{i:03}"),
                target_domain: Domain::Email,
                encoder_id: enc.into(),
                label,
                split,
                vec,
            });
        }
    }
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("features.ilcf");
    write_store(&path, &records)?;
    let store = read_store(&path)?;

    let spec = IlcSpec::canonical(Domain::Email, vec!["lstm:Tweet:4".into(), "lstm:Email:4".into()])?;
    let cfg = MlpConfig {
        lr: 0.003,
        max_epochs: 60,
        patience: 10,
        ..MlpConfig::default()
    };
    for zscore in [false, true] {
        let head = fit_head(&store, &spec, &cfg, zscore)?;
        let ckpt = dir.path().join(format!("head_{zscore}.ilcm"));
        head.save(&ckpt)?;
        let test = Head::load(&ckpt)?.evaluate(&store, Split::Test)?;
        println!(
            "{} zscore={zscore}: best epoch {}, test F1 {:.4}, ACC {:.4}",
            spec.name(),
            head.best_epoch,
            test.f1_positive,
            test.accuracy
        );
    }
    Ok(())
}
