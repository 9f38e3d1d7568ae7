mod common;

use ilc::corpus::{docs_in_split, split_corpus, Document, Domain, Label, Split};
use ilc::features::FeatureMatrix;
use ilc::lstm::{extract_representations, train_lstm_baseline, LstmClassifier, LstmConfig, Pooling, SequenceSet};
use ilc::mlp::{train_mlp, MlpConfig};
use ilc::optim::{Adam, Parameters};
use ilc::rng::{self, derive_seed};
use ilc::synthetic::{synthetic_domain, SyntheticConfig};
use ilc::text::{Vocabulary, PAD};
use ilc::train::{Dataset, Model};

/// Filler text from a small vocabulary; deceptive documents carry "xx".
fn marker_corpus(n: usize, seed: u64) -> Vec<Document> {
    let mut prng = rng::seeded(seed);
    let words = ["alpha", "beta", "gamma", "delta", "omega", "sigma", "kappa", "theta"];
    (0..n)
        .map(|i| {
            let deceptive = i % 2 == 0;
            let len = 4 + rng::below(&mut prng, 6);
            let mut toks: Vec<&str> = (0..len).map(|_| words[rng::below(&mut prng, words.len())]).collect();
            if deceptive {
                let pos = rng::below(&mut prng, toks.len() + 1);
                toks.insert(pos, "xx");
            }
            Document {
                id: format!("m{i:04}"),
                domain: Domain::Email,
                text: toks.join(" "),
                label: if deceptive { Label::Deceptive } else { Label::NonDeceptive },
                split: Some(Split::Train),
            }
        })
        .collect()
}

fn small_lstm() -> LstmConfig {
    LstmConfig {
        embed_dim: 8,
        hidden: 8,
        layers: 1,
        max_len: 16,
        min_freq: 1,
        lr: 0.01,
        batch: 16,
        max_epochs: 20,
        patience: 20,
        seed: 5,
        ..LstmConfig::default()
    }
}

#[test]
fn lstm_learns_a_deterministic_marker() {
    let docs = marker_corpus(400, 1);
    let train: Vec<&Document> = docs.iter().collect();
    let trained = train_lstm_baseline(&train, &[], Domain::Email, &small_lstm()).unwrap();
    assert!(trained.best_epoch <= 20);
    let preds = trained.encoder.predict_docs(&train).unwrap();
    let correct = preds.iter().zip(&docs).filter(|(p, d)| **p == d.label).count();
    let acc = correct as f64 / docs.len() as f64;
    assert!(acc >= 0.99, "train accuracy {acc}");
}

#[test]
fn zero_learning_rate_keeps_the_initial_lstm() {
    let docs = marker_corpus(60, 2);
    let train: Vec<&Document> = docs.iter().collect();
    let cfg = LstmConfig {
        lr: 0.0,
        max_epochs: 3,
        ..small_lstm()
    };
    let trained = train_lstm_baseline(&train, &[], Domain::Email, &cfg).unwrap();
    let vocab = Vocabulary::build(train.iter().copied(), cfg.min_freq, cfg.max_vocab).unwrap();
    let mut prng = rng::seeded(derive_seed(cfg.seed, "lstm:init"));
    let init = LstmClassifier::init(vocab.len(), cfg.embed_dim, cfg.hidden, cfg.layers, cfg.pooling, &mut prng);
    assert_eq!(trained.encoder.model.tensors(), init.tensors());
}

#[test]
fn identical_seeds_give_identical_parameters() {
    let docs = marker_corpus(120, 3);
    let train: Vec<&Document> = docs.iter().collect();
    let cfg = LstmConfig {
        max_epochs: 3,
        dropout: 0.2,
        ..small_lstm()
    };
    let a = train_lstm_baseline(&train, &[], Domain::Email, &cfg).unwrap();
    let b = train_lstm_baseline(&train, &[], Domain::Email, &cfg).unwrap();
    assert_eq!(a.encoder, b.encoder);
    let c = train_lstm_baseline(&train, &[], Domain::Email, &LstmConfig { seed: 6, ..cfg }).unwrap();
    assert_ne!(a.encoder.model, c.encoder.model);
}

#[test]
fn pad_row_stays_zero_through_training() {
    let docs = marker_corpus(80, 4);
    let train: Vec<&Document> = docs.iter().collect();
    let cfg = LstmConfig {
        max_epochs: 4,
        ..small_lstm()
    };
    let trained = train_lstm_baseline(&train, &[], Domain::Email, &cfg).unwrap();
    assert!(trained.encoder.model.encoder.embedding.row(PAD).iter().all(|&x| x == 0.0));
}

#[test]
fn fixed_batch_loss_does_not_increase_at_small_learning_rate() {
    let syn = SyntheticConfig {
        docs_per_domain: 64,
        ..SyntheticConfig::default()
    };
    let docs: Vec<Document> = synthetic_domain(Domain::News, 0, 3, &syn)
        .unwrap()
        .into_iter()
        .map(|d| Document {
            split: Some(Split::Train),
            ..d
        })
        .collect();
    let vocab = Vocabulary::build(docs.iter(), 1, 20_000).unwrap();
    let data = SequenceSet::from_docs(docs.iter(), &vocab, 40).unwrap();
    let batch: Vec<usize> = (0..32).collect();
    for pooling in [Pooling::Last, Pooling::Mean] {
        let mut model = LstmClassifier::init(vocab.len(), 16, 16, 2, pooling, &mut rng::seeded(8));
        let mut adam = Adam::new(1e-3);
        let mut prng = rng::seeded(0);
        let mut prev = f64::INFINITY;
        for step in 0..20 {
            let (loss, grads) = model.loss_and_grad(&data, &batch, [1.0, 1.0], &mut prng);
            assert!(loss <= prev, "{pooling:?} step {step}: {loss} after {prev}");
            prev = loss;
            adam.step(&mut model, &grads);
            model.after_step();
        }
    }
}

#[test]
fn foreign_encoder_tags_records_with_its_training_domain() {
    let news = marker_corpus(80, 5)
        .into_iter()
        .map(|d| Document { domain: Domain::News, ..d })
        .collect::<Vec<_>>();
    let train: Vec<&Document> = news.iter().collect();
    let cfg = LstmConfig {
        max_epochs: 2,
        ..small_lstm()
    };
    let encoder = train_lstm_baseline(&train, &[], Domain::News, &cfg).unwrap().encoder;
    let unsplit = marker_corpus(30, 6).into_iter().map(|d| Document { split: None, ..d }).collect();
    let email = split_corpus(unsplit, 0.8, 0.2, 1).unwrap();
    let records = extract_representations(&email, &encoder).unwrap();
    assert_eq!(records.len(), 30);
    for (r, d) in records.iter().zip(&email) {
        assert_eq!(r.encoder_id, "lstm:News:5");
        assert_eq!(r.target_domain, Domain::Email);
        assert_eq!((&r.doc_id, r.label, Some(r.split)), (&d.id, d.label, d.split));
        assert_eq!(r.dim(), 8);
    }
    assert!(!docs_in_split(&email, Split::Test).is_empty());
}

/// Two Gaussian-ish blobs in the plane separated by a margin of 1 along a
/// random direction.
fn blobs(seed: u64) -> FeatureMatrix {
    let mut prng = rng::seeded(seed);
    let angle = rng::uniform(&mut prng, 0.0, std::f64::consts::TAU);
    let (nx, ny) = (angle.cos(), angle.sin());
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..200 {
        let side = if i % 2 == 0 { 1.0 } else { -1.0 };
        let along = side * (0.5 + rng::uniform(&mut prng, 0.0, 2.0));
        let across = rng::uniform(&mut prng, -3.0, 3.0);
        rows.push(vec![along * nx - across * ny + 1.0, along * ny + across * nx - 2.0]);
        labels.push(if side > 0.0 { Label::Deceptive } else { Label::NonDeceptive });
    }
    FeatureMatrix::from_rows(rows, labels).unwrap()
}

/// Rosenblatt's perceptron; converges exactly when the data are separable.
fn perceptron_separates(m: &FeatureMatrix) -> bool {
    let mut w = vec![0.0; m.dim + 1];
    for _ in 0..10_000 {
        let mut errors = 0;
        for i in 0..m.rows() {
            let y = if m.labels[i] == Label::Deceptive { 1.0 } else { -1.0 };
            let s: f64 = w[0] + m.row(i).iter().zip(&w[1..]).map(|(x, w)| x * w).sum::<f64>();
            if y * s <= 0.0 {
                errors += 1;
                w[0] += y;
                w[1..].iter_mut().zip(m.row(i)).for_each(|(w, x)| *w += y * x);
            }
        }
        if errors == 0 {
            return true;
        }
    }
    false
}

#[test]
fn mlp_fits_separable_blobs() {
    for seed in 0..3 {
        let m = blobs(seed);
        assert!(perceptron_separates(&m), "blobs {seed} are not separable");
        let cfg = MlpConfig {
            hidden: Some(16),
            lr: 0.01,
            batch: 16,
            max_epochs: 50,
            patience: 50,
            seed,
            ..MlpConfig::default()
        };
        let trained = train_mlp(&m, None, &cfg).unwrap();
        let preds = trained.params.predict(&m);
        let acc = preds.iter().zip(&m.labels).filter(|(p, l)| p == l).count() as f64 / m.len() as f64;
        assert!(acc >= 0.99, "seed {seed}: accuracy {acc}");
    }
}

#[test]
fn mlp_training_is_bitwise_reproducible() {
    let m = blobs(9);
    let cfg = MlpConfig {
        max_epochs: 5,
        ..MlpConfig::default()
    };
    let a = train_mlp(&m, Some(&m), &cfg).unwrap();
    let b = train_mlp(&m, Some(&m), &cfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.history, b.history);
}
