//! Train encoders on two domains, apply both to the first domain's texts,
//! and concatenate their representations.
//!
//! cargo run --release --example extract_concat

use ilc::corpus::{docs_in_split, split_corpus, Split};
use ilc::features::{concat_ilc, FeatureStore, IlcSpec};
use ilc::lstm::{extract_representations, train_lstm_baseline, LstmConfig};
use ilc::synthetic::{synthetic_corpora, SyntheticConfig};
use ilc::Domain;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let syn = SyntheticConfig {
        docs_per_domain: 600,
        ..SyntheticConfig::default()
    };
    let corpora = synthetic_corpora(&[Domain::Email, Domain::News], &syn)?;
    let mut store = FeatureStore::new();
    let mut ids = Vec::new();
    let email = split_corpus(corpora[0].clone(), 0.8, 0.2, 3)?;
    for (k, (docs, domain)) in corpora.into_iter().zip([Domain::Email, Domain::News]).enumerate() {
        let docs = split_corpus(docs, 0.8, 0.2, 3)?;
        let cfg = LstmConfig {
            embed_dim: 8,
            hidden: 8 + 4 * k,
            max_len: 40,
            max_epochs: 3,
            lr: 0.01,
            seed: 3,
            ..LstmConfig::default()
        };
        let trained = train_lstm_baseline(&docs_in_split(&docs, Split::Train), &docs_in_split(&docs, Split::Val), domain, &cfg)?;
        store.extend(extract_representations(&email, &trained.encoder)?)?;
        ids.push(trained.encoder.id.to_string());
    }
    let spec = IlcSpec::canonical(Domain::Email, ids)?;
    for split in [Split::Train, Split::Val, Split::Test] {
        let m = concat_ilc(&store, &spec, split)?;
        println!(
            "{} {:<5} {} rows x {} columns, blocks {:?}",
            spec.name(),
            split.as_str(),
            m.rows(),
            m.dim,
            m.blocks
        );
    }
    Ok(())
}
