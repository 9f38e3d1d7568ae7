//! Synthetic multi-domain corpora with a known cross-domain signal.
//!
//! Every domain has its own Zipf-distributed topic vocabulary plus a small
//! set of shared filler words. Deceptive documents additionally carry one or
//! two marker tokens. Markers are split into one group per domain and a
//! domain draws a larger share of its markers from its own group. A model
//! trained on one domain sees each foreign marker only a few times and
//! learns it poorly, while the encoder of the domain that owns the group
//! has seen it often. That is the situation in which concatenating other
//! domains' representations should help.

use std::fs;
use std::path::{Path, PathBuf};

use crate::corpus::{Document, Domain, Label};
use crate::error::{Error, Result};
use crate::rng::{self, derive_seed, Prng};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub docs_per_domain: usize,
    /// Marker tokens in total, split evenly over the domains.
    pub markers: usize,
    /// Probability that a marker comes from the domain's own group.
    pub own_marker_prob: f64,
    pub topic_words: usize,
    /// Zipf exponent for topic words.
    pub topic_zipf: f64,
    pub shared_words: usize,
    /// Probability that a filler position takes a shared word.
    pub shared_prob: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub deceptive_frac: f64,
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            docs_per_domain: 2000,
            markers: 150,
            own_marker_prob: 0.5,
            topic_words: 1000,
            topic_zipf: 1.0,
            shared_words: 50,
            shared_prob: 0.3,
            min_len: 12,
            max_len: 24,
            deceptive_frac: 0.5,
            label_noise: 0.05,
            seed: 0,
        }
    }
}

/// Cumulative Zipf weights for sampling by binary search.
fn zipf_cdf(n: usize, s: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = (1..=n)
        .map(|r| {
            acc += (r as f64).powf(-s);
            acc
        })
        .collect();
    cdf.iter_mut().for_each(|c| *c /= acc);
    cdf
}

fn draw(cdf: &[f64], prng: &mut Prng) -> usize {
    let u = rng::unit(prng);
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn marker(i: usize) -> String {
    format!("mk{i}")
}

/// Documents of one domain. `group` selects its own marker group among
/// `groups`.
pub fn synthetic_domain(domain: Domain, group: usize, groups: usize, cfg: &SyntheticConfig) -> Result<Vec<Document>> {
    if groups == 0 || group >= groups || cfg.markers < groups {
        return Err(Error::InvalidArgument("marker groups do not fit the marker count".into()));
    }
    if cfg.min_len == 0 || cfg.max_len < cfg.min_len || cfg.topic_words == 0 {
        return Err(Error::InvalidArgument("document lengths and vocabulary must be positive".into()));
    }
    let mut prng = rng::seeded(derive_seed(cfg.seed, &format!("synthetic:{domain}")));
    let cdf = zipf_cdf(cfg.topic_words, cfg.topic_zipf);
    let per_group = cfg.markers / groups;
    // Each domain ranks its topic words differently.
    let mut topic_rank: Vec<usize> = (0..cfg.topic_words).collect();
    rng::shuffle(&mut topic_rank, &mut prng);
    let prefix = domain.letter().to_ascii_lowercase();

    let mut docs = Vec::with_capacity(cfg.docs_per_domain);
    for i in 0..cfg.docs_per_domain {
        let deceptive = rng::unit(&mut prng) < cfg.deceptive_frac;
        let len = cfg.min_len + rng::below(&mut prng, cfg.max_len - cfg.min_len + 1);
        let mut tokens: Vec<String> = (0..len)
            .map(|_| {
                if cfg.shared_words > 0 && rng::unit(&mut prng) < cfg.shared_prob {
                    format!("s{}", rng::below(&mut prng, cfg.shared_words))
                } else {
                    format!("{prefix}w{}", topic_rank[draw(&cdf, &mut prng)])
                }
            })
            .collect();
        if deceptive {
            let count = 1 + rng::below(&mut prng, 2);
            for _ in 0..count {
                let g = if groups == 1 || rng::unit(&mut prng) < cfg.own_marker_prob {
                    group
                } else {
                    let other = rng::below(&mut prng, groups - 1);
                    if other >= group {
                        other + 1
                    } else {
                        other
                    }
                };
                let m = marker(g * per_group + rng::below(&mut prng, per_group));
                let pos = rng::below(&mut prng, tokens.len() + 1);
                tokens.insert(pos, m);
            }
        }
        let mut label = if deceptive { Label::Deceptive } else { Label::NonDeceptive };
        if rng::unit(&mut prng) < cfg.label_noise {
            label = if deceptive { Label::NonDeceptive } else { Label::Deceptive };
        }
        docs.push(Document {
            id: format!("{prefix}{i:05}"),
            domain,
            text: tokens.join(" "),
            label,
            split: None,
        });
    }
    Ok(docs)
}

/// One corpus per domain, domain `k` owning marker group `k`.
pub fn synthetic_corpora(domains: &[Domain], cfg: &SyntheticConfig) -> Result<Vec<Vec<Document>>> {
    domains
        .iter()
        .enumerate()
        .map(|(k, &d)| synthetic_domain(d, k, domains.len(), cfg))
        .collect()
}

/// Writes each corpus as `<dir>/<domain>.jsonl` with string labels, the raw
/// input format of [`crate::corpus::load_corpus`].
pub fn write_synthetic(dir: impl AsRef<Path>, domains: &[Domain], cfg: &SyntheticConfig) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let mut paths = Vec::new();
    for (docs, d) in synthetic_corpora(domains, cfg)?.iter().zip(domains) {
        let path = dir.join(format!("{}.jsonl", d.name().to_lowercase()));
        let mut out = String::new();
        for doc in docs {
            let line = serde_json::json!({"id": doc.id, "text": doc.text, "label": doc.label.as_str()});
            out.push_str(&line.to_string());
            out.push('\n');
        }
        fs::write(&path, out).map_err(Error::io(&path))?;
        paths.push(path);
    }
    Ok(paths)
}
