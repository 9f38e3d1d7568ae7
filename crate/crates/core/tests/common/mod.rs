//! Oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use ilc::corpus::Label;
use ilc::features::FeatureMatrix;
use ilc::lstm::{LstmClassifier, Pooling, SequenceSet};
use ilc::mlp::MlpParams;
use ilc::optim::Parameters;
use ilc::rng::{self, Prng};
use ilc::text::Encoded;

pub const FD_EPS: f64 = 1e-5;

/// Per-tensor relative error `‖a − n‖ / max(‖a‖, ‖n‖)`, zero when both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Central differences of `loss` with respect to every parameter.
pub fn numeric_grad<P: Parameters + Clone>(params: &P, loss: impl Fn(&P) -> f64) -> Vec<Vec<f64>> {
    let mut probe = params.clone();
    let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let mut out = Vec::new();
    for (k, &len) in shapes.iter().enumerate() {
        let mut g = vec![0.0; len];
        for (i, gi) in g.iter_mut().enumerate() {
            let orig = probe.tensors()[k][i];
            probe.tensors_mut()[k][i] = orig + FD_EPS;
            let up = loss(&probe);
            probe.tensors_mut()[k][i] = orig - FD_EPS;
            let down = loss(&probe);
            probe.tensors_mut()[k][i] = orig;
            *gi = (up - down) / (2.0 * FD_EPS);
        }
        out.push(g);
    }
    out
}

/// Largest per-tensor relative error between analytic and numeric gradients.
pub fn worst_error<P: Parameters>(analytic: &P, numeric: &[Vec<f64>]) -> f64 {
    analytic
        .tensors()
        .iter()
        .zip(numeric)
        .map(|(a, n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

fn label(prng: &mut Prng) -> Label {
    if rng::below(prng, 2) == 1 {
        Label::Deceptive
    } else {
        Label::NonDeceptive
    }
}

/// Random small LSTM instance: h ≤ 4, T ≤ 5, random weights scaled up so the
/// gates leave their linear regime.
pub fn lstm_instance(seed: u64) -> (LstmClassifier, SequenceSet, Vec<usize>, [f64; 2]) {
    let mut prng = rng::seeded(seed);
    let vocab = 3 + rng::below(&mut prng, 5);
    let embed = 1 + rng::below(&mut prng, 3);
    let hidden = 1 + rng::below(&mut prng, 4);
    let layers = 1 + rng::below(&mut prng, 2);
    let pooling = if seed.is_multiple_of(2) { Pooling::Last } else { Pooling::Mean };
    let mut model = LstmClassifier::init(vocab, embed, hidden, layers, pooling, &mut prng);
    for t in model.tensors_mut() {
        for x in t.iter_mut() {
            *x = rng::uniform(&mut prng, -1.0, 1.0);
        }
    }
    model.encoder.embedding.row_mut(0).fill(0.0);
    let n = 1 + rng::below(&mut prng, 3);
    let max_len = 5;
    let mut seqs = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let length = 1 + rng::below(&mut prng, max_len);
        let mut indices: Vec<usize> = (0..length).map(|_| 1 + rng::below(&mut prng, vocab - 1)).collect();
        indices.resize(max_len, 0);
        seqs.push(Encoded { indices, length });
        labels.push(label(&mut prng));
    }
    let weights = [rng::uniform(&mut prng, 0.5, 2.0), rng::uniform(&mut prng, 0.5, 2.0)];
    let batch = (0..n).collect();
    (model, SequenceSet { seqs, labels }, batch, weights)
}

/// Worst relative error of the LSTM gradient on instance `seed`.
pub fn lstm_gradient_error(seed: u64) -> f64 {
    let (model, data, batch, w) = lstm_instance(seed);
    let mut prng = rng::seeded(0);
    let (_, analytic) = model.batch_loss_and_grad(&data, &batch, w, &mut prng);
    let numeric = numeric_grad(&model, |m| m.batch_loss_and_grad(&data, &batch, w, &mut rng::seeded(0)).0);
    worst_error(&analytic, &numeric)
}

pub fn mlp_instance(seed: u64) -> (MlpParams, FeatureMatrix, Vec<usize>, [f64; 2]) {
    let mut prng = rng::seeded(seed);
    let in_dim = 5;
    let hidden = 2 + rng::below(&mut prng, 5);
    let mut p = MlpParams::zeros(in_dim, hidden);
    for t in p.tensors_mut() {
        for x in t.iter_mut() {
            *x = rng::uniform(&mut prng, -1.0, 1.0);
        }
    }
    let n = 2 + rng::below(&mut prng, 6);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..in_dim).map(|_| rng::uniform(&mut prng, -2.0, 2.0)).collect())
        .collect();
    let labels = (0..n).map(|_| label(&mut prng)).collect();
    let m = FeatureMatrix::from_rows(rows, labels).unwrap();
    let weights = [rng::uniform(&mut prng, 0.5, 2.0), rng::uniform(&mut prng, 0.5, 2.0)];
    (p, m, (0..n).collect(), weights)
}

pub fn mlp_gradient_error(seed: u64) -> f64 {
    let (p, m, batch, w) = mlp_instance(seed);
    let (_, analytic) = p.batch_loss_and_grad(&m, &batch, w);
    let numeric = numeric_grad(&p, |q| q.batch_loss_and_grad(&m, &batch, w).0);
    worst_error(&analytic, &numeric)
}

/// Confusion cells `(tp, fp, fn, tn)` counted one sample at a time.
pub fn brute_force_counts(predictions: &[Label], labels: &[Label]) -> (usize, usize, usize, usize) {
    let mut cells = (0, 0, 0, 0);
    for (p, l) in predictions.iter().zip(labels) {
        match (p, l) {
            (Label::Deceptive, Label::Deceptive) => cells.0 += 1,
            (Label::Deceptive, Label::NonDeceptive) => cells.1 += 1,
            (Label::NonDeceptive, Label::Deceptive) => cells.2 += 1,
            (Label::NonDeceptive, Label::NonDeceptive) => cells.3 += 1,
        }
    }
    cells
}

pub fn random_labels(prng: &mut Prng, n: usize) -> Vec<Label> {
    (0..n).map(|_| label(prng)).collect()
}

/// Checks a report against direct counting; returns a description of the
/// first disagreement.
pub fn metric_oracle_mismatch(seed: u64) -> Option<String> {
    let mut prng = rng::seeded(seed);
    let n = 1 + rng::below(&mut prng, 200);
    let preds = random_labels(&mut prng, n);
    let labels = random_labels(&mut prng, n);
    let r = ilc::eval::compute_metrics(&preds, &labels).ok()?;
    let (tp, fp, fn_, tn) = brute_force_counts(&preds, &labels);
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let accuracy = (tp + tn) as f64 / n as f64;
    let got = (r.tp, r.fp, r.fn_, r.tn);
    if got != (tp, fp, fn_, tn) {
        return Some(format!("seed {seed}: counts {got:?} vs {:?}", (tp, fp, fn_, tn)));
    }
    if r.accuracy != accuracy || r.precision != precision || r.recall != recall || r.f1_positive != f1 {
        return Some(format!("seed {seed}: derived metrics differ"));
    }
    None
}

/// A store with `k` encoders of random widths over `n` documents of one
/// target domain, plus the encoder ids and their widths.
pub fn random_store(seed: u64) -> (ilc::features::FeatureStore, Vec<String>, Vec<usize>) {
    use ilc::corpus::{Domain, Split};
    use ilc::features::{FeatureStore, RepresentationRecord};
    let mut prng = rng::seeded(seed);
    let domains = [
        Domain::Email,
        Domain::News,
        Domain::Tweet,
        Domain::Sentiment,
        Domain::Newsgroup,
        Domain::Wikipedia,
    ];
    let k = 1 + rng::below(&mut prng, domains.len());
    let mut picked = domains.to_vec();
    rng::shuffle(&mut picked, &mut prng);
    let ids: Vec<String> = picked[..k].iter().map(|d| format!("lstm:{d}:{}", rng::below(&mut prng, 10))).collect();
    let dims: Vec<usize> = (0..k).map(|_| 1 + rng::below(&mut prng, 6)).collect();
    let n = 1 + rng::below(&mut prng, 12);
    let mut records = Vec::new();
    for i in 0..n {
        let l = label(&mut prng);
        let split = [Split::Train, Split::Val, Split::Test][rng::below(&mut prng, 3)];
        for (id, &d) in ids.iter().zip(&dims) {
            records.push(RepresentationRecord {
                doc_id: format!("doc{i:03}"),
                target_domain: Domain::Email,
                encoder_id: id.clone(),
                label: l,
                split,
                vec: (0..d).map(|_| rng::uniform(&mut prng, -3.0, 3.0) as f32).collect(),
            });
        }
    }
    rng::shuffle(&mut records, &mut prng);
    (FeatureStore::from_records(records).unwrap(), ids, dims)
}

/// Dimension additivity, slice identity and insertion-order independence of
/// concatenation for one random store and a random non-empty subset of its
/// encoders. Returns a description of the first violation.
pub fn ilc_structure_violation(seed: u64) -> Option<String> {
    use ilc::corpus::{Domain, Split};
    use ilc::features::{concat_ilc, FeatureStore, IlcSpec};
    let (store, ids, dims) = random_store(seed);
    let mut prng = rng::seeded(seed ^ 0x5eed);
    let mut chosen: Vec<usize> = (0..ids.len()).filter(|_| rng::below(&mut prng, 2) == 1).collect();
    if chosen.is_empty() {
        chosen.push(rng::below(&mut prng, ids.len()));
    }
    rng::shuffle(&mut chosen, &mut prng);
    let spec = IlcSpec::new(Domain::Email, chosen.iter().map(|&c| ids[c].clone()).collect()).unwrap();
    let mut reversed = store.records().to_vec();
    reversed.reverse();
    let other = FeatureStore::from_records(reversed).unwrap();
    for split in [Split::Train, Split::Val, Split::Test] {
        let m = match concat_ilc(&store, &spec, split) {
            Ok(m) => m,
            Err(ilc::Error::Empty(_)) => continue,
            Err(e) => return Some(format!("seed {seed}: {e}")),
        };
        let expected: usize = chosen.iter().map(|&c| dims[c]).sum();
        if m.dim != expected {
            return Some(format!("seed {seed}: width {} vs {expected}", m.dim));
        }
        for (i, doc) in m.doc_ids.iter().enumerate() {
            let mut offset = 0;
            for enc in &spec.encoder_ids {
                let stored = &store.get(doc, enc).unwrap().vec;
                let slice = &m.row(i)[offset..offset + stored.len()];
                if slice.iter().zip(stored).any(|(a, &b)| *a != b as f64) {
                    return Some(format!("seed {seed}: slice of {enc} for {doc} differs"));
                }
                offset += stored.len();
            }
        }
        if concat_ilc(&other, &spec, split).ok().as_ref() != Some(&m) {
            return Some(format!("seed {seed}: insertion order changed the result"));
        }
    }
    None
}

/// Removes two records from a three-encoder store and returns the pairs the
/// error names next to the pairs actually removed (in doc, encoder order).
pub type Pairs = Vec<(String, String)>;

pub fn missing_pairs_case() -> (Pairs, Pairs) {
    use ilc::corpus::{Domain, Split};
    use ilc::features::{concat_ilc, FeatureStore, IlcSpec, RepresentationRecord};
    let ids = ["lstm:Email:1", "lstm:News:1", "lstm:Tweet:1"];
    let mut records = Vec::new();
    for i in 0..5 {
        for id in ids {
            records.push(RepresentationRecord {
                doc_id: format!("d{i}"),
                target_domain: Domain::Email,
                encoder_id: id.into(),
                label: if i % 2 == 0 { Label::Deceptive } else { Label::NonDeceptive },
                split: Split::Test,
                vec: vec![i as f32, 1.0],
            });
        }
    }
    let removed = vec![
        ("d1".to_string(), "lstm:Tweet:1".to_string()),
        ("d3".to_string(), "lstm:News:1".to_string()),
    ];
    records.retain(|r| !removed.iter().any(|(d, e)| &r.doc_id == d && &r.encoder_id == e));
    let store = FeatureStore::from_records(records).unwrap();
    let spec = IlcSpec::canonical(Domain::Email, ids.iter().map(|s| s.to_string()).collect()).unwrap();
    let named = match concat_ilc(&store, &spec, Split::Test) {
        Err(ilc::Error::MissingRecords(pairs)) => pairs,
        other => panic!("expected missing records, got {other:?}"),
    };
    (named, removed)
}

pub fn random_matrix(prng: &mut Prng, n: usize, p: usize) -> FeatureMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|j| rng::uniform(prng, -1.0, 1.0) * (1.0 + j as f64)).collect())
        .collect();
    let labels = (0..n).map(|i| if i % 2 == 0 { Label::Deceptive } else { Label::NonDeceptive }).collect();
    FeatureMatrix::from_rows(rows, labels).unwrap()
}

/// Largest disagreement between the centered 2-D projection of a random
/// 50×10 matrix and a dense eigendecomposition of its scatter matrix: basis
/// vectors up to sign, singular values, and projected coordinates.
pub fn svd_oracle_error(seed: u64) -> f64 {
    use ilc::projection::{svd_project, ProjectionMode};
    use nalgebra::{DMatrix, SymmetricEigen};
    let mut prng = rng::seeded(seed);
    let (n, p) = (50, 10);
    let m = random_matrix(&mut prng, n, p);
    let proj = svd_project(&m, ProjectionMode::Centered).unwrap();

    let x = DMatrix::from_row_slice(n, p, &m.data);
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - mean[j]);
    let eig = SymmetricEigen::new(centered.transpose() * &centered);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut worst = 0.0f64;
    for (k, &col) in order.iter().enumerate().take(2) {
        let v = eig.eigenvectors.column(col);
        let sign = if v.dot(&nalgebra::DVector::from_column_slice(&proj.basis[k])) < 0.0 {
            -1.0
        } else {
            1.0
        };
        for j in 0..p {
            worst = worst.max((sign * v[j] - proj.basis[k][j]).abs());
        }
        worst = worst.max((eig.eigenvalues[col].sqrt() - proj.singular_values[k]).abs());
        for i in 0..n {
            let coord = sign * centered.row(i).dot(&v.transpose());
            let got = if k == 0 { proj.points[i].x } else { proj.points[i].y };
            worst = worst.max((coord - got).abs());
        }
    }
    worst
}

/// Points on a random 2-D plane inside a `p`-dimensional space, offset
/// from the origin; centered projection must keep all pairwise distances.
pub fn rank2_distance_error(seed: u64) -> f64 {
    use ilc::projection::{svd_project, ProjectionMode};
    let mut prng = rng::seeded(seed);
    let n = 5 + rng::below(&mut prng, 40);
    let p = 3 + rng::below(&mut prng, 12);
    let dirs: Vec<Vec<f64>> = (0..2).map(|_| (0..p).map(|_| rng::uniform(&mut prng, -1.0, 1.0)).collect()).collect();
    let offset: Vec<f64> = (0..p).map(|_| rng::uniform(&mut prng, -5.0, 5.0)).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let (a, b) = (rng::uniform(&mut prng, -3.0, 3.0), rng::uniform(&mut prng, -3.0, 3.0));
            (0..p).map(|j| offset[j] + a * dirs[0][j] + b * dirs[1][j]).collect()
        })
        .collect();
    let labels = (0..n).map(|i| if i % 2 == 0 { Label::Deceptive } else { Label::NonDeceptive }).collect();
    let m = FeatureMatrix::from_rows(rows.clone(), labels).unwrap();
    let proj = svd_project(&m, ProjectionMode::Centered).unwrap();
    let mut worst = (proj.captured_fraction() - 1.0).abs();
    for i in 0..n {
        for j in 0..i {
            let full: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let (a, b) = (&proj.points[i], &proj.points[j]);
            let flat = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
            worst = worst.max((full - flat).abs());
        }
    }
    worst
}

/// Experiment config text for three synthetic domains written by
/// `ilc::synthetic::write_synthetic` into the same directory.
pub fn synthetic_experiment_text(seed: u64, combinations: &str, projection: bool, epochs: usize) -> String {
    use ilc::Domain;
    let mut text = format!("[experiment]\nseed = {seed}\noutput = run\n\n");
    for d in [Domain::Email, Domain::News, Domain::Tweet] {
        let lower = d.name().to_lowercase();
        text += &format!("[corpus.{d}]\npath = {lower}.jsonl\nformat = jsonl\n\n");
        text +=
            &format!("[encoder.{lower}]\ndomain = {d}\nembed_dim = 16\nhidden = 16\nmax_len = 40\nepochs = {epochs}\npatience = 3\nlr = 0.01\n\n");
    }
    text += "[head]\nlr = 0.003\nepochs = 60\npatience = 8\n\n";
    if !combinations.is_empty() {
        text += &format!("[ilc]\ncombinations = {combinations}\n\n");
    }
    text += &format!("[projection]\nenabled = {projection}\n");
    text
}

/// Writes synthetic corpora and a config into `dir`; returns the config path.
pub fn write_synthetic_experiment(
    dir: &std::path::Path,
    seed: u64,
    docs: usize,
    combinations: &str,
    projection: bool,
    epochs: usize,
) -> std::path::PathBuf {
    use ilc::synthetic::{write_synthetic, SyntheticConfig};
    use ilc::Domain;
    let syn = SyntheticConfig {
        docs_per_domain: docs,
        seed,
        ..SyntheticConfig::default()
    };
    write_synthetic(dir, &[Domain::Email, Domain::News, Domain::Tweet], &syn).unwrap();
    let path = dir.join("experiment.conf");
    std::fs::write(&path, synthetic_experiment_text(seed, combinations, projection, epochs)).unwrap();
    path
}
