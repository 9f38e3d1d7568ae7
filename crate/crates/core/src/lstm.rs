//! Stacked LSTM text classifier trained from scratch, and extraction of its
//! final-layer representation for ILC.
//!
//! Each layer runs the standard cell with gates ordered `i, f, g, o`:
//!
//! ```text
//! z_t = W x_t + U h_{t-1} + b
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```
//!
//! Only the first `length` timesteps of an encoded sequence are consumed, so
//! trailing padding never changes the state. The representation is the top
//! layer's hidden state at the last real timestep (or its mean over time with
//! [`Pooling::Mean`]); a linear layer plus softmax on top gives the
//! self-domain baseline classifier.
//!
//! Checkpoint tensor order (descriptor `lstm<L>`): `embedding [V, d]`, then
//! for each layer `k` from 1: `l<k>.w [4h, in]`, `l<k>.u [4h, h]`,
//! `l<k>.b [4h]`, then `head.w [2, h]`, `head.b [2]`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, Tensor};
use crate::corpus::{Document, Label};
use crate::error::{Error, Result};
use crate::eval::MetricsReport;
use crate::features::{EncoderId, RepresentationRecord};
use crate::mlp::decide;
use crate::optim::{gemv_acc, gemv_t_acc, log_softmax2, outer_acc, sigmoid, softmax2, Parameters};
use crate::rng::{self, Prng};
use crate::text::{encode, tokenize, EmbeddingTable, Encoded, Vocabulary, PAD};
use crate::train::{self, Dataset, EpochLog, FitConfig, Model};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Last,
    Mean,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    pub input_dim: usize,
    pub hidden: usize,
    /// `4h × input_dim`
    pub w: Vec<f64>,
    /// `4h × h`
    pub u: Vec<f64>,
    /// `4h`
    pub b: Vec<f64>,
}

impl LstmLayer {
    fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmLayer {
            input_dim,
            hidden,
            w: vec![0.0; 4 * hidden * input_dim],
            u: vec![0.0; 4 * hidden * hidden],
            b: vec![0.0; 4 * hidden],
        }
    }

    /// Uniform `±1/sqrt(h)` weights, zero biases except the forget slice at 1.
    fn init(input_dim: usize, hidden: usize, prng: &mut Prng) -> Self {
        let mut layer = Self::zeros(input_dim, hidden);
        let a = 1.0 / (hidden as f64).sqrt();
        layer.w.iter_mut().for_each(|x| *x = rng::uniform(prng, -a, a));
        layer.u.iter_mut().for_each(|x| *x = rng::uniform(prng, -a, a));
        layer.b[hidden..2 * hidden].fill(1.0);
        layer
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmEncoderParams {
    pub embedding: EmbeddingTable,
    pub layers: Vec<LstmLayer>,
    pub pooling: Pooling,
}

impl LstmEncoderParams {
    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.hidden)
    }
}

/// Encoder plus the linear classification head used for baseline training.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmClassifier {
    pub encoder: LstmEncoderParams,
    /// `2 × h`
    pub head_w: Vec<f64>,
    pub head_b: Vec<f64>,
    /// Inverted dropout on the representation during training.
    pub dropout: f64,
}

impl Parameters for LstmClassifier {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.encoder.embedding.data];
        for l in &self.encoder.layers {
            out.extend([l.w.as_slice(), &l.u, &l.b]);
        }
        out.extend([self.head_w.as_slice(), &self.head_b]);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.encoder.embedding.data];
        for l in &mut self.encoder.layers {
            out.extend([l.w.as_mut_slice(), &mut l.u, &mut l.b]);
        }
        out.extend([self.head_w.as_mut_slice(), &mut self.head_b]);
        out
    }
}

/// Activations of one layer over a sequence, row-major `T × ...`.
struct LayerTrace {
    /// Activated gates `i, f, g, o`, `T × 4h`.
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

impl LstmClassifier {
    pub fn zeros(vocab_size: usize, embed_dim: usize, hidden: usize, layers: usize, pooling: Pooling) -> Self {
        let mut stack = Vec::with_capacity(layers);
        for k in 0..layers {
            let input = if k == 0 { embed_dim } else { hidden };
            stack.push(LstmLayer::zeros(input, hidden));
        }
        LstmClassifier {
            encoder: LstmEncoderParams {
                embedding: EmbeddingTable::zeros(vocab_size, embed_dim),
                layers: stack,
                pooling,
            },
            head_w: vec![0.0; 2 * hidden],
            head_b: vec![0.0; 2],
            dropout: 0.0,
        }
    }

    pub fn init(vocab_size: usize, embed_dim: usize, hidden: usize, layers: usize, pooling: Pooling, prng: &mut Prng) -> Self {
        let embedding = EmbeddingTable::init(vocab_size, embed_dim, prng);
        let stack = (0..layers)
            .map(|k| LstmLayer::init(if k == 0 { embed_dim } else { hidden }, hidden, prng))
            .collect();
        let a = 1.0 / (hidden as f64).sqrt();
        let head_w = (0..2 * hidden).map(|_| rng::uniform(prng, -a, a)).collect();
        LstmClassifier {
            encoder: LstmEncoderParams {
                embedding,
                layers: stack,
                pooling,
            },
            head_w,
            head_b: vec![0.0; 2],
            dropout: 0.0,
        }
    }

    fn zeros_like(&self) -> Self {
        let e = &self.encoder;
        let mut z = LstmClassifier::zeros(e.embedding.rows, e.embedding.dim, e.output_dim(), e.layers.len(), e.pooling);
        z.dropout = self.dropout;
        z
    }

    fn hidden(&self) -> usize {
        self.encoder.output_dim()
    }

    fn run(&self, tokens: &[usize]) -> Vec<LayerTrace> {
        let steps = tokens.len();
        let mut traces: Vec<LayerTrace> = Vec::with_capacity(self.encoder.layers.len());
        for layer in &self.encoder.layers {
            let h = layer.hidden;
            let mut tr = LayerTrace {
                gates: vec![0.0; steps * 4 * h],
                c: vec![0.0; steps * h],
                tanh_c: vec![0.0; steps * h],
                h: vec![0.0; steps * h],
            };
            let mut z = vec![0.0; 4 * h];
            for (t, &token) in tokens.iter().enumerate().take(steps) {
                let x = match traces.last() {
                    None => self.encoder.embedding.row(token),
                    Some(below) => &below.h[t * layer.input_dim..(t + 1) * layer.input_dim],
                };
                z.copy_from_slice(&layer.b);
                gemv_acc(&mut z, &layer.w, layer.input_dim, x);
                if t > 0 {
                    gemv_acc(&mut z, &layer.u, h, &tr.h[(t - 1) * h..t * h]);
                }
                let gates = &mut tr.gates[t * 4 * h..(t + 1) * 4 * h];
                for j in 0..h {
                    gates[j] = sigmoid(z[j]);
                    gates[h + j] = sigmoid(z[h + j]);
                    gates[2 * h + j] = z[2 * h + j].tanh();
                    gates[3 * h + j] = sigmoid(z[3 * h + j]);
                }
                for j in 0..h {
                    let c_prev = if t > 0 { tr.c[(t - 1) * h + j] } else { 0.0 };
                    let c = gates[h + j] * c_prev + gates[j] * gates[2 * h + j];
                    let tc = c.tanh();
                    tr.c[t * h + j] = c;
                    tr.tanh_c[t * h + j] = tc;
                    tr.h[t * h + j] = gates[3 * h + j] * tc;
                }
            }
            traces.push(tr);
        }
        traces
    }

    fn pool(&self, top: &LayerTrace, steps: usize) -> Vec<f64> {
        let h = self.hidden();
        match self.encoder.pooling {
            Pooling::Last => top.h[(steps - 1) * h..steps * h].to_vec(),
            Pooling::Mean => {
                let mut out = vec![0.0; h];
                for t in 0..steps {
                    out.iter_mut().zip(&top.h[t * h..(t + 1) * h]).for_each(|(o, x)| *o += x);
                }
                out.iter_mut().for_each(|o| *o /= steps as f64);
                out
            }
        }
    }

    fn check_tokens<'a>(&self, seq: &'a Encoded) -> Result<&'a [usize]> {
        if seq.length == 0 {
            return Err(Error::InvalidArgument("cannot encode an empty sequence".into()));
        }
        let tokens = &seq.indices[..seq.length];
        if let Some(&bad) = tokens.iter().find(|&&i| i >= self.encoder.embedding.rows) {
            return Err(Error::InvalidArgument(format!(
                "token index {bad} outside vocabulary of {}",
                self.encoder.embedding.rows
            )));
        }
        Ok(tokens)
    }

    pub fn represent(&self, seq: &Encoded) -> Result<Vec<f64>> {
        let tokens = self.check_tokens(seq)?;
        let traces = self.run(tokens);
        Ok(self.pool(traces.last().expect("at least one layer"), tokens.len()))
    }

    pub fn logits(&self, seq: &Encoded) -> Result<[f64; 2]> {
        let r = self.represent(seq)?;
        let mut out = [self.head_b[0], self.head_b[1]];
        gemv_acc(&mut out, &self.head_w, self.hidden(), &r);
        Ok(out)
    }

    /// Back-propagates `d_rep` through time into `grad`.
    fn backward(&self, tokens: &[usize], traces: &[LayerTrace], d_rep: &[f64], grad: &mut LstmClassifier) {
        let steps = tokens.len();
        let top_h = self.hidden();
        let mut d_out = vec![0.0; steps * top_h];
        match self.encoder.pooling {
            Pooling::Last => d_out[(steps - 1) * top_h..].copy_from_slice(d_rep),
            Pooling::Mean => {
                for t in 0..steps {
                    for j in 0..top_h {
                        d_out[t * top_h + j] = d_rep[j] / steps as f64;
                    }
                }
            }
        }

        for k in (0..self.encoder.layers.len()).rev() {
            let layer = &self.encoder.layers[k];
            let g_layer = &mut grad.encoder.layers[k];
            let tr = &traces[k];
            let (h, n_in) = (layer.hidden, layer.input_dim);
            let mut d_below = vec![0.0; if k > 0 { steps * n_in } else { 0 }];
            let mut dh_next = vec![0.0; h];
            let mut dc_next = vec![0.0; h];
            let mut dz = vec![0.0; 4 * h];
            let mut dx = vec![0.0; n_in];
            let zeros = vec![0.0; h];

            for t in (0..steps).rev() {
                let gates = &tr.gates[t * 4 * h..(t + 1) * 4 * h];
                let c_prev = if t > 0 { &tr.c[(t - 1) * h..t * h] } else { &zeros[..] };
                let h_prev = if t > 0 { &tr.h[(t - 1) * h..t * h] } else { &zeros[..] };
                for j in 0..h {
                    let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                    let tc = tr.tanh_c[t * h + j];
                    let dh = d_out[t * h + j] + dh_next[j];
                    let dc = dc_next[j] + dh * o * (1.0 - tc * tc);
                    dz[j] = dc * g * i * (1.0 - i);
                    dz[h + j] = dc * c_prev[j] * f * (1.0 - f);
                    dz[2 * h + j] = dc * i * (1.0 - g * g);
                    dz[3 * h + j] = dh * tc * o * (1.0 - o);
                    dc_next[j] = dc * f;
                }
                let x = if k == 0 {
                    self.encoder.embedding.row(tokens[t])
                } else {
                    &traces[k - 1].h[t * n_in..(t + 1) * n_in]
                };
                outer_acc(&mut g_layer.w, &dz, x);
                if t > 0 {
                    outer_acc(&mut g_layer.u, &dz, h_prev);
                }
                g_layer.b.iter_mut().zip(&dz).for_each(|(b, d)| *b += d);

                dh_next.fill(0.0);
                gemv_t_acc(&mut dh_next, &layer.u, h, &dz);
                dx.fill(0.0);
                gemv_t_acc(&mut dx, &layer.w, n_in, &dz);
                if k > 0 {
                    d_below[t * n_in..(t + 1) * n_in].copy_from_slice(&dx);
                } else if tokens[t] != PAD {
                    let row = grad.encoder.embedding.row_mut(tokens[t]);
                    row.iter_mut().zip(&dx).for_each(|(r, d)| *r += d);
                }
            }
            if k > 0 {
                d_out = d_below;
            }
        }
    }

    /// Weighted mean cross-entropy of the head over `batch` and its gradient.
    /// `dropout_rng` is only drawn from when `self.dropout > 0`.
    pub fn batch_loss_and_grad(&self, data: &SequenceSet, batch: &[usize], class_weights: [f64; 2], dropout_rng: &mut Prng) -> (f64, LstmClassifier) {
        let mut grad = self.zeros_like();
        let h = self.hidden();
        let scale = 1.0 / batch.len() as f64;
        let keep = 1.0 - self.dropout;
        let mut loss = 0.0;
        for &n in batch {
            let seq = &data.seqs[n];
            let y = data.labels[n];
            let w = class_weights[y.index()];
            let tokens = &seq.indices[..seq.length];
            let traces = self.run(tokens);
            let rep = self.pool(traces.last().expect("at least one layer"), tokens.len());
            let mask: Vec<f64> = if self.dropout > 0.0 {
                (0..h).map(|_| if rng::unit(dropout_rng) < keep { 1.0 / keep } else { 0.0 }).collect()
            } else {
                vec![1.0; h]
            };
            let dropped: Vec<f64> = rep.iter().zip(&mask).map(|(r, m)| r * m).collect();
            let mut logits = [self.head_b[0], self.head_b[1]];
            gemv_acc(&mut logits, &self.head_w, h, &dropped);
            loss += -w * log_softmax2(logits)[y.index()];

            let mut dlogits = softmax2(logits);
            dlogits[y.index()] -= 1.0;
            dlogits.iter_mut().for_each(|d| *d *= w * scale);
            outer_acc(&mut grad.head_w, &dlogits, &dropped);
            grad.head_b[0] += dlogits[0];
            grad.head_b[1] += dlogits[1];
            let mut d_rep = vec![0.0; h];
            gemv_t_acc(&mut d_rep, &self.head_w, h, &dlogits);
            d_rep.iter_mut().zip(&mask).for_each(|(d, m)| *d *= m);
            self.backward(tokens, &traces, &d_rep, &mut grad);
        }
        (loss * scale, grad)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let e = &self.encoder;
        let mut tensors = vec![Tensor::from_f64("embedding", &[e.embedding.rows, e.embedding.dim], &e.embedding.data)];
        for (k, l) in e.layers.iter().enumerate() {
            let n = k + 1;
            tensors.push(Tensor::from_f64(&format!("l{n}.w"), &[4 * l.hidden, l.input_dim], &l.w));
            tensors.push(Tensor::from_f64(&format!("l{n}.u"), &[4 * l.hidden, l.hidden], &l.u));
            tensors.push(Tensor::from_f64(&format!("l{n}.b"), &[4 * l.hidden], &l.b));
        }
        tensors.push(Tensor::from_f64("head.w", &[2, self.hidden()], &self.head_w));
        tensors.push(Tensor::from_f64("head.b", &[2], &self.head_b));
        Checkpoint {
            descriptor: format!("lstm{}", e.layers.len()),
            tensors,
        }
    }

    pub fn from_checkpoint(mut ckpt: Checkpoint, pooling: Pooling) -> Result<Self> {
        let layers: usize = ckpt
            .descriptor
            .strip_prefix("lstm")
            .and_then(|n| n.parse().ok())
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Format(format!("not an lstm checkpoint: {:?}", ckpt.descriptor)))?;
        let emb_shape = ckpt
            .tensors
            .iter()
            .find(|t| t.name == "embedding")
            .map(|t| t.shape.clone())
            .filter(|s| s.len() == 2)
            .ok_or_else(|| Error::Format("checkpoint lacks the embedding".into()))?;
        let hidden = ckpt
            .tensors
            .iter()
            .find(|t| t.name == "l1.u")
            .and_then(|t| t.shape.get(1).copied())
            .ok_or_else(|| Error::Format("checkpoint lacks l1.u".into()))?;
        let (rows, dim) = (emb_shape[0], emb_shape[1]);
        let mut model = LstmClassifier::zeros(rows, dim, hidden, layers, pooling);
        model.encoder.embedding.data = ckpt.take("embedding", &[rows, dim])?;
        for (k, l) in model.encoder.layers.iter_mut().enumerate() {
            let n = k + 1;
            l.w = ckpt.take(&format!("l{n}.w"), &[4 * hidden, l.input_dim])?;
            l.u = ckpt.take(&format!("l{n}.u"), &[4 * hidden, hidden])?;
            l.b = ckpt.take(&format!("l{n}.b"), &[4 * hidden])?;
        }
        model.head_w = ckpt.take("head.w", &[2, hidden])?;
        model.head_b = ckpt.take("head.b", &[2])?;
        Ok(model)
    }
}

/// Representation of one encoded sequence under `params`.
pub fn lstm_forward(seq: &Encoded, params: &LstmEncoderParams) -> Result<Vec<f64>> {
    let model = LstmClassifier {
        encoder: params.clone(),
        head_w: vec![0.0; 2 * params.output_dim()],
        head_b: vec![0.0; 2],
        dropout: 0.0,
    };
    model.represent(seq)
}

/// Encoded sequences with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceSet {
    pub seqs: Vec<Encoded>,
    pub labels: Vec<Label>,
}

impl Dataset for SequenceSet {
    fn len(&self) -> usize {
        self.seqs.len()
    }

    fn label(&self, i: usize) -> Label {
        self.labels[i]
    }
}

impl SequenceSet {
    pub fn from_docs<'a>(docs: impl IntoIterator<Item = &'a Document>, vocab: &Vocabulary, max_len: usize) -> Result<Self> {
        let mut set = SequenceSet {
            seqs: Vec::new(),
            labels: Vec::new(),
        };
        for d in docs {
            let seq = encode(&tokenize(&d.text), vocab, max_len);
            if seq.length == 0 {
                return Err(Error::InvalidArgument(format!("document {:?} has no tokens", d.id)));
            }
            set.seqs.push(seq);
            set.labels.push(d.label);
        }
        Ok(set)
    }
}

impl Model for LstmClassifier {
    type Data = SequenceSet;

    fn loss_and_grad(&self, data: &SequenceSet, batch: &[usize], w: [f64; 2], prng: &mut Prng) -> (f64, Self) {
        self.batch_loss_and_grad(data, batch, w, prng)
    }

    fn predict(&self, data: &SequenceSet) -> Vec<Label> {
        data.seqs
            .iter()
            .map(|s| decide(self.logits(s).expect("sequences validated on construction")))
            .collect()
    }

    fn after_step(&mut self) {
        self.encoder.embedding.row_mut(PAD).fill(0.0);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub embed_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub max_len: usize,
    pub min_freq: usize,
    pub max_vocab: usize,
    pub pooling: Pooling,
    pub dropout: f64,
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub clip_norm: f64,
    pub class_weights: bool,
    pub seed: u64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            embed_dim: 100,
            hidden: 128,
            layers: 2,
            max_len: 256,
            min_freq: 2,
            max_vocab: 20_000,
            pooling: Pooling::Last,
            dropout: 0.0,
            lr: 1e-3,
            batch: 32,
            max_epochs: 30,
            patience: 3,
            clip_norm: 5.0,
            class_weights: true,
            seed: 0,
        }
    }
}

/// A trained classifier bundled with what is needed to encode raw text.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmEncoder {
    pub id: EncoderId,
    pub model: LstmClassifier,
    pub vocab: Vocabulary,
    pub config: LstmConfig,
}

impl LstmEncoder {
    pub fn encode_text(&self, text: &str) -> Encoded {
        encode(&tokenize(text), &self.vocab, self.config.max_len)
    }

    pub fn represent_text(&self, text: &str) -> Result<Vec<f64>> {
        self.model.represent(&self.encode_text(text))
    }

    pub fn predict_docs(&self, docs: &[&Document]) -> Result<Vec<Label>> {
        docs.iter().map(|d| Ok(decide(self.model.logits(&self.encode_text(&d.text))?))).collect()
    }

    pub fn output_dim(&self) -> usize {
        self.model.encoder.output_dim()
    }

    /// Writes `<path>` (ILCM), `<path>.json` (sidecar) and `<path>.vocab`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let vocab_path = vocab_path(path);
        self.vocab.save(&vocab_path)?;
        let sidecar = serde_json::json!({
            "format": "ILCM",
            "version": crate::checkpoint::VERSION,
            "architecture": format!("lstm{}", self.config.layers),
            "encoder_id": self.id.to_string(),
            "seed": self.config.seed,
            "hyperparameters": self.config,
            "vocab": vocab_path.file_name().map(|f| f.to_string_lossy().into_owned()),
        });
        self.model.to_checkpoint().save(path, &sidecar)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (ckpt, sidecar) = Checkpoint::load(path)?;
        let config: LstmConfig = serde_json::from_value(sidecar["hyperparameters"].clone())?;
        let id: EncoderId = sidecar["encoder_id"]
            .as_str()
            .ok_or_else(|| Error::Format("sidecar lacks encoder_id".into()))?
            .parse()?;
        let mut model = LstmClassifier::from_checkpoint(ckpt, config.pooling)?;
        model.dropout = config.dropout;
        let vocab = Vocabulary::load(vocab_path(path))?;
        if vocab.len() != model.encoder.embedding.rows {
            return Err(Error::Format(format!(
                "vocabulary has {} entries but the embedding has {} rows",
                vocab.len(),
                model.encoder.embedding.rows
            )));
        }
        Ok(LstmEncoder { id, model, vocab, config })
    }

    /// The encoder as it reads back from its checkpoint (f32 parameters).
    pub fn quantized(&self) -> Self {
        let mut model = LstmClassifier::from_checkpoint(self.model.to_checkpoint(), self.config.pooling).expect("own checkpoint is well formed");
        model.dropout = self.model.dropout;
        LstmEncoder { model, ..self.clone() }
    }
}

pub fn vocab_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".vocab");
    PathBuf::from(s)
}

#[derive(Clone, Debug)]
pub struct TrainedLstm {
    pub encoder: LstmEncoder,
    pub best_epoch: usize,
    pub history: Vec<EpochLog>,
    /// Metrics of the kept parameters on validation (or training) data.
    pub report: MetricsReport,
}

/// Builds the vocabulary from `train`, then trains the classifier with
/// early stopping on `val` F1.
pub fn train_lstm_baseline(train: &[&Document], val: &[&Document], domain: crate::corpus::Domain, cfg: &LstmConfig) -> Result<TrainedLstm> {
    if train.is_empty() {
        return Err(Error::Empty("training split is empty".into()));
    }
    if cfg.layers == 0 || cfg.hidden == 0 || cfg.embed_dim == 0 || cfg.max_len == 0 {
        return Err(Error::InvalidArgument("LSTM sizes must be positive".into()));
    }
    if !(0.0..1.0).contains(&cfg.dropout) {
        return Err(Error::InvalidArgument(format!("dropout {} outside [0, 1)", cfg.dropout)));
    }
    let vocab = Vocabulary::build(train.iter().copied(), cfg.min_freq, cfg.max_vocab)?;
    let train_set = SequenceSet::from_docs(train.iter().copied(), &vocab, cfg.max_len)?;
    train::require_both_classes(&train_set, "training data")?;
    let val_set = SequenceSet::from_docs(val.iter().copied(), &vocab, cfg.max_len)?;

    let mut init_rng = rng::seeded(rng::derive_seed(cfg.seed, "lstm:init"));
    let mut model = LstmClassifier::init(vocab.len(), cfg.embed_dim, cfg.hidden, cfg.layers, cfg.pooling, &mut init_rng);
    model.dropout = cfg.dropout;
    let fit_cfg = FitConfig {
        lr: cfg.lr,
        batch: cfg.batch,
        max_epochs: cfg.max_epochs,
        patience: cfg.patience,
        clip_norm: Some(cfg.clip_norm),
        class_weights: cfg.class_weights,
        seed: rng::derive_seed(cfg.seed, "lstm:batches"),
    };
    let out = train::fit(model, &train_set, Some(&val_set), &fit_cfg)?;
    Ok(TrainedLstm {
        encoder: LstmEncoder {
            id: EncoderId::new("lstm", domain, cfg.seed),
            model: out.model,
            vocab,
            config: cfg.clone(),
        },
        best_epoch: out.best_epoch,
        history: out.history,
        report: out.report,
    })
}

/// One record per document, tagged with the encoder's id. The documents may
/// come from any domain; each must already have a split.
pub fn extract_representations(docs: &[Document], encoder: &LstmEncoder) -> Result<Vec<RepresentationRecord>> {
    let encoder_id = encoder.id.to_string();
    docs.iter()
        .map(|d| {
            let split = d
                .split
                .ok_or_else(|| Error::InvalidArgument(format!("document {:?} has no split", d.id)))?;
            let rep = encoder.represent_text(&d.text)?;
            Ok(RepresentationRecord {
                doc_id: d.id.clone(),
                target_domain: d.domain,
                encoder_id: encoder_id.clone(),
                label: d.label,
                split,
                vec: rep.into_iter().map(|x| x as f32).collect(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(indices: &[usize], pad_to: usize) -> Encoded {
        let mut v = indices.to_vec();
        v.resize(pad_to, PAD);
        Encoded {
            indices: v,
            length: indices.len(),
        }
    }

    #[test]
    fn zero_weights_give_zero_representation() {
        let m = LstmClassifier::zeros(5, 3, 4, 2, Pooling::Last);
        let r = lstm_forward(&seq(&[2, 3, 4], 5), &m.encoder).unwrap();
        assert_eq!(r, vec![0.0; 4]);
    }

    #[test]
    fn single_step_single_unit_by_hand() {
        // one layer, h = 1, embed 1, token 2 has embedding 0.5
        let mut m = LstmClassifier::zeros(3, 1, 1, 1, Pooling::Last);
        m.encoder.embedding.data = vec![0.0, 0.0, 0.5];
        let l = &mut m.encoder.layers[0];
        l.w = vec![0.4, -0.3, 0.8, 1.2];
        l.b = vec![0.1, 1.0, -0.2, 0.3];
        let x: f64 = 0.5;
        let i = sigmoid(0.4 * x + 0.1);
        let g = (0.8 * x - 0.2).tanh();
        let o = sigmoid(1.2 * x + 0.3);
        let c = i * g;
        let expected = o * c.tanh();
        let r = lstm_forward(&seq(&[2], 1), &m.encoder).unwrap();
        assert!((r[0] - expected).abs() < 1e-15, "{} vs {expected}", r[0]);
    }

    #[test]
    fn trailing_padding_is_bitwise_invisible() {
        let m = LstmClassifier::init(10, 4, 3, 2, Pooling::Last, &mut rng::seeded(1));
        let a = lstm_forward(&seq(&[3, 4, 5], 3), &m.encoder).unwrap();
        let b = lstm_forward(&seq(&[3, 4, 5], 12), &m.encoder).unwrap();
        assert_eq!(a, b);
        let mean = LstmClassifier::init(10, 4, 3, 2, Pooling::Mean, &mut rng::seeded(1));
        assert_eq!(
            lstm_forward(&seq(&[3, 4], 2), &mean.encoder).unwrap(),
            lstm_forward(&seq(&[3, 4], 9), &mean.encoder).unwrap()
        );
    }

    #[test]
    fn empty_and_out_of_vocab_sequences_are_errors() {
        let m = LstmClassifier::init(4, 2, 2, 2, Pooling::Last, &mut rng::seeded(1));
        assert!(lstm_forward(&seq(&[], 3), &m.encoder).is_err());
        assert!(lstm_forward(&seq(&[9], 3), &m.encoder).is_err());
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let m = LstmClassifier::init(4, 2, 3, 2, Pooling::Last, &mut rng::seeded(1));
        for l in &m.encoder.layers {
            assert_eq!(&l.b[3..6], &[1.0, 1.0, 1.0]);
            assert!(l.b[..3].iter().chain(&l.b[6..]).all(|&b| b == 0.0));
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = LstmClassifier::init(7, 3, 2, 2, Pooling::Mean, &mut rng::seeded(5));
        let ckpt = m.to_checkpoint();
        assert_eq!(ckpt.descriptor, "lstm2");
        let names: Vec<&str> = ckpt.tensors.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ["embedding", "l1.w", "l1.u", "l1.b", "l2.w", "l2.u", "l2.b", "head.w", "head.b"]);
        let back = LstmClassifier::from_checkpoint(ckpt.clone(), Pooling::Mean).unwrap();
        assert_eq!(back.to_checkpoint(), ckpt);
    }
}
