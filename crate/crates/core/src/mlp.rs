//! Two-layer fully connected classifier: `softmax(W2·relu(W1·x + b1) + b2)`.
//!
//! Used on concatenated ILC features and on single-encoder features.
//! Checkpoint tensor order: `w1 [hidden, in]`, `b1 [hidden]`, `w2 [2, hidden]`,
//! `b2 [2]`, descriptor `mlp2`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, Tensor};
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::eval::MetricsReport;
use crate::features::FeatureMatrix;
use crate::optim::{gemv_acc, gemv_t_acc, log_softmax2, outer_acc, softmax2, Parameters};
use crate::rng::{self, Prng};
use crate::train::{self, Dataset, EpochLog, FitConfig, Model};

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub in_dim: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Parameters for MlpParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

impl Dataset for FeatureMatrix {
    fn len(&self) -> usize {
        self.rows()
    }

    fn label(&self, i: usize) -> Label {
        self.labels[i]
    }
}

/// Default hidden width: `min(256, in_dim)`.
pub fn default_hidden(in_dim: usize) -> usize {
    in_dim.clamp(1, 256)
}

impl MlpParams {
    pub fn zeros(in_dim: usize, hidden: usize) -> Self {
        MlpParams {
            in_dim,
            hidden,
            w1: vec![0.0; hidden * in_dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; 2 * hidden],
            b2: vec![0.0; 2],
        }
    }

    /// He-uniform weights (`±sqrt(6 / fan_in)`), zero biases.
    pub fn init(in_dim: usize, hidden: usize, prng: &mut Prng) -> Self {
        let mut p = Self::zeros(in_dim, hidden);
        let a1 = (6.0 / in_dim as f64).sqrt();
        p.w1.iter_mut().for_each(|w| *w = rng::uniform(prng, -a1, a1));
        let a2 = (6.0 / hidden as f64).sqrt();
        p.w2.iter_mut().for_each(|w| *w = rng::uniform(prng, -a2, a2));
        p
    }

    fn hidden_pre(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.b1.clone();
        gemv_acc(&mut z, &self.w1, self.in_dim, x);
        z
    }

    pub fn logits(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.in_dim {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim,
                got: x.len(),
            });
        }
        let a: Vec<f64> = self.hidden_pre(x).into_iter().map(|v| v.max(0.0)).collect();
        let mut out = [self.b2[0], self.b2[1]];
        gemv_acc(&mut out, &self.w2, self.hidden, &a);
        Ok(out)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            descriptor: "mlp2".into(),
            tensors: vec![
                Tensor::from_f64("w1", &[self.hidden, self.in_dim], &self.w1),
                Tensor::from_f64("b1", &[self.hidden], &self.b1),
                Tensor::from_f64("w2", &[2, self.hidden], &self.w2),
                Tensor::from_f64("b2", &[2], &self.b2),
            ],
        }
    }

    pub fn from_checkpoint(mut ckpt: Checkpoint) -> Result<Self> {
        if ckpt.descriptor != "mlp2" {
            return Err(Error::Format(format!("expected an mlp2 checkpoint, got {:?}", ckpt.descriptor)));
        }
        let shape = ckpt
            .tensors
            .first()
            .filter(|t| t.shape.len() == 2)
            .map(|t| (t.shape[0], t.shape[1]))
            .ok_or_else(|| Error::Format("mlp2 checkpoint lacks w1".into()))?;
        let (hidden, in_dim) = shape;
        Ok(MlpParams {
            in_dim,
            hidden,
            w1: ckpt.take("w1", &[hidden, in_dim])?,
            b1: ckpt.take("b1", &[hidden])?,
            w2: ckpt.take("w2", &[2, hidden])?,
            b2: ckpt.take("b2", &[2])?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>, sidecar: &serde_json::Value) -> Result<()> {
        self.to_checkpoint().save(path, sidecar)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, serde_json::Value)> {
        let (ckpt, side) = Checkpoint::load(path)?;
        Ok((Self::from_checkpoint(ckpt)?, side))
    }

    /// Parameters as they read back from a checkpoint (f32 precision).
    pub fn quantized(&self) -> Self {
        Self::from_checkpoint(self.to_checkpoint()).expect("own checkpoint is well formed")
    }
}

/// Class probabilities `(p_nondeceptive, p_deceptive)`.
pub fn mlp_forward(x: &[f64], params: &MlpParams) -> Result<[f64; 2]> {
    Ok(softmax2(params.logits(x)?))
}

/// `-ln p(label)` from probabilities.
pub fn cross_entropy(probs: [f64; 2], label: Label) -> f64 {
    -probs[label.index()].ln()
}

/// `-ln softmax(logits)[label]` through log-sum-exp.
pub fn cross_entropy_logits(logits: [f64; 2], label: Label) -> f64 {
    -log_softmax2(logits)[label.index()]
}

/// Deceptive iff its logit is strictly larger.
pub fn decide(logits: [f64; 2]) -> Label {
    if logits[1] > logits[0] {
        Label::Deceptive
    } else {
        Label::NonDeceptive
    }
}

impl MlpParams {
    /// Weighted mean loss over rows `batch` of `data` and its gradient.
    pub fn batch_loss_and_grad(&self, data: &FeatureMatrix, batch: &[usize], class_weights: [f64; 2]) -> (f64, MlpParams) {
        let mut g = MlpParams::zeros(self.in_dim, self.hidden);
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for &i in batch {
            let x = data.row(i);
            let y = data.labels[i];
            let w = class_weights[y.index()];
            let z = self.hidden_pre(x);
            let a: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
            let mut logits = [self.b2[0], self.b2[1]];
            gemv_acc(&mut logits, &self.w2, self.hidden, &a);
            loss += w * cross_entropy_logits(logits, y);

            let p = softmax2(logits);
            let mut dlogits = p;
            dlogits[y.index()] -= 1.0;
            dlogits.iter_mut().for_each(|d| *d *= w * scale);
            outer_acc(&mut g.w2, &dlogits, &a);
            g.b2[0] += dlogits[0];
            g.b2[1] += dlogits[1];

            let mut da = vec![0.0; self.hidden];
            gemv_t_acc(&mut da, &self.w2, self.hidden, &dlogits);
            for (d, &zi) in da.iter_mut().zip(&z) {
                if zi <= 0.0 {
                    *d = 0.0;
                }
            }
            outer_acc(&mut g.w1, &da, x);
            g.b1.iter_mut().zip(&da).for_each(|(b, d)| *b += d);
        }
        (loss * scale, g)
    }
}

impl Model for MlpParams {
    type Data = FeatureMatrix;

    fn loss_and_grad(&self, data: &FeatureMatrix, batch: &[usize], w: [f64; 2], _: &mut Prng) -> (f64, Self) {
        self.batch_loss_and_grad(data, batch, w)
    }

    fn predict(&self, data: &FeatureMatrix) -> Vec<Label> {
        (0..data.rows())
            .map(|i| decide(self.logits(data.row(i)).expect("matrix width checked before training")))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// `None` selects `min(256, in_dim)`.
    pub hidden: Option<usize>,
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub class_weights: bool,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: None,
            lr: 1e-3,
            batch: 64,
            max_epochs: 100,
            patience: 5,
            class_weights: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainedMlp {
    pub params: MlpParams,
    pub best_epoch: usize,
    pub history: Vec<EpochLog>,
    pub report: MetricsReport,
}

pub fn train_mlp(train: &FeatureMatrix, val: Option<&FeatureMatrix>, cfg: &MlpConfig) -> Result<TrainedMlp> {
    if train.dim == 0 {
        return Err(Error::InvalidArgument("feature matrix has zero width".into()));
    }
    if let Some(v) = val {
        if v.dim != train.dim {
            return Err(Error::DimensionMismatch {
                expected: train.dim,
                got: v.dim,
            });
        }
    }
    let hidden = cfg.hidden.unwrap_or_else(|| default_hidden(train.dim));
    let mut prng = rng::seeded(cfg.seed);
    let init = MlpParams::init(train.dim, hidden, &mut prng);
    let fit_cfg = FitConfig {
        lr: cfg.lr,
        batch: cfg.batch,
        max_epochs: cfg.max_epochs,
        patience: cfg.patience,
        clip_norm: None,
        class_weights: cfg.class_weights,
        seed: rng::derive_seed(cfg.seed, "mlp:batches"),
    };
    let out = train::fit(init, train, val, &fit_cfg)?;
    Ok(TrainedMlp {
        params: out.model,
        best_epoch: out.best_epoch,
        history: out.history,
        report: out.report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::Parameters;

    #[test]
    fn zero_network_is_uniform() {
        let p = MlpParams::zeros(3, 2);
        assert_eq!(mlp_forward(&[1.0, -2.0, 5.0], &p).unwrap(), [0.5, 0.5]);
        let ce = cross_entropy([0.5, 0.5], Label::Deceptive);
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(cross_entropy([0.0, 1.0], Label::Deceptive), 0.0);
        assert!((cross_entropy_logits([0.0, 0.0], Label::NonDeceptive) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn hand_set_two_by_two_by_two() {
        // x = (1, 2); W1 = [[1, -1], [0.5, 0.5]], b1 = (0, -1)
        // z = (-1, 0.5), a = (0, 0.5)
        // W2 = [[1, 2], [-1, 3]], b2 = (0.1, -0.1) -> logits = (1.1, 1.4)
        let p = MlpParams {
            in_dim: 2,
            hidden: 2,
            w1: vec![1.0, -1.0, 0.5, 0.5],
            b1: vec![0.0, -1.0],
            w2: vec![1.0, 2.0, -1.0, 3.0],
            b2: vec![0.1, -0.1],
        };
        let probs = mlp_forward(&[1.0, 2.0], &p).unwrap();
        let e0 = 1.1f64.exp();
        let e1 = 1.4f64.exp();
        assert!((probs[0] - e0 / (e0 + e1)).abs() < 1e-15);
        assert!((probs[1] - e1 / (e0 + e1)).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(mlp_forward(&[1.0], &MlpParams::zeros(2, 2)).is_err());
    }

    #[test]
    fn batch_loss_is_mean_of_sample_losses() {
        let p = MlpParams::init(3, 4, &mut rng::seeded(2));
        let m = FeatureMatrix::from_rows(
            vec![vec![1.0, 0.0, -1.0], vec![0.5, 0.5, 0.5], vec![-2.0, 1.0, 0.0]],
            vec![Label::Deceptive, Label::NonDeceptive, Label::Deceptive],
        )
        .unwrap();
        let (batch, _) = p.batch_loss_and_grad(&m, &[0, 1, 2], [1.0, 1.0]);
        let sum: f64 = (0..3).map(|i| cross_entropy(mlp_forward(m.row(i), &p).unwrap(), m.labels[i])).sum();
        assert!((batch - sum / 3.0).abs() < 1e-12);
    }

    #[test]
    fn argmax_ignores_common_logit_shift() {
        for (a, b) in [(0.3, -0.2), (-1.0, 4.0), (2.0, 2.0)] {
            assert_eq!(decide([a, b]), decide([a + 17.5, b + 17.5]));
        }
    }

    #[test]
    fn checkpoint_round_trip_is_f32_exact() {
        let p = MlpParams::init(5, 3, &mut rng::seeded(9));
        let q = p.quantized();
        assert_eq!(q.quantized(), q);
        for (a, b) in p.tensors().iter().zip(q.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 10.0, 1.0]).collect();
        let labels = (0..40).map(|i| if i < 20 { Label::NonDeceptive } else { Label::Deceptive }).collect();
        let m = FeatureMatrix::from_rows(rows, labels).unwrap();
        let cfg = MlpConfig {
            lr: 0.0,
            max_epochs: 3,
            seed: 4,
            ..Default::default()
        };
        let trained = train_mlp(&m, None, &cfg).unwrap();
        let init = MlpParams::init(2, 2, &mut rng::seeded(4));
        assert_eq!(trained.params, init);
    }

    #[test]
    fn single_class_is_rejected() {
        let m = FeatureMatrix::from_rows(vec![vec![1.0], vec![2.0]], vec![Label::Deceptive; 2]).unwrap();
        assert!(matches!(train_mlp(&m, None, &MlpConfig::default()), Err(Error::SingleClass(_))));
    }
}
