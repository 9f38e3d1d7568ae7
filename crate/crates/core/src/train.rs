//! Mini-batch Adam with early stopping on validation F1, shared by the LSTM
//! baseline and the FC head. Single-threaded, so a fixed seed gives the same
//! parameters bit for bit.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::eval::{compute_metrics, MetricsReport};
use crate::optim::{clip_global_norm, Adam, Parameters};
use crate::rng::{self, Prng};

pub trait Dataset {
    fn len(&self) -> usize;
    fn label(&self, i: usize) -> Label;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn labels(&self) -> Vec<Label> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }
}

pub trait Model: Parameters + Clone {
    type Data: Dataset;

    /// Weighted mean cross-entropy over `batch` and its gradient.
    fn loss_and_grad(&self, data: &Self::Data, batch: &[usize], class_weights: [f64; 2], rng: &mut Prng) -> (f64, Self);

    fn predict(&self, data: &Self::Data) -> Vec<Label>;

    /// Hook run after every optimizer step.
    fn after_step(&mut self) {}
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub clip_norm: Option<f64>,
    pub class_weights: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_f1: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct FitOutcome<M> {
    pub model: M,
    /// 1-based epoch whose parameters were kept; 0 means the initial ones.
    pub best_epoch: usize,
    pub history: Vec<EpochLog>,
    /// Metrics of the kept parameters on the validation set, or on the
    /// training set when there is no validation set.
    pub report: MetricsReport,
}

/// Inverse-frequency weights `n / (2 n_c)`, or ones when disabled.
pub fn class_weights<D: Dataset>(data: &D, enabled: bool) -> [f64; 2] {
    if !enabled {
        return [1.0, 1.0];
    }
    let mut counts = [0usize; 2];
    for i in 0..data.len() {
        counts[data.label(i).index()] += 1;
    }
    let n = data.len() as f64;
    counts.map(|c| if c == 0 { 0.0 } else { n / (2.0 * c as f64) })
}

pub fn require_both_classes<D: Dataset>(data: &D, what: &str) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Empty(format!("{what} is empty")));
    }
    let first = data.label(0);
    if (1..data.len()).all(|i| data.label(i) == first) {
        return Err(Error::SingleClass(what.to_string()));
    }
    Ok(())
}

pub fn fit<M: Model>(mut model: M, train: &M::Data, val: Option<&M::Data>, cfg: &FitConfig) -> Result<FitOutcome<M>> {
    require_both_classes(train, "training data")?;
    if cfg.batch == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let val = val.filter(|v| !v.is_empty());
    let weights = class_weights(train, cfg.class_weights);
    let mut prng = rng::seeded(cfg.seed);
    let mut adam = Adam::new(cfg.lr);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let score = |m: &M| -> Result<MetricsReport> {
        match val {
            Some(v) => compute_metrics(&m.predict(v), &v.labels()),
            None => compute_metrics(&m.predict(train), &train.labels()),
        }
    };

    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_f1 = f64::NEG_INFINITY;
    let mut stale = 0;
    let mut history = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        rng::shuffle(&mut order, &mut prng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch) {
            let (loss, mut grads) = model.loss_and_grad(train, batch, weights, &mut prng);
            loss_sum += loss * batch.len() as f64;
            if let Some(max) = cfg.clip_norm {
                clip_global_norm(&mut grads, max);
            }
            adam.step(&mut model, &grads);
            model.after_step();
        }
        if !model.all_finite() {
            return Err(Error::InvalidArgument(format!(
                "parameters diverged to non-finite values in epoch {epoch}"
            )));
        }
        let train_loss = loss_sum / train.len() as f64;

        match val {
            Some(v) => {
                let f1 = compute_metrics(&model.predict(v), &v.labels())?.f1_positive;
                history.push(EpochLog {
                    epoch,
                    train_loss,
                    val_f1: Some(f1),
                });
                if f1 > best_f1 {
                    best_f1 = f1;
                    best = model.clone();
                    best_epoch = epoch;
                    stale = 0;
                } else {
                    stale += 1;
                    if stale >= cfg.patience {
                        break;
                    }
                }
            }
            None => {
                history.push(EpochLog {
                    epoch,
                    train_loss,
                    val_f1: None,
                });
                best = model.clone();
                best_epoch = epoch;
            }
        }
    }

    let report = score(&best)?;
    Ok(FitOutcome {
        model: best,
        best_epoch,
        history,
        report,
    })
}
