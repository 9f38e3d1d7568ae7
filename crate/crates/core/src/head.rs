//! The classifier head over concatenated representations: training from a
//! store, optional z-scoring with training statistics, and a checkpoint that
//! carries everything needed to evaluate it later.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Domain, Split};
use crate::error::{Error, Result};
use crate::eval::{compute_metrics, MetricsReport};
use crate::features::{concat_ilc, feature_stats, standardize, FeatureMatrix, FeatureStore, IlcSpec};
use crate::mlp::{train_mlp, MlpConfig, MlpParams, TrainedMlp};
use crate::train::{EpochLog, Model};

/// Column statistics used to z-score inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Zscore {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct HeadSidecar {
    target_domain: Domain,
    encoder_ids: Vec<String>,
    zscore: Option<Zscore>,
    best_epoch: usize,
    history: Vec<EpochLog>,
    val_report: MetricsReport,
    config: MlpConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Head {
    pub spec: IlcSpec,
    pub params: MlpParams,
    pub zscore: Option<Zscore>,
    pub best_epoch: usize,
    pub history: Vec<EpochLog>,
    /// Validation metrics of the kept parameters (training metrics when
    /// there is no validation split).
    pub val_report: MetricsReport,
    pub config: MlpConfig,
}

/// Concatenated features for one split, z-scored when statistics are given.
pub fn head_matrix(store: &FeatureStore, spec: &IlcSpec, split: Split, zscore: Option<&Zscore>) -> Result<FeatureMatrix> {
    let mut m = concat_ilc(store, spec, split)?;
    if let Some(z) = zscore {
        if z.mean.len() != m.dim {
            return Err(Error::DimensionMismatch {
                expected: z.mean.len(),
                got: m.dim,
            });
        }
        let stats = crate::features::FeatureStats {
            mean: z.mean.clone(),
            std: z.std.clone(),
            centroids: [None, None],
        };
        standardize(&mut m, &stats);
    }
    Ok(m)
}

fn has_split(store: &FeatureStore, spec: &IlcSpec, split: Split) -> bool {
    let first = &spec.encoder_ids[0];
    store
        .records()
        .iter()
        .any(|r| r.split == split && r.target_domain == spec.target_domain && &r.encoder_id == first)
}

/// Trains a head on the Train split, early-stopping on Val when present.
/// The returned parameters are the ones a checkpoint would reload.
pub fn fit_head(store: &FeatureStore, spec: &IlcSpec, cfg: &MlpConfig, zscore: bool) -> Result<Head> {
    let raw_train = concat_ilc(store, spec, Split::Train)?;
    let z = if zscore {
        let stats = feature_stats(&raw_train)?;
        Some(Zscore {
            mean: stats.mean,
            std: stats.std,
        })
    } else {
        None
    };
    let train = head_matrix(store, spec, Split::Train, z.as_ref())?;
    let val = if has_split(store, spec, Split::Val) {
        Some(head_matrix(store, spec, Split::Val, z.as_ref())?)
    } else {
        None
    };
    let TrainedMlp {
        params,
        best_epoch,
        history,
        report,
    } = train_mlp(&train, val.as_ref(), cfg)?;
    Ok(Head {
        spec: spec.clone(),
        params: params.quantized(),
        zscore: z,
        best_epoch,
        history,
        val_report: report,
        config: cfg.clone(),
    })
}

impl Head {
    pub fn evaluate(&self, store: &FeatureStore, split: Split) -> Result<MetricsReport> {
        let m = head_matrix(store, &self.spec, split, self.zscore.as_ref())?;
        if m.dim != self.params.in_dim {
            return Err(Error::DimensionMismatch {
                expected: self.params.in_dim,
                got: m.dim,
            });
        }
        compute_metrics(&self.params.predict(&m), &m.labels)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let side = HeadSidecar {
            target_domain: self.spec.target_domain,
            encoder_ids: self.spec.encoder_ids.clone(),
            zscore: self.zscore.clone(),
            best_epoch: self.best_epoch,
            history: self.history.clone(),
            val_report: self.val_report.clone(),
            config: self.config.clone(),
        };
        self.params.save(path, &serde_json::to_value(side)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (params, side) = MlpParams::load(path)?;
        let side: HeadSidecar = serde_json::from_value(side)?;
        Ok(Head {
            spec: IlcSpec::new(side.target_domain, side.encoder_ids)?,
            params,
            zscore: side.zscore,
            best_epoch: side.best_epoch,
            history: side.history,
            val_report: side.val_report,
            config: side.config,
        })
    }
}
