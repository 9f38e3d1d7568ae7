//! End-to-end runs driven by an [`ExperimentConfig`].
//!
//! Stages, in order: `corpus` (load, sample, split, persist), `encoder`
//! (train or ingest), `extract` (every encoder over every target corpus),
//! `head` (one classifier per table cell), `eval` (metrics and tables) and
//! `project` (2-D views of the test split).
//!
//! Each stage instance writes into `<cache>/<stage>/<key>/`, where the key
//! hashes the stage's settings, the keys of its inputs and the tool version.
//! A directory that already holds a completion marker is reused. Work in
//! progress lives in `<key>.partial` and is renamed to `<key>.stale` if the
//! stage fails. Trained models are always read back from their checkpoints
//! before use, so a cached run sees exactly the values a cold run sees.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{CorpusSpec, EncoderKind, EncoderSpec, ExperimentConfig};
use crate::corpus::{docs_in_split, load_corpus, sample_corpus, split_corpus, write_corpus, Document, Domain, Format, LabelMap, LoadReport, Split};
use crate::error::{Error, Result};
use crate::eval::{compute_metrics, render_table, MetricsReport, ReportGrid};
use crate::features::{concat_ilc, read_store, write_store, FeatureStore, IlcSpec, RepresentationRecord};
use crate::head::{fit_head, Head};
use crate::lstm::{extract_representations, train_lstm_baseline, LstmEncoder};
use crate::mlp::MlpConfig;
use crate::projection::{centroid_distance, centroid_distance_full, emit_scatter, separation_change, svd_project};
use crate::rng::derive_seed;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const CACHE_ENV: &str = "ILC_CACHE_DIR";
pub const BASELINE: &str = "Baseline";
const DONE_MARKER: &str = ".complete";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides both the default `<output>/cache` and `ILC_CACHE_DIR`.
    pub cache_dir: Option<PathBuf>,
    /// Recompute every stage even when a cached result exists.
    pub force: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Cached,
    Cold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub key: String,
    pub status: StageStatus,
    pub artifacts: Vec<PathBuf>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub output: PathBuf,
    pub cache: PathBuf,
    pub stages: Vec<StageRecord>,
    /// Report files copied into the output directory.
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn all_cached(&self) -> bool {
        self.stages.iter().all(|s| s.status == StageStatus::Cached)
    }
}

/// One table cell's settings and result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub column: String,
    pub encoder_ids: Vec<String>,
    pub report: MetricsReport,
    /// Best epoch of the model behind the cell.
    pub best_epoch: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetResult {
    pub domain: Domain,
    pub cells: Vec<CellResult>,
    pub best_f1: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub config_hash: String,
    pub tool_version: String,
    pub primary_metric: String,
    pub class_weights: bool,
    pub zscore: bool,
    pub columns: Vec<String>,
    pub targets: Vec<TargetResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSummary {
    pub domain: Domain,
    pub baseline_encoders: Vec<String>,
    pub augmented_encoders: Vec<String>,
    /// Centroid distance in the 2-D projection.
    pub baseline_distance: f64,
    pub augmented_distance: f64,
    /// Headline: relative change of the 2-D distance, in percent.
    pub separation_change: Option<f64>,
    pub baseline_distance_full: f64,
    pub augmented_distance_full: f64,
    pub separation_change_full: Option<f64>,
    pub baseline_captured_variance: f64,
    pub augmented_captured_variance: f64,
}

fn hash_parts(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    h.update(TOOL_VERSION.as_bytes());
    for p in parts {
        h.update([0u8]);
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(Error::io(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    Ok(serde_json::from_str(&text)?)
}

struct Cache {
    root: PathBuf,
    force: bool,
}

impl Cache {
    /// Runs `produce` into a fresh directory unless a completed one exists.
    fn stage(&self, name: &str, kind: &str, key: &str, produce: impl FnOnce(&Path) -> Result<()>) -> Result<(PathBuf, StageRecord)> {
        let start = Instant::now();
        let base = self.root.join(kind);
        let dir = base.join(key);
        let status = if !self.force && dir.join(DONE_MARKER).is_file() {
            StageStatus::Cached
        } else {
            let partial = base.join(format!("{key}.partial"));
            let stale = base.join(format!("{key}.stale"));
            let io = |p: &Path| Error::io(p.to_path_buf());
            if partial.exists() {
                fs::remove_dir_all(&partial).map_err(io(&partial))?;
            }
            fs::create_dir_all(&partial).map_err(io(&partial))?;
            if let Err(e) = produce(&partial) {
                if stale.exists() {
                    let _ = fs::remove_dir_all(&stale);
                }
                let _ = fs::rename(&partial, &stale);
                return Err(e.in_stage(name));
            }
            fs::write(partial.join(DONE_MARKER), name).map_err(io(&partial))?;
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(io(&dir))?;
            }
            fs::rename(&partial, &dir).map_err(io(&dir))?;
            StageStatus::Cold
        };
        let artifacts = list_files(&dir)?;
        Ok((
            dir,
            StageRecord {
                name: name.to_string(),
                key: key.to_string(),
                status,
                artifacts,
                seconds: start.elapsed().as_secs_f64(),
            },
        ))
    }
}

fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(Error::io(dir))? {
        let entry = entry.map_err(Error::io(dir))?;
        let path = entry.path();
        if path.is_file() && entry.file_name() != DONE_MARKER {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn resolve_cache_dir(cfg: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    if let Some(dir) = &opts.cache_dir {
        return dir.clone();
    }
    match std::env::var_os(CACHE_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.output.join("cache"),
    }
}

struct PreparedCorpus {
    key: String,
    docs: Vec<Document>,
}

fn label_map_fingerprint(spec: &CorpusSpec) -> Result<String> {
    if spec.label_map.starts_with("builtin:") {
        Ok(spec.label_map.clone())
    } else {
        hash_file(Path::new(&spec.label_map))
    }
}

/// Load, sample and split one corpus; the prepared file is the stage output.
pub fn prepare_corpus(spec: &CorpusSpec, domain: Domain, master_seed: u64) -> Result<(Vec<Document>, LoadReport)> {
    let map = LabelMap::resolve(&spec.label_map)?;
    let (docs, report) = load_corpus(&spec.path, spec.format, &map, domain)?;
    let docs = match spec.sample_n {
        Some(n) => sample_corpus(&docs, n, derive_seed(master_seed, &format!("sample:{domain}")))?,
        None => docs,
    };
    let docs = split_corpus(docs, spec.train_frac, spec.val_frac, derive_seed(master_seed, &format!("split:{domain}")))?;
    Ok((docs, report))
}

fn corpus_stage(cache: &Cache, cfg: &ExperimentConfig, domain: Domain, spec: &CorpusSpec) -> Result<(PreparedCorpus, StageRecord)> {
    let name = format!("corpus:{domain}");
    let key = hash_parts(&[
        &name,
        &hash_file(&spec.path).map_err(|e| e.in_stage(&name))?,
        &format!("{:?}", spec.format),
        &label_map_fingerprint(spec).map_err(|e| e.in_stage(&name))?,
        &format!("{:?}", spec.sample_n),
        &spec.train_frac.to_string(),
        &spec.val_frac.to_string(),
        &cfg.seed.to_string(),
    ]);
    let (dir, rec) = cache.stage(&name, "corpus", &key, |out| {
        let (docs, report) = prepare_corpus(spec, domain, cfg.seed)?;
        write_corpus(out.join("corpus.jsonl"), &docs)?;
        let skipped: Vec<_> = report
            .skipped
            .iter()
            .map(|s| serde_json::json!({"row": s.row, "reason": s.reason}))
            .collect();
        write_json(
            &out.join("load_report.json"),
            &serde_json::json!({"loaded": report.loaded, "skipped": skipped, "kept": docs.len()}),
        )
    })?;
    let (docs, _) = load_corpus(dir.join("corpus.jsonl"), Format::Jsonl, &LabelMap::binary(), domain).map_err(|e| e.in_stage(&name))?;
    Ok((PreparedCorpus { key, docs }, rec))
}

enum LoadedEncoder {
    Lstm(Box<LstmEncoder>),
    External(FeatureStore),
}

struct EncoderState {
    key: String,
    model: LoadedEncoder,
}

fn encoder_stage(cache: &Cache, spec: &EncoderSpec, corpora: &BTreeMap<Domain, PreparedCorpus>) -> Result<(EncoderState, StageRecord)> {
    let name = format!("encoder:{}", spec.label);
    match &spec.kind {
        EncoderKind::Lstm(lstm_cfg) => {
            let corpus = corpora
                .get(&spec.domain())
                .ok_or_else(|| Error::Config(format!("no corpus for {}", spec.domain())).in_stage(&name))?;
            let key = hash_parts(&[&name, &spec.id.to_string(), &serde_json::to_string(lstm_cfg)?, &corpus.key]);
            let (dir, rec) = cache.stage(&name, "encoder", &key, |out| {
                let train = docs_in_split(&corpus.docs, Split::Train);
                let val = docs_in_split(&corpus.docs, Split::Val);
                let trained = train_lstm_baseline(&train, &val, spec.domain(), lstm_cfg)?;
                trained.encoder.save(out.join("encoder.ilcm"))?;
                write_json(
                    &out.join("training.json"),
                    &serde_json::json!({
                        "best_epoch": trained.best_epoch,
                        "history": trained.history,
                        "val_report": trained.report,
                    }),
                )
            })?;
            let enc = LstmEncoder::load(dir.join("encoder.ilcm")).map_err(|e| e.in_stage(&name))?;
            Ok((
                EncoderState {
                    key,
                    model: LoadedEncoder::Lstm(Box::new(enc)),
                },
                rec,
            ))
        }
        EncoderKind::External { features } => {
            let mut parts = vec![name.clone(), spec.id.to_string()];
            for f in features {
                parts.push(hash_file(f).map_err(|e| e.in_stage(&name))?);
            }
            let key = hash_parts(&parts.iter().map(String::as_str).collect::<Vec<_>>());
            let id = spec.id.to_string();
            let (dir, rec) = cache.stage(&name, "encoder", &key, |out| {
                let mut store = FeatureStore::new();
                for f in features {
                    let part = read_store(f)?;
                    if let Some(other) = part.records().iter().find(|r| r.encoder_id != id) {
                        return Err(Error::Format(format!(
                            "{} holds records of encoder {} but the config declares {id}",
                            f.display(),
                            other.encoder_id
                        )));
                    }
                    store.extend(part.into_records())?;
                }
                write_store(out.join("features.ilcf"), store.records())
            })?;
            let store = read_store(dir.join("features.ilcf")).map_err(|e| e.in_stage(&name))?;
            Ok((
                EncoderState {
                    key,
                    model: LoadedEncoder::External(store),
                },
                rec,
            ))
        }
    }
}

/// Records of an external encoder for one target corpus, re-tagged with the
/// corpus' splits so every encoder sees the same partition.
fn align_external(store: &FeatureStore, encoder_id: &str, docs: &[Document]) -> Result<Vec<RepresentationRecord>> {
    let mut missing = Vec::new();
    let mut out = Vec::with_capacity(docs.len());
    for d in docs {
        match store.get(&d.id, encoder_id) {
            None => missing.push((d.id.clone(), encoder_id.to_string())),
            Some(r) if r.target_domain != d.domain => missing.push((d.id.clone(), encoder_id.to_string())),
            Some(r) => {
                if r.label != d.label {
                    return Err(Error::LabelDisagreement(d.id.clone()));
                }
                let mut r = r.clone();
                r.split = d.split.expect("prepared corpora carry splits");
                out.push(r);
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingRecords(missing));
    }
    Ok(out)
}

fn extract_stage(
    cache: &Cache,
    spec: &EncoderSpec,
    enc: &EncoderState,
    target: Domain,
    corpus: &PreparedCorpus,
) -> Result<(String, FeatureStore, StageRecord)> {
    let name = format!("extract:{}:{target}", spec.label);
    let key = hash_parts(&[&name, &enc.key, &corpus.key]);
    let (dir, rec) = cache.stage(&name, "extract", &key, |out| {
        let records = match &enc.model {
            LoadedEncoder::Lstm(e) => extract_representations(&corpus.docs, e)?,
            LoadedEncoder::External(store) => align_external(store, &spec.id.to_string(), &corpus.docs)?,
        };
        write_store(out.join("features.ilcf"), &records)
    })?;
    let store = read_store(dir.join("features.ilcf")).map_err(|e| e.in_stage(&name))?;
    Ok((key, store, rec))
}

/// A table column for one target: encoder labels, in config order.
#[derive(Clone, Debug)]
struct Cell {
    target: Domain,
    column: String,
    labels: Vec<String>,
}

/// Columns are the baseline plus every combination that contains the
/// target's self encoder; a combination of the self encoder alone is the
/// baseline.
fn plan_cells(cfg: &ExperimentConfig) -> (Vec<String>, Vec<Cell>) {
    let mut columns = vec![BASELINE.to_string()];
    let mut cells = Vec::new();
    for &target in &cfg.targets {
        let self_label = cfg.self_encoder(target).expect("validated").label.clone();
        cells.push(Cell {
            target,
            column: BASELINE.into(),
            labels: vec![self_label.clone()],
        });
        for combo in &cfg.combinations {
            if !combo.contains(&self_label) || combo.len() == 1 {
                continue;
            }
            let ids: Vec<String> = combo.iter().map(|l| cfg.encoder(l).expect("validated").id.to_string()).collect();
            let name = IlcSpec::canonical(target, ids).expect("validated").name();
            if cells.iter().any(|c: &Cell| c.target == target && c.column == name) {
                continue;
            }
            if !columns.contains(&name) {
                columns.push(name.clone());
            }
            cells.push(Cell {
                target,
                column: name,
                labels: combo.clone(),
            });
        }
    }
    (columns, cells)
}

struct Extracted {
    key: String,
    store: FeatureStore,
}

fn merged_store(
    cfg: &ExperimentConfig,
    extracted: &BTreeMap<(String, Domain), Extracted>,
    target: Domain,
    labels: &[String],
) -> Result<(FeatureStore, IlcSpec, Vec<String>)> {
    let mut store = FeatureStore::new();
    let mut ids = Vec::new();
    let mut keys = Vec::new();
    for l in labels {
        let ex = &extracted[&(l.clone(), target)];
        store.extend(ex.store.records().iter().cloned())?;
        ids.push(cfg.encoder(l).expect("validated").id.to_string());
        keys.push(ex.key.clone());
    }
    Ok((store, IlcSpec::canonical(target, ids)?, keys))
}

fn head_stage(
    cache: &Cache,
    cfg: &ExperimentConfig,
    cell: &Cell,
    encoders: &BTreeMap<String, EncoderState>,
    corpora: &BTreeMap<Domain, PreparedCorpus>,
    extracted: &BTreeMap<(String, Domain), Extracted>,
) -> Result<(CellResult, StageRecord)> {
    let name = format!("head:{}:{}", cell.target, cell.column);
    let self_enc = &encoders[&cell.labels[0]];
    let (store, spec, keys) = merged_store(cfg, extracted, cell.target, &cell.labels).map_err(|e| e.in_stage(&name))?;

    // The LSTM baseline is the encoder's own classifier.
    if let (true, LoadedEncoder::Lstm(enc)) = (cell.column == BASELINE, &self_enc.model) {
        let corpus = &corpora[&cell.target];
        let key = hash_parts(&[&name, &self_enc.key, &corpus.key]);
        let (dir, rec) = cache.stage(&name, "head", &key, |out| {
            let test = docs_in_split(&corpus.docs, Split::Test);
            let preds = enc.predict_docs(&test)?;
            let labels: Vec<_> = test.iter().map(|d| d.label).collect();
            let report = compute_metrics(&preds, &labels)?;
            write_json(
                &out.join("report.json"),
                &CellResult {
                    column: cell.column.clone(),
                    encoder_ids: spec.encoder_ids.clone(),
                    report,
                    best_epoch: 0,
                },
            )
        })?;
        let mut result: CellResult = read_json(&dir.join("report.json")).map_err(|e| e.in_stage(&name))?;
        result.best_epoch = lstm_best_epoch(cache, &self_enc.key)?;
        return Ok((result, rec));
    }

    let mlp_cfg = MlpConfig {
        seed: derive_seed(cfg.seed, &format!("head:{}:{}", cell.target, cell.column)),
        ..cfg.head.mlp.clone()
    };
    let mut parts = vec![name.clone(), serde_json::to_string(&mlp_cfg)?, cfg.head.zscore.to_string()];
    parts.extend(spec.encoder_ids.iter().cloned());
    parts.extend(keys);
    let key = hash_parts(&parts.iter().map(String::as_str).collect::<Vec<_>>());
    let (dir, rec) = cache.stage(&name, "head", &key, |out| {
        let head = fit_head(&store, &spec, &mlp_cfg, cfg.head.zscore)?;
        head.save(out.join("head.ilcm"))?;
        let loaded = Head::load(out.join("head.ilcm"))?;
        let report = loaded.evaluate(&store, Split::Test)?;
        write_json(
            &out.join("report.json"),
            &CellResult {
                column: cell.column.clone(),
                encoder_ids: spec.encoder_ids.clone(),
                report,
                best_epoch: loaded.best_epoch,
            },
        )
    })?;
    let result = read_json(&dir.join("report.json")).map_err(|e| e.in_stage(&name))?;
    Ok((result, rec))
}

fn lstm_best_epoch(cache: &Cache, encoder_key: &str) -> Result<usize> {
    let path = cache.root.join("encoder").join(encoder_key).join("training.json");
    let v: serde_json::Value = read_json(&path)?;
    Ok(v["best_epoch"].as_u64().unwrap_or(0) as usize)
}

fn build_metrics(cfg: &ExperimentConfig, columns: &[String], results: &[(Domain, CellResult)]) -> Result<(MetricsFile, ReportGrid)> {
    let mut targets = Vec::new();
    let mut grid_cells = Vec::new();
    for &target in &cfg.targets {
        let mine: Vec<&CellResult> = results.iter().filter(|(d, _)| *d == target).map(|(_, c)| c).collect();
        let base = mine
            .iter()
            .find(|c| c.column == BASELINE)
            .expect("baseline cell is always planned")
            .report
            .clone();
        let mut row: Vec<Option<MetricsReport>> = vec![None; columns.len()];
        let mut cells = Vec::new();
        for c in mine {
            let mut c = c.clone();
            c.report = c.report.with_baseline(BASELINE, &base);
            let j = columns.iter().position(|n| *n == c.column).expect("planned column");
            row[j] = Some(c.report.clone());
            cells.push(c);
        }
        grid_cells.push(row);
        targets.push(TargetResult {
            domain: target,
            cells,
            best_f1: None,
        });
    }
    let grid = ReportGrid::new(cfg.targets.iter().map(|d| d.name().to_string()).collect(), columns.to_vec(), grid_cells)?;
    for (i, t) in targets.iter_mut().enumerate() {
        t.best_f1 = grid.best_in_row(i).map(|j| columns[j].clone());
    }
    Ok((
        MetricsFile {
            config_hash: cfg.hash.clone(),
            tool_version: TOOL_VERSION.to_string(),
            primary_metric: "f1_positive".into(),
            class_weights: cfg.head.mlp.class_weights,
            zscore: cfg.head.zscore,
            columns: columns.to_vec(),
            targets,
        },
        grid,
    ))
}

fn projection_stage(cache: &Cache, cfg: &ExperimentConfig, target: Domain, extracted: &BTreeMap<(String, Domain), Extracted>) -> Result<StageRecord> {
    let name = format!("project:{target}");
    let self_label = cfg.self_encoder(target).expect("validated").label.clone();
    let all: Vec<String> = cfg.encoders.iter().map(|e| e.label.clone()).collect();
    let mut parts = vec![name.clone(), format!("{:?}", cfg.projection.mode)];
    parts.extend(all.iter().map(|l| extracted[&(l.clone(), target)].key.clone()));
    let key = hash_parts(&parts.iter().map(String::as_str).collect::<Vec<_>>());
    let (_, rec) = cache.stage(&name, "project", &key, |out| {
        let (store, base_spec, _) = merged_store(cfg, extracted, target, std::slice::from_ref(&self_label))?;
        let base = concat_ilc(&store, &base_spec, Split::Test)?;
        let mut ordered = vec![self_label.clone()];
        ordered.extend(all.iter().filter(|l| **l != self_label).cloned());
        let (store, aug_spec, _) = merged_store(cfg, extracted, target, &ordered)?;
        let aug = concat_ilc(&store, &aug_spec, Split::Test)?;

        let pb = svd_project(&base, cfg.projection.mode)?;
        let pa = svd_project(&aug, cfg.projection.mode)?;
        let (db, da) = (centroid_distance(&pb)?, centroid_distance(&pa)?);
        let (fb, fa) = (centroid_distance_full(&base)?, centroid_distance_full(&aug)?);
        let change = |b: f64, a: f64| separation_change(b, a).ok();
        emit_scatter(&pb, out.join("baseline"))?;
        emit_scatter(&pa, out.join(aug_spec.name()))?;
        write_json(
            &out.join("projection.json"),
            &ProjectionSummary {
                domain: target,
                baseline_encoders: base_spec.encoder_ids.clone(),
                augmented_encoders: aug_spec.encoder_ids.clone(),
                baseline_distance: db,
                augmented_distance: da,
                separation_change: change(db, da),
                baseline_distance_full: fb,
                augmented_distance_full: fa,
                separation_change_full: change(fb, fa),
                baseline_captured_variance: pb.captured_fraction(),
                augmented_captured_variance: pa.captured_fraction(),
            },
        )
    })?;
    Ok(rec)
}

fn copy_into(src_dir: &Path, dst_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dst_dir).map_err(Error::io(dst_dir))?;
    let mut out = Vec::new();
    for f in list_files(src_dir)? {
        let dst = dst_dir.join(f.file_name().expect("listed file has a name"));
        fs::copy(&f, &dst).map_err(Error::io(&dst))?;
        out.push(dst);
    }
    Ok(out)
}

/// Runs every stage and writes `metrics.json`, `table.md`, `table.csv`,
/// `projections/<Domain>/…` and `manifest.json` under the output directory.
pub fn run_pipeline(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest> {
    let cache = Cache {
        root: resolve_cache_dir(cfg, opts),
        force: opts.force,
    };
    fs::create_dir_all(&cfg.output).map_err(Error::io(&cfg.output))?;
    let mut stages = Vec::new();

    let mut corpora = BTreeMap::new();
    for (&domain, spec) in &cfg.corpora {
        let (prepared, rec) = corpus_stage(&cache, cfg, domain, spec)?;
        corpora.insert(domain, prepared);
        stages.push(rec);
    }

    // Independent trainings run concurrently; results keep config order.
    let trained: Vec<Result<(EncoderState, StageRecord)>> = cfg.encoders.par_iter().map(|e| encoder_stage(&cache, e, &corpora)).collect();
    let mut encoders = BTreeMap::new();
    for (spec, res) in cfg.encoders.iter().zip(trained) {
        let (state, rec) = res?;
        encoders.insert(spec.label.clone(), state);
        stages.push(rec);
    }

    let pairs: Vec<(&EncoderSpec, Domain)> = cfg.targets.iter().flat_map(|&t| cfg.encoders.iter().map(move |e| (e, t))).collect();
    let results: Vec<Result<(String, FeatureStore, StageRecord)>> = pairs
        .par_iter()
        .map(|(e, t)| extract_stage(&cache, e, &encoders[&e.label], *t, &corpora[t]))
        .collect();
    let mut extracted = BTreeMap::new();
    for ((e, t), res) in pairs.iter().zip(results) {
        let (key, store, rec) = res?;
        extracted.insert((e.label.clone(), *t), Extracted { key, store });
        stages.push(rec);
    }

    let (columns, cells) = plan_cells(cfg);
    let heads: Vec<Result<(CellResult, StageRecord)>> = cells
        .par_iter()
        .map(|c| head_stage(&cache, cfg, c, &encoders, &corpora, &extracted))
        .collect();
    let mut results = Vec::new();
    for (cell, res) in cells.iter().zip(heads) {
        let (result, rec) = res?;
        results.push((cell.target, result));
        stages.push(rec);
    }

    let mut outputs = Vec::new();
    let eval_key = hash_parts(
        &std::iter::once("eval")
            .chain(cfg.hash.as_str().split('\n'))
            .chain(stages.iter().filter(|s| s.name.starts_with("head:")).map(|s| s.key.as_str()))
            .collect::<Vec<_>>(),
    );
    let (eval_dir, rec) = cache.stage("eval", "eval", &eval_key, |out| {
        let (metrics, grid) = build_metrics(cfg, &columns, &results)?;
        write_json(&out.join("metrics.json"), &metrics)?;
        let table = render_table(&grid);
        fs::write(out.join("table.md"), table.markdown).map_err(Error::io(out.join("table.md")))?;
        fs::write(out.join("table.csv"), table.csv).map_err(Error::io(out.join("table.csv")))
    })?;
    stages.push(rec);
    outputs.extend(copy_into(&eval_dir, &cfg.output)?);

    if cfg.projection.enabled {
        for &target in &cfg.targets {
            let rec = projection_stage(&cache, cfg, target, &extracted)?;
            let dir = cache.root.join("project").join(&rec.key);
            outputs.extend(copy_into(&dir, &cfg.output.join("projections").join(target.name()))?);
            stages.push(rec);
        }
    }

    let manifest = RunManifest {
        config_hash: cfg.hash.clone(),
        tool_version: TOOL_VERSION.to_string(),
        output: cfg.output.clone(),
        cache: cache.root.clone(),
        stages,
        outputs,
    };
    write_json(&cfg.output.join("manifest.json"), &manifest)?;
    Ok(manifest)
}
