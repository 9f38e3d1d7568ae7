//! Representation store and Intermediate Layer Concatenation (ILC).
//!
//! A store holds one vector per `(doc_id, encoder_id)`. Every encoder in an
//! [`IlcSpec`] is applied to the same target-domain document, so a
//! concatenated row is several views of one text: the target domain's own
//! encoder first, then the encoders trained on external domains.
//!
//! Two on-disk forms are accepted by [`read_store`]:
//!
//! * JSON Lines, one record per line, `#` lines are comments:
//!   `{"doc_id", "target_domain", "encoder_id", "label": 0|1, "split", "vec": [..]}`
//! * Binary: `"ILCF"`, `u32` version, then records each prefixed by their
//!   `u32` byte length. A record is `doc_id`, `target_domain`, `encoder_id`
//!   (each `u32` length + UTF-8), `u8` label, `u8` split (0 train, 1 val,
//!   2 test), `u32` dim, then `dim` little-endian `f32`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::checkpoint::Cursor;
use crate::corpus::{Domain, Label, Split};
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"ILCF";
pub const BINARY_VERSION: u32 = 1;

mod domain_name {
    use super::*;

    pub fn serialize<S: Serializer>(domain: &Domain, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(domain.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Domain, D::Error> {
        let v = String::deserialize(d)?;
        v.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentationRecord {
    pub doc_id: String,
    #[serde(with = "domain_name")]
    pub target_domain: Domain,
    pub encoder_id: String,
    pub label: Label,
    pub split: Split,
    pub vec: Vec<f32>,
}

impl RepresentationRecord {
    pub fn dim(&self) -> usize {
        self.vec.len()
    }

    fn validate(&self) -> Result<()> {
        if self.doc_id.is_empty() || self.encoder_id.is_empty() {
            return Err(Error::InvalidArgument("record with empty doc_id or encoder_id".into()));
        }
        if self.vec.is_empty() {
            return Err(Error::InvalidArgument(format!("record for doc {:?} has an empty vector", self.doc_id)));
        }
        if self.vec.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                doc_id: self.doc_id.clone(),
                encoder_id: self.encoder_id.clone(),
            });
        }
        Ok(())
    }
}

/// `<architecture>:<training domain>:<seed>`, e.g. `lstm:News:7`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EncoderId {
    pub arch: String,
    pub domain: Domain,
    pub seed: u64,
}

impl EncoderId {
    pub fn new(arch: &str, domain: Domain, seed: u64) -> Self {
        EncoderId {
            arch: arch.to_string(),
            domain,
            seed,
        }
    }
}

impl fmt::Display for EncoderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.arch, self.domain.name(), self.seed)
    }
}

impl FromStr for EncoderId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("encoder id {s:?} is not arch:domain:seed"));
        let mut parts = s.split(':');
        let (arch, domain, seed) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(d), Some(seed), None) if !a.is_empty() => (a, d, seed),
            _ => return Err(bad()),
        };
        Ok(EncoderId {
            arch: arch.to_string(),
            domain: domain.parse().map_err(|_| bad())?,
            seed: seed.parse().map_err(|_| bad())?,
        })
    }
}

/// Insert-validated collection of representation records.
#[derive(Clone, Debug, Default)]
pub struct FeatureStore {
    records: Vec<RepresentationRecord>,
    index: HashMap<String, HashMap<String, usize>>,
    dims: BTreeMap<String, usize>,
}

impl FeatureStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = RepresentationRecord>) -> Result<Self> {
        let mut store = Self::new();
        for r in records {
            store.insert(r)?;
        }
        Ok(store)
    }

    pub fn insert(&mut self, record: RepresentationRecord) -> Result<()> {
        record.validate()?;
        if let Some(&dim) = self.dims.get(&record.encoder_id) {
            if dim != record.dim() {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: record.dim(),
                });
            }
        }
        let by_doc = self.index.entry(record.encoder_id.clone()).or_default();
        if by_doc.contains_key(&record.doc_id) {
            return Err(Error::DuplicateRecord {
                doc_id: record.doc_id,
                encoder_id: record.encoder_id,
            });
        }
        by_doc.insert(record.doc_id.clone(), self.records.len());
        self.dims.insert(record.encoder_id.clone(), record.dim());
        self.records.push(record);
        Ok(())
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = RepresentationRecord>) -> Result<()> {
        records.into_iter().try_for_each(|r| self.insert(r))
    }

    pub fn records(&self) -> &[RepresentationRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<RepresentationRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim_of(&self, encoder_id: &str) -> Option<usize> {
        self.dims.get(encoder_id).copied()
    }

    pub fn encoder_ids(&self) -> impl Iterator<Item = &str> {
        self.dims.keys().map(String::as_str)
    }

    pub fn get(&self, doc_id: &str, encoder_id: &str) -> Option<&RepresentationRecord> {
        self.index.get(encoder_id).and_then(|m| m.get(doc_id)).map(|&i| &self.records[i])
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = Vec::new();
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.push(b'\n');
        }
        Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
        for r in &self.records {
            let mut rec = Vec::with_capacity(64 + 4 * r.dim());
            for s in [r.doc_id.as_str(), r.target_domain.name(), r.encoder_id.as_str()] {
                rec.extend_from_slice(&(s.len() as u32).to_le_bytes());
                rec.extend_from_slice(s.as_bytes());
            }
            rec.push(r.label.index() as u8);
            rec.push(match r.split {
                Split::Train => 0,
                Split::Val => 1,
                Split::Test => 2,
            });
            rec.extend_from_slice(&(r.dim() as u32).to_le_bytes());
            for x in &r.vec {
                rec.extend_from_slice(&x.to_le_bytes());
            }
            out.extend_from_slice(&(rec.len() as u32).to_le_bytes());
            out.extend_from_slice(&rec);
        }
        out
    }

    pub fn parse_jsonl(text: &str) -> Result<Self> {
        let mut store = Self::new();
        // A `# dim=N` comment pins the width of every record after it.
        let mut declared: Option<usize> = None;
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if let Some(comment) = t.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("dim=") {
                    declared = Some(v.trim().parse().map_err(|_| Error::MalformedRow {
                        row: i + 1,
                        reason: format!("bad dim header {v:?}"),
                    })?);
                }
                continue;
            }
            if t.is_empty() {
                continue;
            }
            let rec: RepresentationRecord = serde_json::from_str(t).map_err(|e| Error::MalformedRow {
                row: i + 1,
                reason: e.to_string(),
            })?;
            if let Some(d) = declared.filter(|&d| d != rec.dim()) {
                return Err(Error::MalformedRow {
                    row: i + 1,
                    reason: format!("vector has {} entries, header says {d}", rec.dim()),
                });
            }
            store.insert(rec)?;
        }
        Ok(store)
    }

    pub fn parse_binary(buf: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(buf);
        if cur.take(4)? != BINARY_MAGIC {
            return Err(Error::Format("not an ILCF feature file".into()));
        }
        let version = cur.u32()?;
        if version != BINARY_VERSION as usize {
            return Err(Error::Format(format!("unsupported ILCF version {version}")));
        }
        let mut store = Self::new();
        while !cur.at_end() {
            let len = cur.u32()?;
            let mut rec = Cursor::new(cur.take(len)?);
            let doc_id = rec.string()?;
            let target_domain = rec.string()?.parse()?;
            let encoder_id = rec.string()?;
            let flags = rec.take(2)?;
            let label = Label::from_index(flags[0] as usize)?;
            let split = match flags[1] {
                0 => Split::Train,
                1 => Split::Val,
                2 => Split::Test,
                s => return Err(Error::Format(format!("unknown split code {s}"))),
            };
            let dim = rec.u32()?;
            let vec = rec.f32s(dim)?;
            if !rec.at_end() {
                return Err(Error::Format("record length disagrees with its contents".into()));
            }
            store.insert(RepresentationRecord {
                doc_id,
                target_domain,
                encoder_id,
                label,
                split,
                vec,
            })?;
        }
        Ok(store)
    }
}

/// Writes records as JSON Lines, or as the binary form when the path ends in
/// `.ilcf`. All invariants are checked before anything is written.
pub fn write_store(path: impl AsRef<Path>, records: &[RepresentationRecord]) -> Result<()> {
    let path = path.as_ref();
    let store = FeatureStore::from_records(records.iter().cloned())?;
    let bytes = if path.extension().is_some_and(|e| e == "ilcf") {
        store.to_binary()
    } else {
        store.to_jsonl()?.into_bytes()
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(Error::io(parent))?;
    }
    fs::write(path, bytes).map_err(Error::io(path))
}

/// Loads either on-disk form, detected by the leading magic bytes.
pub fn read_store(path: impl AsRef<Path>) -> Result<FeatureStore> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(Error::io(path))?;
    if bytes.starts_with(BINARY_MAGIC) {
        FeatureStore::parse_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::Format(format!("{} is not UTF-8", path.display())))?;
        FeatureStore::parse_jsonl(&text)
    }
}

/// Which encoders to concatenate for a target domain, in concatenation order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IlcSpec {
    pub target_domain: Domain,
    pub encoder_ids: Vec<String>,
}

impl IlcSpec {
    pub fn new(target_domain: Domain, encoder_ids: Vec<String>) -> Result<Self> {
        if encoder_ids.is_empty() {
            return Err(Error::InvalidArgument("ILC spec needs at least one encoder".into()));
        }
        let unique: BTreeSet<&String> = encoder_ids.iter().collect();
        if unique.len() != encoder_ids.len() {
            return Err(Error::InvalidArgument("ILC spec lists an encoder twice".into()));
        }
        Ok(IlcSpec { target_domain, encoder_ids })
    }

    /// Canonical order: encoders trained on the target domain first, then
    /// the rest alphabetically by domain letter (ids that do not parse go last).
    pub fn canonical(target_domain: Domain, encoder_ids: Vec<String>) -> Result<Self> {
        let mut keyed: Vec<(u8, char, String)> = encoder_ids
            .into_iter()
            .map(|id| match id.parse::<EncoderId>() {
                Ok(e) if e.domain == target_domain => (0, e.domain.letter(), id),
                Ok(e) => (1, e.domain.letter(), id),
                Err(_) => (2, '~', id),
            })
            .collect();
        keyed.sort();
        Self::new(target_domain, keyed.into_iter().map(|k| k.2).collect())
    }

    /// `ILC-` followed by the training-domain letters in E, T, N, S, G, W
    /// order, so a column name does not depend on which domain is the target.
    pub fn name(&self) -> String {
        let parsed: Option<Vec<EncoderId>> = self.encoder_ids.iter().map(|s| s.parse().ok()).collect();
        match parsed {
            Some(mut ids) => {
                ids.sort_by_key(|e| e.domain.name_rank());
                format!("ILC-{}", ids.iter().map(|e| e.domain.letter()).collect::<String>())
            }
            None => format!("ILC-{}", self.encoder_ids.join("+")),
        }
    }
}

/// Dense row-major feature matrix with per-row labels.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub doc_ids: Vec<String>,
    pub labels: Vec<Label>,
    pub dim: usize,
    pub data: Vec<f64>,
    /// `(encoder_id, width)` of each concatenated block, in column order.
    pub blocks: Vec<(String, usize)>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        Ok(FeatureMatrix {
            doc_ids: (0..rows.len()).map(|i| format!("row{i:06}")).collect(),
            labels,
            dim,
            data: rows.into_iter().flatten().collect(),
            blocks: vec![("features".into(), dim)],
        })
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Column range occupied by the `k`-th block.
    pub fn block_range(&self, k: usize) -> std::ops::Range<usize> {
        let start: usize = self.blocks[..k].iter().map(|b| b.1).sum();
        start..start + self.blocks[k].1
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("doc_id,label");
        for j in 0..self.dim {
            out.push_str(&format!(",f{j}"));
        }
        out.push('\n');
        for i in 0..self.rows() {
            out.push_str(&format!("{},{}", self.doc_ids[i], self.labels[i].index()));
            for x in self.row(i) {
                out.push_str(&format!(",{x}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Concatenates, for every target-domain document in `split`, the vectors of
/// the spec's encoders in spec order. Rows are sorted by doc id.
pub fn concat_ilc(store: &FeatureStore, spec: &IlcSpec, split: Split) -> Result<FeatureMatrix> {
    let in_scope = |r: &RepresentationRecord| r.target_domain == spec.target_domain && r.split == split;
    let doc_ids: BTreeSet<&str> = spec
        .encoder_ids
        .iter()
        .filter_map(|e| store.index.get(e))
        .flat_map(|m| m.values())
        .map(|&i| &store.records[i])
        .filter(|r| in_scope(r))
        .map(|r| r.doc_id.as_str())
        .collect();
    if doc_ids.is_empty() {
        return Err(Error::Empty(format!(
            "no {} records for {} in split {}",
            spec.name(),
            spec.target_domain,
            split.as_str()
        )));
    }

    let mut missing = Vec::new();
    let mut found: Vec<Vec<&RepresentationRecord>> = Vec::with_capacity(doc_ids.len());
    for &doc in &doc_ids {
        let mut row = Vec::with_capacity(spec.encoder_ids.len());
        for enc in &spec.encoder_ids {
            match store.get(doc, enc).filter(|r| in_scope(r)) {
                Some(r) => row.push(r),
                None => missing.push((doc.to_string(), enc.clone())),
            }
        }
        found.push(row);
    }
    if !missing.is_empty() {
        return Err(Error::MissingRecords(missing));
    }

    let blocks: Vec<(String, usize)> = spec
        .encoder_ids
        .iter()
        .map(|e| (e.clone(), store.dim_of(e).expect("present encoders have a dim")))
        .collect();
    let dim = blocks.iter().map(|b| b.1).sum();
    let mut data = Vec::with_capacity(dim * found.len());
    let mut labels = Vec::with_capacity(found.len());
    for row in &found {
        let label = row[0].label;
        if row.iter().any(|r| r.label != label) {
            return Err(Error::LabelDisagreement(row[0].doc_id.clone()));
        }
        labels.push(label);
        for r in row {
            data.extend(r.vec.iter().map(|&x| x as f64));
        }
    }
    Ok(FeatureMatrix {
        doc_ids: doc_ids.into_iter().map(str::to_string).collect(),
        labels,
        dim,
        data,
        blocks,
    })
}

/// Per-dimension mean and population standard deviation (denominator `n`),
/// plus per-class centroids (`None` for an absent class), indexed by label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub centroids: [Option<Vec<f64>>; 2],
}

pub fn feature_stats(m: &FeatureMatrix) -> Result<FeatureStats> {
    if m.rows() == 0 {
        return Err(Error::Empty("feature matrix has no rows".into()));
    }
    let n = m.rows() as f64;
    let mut mean = vec![0.0; m.dim];
    let mut sums = [vec![0.0; m.dim], vec![0.0; m.dim]];
    let mut counts = [0usize; 2];
    for i in 0..m.rows() {
        let c = m.labels[i].index();
        counts[c] += 1;
        for (j, &x) in m.row(i).iter().enumerate() {
            mean[j] += x;
            sums[c][j] += x;
        }
    }
    mean.iter_mut().for_each(|x| *x /= n);
    let mut var = vec![0.0; m.dim];
    for i in 0..m.rows() {
        for (j, &x) in m.row(i).iter().enumerate() {
            var[j] += (x - mean[j]).powi(2);
        }
    }
    let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
    let [s0, s1] = sums;
    let centroid = |s: Vec<f64>, c: usize| (c > 0).then(|| s.into_iter().map(|x| x / c as f64).collect());
    Ok(FeatureStats {
        mean,
        std,
        centroids: [centroid(s0, counts[0]), centroid(s1, counts[1])],
    })
}

/// Z-scores columns in place with the given statistics; zero-variance
/// columns are only centered.
pub fn standardize(m: &mut FeatureMatrix, stats: &FeatureStats) {
    for i in 0..m.rows() {
        for (j, x) in m.row_mut(i).iter_mut().enumerate() {
            let s = if stats.std[j] > 0.0 { stats.std[j] } else { 1.0 };
            *x = (*x - stats.mean[j]) / s;
        }
    }
}
