//! Dataset ingestion, binary label mapping, sampling and stratified splits.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    Email,
    News,
    Tweet,
    Sentiment,
    Newsgroup,
    Wikipedia,
}

impl Domain {
    pub const ALL: [Domain; 6] = [
        Domain::Email,
        Domain::News,
        Domain::Tweet,
        Domain::Sentiment,
        Domain::Newsgroup,
        Domain::Wikipedia,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Domain::Email => "Email",
            Domain::News => "News",
            Domain::Tweet => "Tweet",
            Domain::Sentiment => "Sentiment",
            Domain::Newsgroup => "Newsgroup",
            Domain::Wikipedia => "Wikipedia",
        }
    }

    /// Single-letter tag used in combination names (`ILC-ETN`).
    pub fn letter(self) -> char {
        match self {
            Domain::Email => 'E',
            Domain::News => 'N',
            Domain::Tweet => 'T',
            Domain::Sentiment => 'S',
            Domain::Newsgroup => 'G',
            Domain::Wikipedia => 'W',
        }
    }

    /// Position of the letter in combination names: E, T, N, then the
    /// non-deceptive domains.
    pub fn name_rank(self) -> u8 {
        match self {
            Domain::Email => 0,
            Domain::Tweet => 1,
            Domain::News => 2,
            Domain::Sentiment => 3,
            Domain::Newsgroup => 4,
            Domain::Wikipedia => 5,
        }
    }

    pub fn is_deceptive(self) -> bool {
        matches!(self, Domain::Email | Domain::News | Domain::Tweet)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        Domain::ALL
            .into_iter()
            .find(|d| d.name().eq_ignore_ascii_case(t) || (t.len() == 1 && t.starts_with(|c: char| c.eq_ignore_ascii_case(&d.letter()))))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown domain {t:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    NonDeceptive = 0,
    Deceptive = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Label> {
        match i {
            0 => Ok(Label::NonDeceptive),
            1 => Ok(Label::Deceptive),
            _ => Err(Error::InvalidArgument(format!("label index {i} is not binary"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::NonDeceptive => "non-deceptive",
            Label::Deceptive => "deceptive",
        }
    }
}

// Labels serialize as 0/1.
impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.index() as u8)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Label::from_index(v as usize).map_err(serde::de::Error::custom)
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "deceptive" | "1" => Ok(Label::Deceptive),
            "non-deceptive" | "nondeceptive" | "0" => Ok(Label::NonDeceptive),
            other => Err(Error::InvalidArgument(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

/// One text sample. `split` is `None` until [`split_corpus`] assigns it,
/// unless the source file carried a preassigned split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub domain: Domain,
    pub text: String,
    pub label: Label,
    pub split: Option<Split>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMapSpec {
    pub source_label: String,
    pub target: Label,
}

/// Total mapping from a dataset's label vocabulary to the binary target.
/// Lookup is case-insensitive and ignores surrounding whitespace.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelMap {
    entries: BTreeMap<String, Label>,
}

fn normalize_label(s: &str) -> String {
    s.trim().to_lowercase()
}

impl LabelMap {
    pub fn from_specs(specs: impl IntoIterator<Item = LabelMapSpec>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for spec in specs {
            let key = normalize_label(&spec.source_label);
            if key.is_empty() {
                return Err(Error::InvalidArgument("empty source label in label map".into()));
            }
            if let Some(prev) = entries.insert(key.clone(), spec.target) {
                if prev != spec.target {
                    return Err(Error::InvalidArgument(format!("label {key:?} mapped to both targets")));
                }
            }
        }
        Ok(LabelMap { entries })
    }

    fn from_pairs(pairs: &[(&str, Label)]) -> Self {
        let specs = pairs.iter().map(|&(s, t)| LabelMapSpec {
            source_label: s.to_string(),
            target: t,
        });
        LabelMap::from_specs(specs).expect("builtin label maps are consistent")
    }

    /// LIAR: true and mostly-true are non-deceptive; half-true, mostly-false
    /// (`barely-true` in the released files), false and pants-fire are deceptive.
    pub fn liar() -> Self {
        use Label::*;
        Self::from_pairs(&[
            ("true", NonDeceptive),
            ("mostly-true", NonDeceptive),
            ("half-true", Deceptive),
            ("mostly-false", Deceptive),
            ("barely-true", Deceptive),
            ("false", Deceptive),
            ("pants-fire", Deceptive),
            ("pants-on-fire", Deceptive),
        ])
    }

    pub fn pheme() -> Self {
        use Label::*;
        Self::from_pairs(&[
            ("rumour", Deceptive),
            ("rumor", Deceptive),
            ("non-rumour", NonDeceptive),
            ("non-rumor", NonDeceptive),
        ])
    }

    pub fn iwspa() -> Self {
        use Label::*;
        Self::from_pairs(&[("phishing", Deceptive), ("legit", NonDeceptive), ("legitimate", NonDeceptive)])
    }

    /// Identity map for files already carrying binary labels.
    pub fn binary() -> Self {
        use Label::*;
        Self::from_pairs(&[
            ("deceptive", Deceptive),
            ("non-deceptive", NonDeceptive),
            ("1", Deceptive),
            ("0", NonDeceptive),
        ])
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name.trim().to_lowercase().as_str() {
            "liar" => Some(Self::liar()),
            "pheme" => Some(Self::pheme()),
            "iwspa" => Some(Self::iwspa()),
            "binary" => Some(Self::binary()),
            _ => None,
        }
    }

    /// Parses `source_label = deceptive|non-deceptive` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut specs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (src, dst) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("label map line {}: expected `label = target`", i + 1)))?;
            let target = dst
                .parse::<Label>()
                .map_err(|_| Error::Format(format!("label map line {}: unknown target {:?}", i + 1, dst.trim())))?;
            specs.push(LabelMapSpec {
                source_label: src.to_string(),
                target,
            });
        }
        if specs.is_empty() {
            return Err(Error::Empty("label map has no entries".into()));
        }
        Self::from_specs(specs)
    }

    /// `builtin:<name>` or a path to a label map file.
    pub fn resolve(spec: &str) -> Result<Self> {
        if let Some(name) = spec.strip_prefix("builtin:") {
            return Self::builtin(name).ok_or_else(|| Error::InvalidArgument(format!("unknown builtin label map {name:?}")));
        }
        let text = fs::read_to_string(spec).map_err(Error::io(spec))?;
        Self::parse(&text)
    }

    pub fn get(&self, label: &str) -> Option<Label> {
        self.entries.get(&normalize_label(label)).copied()
    }

    pub fn specs(&self) -> Vec<LabelMapSpec> {
        self.entries
            .iter()
            .map(|(k, &v)| LabelMapSpec {
                source_label: k.clone(),
                target: v,
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Tsv,
    Jsonl,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "tsv" => Ok(Format::Tsv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(Error::InvalidArgument(format!("unknown corpus format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkippedRow {
    pub row: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub loaded: usize,
    pub skipped: Vec<SkippedRow>,
}

struct RawRow {
    row: usize,
    id: String,
    text: String,
    label: String,
    split: Option<Split>,
}

/// Loads a corpus file and maps its labels to binary targets.
///
/// Rows are numbered from 1 (header excluded for csv/tsv, physical line for
/// jsonl). Rows whose text is blank after normalization are skipped and
/// reported; any other defect is an error.
pub fn load_corpus(path: impl AsRef<Path>, format: Format, label_map: &LabelMap, domain: Domain) -> Result<(Vec<Document>, LoadReport)> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(Error::io(path))?;
    if content.trim().is_empty() {
        return Err(Error::Empty(format!("{} has no rows", path.display())));
    }
    let rows = match format {
        Format::Csv => read_delimited(&content, b',', true)?,
        Format::Tsv => read_delimited(&content, b'\t', false)?,
        Format::Jsonl => read_jsonl(&content)?,
    };
    if rows.is_empty() {
        return Err(Error::Empty(format!("{} has no data rows", path.display())));
    }

    let mut report = LoadReport::default();
    let mut seen = HashSet::new();
    let mut docs = Vec::with_capacity(rows.len());
    for raw in rows {
        let id = raw.id.trim().to_string();
        if id.is_empty() {
            return Err(Error::MalformedRow {
                row: raw.row,
                reason: "empty id".into(),
            });
        }
        let label = label_map.get(&raw.label).ok_or_else(|| Error::UnmappedLabel {
            label: raw.label.trim().to_string(),
            row: raw.row,
        })?;
        let text: String = raw.text.nfc().collect::<String>().trim().to_string();
        if text.is_empty() {
            report.skipped.push(SkippedRow {
                row: raw.row,
                reason: "empty text".into(),
            });
            continue;
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        docs.push(Document {
            id,
            domain,
            text,
            label,
            split: raw.split,
        });
    }
    if docs.is_empty() {
        return Err(Error::Empty(format!("{} has no usable rows", path.display())));
    }
    report.loaded = docs.len();
    docs.sort_by(|a, b| a.id.cmp(&b.id));
    Ok((docs, report))
}

fn read_delimited(content: &str, delimiter: u8, quoting: bool) -> Result<Vec<RawRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .quoting(quoting)
        .has_headers(true)
        .from_reader(content.as_bytes());
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Format(format!("missing required column {name:?}")))
    };
    let (id_col, text_col, label_col) = (column("id")?, column("text")?, column("label")?);

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::MalformedRow { row, reason: e.to_string() })?;
        let field = |col: usize, name: &str| {
            record.get(col).map(str::to_string).ok_or_else(|| Error::MalformedRow {
                row,
                reason: format!("missing {name} field"),
            })
        };
        rows.push(RawRow {
            row,
            id: field(id_col, "id")?,
            text: field(text_col, "text")?,
            label: field(label_col, "label")?,
            split: None,
        });
    }
    Ok(rows)
}

fn read_jsonl(content: &str) -> Result<Vec<RawRow>> {
    let mut rows = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let row = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| Error::MalformedRow { row, reason };
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let obj = value.as_object().ok_or_else(|| malformed("not a JSON object".into()))?;
        let string_key = |key: &str| -> Result<String> {
            match obj.get(key) {
                Some(serde_json::Value::String(s)) => Ok(s.clone()),
                Some(_) => Err(malformed(format!("key {key:?} is not a string"))),
                None => Err(malformed(format!("missing key {key:?}"))),
            }
        };
        let split = match obj.get("split") {
            None | Some(serde_json::Value::Null) => None,
            Some(serde_json::Value::String(s)) => Some(s.parse::<Split>().map_err(|e| malformed(e.to_string()))?),
            Some(_) => return Err(malformed("key \"split\" is not a string".into())),
        };
        rows.push(RawRow {
            row,
            id: string_key("id")?,
            text: string_key("text")?,
            label: string_key("label")?,
            split,
        });
    }
    Ok(rows)
}

#[derive(Serialize)]
struct PreparedLine<'a> {
    id: &'a str,
    domain: &'a str,
    text: &'a str,
    label: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<&'a str>,
}

/// Writes documents as jsonl in id order; readable again with
/// `load_corpus(.., Format::Jsonl, &LabelMap::binary(), domain)`.
pub fn write_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let path = path.as_ref();
    let mut sorted: Vec<&Document> = docs.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = Vec::new();
    for d in sorted {
        let line = PreparedLine {
            id: &d.id,
            domain: d.domain.name(),
            text: &d.text,
            label: d.label.as_str(),
            split: d.split.map(Split::as_str),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.push(b'\n');
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(Error::io(parent))?;
    }
    let mut f = fs::File::create(path).map_err(Error::io(path))?;
    f.write_all(&out).map_err(Error::io(path))?;
    Ok(())
}

#[derive(Deserialize)]
struct OwnedPreparedLine {
    id: String,
    domain: String,
    text: String,
    label: String,
    split: Option<Split>,
}

/// Reads a file written by [`write_corpus`], taking each document's domain
/// from the file.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let malformed = |reason: String| Error::MalformedRow { row: i + 1, reason };
        let l: OwnedPreparedLine = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        docs.push(Document {
            domain: l.domain.parse().map_err(|e: Error| malformed(e.to_string()))?,
            label: l.label.parse().map_err(|e: Error| malformed(e.to_string()))?,
            id: l.id,
            text: l.text,
            split: l.split,
        });
    }
    if docs.is_empty() {
        return Err(Error::Empty(format!("{} holds no documents", path.display())));
    }
    Ok(docs)
}

/// Draws `n` documents uniformly without replacement. The input is put in id
/// order before shuffling and the result is returned in id order, so the
/// sample depends only on the document set and the seed.
pub fn sample_corpus(docs: &[Document], n: usize, seed: u64) -> Result<Vec<Document>> {
    if n > docs.len() {
        return Err(Error::InvalidArgument(format!("cannot sample {n} documents from {}", docs.len())));
    }
    let mut pool: Vec<Document> = docs.to_vec();
    pool.sort_by(|a, b| a.id.cmp(&b.id));
    let mut prng = rng::seeded(seed);
    rng::shuffle(&mut pool, &mut prng);
    pool.truncate(n);
    pool.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(pool)
}

/// Splits `total` across groups proportionally to `sizes` by largest
/// remainder in exact integer arithmetic; ties go to the earlier group.
fn apportion(total: usize, sizes: &[usize]) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return vec![0; sizes.len()];
    }
    let mut counts: Vec<usize> = sizes.iter().map(|&s| total * s / n).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(total * sizes[i] % n));
    let mut left = total - counts.iter().sum::<usize>();
    for i in order {
        if left == 0 {
            break;
        }
        if counts[i] < sizes[i] {
            counts[i] += 1;
            left -= 1;
        }
    }
    counts
}

fn by_label(docs: Vec<Document>) -> [Vec<Document>; 2] {
    let mut groups: [Vec<Document>; 2] = [Vec::new(), Vec::new()];
    for d in docs {
        groups[d.label.index()].push(d);
    }
    for g in groups.iter_mut() {
        g.sort_by(|a, b| a.id.cmp(&b.id));
    }
    groups
}

/// Assigns train/val/test splits, stratified by label.
///
/// `|Train ∪ Val| = round(train_frac·N)` and `|Val| = round(val_frac·|Train ∪ Val|)`,
/// each apportioned over the two labels by largest remainder. Documents that
/// arrive with a split keep it; when such documents include a training set but
/// no validation set, the validation set is drawn from that training set.
/// The result is in id order.
pub fn split_corpus(docs: Vec<Document>, train_frac: f64, val_frac_of_train: f64, seed: u64) -> Result<Vec<Document>> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidArgument(format!("train_frac must lie in (0, 1), got {train_frac}")));
    }
    if !(0.0..1.0).contains(&val_frac_of_train) {
        return Err(Error::InvalidArgument(format!(
            "val_frac_of_train must lie in [0, 1), got {val_frac_of_train}"
        )));
    }
    let mut prng = rng::seeded(seed);
    let (preassigned, free): (Vec<Document>, Vec<Document>) = docs.into_iter().partition(|d| d.split.is_some());

    let mut out = Vec::new();
    if !free.is_empty() {
        let groups = by_label(free);
        let n = groups[0].len() + groups[1].len();
        let trainval = ((train_frac * n as f64).round() as usize).min(n);
        let sizes = [groups[0].len(), groups[1].len()];
        let tv_counts = apportion(trainval, &sizes);
        let val_total = (val_frac_of_train * trainval as f64).round() as usize;
        let val_counts = apportion(val_total, &tv_counts);
        for (mut group, (tv, val)) in groups.into_iter().zip(tv_counts.into_iter().zip(val_counts)) {
            rng::shuffle(&mut group, &mut prng);
            for (i, mut d) in group.into_iter().enumerate() {
                d.split = Some(if i < val {
                    Split::Val
                } else if i < tv {
                    Split::Train
                } else {
                    Split::Test
                });
                out.push(d);
            }
        }
    }

    let has_val = preassigned.iter().any(|d| d.split == Some(Split::Val));
    let (train, rest): (Vec<Document>, Vec<Document>) = preassigned.into_iter().partition(|d| d.split == Some(Split::Train));
    out.extend(rest);
    if has_val || val_frac_of_train == 0.0 {
        out.extend(train);
    } else if !train.is_empty() {
        let groups = by_label(train);
        let sizes = [groups[0].len(), groups[1].len()];
        let val_total = (val_frac_of_train * (sizes[0] + sizes[1]) as f64).round() as usize;
        let val_counts = apportion(val_total, &sizes);
        for (mut group, val) in groups.into_iter().zip(val_counts) {
            rng::shuffle(&mut group, &mut prng);
            for (i, mut d) in group.into_iter().enumerate() {
                if i < val {
                    d.split = Some(Split::Val);
                }
                out.push(d);
            }
        }
    }

    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

pub fn docs_in_split(docs: &[Document], split: Split) -> Vec<&Document> {
    docs.iter().filter(|d| d.split == Some(split)).collect()
}
