//! Experiment configuration: a sectioned `key = value` text format.
//!
//! ```text
//! # comment lines start with '#' or ';'
//! [experiment]
//! seed = 7                      # required
//! output = runs/demo            # relative to the config file
//! targets = Email, News         # default: every domain with a corpus and a self encoder
//!
//! [corpus.Email]
//! path = data/email.csv
//! format = csv                  # csv | tsv | jsonl
//! label_map = builtin:iwspa     # builtin:<liar|pheme|iwspa|binary> or a file
//! sample_n = 2000               # optional
//! train_frac = 0.8
//! val_frac = 0.2
//!
//! [encoder.email]
//! arch = lstm                   # lstm | external
//! domain = Email
//! hidden = 64                   # any LSTM hyperparameter, see below
//!
//! [encoder.bert_news]
//! arch = external
//! id = bert:News:3
//! features = feats/news.jsonl, feats/news_on_email.jsonl
//!
//! [head]
//! hidden = 64
//! lr = 0.001
//! zscore = false
//!
//! [ilc]
//! combinations = E, E+N, E+T, E+T+N
//!
//! [projection]
//! enabled = true
//! mode = centered               # centered | raw
//! ```
//!
//! Comments must take a whole line. A combination is a `+`-separated list of
//! encoder labels; a domain name or letter also works when exactly one
//! encoder was trained on that domain, and `ETN` is read as `E+T+N`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::corpus::{Domain, Format, LabelMap};
use crate::error::{Error, Result};
use crate::features::EncoderId;
use crate::lstm::{LstmConfig, Pooling};
use crate::mlp::MlpConfig;
use crate::projection::ProjectionMode;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSpec {
    pub path: PathBuf,
    pub format: Format,
    pub label_map: String,
    pub sample_n: Option<usize>,
    pub train_frac: f64,
    pub val_frac: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EncoderKind {
    Lstm(LstmConfig),
    /// Vectors produced elsewhere and ingested from store files.
    External {
        features: Vec<PathBuf>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderSpec {
    pub label: String,
    pub id: EncoderId,
    pub kind: EncoderKind,
}

impl EncoderSpec {
    pub fn domain(&self) -> Domain {
        self.id.domain
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadSpec {
    pub mlp: MlpConfig,
    pub zscore: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionSpec {
    pub enabled: bool,
    pub mode: ProjectionMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub base_dir: PathBuf,
    pub seed: u64,
    pub output: PathBuf,
    pub targets: Vec<Domain>,
    pub corpora: BTreeMap<Domain, CorpusSpec>,
    /// Sorted by label.
    pub encoders: Vec<EncoderSpec>,
    pub head: HeadSpec,
    /// Each entry lists encoder labels; order is irrelevant.
    pub combinations: Vec<Vec<String>>,
    pub projection: ProjectionSpec,
    /// SHA-256 (hex) of the canonical text form.
    pub hash: String,
}

impl ExperimentConfig {
    pub fn encoder(&self, label: &str) -> Option<&EncoderSpec> {
        self.encoders.iter().find(|e| e.label == label)
    }

    /// The single encoder trained on `target`.
    pub fn self_encoder(&self, target: Domain) -> Option<&EncoderSpec> {
        let mut it = self.encoders.iter().filter(|e| e.domain() == target);
        match (it.next(), it.next()) {
            (Some(e), None) => Some(e),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Section {
    name: String,
    line: usize,
    entries: Vec<(String, String, usize)>,
}

impl Section {
    fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.entries.iter().find(|(k, _, _)| k == key).map(|(_, v, l)| (v.as_str(), *l))
    }
}

fn parse_sections(text: &str, diags: &mut Vec<Diagnostic>) -> Vec<Section> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name) => {
                    let name = name.trim().to_string();
                    if sections.iter().any(|s| s.name == name) {
                        diags.push(diag(line_no, format!("section [{name}] appears twice")));
                    }
                    sections.push(Section {
                        name,
                        line: line_no,
                        entries: Vec::new(),
                    });
                }
                None => diags.push(diag(line_no, format!("malformed section header {line:?}"))),
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            diags.push(diag(line_no, format!("expected `key = value`, found {line:?}")));
            continue;
        };
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        match sections.last_mut() {
            None => diags.push(diag(line_no, format!("key {key:?} outside any section"))),
            Some(s) => {
                if s.entries.iter().any(|(k, _, _)| *k == key) {
                    diags.push(diag(line_no, format!("key {key:?} repeated in [{}]", s.name)));
                }
                s.entries.push((key, value, line_no));
            }
        }
    }
    sections
}

fn diag(line: usize, message: String) -> Diagnostic {
    Diagnostic { line: Some(line), message }
}

/// Sections and keys sorted, one `key=value` per line.
fn canonical_text(sections: &[Section]) -> String {
    let mut sorted: Vec<&Section> = sections.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    let mut out = String::new();
    for s in sorted {
        out.push_str(&format!("[{}]\n", s.name));
        let mut entries: Vec<_> = s.entries.iter().map(|(k, v, _)| (k, v)).collect();
        entries.sort();
        for (k, v) in entries {
            out.push_str(&format!("{k}={v}\n"));
        }
    }
    out
}

/// Reads one section's keys with typed accessors, recording every problem.
struct Reader<'a> {
    section: &'a Section,
    diags: &'a mut Vec<Diagnostic>,
    used: BTreeSet<&'static str>,
}

impl<'a> Reader<'a> {
    fn new(section: &'a Section, diags: &'a mut Vec<Diagnostic>) -> Self {
        Reader {
            section,
            diags,
            used: BTreeSet::new(),
        }
    }

    fn raw(&mut self, key: &'static str) -> Option<(&'a str, usize)> {
        self.used.insert(key);
        self.section.get(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &'static str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        let (v, line) = self.raw(key)?;
        match v.parse::<T>() {
            Ok(x) => Some(x),
            Err(e) => {
                self.diags
                    .push(diag(line, format!("[{}] {key}: cannot parse {v:?}: {e}", self.section.name)));
                None
            }
        }
    }

    fn set<T: std::str::FromStr>(&mut self, key: &'static str, slot: &mut T)
    where
        T::Err: fmt::Display,
    {
        if let Some(v) = self.parse(key) {
            *slot = v;
        }
    }

    fn bool(&mut self, key: &'static str, slot: &mut bool) {
        if let Some((v, line)) = self.raw(key) {
            match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => *slot = true,
                "false" | "no" | "off" | "0" => *slot = false,
                _ => self
                    .diags
                    .push(diag(line, format!("[{}] {key}: expected true or false, found {v:?}", self.section.name))),
            }
        }
    }

    fn fraction(&mut self, key: &'static str, slot: &mut f64, allow_zero: bool) {
        if let Some((_, line)) = self.section.get(key) {
            if let Some(v) = self.parse::<f64>(key) {
                let ok = if allow_zero { (0.0..1.0).contains(&v) } else { v > 0.0 && v < 1.0 };
                if ok {
                    *slot = v;
                } else {
                    self.diags
                        .push(diag(line, format!("[{}] {key} = {v} is outside its range", self.section.name)));
                }
            }
        }
    }

    fn positive(&mut self, key: &'static str, slot: &mut usize) {
        if let Some((_, line)) = self.section.get(key) {
            match self.parse::<usize>(key) {
                Some(0) => self.diags.push(diag(line, format!("[{}] {key} must be positive", self.section.name))),
                Some(v) => *slot = v,
                None => {}
            }
        }
    }

    fn finish(self) {
        for (k, _, line) in &self.section.entries {
            if !self.used.contains(k.as_str()) {
                self.diags.push(diag(*line, format!("unknown key {k:?} in [{}]", self.section.name)));
            }
        }
    }
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn check_path(base: &Path, value: &str, line: usize, what: &str, diags: &mut Vec<Diagnostic>) -> PathBuf {
    let path = base.join(value);
    if !path.exists() {
        diags.push(diag(line, format!("missing path for {what}: {}", path.display())));
    }
    path
}

fn read_lstm(r: &mut Reader, cfg: &mut LstmConfig) {
    r.positive("embed_dim", &mut cfg.embed_dim);
    r.positive("hidden", &mut cfg.hidden);
    r.positive("layers", &mut cfg.layers);
    r.positive("max_len", &mut cfg.max_len);
    r.set("min_freq", &mut cfg.min_freq);
    r.positive("max_vocab", &mut cfg.max_vocab);
    if let Some((v, line)) = r.raw("pooling") {
        match v {
            "last" => cfg.pooling = Pooling::Last,
            "mean" => cfg.pooling = Pooling::Mean,
            _ => r.diags.push(diag(line, format!("pooling must be last or mean, found {v:?}"))),
        }
    }
    r.fraction("dropout", &mut cfg.dropout, true);
    r.set("lr", &mut cfg.lr);
    r.positive("batch", &mut cfg.batch);
    r.set("epochs", &mut cfg.max_epochs);
    r.set("patience", &mut cfg.patience);
    r.set("clip_norm", &mut cfg.clip_norm);
    r.bool("class_weights", &mut cfg.class_weights);
}

/// Expands one combination entry into encoder labels.
fn resolve_combination(entry: &str, encoders: &[EncoderSpec]) -> std::result::Result<Vec<String>, String> {
    let by_domain = |d: Domain| -> Option<String> {
        let mut it = encoders.iter().filter(|e| e.domain() == d);
        match (it.next(), it.next()) {
            (Some(e), None) => Some(e.label.clone()),
            _ => None,
        }
    };
    let resolve = |tok: &str| -> Option<String> {
        if let Some(e) = encoders.iter().find(|e| e.label == tok) {
            return Some(e.label.clone());
        }
        tok.parse::<Domain>().ok().and_then(by_domain)
    };
    let mut labels = Vec::new();
    for tok in entry.split('+').map(str::trim) {
        if tok.is_empty() {
            return Err(format!("combination {entry:?} has an empty element"));
        }
        if let Some(l) = resolve(tok) {
            labels.push(l);
            continue;
        }
        // `ETN` shorthand
        let letters: Option<Vec<String>> = if tok.len() > 1 {
            tok.chars().map(|c| resolve(&c.to_string())).collect()
        } else {
            None
        };
        match letters {
            Some(ls) => labels.extend(ls),
            None => return Err(format!("combination {entry:?} references undeclared encoder {tok:?}")),
        }
    }
    let unique: BTreeSet<&String> = labels.iter().collect();
    if unique.len() != labels.len() {
        return Err(format!("combination {entry:?} lists an encoder twice"));
    }
    Ok(labels)
}

/// Parses and checks a config. Returns the config only when there are no
/// diagnostics.
pub fn parse_config(text: &str, base_dir: &Path) -> (Option<ExperimentConfig>, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let sections = parse_sections(text, &mut diags);
    let hash = hex::encode(Sha256::digest(canonical_text(&sections).as_bytes()));

    let mut seed = None;
    let mut output = base_dir.join("ilc-run");
    let mut targets_raw: Option<(Vec<String>, usize)> = None;
    let mut corpora = BTreeMap::new();
    let mut encoders: Vec<EncoderSpec> = Vec::new();
    let mut head = HeadSpec {
        mlp: MlpConfig::default(),
        zscore: false,
    };
    let mut combos_raw: Vec<(String, usize)> = Vec::new();
    let mut projection = ProjectionSpec {
        enabled: true,
        mode: ProjectionMode::Centered,
    };

    // Encoders are read after the experiment section so their default seed is known.
    let experiment = sections.iter().find(|s| s.name == "experiment");
    match experiment {
        Some(s) => {
            let mut r = Reader::new(s, &mut diags);
            seed = r.parse::<u64>("seed");
            if let Some((v, _)) = r.raw("output") {
                output = base_dir.join(v);
            }
            if let Some((v, line)) = r.raw("targets") {
                targets_raw = Some((list(v), line));
            }
            let missing_seed = s.get("seed").is_none();
            r.finish();
            if missing_seed {
                diags.push(diag(s.line, "seed required".into()));
            }
        }
        None => diags.push(Diagnostic {
            line: None,
            message: "missing [experiment] section; seed required".into(),
        }),
    }

    for s in &sections {
        let (kind, name) = match s.name.split_once('.') {
            Some((k, n)) => (k, Some(n.trim())),
            None => (s.name.as_str(), None),
        };
        match (kind, name) {
            ("experiment", None) => {}
            ("corpus", Some(name)) => {
                let domain = match name.parse::<Domain>() {
                    Ok(d) => Some(d),
                    Err(_) => {
                        diags.push(diag(s.line, format!("unknown domain {name:?} in [{}]", s.name)));
                        None
                    }
                };
                let mut r = Reader::new(s, &mut diags);
                let path = match r.raw("path") {
                    Some((v, line)) => Some(check_path(base_dir, v, line, &s.name, r.diags)),
                    None => {
                        r.diags.push(diag(s.line, format!("[{}] needs a path", s.name)));
                        None
                    }
                };
                let format = match r.raw("format") {
                    Some((v, line)) => match v.parse::<Format>() {
                        Ok(f) => Some(f),
                        Err(e) => {
                            r.diags.push(diag(line, e.to_string()));
                            None
                        }
                    },
                    None => path
                        .as_ref()
                        .and_then(|p| p.extension().and_then(|e| e.to_str()).and_then(|e| e.parse::<Format>().ok())),
                };
                let label_map = match r.raw("label_map") {
                    Some((v, line)) => {
                        if v.starts_with("builtin:") {
                            if LabelMap::resolve(v).is_err() {
                                r.diags.push(diag(line, format!("unknown label map {v:?}")));
                            }
                            v.to_string()
                        } else {
                            check_path(base_dir, v, line, "label_map", r.diags).display().to_string()
                        }
                    }
                    None => "builtin:binary".to_string(),
                };
                let sample_n = r.parse::<usize>("sample_n");
                let mut train_frac = 0.8;
                let mut val_frac = 0.2;
                r.fraction("train_frac", &mut train_frac, false);
                r.fraction("val_frac", &mut val_frac, true);
                r.finish();
                if format.is_none() && path.is_some() {
                    diags.push(diag(s.line, format!("[{}] needs a format", s.name)));
                }
                if let (Some(d), Some(path), Some(format)) = (domain, path, format) {
                    corpora.insert(
                        d,
                        CorpusSpec {
                            path,
                            format,
                            label_map,
                            sample_n,
                            train_frac,
                            val_frac,
                        },
                    );
                }
            }
            ("encoder", Some(label)) => {
                if label.is_empty() || label.contains(['+', ',']) {
                    diags.push(diag(s.line, format!("invalid encoder label {label:?}")));
                    continue;
                }
                let mut r = Reader::new(s, &mut diags);
                let arch = r.raw("arch").map(|(v, _)| v.to_string()).unwrap_or_else(|| "lstm".into());
                let domain = match r.raw("domain") {
                    Some((v, line)) => match v.parse::<Domain>() {
                        Ok(d) => Some(d),
                        Err(_) => {
                            r.diags.push(diag(line, format!("unknown domain {v:?} in [{}]", s.name)));
                            None
                        }
                    },
                    None => None,
                };
                match arch.as_str() {
                    "lstm" => {
                        let mut cfg = LstmConfig {
                            seed: r.parse::<u64>("seed").or(seed).unwrap_or(0),
                            ..LstmConfig::default()
                        };
                        read_lstm(&mut r, &mut cfg);
                        r.finish();
                        match domain {
                            Some(d) => encoders.push(EncoderSpec {
                                label: label.to_string(),
                                id: EncoderId::new("lstm", d, cfg.seed),
                                kind: EncoderKind::Lstm(cfg),
                            }),
                            None if s.get("domain").is_none() => diags.push(diag(s.line, format!("[{}] needs a domain", s.name))),
                            None => {}
                        }
                    }
                    "external" => {
                        let id = match r.raw("id") {
                            Some((v, line)) => match v.parse::<EncoderId>() {
                                Ok(id) => Some(id),
                                Err(e) => {
                                    r.diags.push(diag(line, e.to_string()));
                                    None
                                }
                            },
                            None => {
                                r.diags.push(diag(s.line, format!("[{}] needs an id such as bert:News:3", s.name)));
                                None
                            }
                        };
                        let features = match r.raw("features") {
                            Some((v, line)) => list(v).iter().map(|p| check_path(base_dir, p, line, &s.name, r.diags)).collect(),
                            None => {
                                r.diags.push(diag(s.line, format!("[{}] needs features", s.name)));
                                Vec::new()
                            }
                        };
                        r.finish();
                        if let Some(id) = id {
                            if domain.is_some_and(|d| d != id.domain) {
                                diags.push(diag(s.line, format!("[{}] domain disagrees with id {id}", s.name)));
                            }
                            encoders.push(EncoderSpec {
                                label: label.to_string(),
                                id,
                                kind: EncoderKind::External { features },
                            });
                        }
                    }
                    other => {
                        r.finish();
                        diags.push(diag(s.line, format!("unknown arch {other:?} in [{}]", s.name)));
                    }
                }
            }
            ("head", None) => {
                let mut r = Reader::new(s, &mut diags);
                if let Some(h) = r.parse::<usize>("hidden") {
                    head.mlp.hidden = Some(h);
                }
                r.set("lr", &mut head.mlp.lr);
                r.positive("batch", &mut head.mlp.batch);
                r.set("epochs", &mut head.mlp.max_epochs);
                r.set("patience", &mut head.mlp.patience);
                r.bool("class_weights", &mut head.mlp.class_weights);
                r.bool("zscore", &mut head.zscore);
                r.finish();
            }
            ("ilc", None) => {
                let mut r = Reader::new(s, &mut diags);
                if let Some((v, line)) = r.raw("combinations") {
                    combos_raw = list(v).into_iter().map(|c| (c, line)).collect();
                }
                r.finish();
            }
            ("projection", None) => {
                let mut r = Reader::new(s, &mut diags);
                r.bool("enabled", &mut projection.enabled);
                if let Some((v, line)) = r.raw("mode") {
                    match v {
                        "centered" => projection.mode = ProjectionMode::Centered,
                        "raw" => projection.mode = ProjectionMode::Raw,
                        _ => r.diags.push(diag(line, format!("mode must be centered or raw, found {v:?}"))),
                    }
                }
                r.finish();
            }
            _ => diags.push(diag(s.line, format!("unknown section [{}]", s.name))),
        }
    }
    encoders.sort_by(|a, b| a.label.cmp(&b.label));

    let mut seen_ids = BTreeSet::new();
    for e in &encoders {
        if !seen_ids.insert(e.id.to_string()) {
            diags.push(Diagnostic {
                line: None,
                message: format!("two encoders share the id {}", e.id),
            });
        }
        if matches!(e.kind, EncoderKind::Lstm(_)) && !corpora.contains_key(&e.domain()) {
            diags.push(Diagnostic {
                line: None,
                message: format!(
                    "encoder {:?} trains on {} but no [corpus.{}] is declared",
                    e.label,
                    e.domain(),
                    e.domain()
                ),
            });
        }
    }

    let mut combinations = Vec::new();
    for (entry, line) in &combos_raw {
        match resolve_combination(entry, &encoders) {
            Ok(labels) => combinations.push(labels),
            Err(msg) => diags.push(diag(*line, msg)),
        }
    }

    let self_count = |d: Domain| encoders.iter().filter(|e| e.domain() == d).count();
    let targets: Vec<Domain> = match targets_raw {
        Some((names, line)) => {
            let mut out = Vec::new();
            for n in names {
                match n.parse::<Domain>() {
                    Ok(d) => {
                        if !corpora.contains_key(&d) {
                            diags.push(diag(line, format!("target {d} has no [corpus.{d}] section")));
                        }
                        match self_count(d) {
                            1 => {}
                            0 => diags.push(diag(line, format!("target {d} has no encoder trained on it"))),
                            k => diags.push(diag(line, format!("target {d} has {k} encoders trained on it; expected one"))),
                        }
                        if !out.contains(&d) {
                            out.push(d);
                        }
                    }
                    Err(_) => diags.push(diag(line, format!("unknown domain {n:?} in targets"))),
                }
            }
            out
        }
        None => corpora.keys().copied().filter(|&d| self_count(d) == 1).collect(),
    };
    if targets.is_empty() && diags.is_empty() {
        diags.push(Diagnostic {
            line: None,
            message: "no target domain: declare a corpus and an encoder trained on it".into(),
        });
    }

    if !diags.is_empty() {
        return (None, diags);
    }
    let config = ExperimentConfig {
        base_dir: base_dir.to_path_buf(),
        seed: seed.expect("checked above"),
        output,
        targets,
        corpora,
        encoders,
        head,
        combinations,
        projection,
        hash,
    };
    (Some(config), diags)
}

fn base_of(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Lists every problem in the config file without running anything.
pub fn validate_config(path: impl AsRef<Path>) -> Result<Vec<Diagnostic>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    Ok(parse_config(&text, &base_of(path)).1)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    match parse_config(&text, &base_of(path)) {
        (Some(cfg), _) => Ok(cfg),
        (None, diags) => Err(Error::Config(diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))),
    }
}
