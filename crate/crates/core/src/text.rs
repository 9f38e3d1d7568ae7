//! Tokenizer, vocabulary and the word-embedding table.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::corpus::{Document, Split};
use crate::error::{Error, Result};
use crate::rng::{self, Prng};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

/// Lowercases, splits on whitespace, keeps alphanumeric runs together and
/// emits every other character as its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            tokens.push(ch.to_lowercase().collect());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    pub min_freq: usize,
    pub max_size: usize,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>, min_freq: usize, max_size: usize) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary {
            tokens,
            index,
            min_freq,
            max_size,
        }
    }

    /// Builds from training documents: tokens seen at least `min_freq` times,
    /// most frequent first (ties in lexicographic order), capped so that the
    /// vocabulary including PAD and UNK has at most `max_size` entries.
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a Document>, min_freq: usize, max_size: usize) -> Result<Self> {
        if max_size < 2 {
            return Err(Error::InvalidArgument("max_size must leave room for PAD and UNK".into()));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut any_text = false;
        for doc in docs {
            if doc.split != Some(Split::Train) {
                return Err(Error::InvalidArgument(format!(
                    "vocabulary must be built from the train split; doc {:?} is not",
                    doc.id
                )));
            }
            for tok in tokenize(&doc.text) {
                any_text = true;
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
        if !any_text {
            return Err(Error::Empty("no training text to build a vocabulary from".into()));
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_freq).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size - 2);

        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        tokens.extend(ranked.into_iter().map(|(t, _)| t));
        Ok(Self::from_tokens(tokens, min_freq, max_size))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Text format: three header lines, then one token per line; the token
    /// on body line `k` (0-based) has index `k + 2`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        out.push_str("# ilc-vocab v1\n");
        out.push_str("# body line k (0-based) holds the token with index k+2; 0=<pad>, 1=<unk>\n");
        out.push_str(&format!("# size={} min_freq={} max_size={}\n", self.len(), self.min_freq, self.max_size));
        for tok in &self.tokens[2..] {
            out.push_str(tok);
            out.push('\n');
        }
        fs::write(path, out).map_err(Error::io(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        let mut lines = text.split('\n');
        let magic = lines.next().unwrap_or("");
        if magic != "# ilc-vocab v1" {
            return Err(Error::Format(format!("{}: not a vocabulary file", path.display())));
        }
        lines.next();
        let meta = lines.next().unwrap_or("");
        let field = |name: &str| -> Result<usize> {
            meta.split_whitespace()
                .find_map(|kv| kv.strip_prefix(name).and_then(|v| v.strip_prefix('=')))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Format(format!("vocabulary header lacks {name}")))
        };
        let (size, min_freq, max_size) = (field("size")?, field("min_freq")?, field("max_size")?);
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        tokens.extend(lines.filter(|l| !l.is_empty()).map(str::to_string));
        if tokens.len() != size {
            return Err(Error::Format(format!("vocabulary header says {size} entries, file has {}", tokens.len())));
        }
        Ok(Self::from_tokens(tokens, min_freq, max_size))
    }
}

/// Indices padded to a fixed width plus the true (unpadded) length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoded {
    pub indices: Vec<usize>,
    pub length: usize,
}

pub fn encode(tokens: &[String], vocab: &Vocabulary, max_len: usize) -> Encoded {
    assert!(max_len >= 1, "max_len must be at least 1");
    let mut indices: Vec<usize> = tokens.iter().take(max_len).map(|t| vocab.index_of(t)).collect();
    let length = indices.len();
    indices.resize(max_len, PAD);
    Encoded { indices, length }
}

pub fn decode(encoded: &Encoded, vocab: &Vocabulary) -> Vec<String> {
    encoded.indices[..encoded.length]
        .iter()
        .map(|&i| vocab.token(i).unwrap_or(UNK_TOKEN).to_string())
        .collect()
}

/// Row-major `rows × dim` matrix; row `PAD` is held at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingTable {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    /// Uniform in [-0.05, 0.05], PAD row zero.
    pub fn init(rows: usize, dim: usize, prng: &mut Prng) -> Self {
        let mut table = Self::zeros(rows, dim);
        for v in table.data.iter_mut().skip(dim) {
            *v = rng::uniform(prng, -0.05, 0.05);
        }
        table
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }
}
