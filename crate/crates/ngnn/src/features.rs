//! Per-item feature vectors: bag-of-words text encoding and dense feature
//! files for precomputed (visual) embeddings.
//!
//! Text handling is deliberately plain. Titles are lowercased and split on
//! runs of non-alphanumeric characters; a word survives into the vocabulary
//! when it occurs in at least [`MIN_WORD_ITEMS`] items and is at least
//! [`MIN_WORD_CHARS`] characters long. Encoded vectors are Boolean: word
//! multiplicity does not matter.
//!
//! Dense features live in a small binary container (see [`FeatureStore`]):
//!
//! ```text
//! magic "NGFT" | version u16 | kind u8 | reserved u8 | item_count u64 | dim u32
//! then per item: key_len u32 | key bytes | dim * f32, all little-endian
//! ```
//!
//! Rows are stored as 32-bit floats and widened to f64 on load.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::hash::Fnv1a;

/// Which modality a feature store carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureKind {
    Visual,
    Textual,
}

impl FeatureKind {
    fn tag(self) -> u8 {
        match self {
            FeatureKind::Visual => 0,
            FeatureKind::Textual => 1,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(FeatureKind::Visual),
            1 => Ok(FeatureKind::Textual),
            other => Err(Error::Format(format!("unknown modality tag {other}"))),
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureKind::Visual => write!(f, "visual"),
            FeatureKind::Textual => write!(f, "textual"),
        }
    }
}

/// Words kept in < this many items are dropped.
pub const MIN_WORD_ITEMS: usize = 5;

/// Words shorter than this many characters are dropped.
pub const MIN_WORD_CHARS: usize = 3;

/// Lowercase and split on runs of non-alphanumeric characters.
pub fn tokenize(title: &str) -> Vec<String> {
    title
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Bag-of-words vocabulary with per-word item frequency.
///
/// Ordering is deterministic: descending item frequency, ties broken by word.
#[derive(Clone, Debug)]
pub struct TextVocab {
    words: Vec<String>,
    item_freq: Vec<u64>,
    index: HashMap<String, usize>,
}

impl TextVocab {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn lookup(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, idx: usize) -> &str {
        &self.words[idx]
    }

    pub fn item_frequency(&self, idx: usize) -> u64 {
        self.item_freq[idx]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Delimited-text export: word, index, item frequency.
    pub fn export<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# word\tindex\titem_frequency")?;
        for (i, (word, freq)) in self.words.iter().zip(&self.item_freq).enumerate() {
            writeln!(w, "{word}\t{i}\t{freq}")?;
        }
        Ok(())
    }
}

/// Build the vocabulary from one title per item.
///
/// A word counts once per item no matter how often the title repeats it. The
/// frequency filter and the length filter are independent predicates, so
/// their order does not affect the result.
pub fn build_text_vocab(titles: &[&str]) -> Result<TextVocab> {
    if titles.is_empty() {
        return Err(Error::Ingestion("no titles to build a vocabulary from".into()));
    }
    let mut freq: HashMap<String, u64> = HashMap::new();
    for title in titles {
        let mut tokens = tokenize(title);
        tokens.sort();
        tokens.dedup();
        for tok in tokens {
            *freq.entry(tok).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(String, u64)> = freq
        .into_iter()
        .filter(|(w, c)| *c >= MIN_WORD_ITEMS as u64 && w.chars().count() >= MIN_WORD_CHARS)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let words: Vec<String> = kept.iter().map(|(w, _)| w.clone()).collect();
    let item_freq: Vec<u64> = kept.iter().map(|&(_, c)| c).collect();
    let index = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    Ok(TextVocab {
        words,
        item_freq,
        index,
    })
}

/// Boolean encoding of a title against the vocabulary. Out-of-vocabulary
/// words are ignored; repeated words still produce a 1.
pub fn encode_text(title: &str, vocab: &TextVocab) -> Vec<f64> {
    let mut v = vec![0.0; vocab.len()];
    for tok in tokenize(title) {
        if let Some(idx) = vocab.lookup(&tok) {
            v[idx] = 1.0;
        }
    }
    v
}

/// Item-keyed dense vectors of one modality and one dimensionality.
#[derive(Clone, Debug)]
pub struct FeatureStore {
    kind: FeatureKind,
    dim: usize,
    keys: Vec<String>,
    rows: Vec<f64>,
    index: HashMap<String, usize>,
}

const FEATURE_MAGIC: &[u8; 4] = b"NGFT";
const FEATURE_VERSION: u16 = 1;

impl FeatureStore {
    pub fn new(kind: FeatureKind, dim: usize) -> Self {
        FeatureStore {
            kind,
            dim,
            keys: Vec::new(),
            rows: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn insert(&mut self, key: &str, row: Vec<f64>) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::Format(format!(
                "feature row for '{key}': expected dimension {}, found {}",
                self.dim,
                row.len()
            )));
        }
        if self.index.contains_key(key) {
            return Err(Error::Format(format!("duplicate feature key '{key}'")));
        }
        self.index.insert(key.to_string(), self.keys.len());
        self.keys.push(key.to_string());
        self.rows.extend(row);
        Ok(())
    }

    /// Row for an item key; missing keys are an error naming the item.
    pub fn get(&self, key: &str) -> Result<&[f64]> {
        match self.index.get(key) {
            Some(&i) => Ok(&self.rows[i * self.dim..(i + 1) * self.dim]),
            None => Err(Error::Lookup(format!(
                "no {} feature for item '{key}'",
                self.kind
            ))),
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write(&[self.kind.tag()]);
        h.write_u64(self.dim as u64);
        h.write_u64(self.keys.len() as u64);
        for (i, key) in self.keys.iter().enumerate() {
            h.write_str(key);
            for v in &self.rows[i * self.dim..(i + 1) * self.dim] {
                h.write_f64(*v);
            }
        }
        h.finish()
    }

    /// Serialize to the documented binary layout.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(FEATURE_MAGIC)?;
        w.write_all(&FEATURE_VERSION.to_le_bytes())?;
        w.write_all(&[self.kind.tag(), 0])?;
        w.write_all(&(self.keys.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for (i, key) in self.keys.iter().enumerate() {
            w.write_all(&(key.len() as u32).to_le_bytes())?;
            w.write_all(key.as_bytes())?;
            for v in &self.rows[i * self.dim..(i + 1) * self.dim] {
                w.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn write_to_path(&self, path: &std::path::Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut file)?;
        Ok(())
    }

    /// Load and validate. `expected_dim` guards against wiring a store built
    /// for one model into another.
    pub fn read<R: Read>(mut r: R, expected_dim: Option<usize>) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != FEATURE_MAGIC {
            return Err(Error::Format(format!(
                "bad feature file magic {magic:?}, expected {FEATURE_MAGIC:?}"
            )));
        }
        let version = read_u16(&mut r)?;
        if version != FEATURE_VERSION {
            return Err(Error::Format(format!(
                "unsupported feature file version {version}"
            )));
        }
        let mut kind_bytes = [0u8; 2];
        read_exact(&mut r, &mut kind_bytes, "modality tag")?;
        let kind = FeatureKind::from_tag(kind_bytes[0])?;
        let count = read_u64(&mut r)? as usize;
        let dim = read_u32(&mut r)? as usize;
        if let Some(expected) = expected_dim {
            if dim != expected {
                return Err(Error::Format(format!(
                    "feature file dimension mismatch: expected {expected}, found {dim}"
                )));
            }
        }

        let mut store = FeatureStore::new(kind, dim);
        let mut float_buf = [0u8; 4];
        for i in 0..count {
            let key_len = read_u32(&mut r)? as usize;
            let mut key_bytes = vec![0u8; key_len];
            read_exact(&mut r, &mut key_bytes, "item key")?;
            let key = String::from_utf8(key_bytes)
                .map_err(|_| Error::Format(format!("item key {i} is not valid UTF-8")))?;
            let mut row = Vec::with_capacity(dim);
            for j in 0..dim {
                r.read_exact(&mut float_buf).map_err(|_| {
                    Error::Format(format!(
                        "feature row for '{key}': expected {dim} values, file ended at {j}"
                    ))
                })?;
                row.push(f32::from_le_bytes(float_buf) as f64);
            }
            store.insert(&key, row)?;
        }
        Ok(store)
    }

    pub fn read_from_path(path: &std::path::Path, expected_dim: Option<usize>) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| {
            Error::Format(format!("cannot open feature file {}: {e}", path.display()))
        })?;
        Self::read(std::io::BufReader::new(file), expected_dim)
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Format(format!("feature file truncated while reading {what}")))
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut b = [0u8; 2];
    read_exact(r, &mut b, "u16 field")?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, "u32 field")?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, "u64 field")?;
    Ok(u64::from_le_bytes(b))
}

/// Encode every distinct item title in the corpus into a textual store.
pub fn build_text_features(
    items: &[crate::corpus::Item],
    vocab: &TextVocab,
) -> Result<FeatureStore> {
    let mut store = FeatureStore::new(FeatureKind::Textual, vocab.len());
    for item in items {
        if store.contains(&item.textual_key) {
            continue;
        }
        store.insert(&item.textual_key, encode_text(&item.title, vocab))?;
    }
    Ok(store)
}
