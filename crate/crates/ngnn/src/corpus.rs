//! Outfit corpus records and ingestion.
//!
//! The on-disk corpus is line-delimited JSON, one outfit per line:
//!
//! ```json
//! {"outfit_id":"o1","split":"train","items":[
//!   {"item_id":"i9","category":"boots","title":"leather ankle boots",
//!    "visual_key":"i9","textual_key":"i9"}]}
//! ```
//!
//! `visual_key`/`textual_key` are optional and default to the item id; they
//! name rows in the dense feature files. Ingestion maps categories onto a
//! [`CategoryVocab`](crate::graph::CategoryVocab), drops items whose category
//! fell below the keep threshold, deduplicates categories within an outfit
//! (first item wins), and then drops outfits that end up outside the allowed
//! size range.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CategoryVocab;

/// Smallest outfit kept by ingestion.
pub const MIN_OUTFIT_ITEMS: usize = 3;

/// Default cap on outfit size.
pub const DEFAULT_MAX_OUTFIT_ITEMS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Valid => write!(f, "valid"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// One item as it appears on disk.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemRecord {
    pub item_id: String,
    pub category: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visual_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub textual_key: Option<String>,
}

/// One outfit as it appears on disk.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutfitRecord {
    pub outfit_id: String,
    pub split: Split,
    pub items: Vec<ItemRecord>,
}

/// An item after ingestion: category resolved to a vocab index, feature keys
/// resolved to concrete strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    pub category: usize,
    pub title: String,
    pub visual_key: String,
    pub textual_key: String,
}

impl Item {
    fn from_record(rec: &ItemRecord, category: usize) -> Self {
        Item {
            item_id: rec.item_id.clone(),
            category,
            title: rec.title.clone(),
            visual_key: rec.visual_key.clone().unwrap_or_else(|| rec.item_id.clone()),
            textual_key: rec.textual_key.clone().unwrap_or_else(|| rec.item_id.clone()),
        }
    }
}

/// An ingested outfit. Categories of its items are pairwise distinct.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outfit {
    pub outfit_id: String,
    pub split: Split,
    pub items: Vec<Item>,
}

impl Outfit {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn category_indices(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.category).collect()
    }

    /// A copy with the item at `slot` replaced.
    pub fn with_replaced(&self, slot: usize, item: Item) -> Outfit {
        let mut items = self.items.clone();
        items[slot] = item;
        Outfit {
            outfit_id: self.outfit_id.clone(),
            split: self.split,
            items,
        }
    }
}

/// What ingestion kept and what it threw away.
#[derive(Clone, Debug, Default)]
pub struct IngestStats {
    pub outfits_kept: usize,
    pub outfits_dropped_small: usize,
    pub outfits_dropped_large: usize,
    pub items_dropped_unknown_category: usize,
    pub items_dropped_duplicate_category: usize,
    pub warnings: Vec<String>,
}

/// An ingested corpus plus its ingestion report.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub outfits: Vec<Outfit>,
    pub stats: IngestStats,
}

impl Corpus {
    pub fn split(&self, split: Split) -> Vec<&Outfit> {
        self.outfits.iter().filter(|o| o.split == split).collect()
    }

    /// Unique items across the given splits, in first-occurrence order.
    pub fn item_pool(&self, splits: &[Split]) -> Vec<Item> {
        let mut seen = HashSet::new();
        let mut pool = Vec::new();
        for outfit in &self.outfits {
            if !splits.contains(&outfit.split) {
                continue;
            }
            for item in &outfit.items {
                if seen.insert(item.item_id.clone()) {
                    pool.push(item.clone());
                }
            }
        }
        pool
    }
}

/// Parse line-delimited outfit records. Blank lines are ignored; a malformed
/// line reports its line number.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<OutfitRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: OutfitRecord = serde_json::from_str(&line).map_err(|e| {
            Error::Format(format!("corpus line {}: {}", lineno + 1, e))
        })?;
        records.push(rec);
    }
    Ok(records)
}

pub fn read_records_from_path(path: &std::path::Path) -> Result<Vec<OutfitRecord>> {
    let file = std::fs::File::open(path).map_err(|e| {
        Error::Ingestion(format!("cannot open corpus {}: {}", path.display(), e))
    })?;
    read_records(std::io::BufReader::new(file))
}

pub fn write_records<W: Write>(mut w: W, records: &[OutfitRecord]) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Map raw records onto a vocabulary, enforcing outfit validity.
///
/// Order of operations per outfit: duplicate categories are collapsed to the
/// first item, items with out-of-vocab categories are dropped, and the outfit
/// is discarded when fewer than [`MIN_OUTFIT_ITEMS`] or more than
/// `max_outfit_size` items remain.
pub fn ingest(
    records: &[OutfitRecord],
    vocab: &CategoryVocab,
    max_outfit_size: usize,
) -> Corpus {
    let mut stats = IngestStats::default();
    let mut outfits = Vec::new();

    for rec in records {
        let mut seen_categories = HashSet::new();
        let mut items = Vec::new();
        for item_rec in &rec.items {
            let Some(cat) = vocab.lookup(&item_rec.category) else {
                stats.items_dropped_unknown_category += 1;
                continue;
            };
            if !seen_categories.insert(cat) {
                stats.items_dropped_duplicate_category += 1;
                stats.warnings.push(format!(
                    "outfit {}: duplicate category '{}', keeping first item",
                    rec.outfit_id, item_rec.category
                ));
                continue;
            }
            items.push(Item::from_record(item_rec, cat));
        }
        if items.len() < MIN_OUTFIT_ITEMS {
            stats.outfits_dropped_small += 1;
            continue;
        }
        if items.len() > max_outfit_size {
            stats.outfits_dropped_large += 1;
            stats.warnings.push(format!(
                "outfit {}: {} items exceeds the maximum of {}, dropped",
                rec.outfit_id,
                items.len(),
                max_outfit_size
            ));
            continue;
        }
        stats.outfits_kept += 1;
        outfits.push(Outfit {
            outfit_id: rec.outfit_id.clone(),
            split: rec.split,
            items,
        });
    }

    Corpus { outfits, stats }
}
