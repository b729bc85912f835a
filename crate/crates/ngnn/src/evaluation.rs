//! Fill-in-the-blank and pairwise-ranking evaluation protocols.
//!
//! Both protocols compare only score orderings, so any strictly increasing
//! transform of a scorer leaves the metrics unchanged. Ties are counted and
//! reported: the ranking metric uses a strict comparison (a tie scores zero)
//! and fill-in-the-blank breaks ties toward the lowest candidate index, with
//! candidate order shuffled per question so a constant scorer still lands at
//! the random baseline in expectation.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{Item, Outfit};
use crate::error::{Error, Result};
use crate::graph::FashionGraph;
use crate::hash::Fnv1a;
use crate::model::{score_any, FeatureSet, ModelParams};
use crate::rng::Rng;

/// Anything that can score an outfit. Higher means more compatible.
pub trait OutfitScorer {
    fn score(&self, outfit: &Outfit) -> Result<f64>;
}

impl<F> OutfitScorer for F
where
    F: Fn(&Outfit) -> Result<f64>,
{
    fn score(&self, outfit: &Outfit) -> Result<f64> {
        self(outfit)
    }
}

/// Scores outfits through a frozen model.
pub struct ModelScorer<'a> {
    pub params: &'a ModelParams,
    pub graph: &'a FashionGraph,
    pub features: FeatureSet<'a>,
}

impl OutfitScorer for ModelScorer<'_> {
    fn score(&self, outfit: &Outfit) -> Result<f64> {
        score_any(outfit, self.graph, self.params, &self.features)
    }
}

/// One fill-in-the-blank question: an outfit with one slot blanked and four
/// candidates for it, exactly one of which is the original item.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitbQuestion {
    pub base: Outfit,
    pub blank_slot: usize,
    /// Four candidates in shuffled order.
    pub candidates: Vec<Item>,
    /// Index of the true item within `candidates`.
    pub answer: usize,
}

/// A held-out outfit paired with a fully random one of the same size.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalPair {
    pub positive: Outfit,
    pub negative: Outfit,
}

const CANDIDATES_PER_QUESTION: usize = 4;
const MAX_DRAWS: usize = 10_000;

/// Build one question per test outfit.
///
/// The blanked slot is uniform; the three negatives are uniform over the
/// pool, re-drawn whenever a draw equals the true item, repeats an earlier
/// candidate, or collides with a non-blanked slot's category. With
/// `same_category`, negatives are further restricted to the blanked item's
/// category.
pub fn build_fitb_set(
    test_outfits: &[&Outfit],
    pool: &[Item],
    seed: u64,
    same_category: bool,
) -> Result<Vec<FitbQuestion>> {
    if test_outfits.is_empty() {
        return Err(Error::Ingestion("no test outfits".into()));
    }
    if pool.len() < CANDIDATES_PER_QUESTION {
        return Err(Error::Sampling(format!(
            "item pool of {} is too small for {CANDIDATES_PER_QUESTION}-way questions",
            pool.len()
        )));
    }
    let mut rng = Rng::for_stream(seed, "fitb");
    let mut questions = Vec::with_capacity(test_outfits.len());
    for outfit in test_outfits {
        let blank_slot = rng.below(outfit.len());
        let truth = &outfit.items[blank_slot];
        let other_categories: Vec<usize> = outfit
            .items
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != blank_slot)
            .map(|(_, item)| item.category)
            .collect();

        let mut candidates: Vec<Item> = vec![truth.clone()];
        let mut draws = 0;
        while candidates.len() < CANDIDATES_PER_QUESTION {
            draws += 1;
            if draws > MAX_DRAWS {
                return Err(Error::Sampling(format!(
                    "could not find {CANDIDATES_PER_QUESTION} valid candidates for outfit {}",
                    outfit.outfit_id
                )));
            }
            let item = rng.choose(pool);
            if same_category && item.category != truth.category {
                continue;
            }
            if item.item_id == truth.item_id {
                continue;
            }
            if other_categories.contains(&item.category) {
                continue;
            }
            if candidates.iter().any(|c| c.item_id == item.item_id) {
                continue;
            }
            candidates.push(item.clone());
        }

        rng.shuffle(&mut candidates);
        let answer = candidates
            .iter()
            .position(|c| c.item_id == truth.item_id)
            .expect("truth is among the candidates");
        questions.push(FitbQuestion {
            base: (*outfit).clone(),
            blank_slot,
            candidates,
            answer,
        });
    }
    Ok(questions)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitbReport {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// Questions whose best score was shared by more than one candidate.
    pub tie_count: usize,
}

/// Fraction of questions whose best-scoring candidate is the true item.
/// Ties break toward the lowest candidate index and are counted.
pub fn fitb_accuracy<S: OutfitScorer>(
    questions: &[FitbQuestion],
    scorer: &S,
) -> Result<FitbReport> {
    let mut correct = 0;
    let mut tie_count = 0;
    for q in questions {
        let mut best_idx = 0;
        let mut best_score = f64::NEG_INFINITY;
        let mut best_shared = false;
        for (idx, candidate) in q.candidates.iter().enumerate() {
            let scored = q.base.with_replaced(q.blank_slot, candidate.clone());
            let s = scorer.score(&scored)?;
            if s > best_score {
                best_score = s;
                best_idx = idx;
                best_shared = false;
            } else if s == best_score {
                best_shared = true;
            }
        }
        if best_shared {
            tie_count += 1;
        }
        if best_idx == q.answer {
            correct += 1;
        }
    }
    Ok(FitbReport {
        accuracy: correct as f64 / questions.len() as f64,
        correct,
        total: questions.len(),
        tie_count,
    })
}

/// Build one evaluation pair per test outfit: the negative redraws every slot
/// uniformly from the pool under category-distinctness rejection.
pub fn build_auc_set(test_outfits: &[&Outfit], pool: &[Item], seed: u64) -> Result<Vec<EvalPair>> {
    if test_outfits.is_empty() {
        return Err(Error::Ingestion("no test outfits".into()));
    }
    if pool.is_empty() {
        return Err(Error::Sampling("empty item pool".into()));
    }
    let mut rng = Rng::for_stream(seed, "auc");
    let mut pairs = Vec::with_capacity(test_outfits.len());
    for outfit in test_outfits {
        let mut items: Vec<Item> = Vec::with_capacity(outfit.len());
        let mut categories: Vec<usize> = Vec::with_capacity(outfit.len());
        let mut draws = 0;
        while items.len() < outfit.len() {
            draws += 1;
            if draws > MAX_DRAWS {
                return Err(Error::Sampling(format!(
                    "could not sample a size-{} random outfit for {}",
                    outfit.len(),
                    outfit.outfit_id
                )));
            }
            let item = rng.choose(pool);
            if categories.contains(&item.category) {
                continue;
            }
            categories.push(item.category);
            items.push(item.clone());
        }
        let negative = Outfit {
            outfit_id: format!("{}#random", outfit.outfit_id),
            split: outfit.split,
            items,
        };
        pairs.push(EvalPair {
            positive: (*outfit).clone(),
            negative,
        });
    }
    Ok(pairs)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AucReport {
    pub auc: f64,
    /// Pairs where the positive strictly outscored the negative.
    pub wins: usize,
    pub total: usize,
    /// Pairs with exactly equal scores; these score zero.
    pub tie_count: usize,
}

/// Fraction of pairs whose positive outfit strictly outscores its negative.
pub fn auc<S: OutfitScorer>(pairs: &[EvalPair], scorer: &S) -> Result<AucReport> {
    let mut wins = 0;
    let mut tie_count = 0;
    for pair in pairs {
        let pos = scorer.score(&pair.positive)?;
        let neg = scorer.score(&pair.negative)?;
        if pos > neg {
            wins += 1;
        } else if pos == neg {
            tie_count += 1;
        }
    }
    Ok(AucReport {
        auc: wins as f64 / pairs.len() as f64,
        wins,
        total: pairs.len(),
        tie_count,
    })
}

/// Final eval record: metric identity plus everything needed to reproduce it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub value: f64,
    pub tie_count: usize,
    pub total: usize,
    pub seed: u64,
    pub checkpoint_hash: String,
    pub eval_set_hash: String,
}

/// Write items as line-delimited JSON.
pub fn export_jsonl<T: Serialize, W: Write>(mut w: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Read items from line-delimited JSON.
pub fn import_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(reader: R) -> Result<Vec<T>> {
    let mut items = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line).map_err(|e| {
            Error::Format(format!("eval set line {}: {}", lineno + 1, e))
        })?);
    }
    Ok(items)
}

/// Content hash of an eval set (its serialized JSONL bytes).
pub fn eval_set_hash<T: Serialize>(items: &[T]) -> Result<u64> {
    let mut buf = Vec::new();
    export_jsonl(&mut buf, items)?;
    let mut h = Fnv1a::new();
    h.write(&buf);
    Ok(h.finish())
}
