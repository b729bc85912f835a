//! Negative outfit sampling.

use crate::corpus::{Item, Outfit};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// A positive outfit and its one-item-corrupted counterpart.
#[derive(Clone, Debug)]
pub struct TrainPair {
    pub positive: Outfit,
    pub negative: Outfit,
    pub replaced_slot: usize,
}

/// Corrupt one uniformly chosen slot with a uniformly chosen pool item.
///
/// Replacements are re-drawn until the corrupted outfit keeps pairwise
/// distinct categories; the replacement is also never the replaced item
/// itself. Exhausting `max_retries` draws is an error.
pub fn sample_negative(
    outfit: &Outfit,
    pool: &[Item],
    rng: &mut Rng,
    max_retries: usize,
) -> Result<TrainPair> {
    if pool.is_empty() {
        return Err(Error::Sampling("empty item pool".into()));
    }
    let slot = rng.below(outfit.len());
    let replaced = &outfit.items[slot];
    let other_categories: Vec<usize> = outfit
        .items
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != slot)
        .map(|(_, item)| item.category)
        .collect();

    for _ in 0..max_retries {
        let candidate = rng.choose(pool);
        if candidate.item_id == replaced.item_id {
            continue;
        }
        if other_categories.contains(&candidate.category) {
            continue;
        }
        let negative = outfit.with_replaced(slot, candidate.clone());
        return Ok(TrainPair {
            positive: outfit.clone(),
            negative,
            replaced_slot: slot,
        });
    }
    Err(Error::Sampling(format!(
        "no valid replacement for slot {slot} of outfit {} after {max_retries} draws",
        outfit.outfit_id
    )))
}
