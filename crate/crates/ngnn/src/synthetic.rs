//! Desk-scale synthetic corpora with a planted compatibility structure.
//!
//! Every item carries a hidden style vector drawn around one of a handful of
//! theme centers. A positive outfit picks items of a single theme across
//! distinct categories and is accepted only if its mean pairwise style
//! distance stays below a planted threshold, so "compatible" has a ground
//! truth: the closer the styles, the better the set. Observable features are
//! two different noisy linear views (visual and textual) of the same hidden
//! style, which gives the two-channel consistency term something real to
//! agree about.
//!
//! The generator emits the same corpus records and feature stores the
//! real-data path ingests, then runs the ordinary vocabulary/ingestion
//! pipeline over them, so downstream code cannot tell the difference.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{ingest, Corpus, ItemRecord, Outfit, OutfitRecord, Split};
use crate::error::{Error, Result};
use crate::evaluation::OutfitScorer;
use crate::features::{FeatureKind, FeatureStore};
use crate::graph::{build_vocab, CategoryVocab, FashionGraph};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub categories: usize,
    pub items_per_category: usize,
    /// Hidden style dimensionality.
    pub style_dim: usize,
    /// Number of theme clusters items are drawn around.
    pub themes: usize,
    /// Scale of theme centers relative to the unit style noise.
    pub theme_spread: f64,
    /// Within-theme style noise.
    pub style_noise: f64,
    pub visual_dim: usize,
    pub textual_dim: usize,
    /// Observation noise added to each feature view.
    pub feature_noise: f64,
    /// Accept an outfit only if its mean pairwise style distance is below
    /// this.
    pub dispersion_threshold: f64,
    pub train_outfits: usize,
    pub valid_outfits: usize,
    pub test_outfits: usize,
    pub min_items: usize,
    pub max_items: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            categories: 12,
            items_per_category: 50,
            style_dim: 4,
            themes: 6,
            theme_spread: 1.5,
            style_noise: 0.3,
            visual_dim: 16,
            textual_dim: 10,
            feature_noise: 0.1,
            dispersion_threshold: 1.5,
            train_outfits: 2000,
            valid_outfits: 200,
            test_outfits: 400,
            min_items: 3,
            max_items: 8,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.categories < 4 {
            problems.push(format!("need at least 4 categories, got {}", self.categories));
        }
        if self.items_per_category < 10 {
            problems.push(format!(
                "need at least 10 items per category, got {}",
                self.items_per_category
            ));
        }
        if self.style_dim == 0 || self.themes == 0 {
            problems.push("style_dim and themes must be positive".into());
        }
        if self.visual_dim == 0 || self.textual_dim == 0 {
            problems.push("feature dimensions must be positive".into());
        }
        if self.min_items < 3 || self.min_items > self.max_items {
            problems.push(format!(
                "outfit size range [{}, {}] is invalid (min 3)",
                self.min_items, self.max_items
            ));
        }
        if self.max_items > self.categories {
            problems.push(format!(
                "max_items {} exceeds category count {}",
                self.max_items, self.categories
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Generation(problems.join("; ")))
        }
    }
}

/// The hidden state of a generated world: per-item styles and the oracle.
#[derive(Clone, Debug)]
pub struct PlantedWorld {
    config: WorldConfig,
    item_ids: Vec<String>,
    /// Flattened style vectors, aligned with `item_ids`.
    styles: Vec<f64>,
    index: std::collections::HashMap<String, usize>,
}

impl PlantedWorld {
    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn style(&self, item_id: &str) -> Result<&[f64]> {
        let k = self.config.style_dim;
        match self.index.get(item_id) {
            Some(&i) => Ok(&self.styles[i * k..(i + 1) * k]),
            None => Err(Error::Lookup(format!("unknown item '{item_id}'"))),
        }
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    /// Delimited-text export of the hidden styles: item id then one column
    /// per style dimension.
    pub fn export_styles<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let k = self.config.style_dim;
        write!(w, "# item_id")?;
        for dim in 0..k {
            write!(w, "\tstyle{dim}")?;
        }
        writeln!(w)?;
        for (i, id) in self.item_ids.iter().enumerate() {
            write!(w, "{id}")?;
            for v in &self.styles[i * k..(i + 1) * k] {
                write!(w, "\t{v:.12e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Ground-truth compatibility: negative mean pairwise style distance.
    /// Outfits with fewer than two items score 0, the maximum.
    ///
    /// Items are visited in a canonical order so the score is bit-identical
    /// under permutations of the item list.
    pub fn oracle_score(&self, outfit: &Outfit) -> Result<f64> {
        let mut styles: Vec<(&str, &[f64])> = outfit
            .items
            .iter()
            .map(|item| Ok((item.item_id.as_str(), self.style(&item.item_id)?)))
            .collect::<Result<_>>()?;
        styles.sort_by_key(|&(id, _)| id);
        let ordered: Vec<&[f64]> = styles.into_iter().map(|(_, s)| s).collect();
        Ok(-mean_pairwise_distance(&ordered))
    }
}

impl OutfitScorer for PlantedWorld {
    fn score(&self, outfit: &Outfit) -> Result<f64> {
        self.oracle_score(outfit)
    }
}

fn mean_pairwise_distance(styles: &[&[f64]]) -> f64 {
    if styles.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in 0..styles.len() {
        for b in (a + 1)..styles.len() {
            total += euclidean(styles[a], styles[b]);
            pairs += 1;
        }
    }
    total / pairs as f64
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Everything `generate` produces.
#[derive(Clone, Debug)]
pub struct SynthData {
    /// Raw records exactly as they would sit on disk.
    pub records: Vec<OutfitRecord>,
    /// The records run through the ordinary ingestion pipeline.
    pub corpus: Corpus,
    pub vocab: CategoryVocab,
    pub visual: FeatureStore,
    pub textual: FeatureStore,
    pub world: PlantedWorld,
}

impl SynthData {
    /// Category graph over the train split.
    pub fn build_graph(&self) -> Result<FashionGraph> {
        FashionGraph::build(&self.corpus.split(Split::Train), self.vocab.clone())
    }
}

fn category_name(c: usize) -> String {
    format!("cat{c:02}")
}

const MAX_OUTFIT_ATTEMPTS: usize = 1000;

/// Generate a seeded world: items with hidden styles, two feature views, and
/// disjoint train/valid/test outfit splits of planted positives.
pub fn generate(config: &WorldConfig, seed: u64) -> Result<SynthData> {
    config.validate()?;
    let k = config.style_dim;

    // Theme centers and per-item styles.
    let mut style_rng = Rng::for_stream(seed, "styles");
    let theme_centers: Vec<f64> = (0..config.themes * k)
        .map(|_| config.theme_spread * style_rng.normal())
        .collect();
    let item_count = config.categories * config.items_per_category;
    let mut item_ids = Vec::with_capacity(item_count);
    let mut styles = Vec::with_capacity(item_count * k);
    let mut item_theme = Vec::with_capacity(item_count);
    // theme -> category -> item indices
    let mut by_theme_cat: Vec<Vec<Vec<usize>>> =
        vec![vec![Vec::new(); config.categories]; config.themes];
    #[allow(clippy::needless_range_loop)]
    for c in 0..config.categories {
        for i in 0..config.items_per_category {
            let idx = item_ids.len();
            let theme = style_rng.below(config.themes);
            item_ids.push(format!("c{c:02}_i{i:03}"));
            for dim in 0..k {
                styles.push(theme_centers[theme * k + dim] + config.style_noise * style_rng.normal());
            }
            item_theme.push(theme);
            by_theme_cat[theme][c].push(idx);
        }
    }

    // Two noisy linear views of the styles, scaled so feature entries come
    // out near unit variance regardless of the planted style spread.
    let mut proj_rng = Rng::for_stream(seed, "projections");
    let style_sd = (config.theme_spread * config.theme_spread
        + config.style_noise * config.style_noise)
        .sqrt();
    let scale = 1.0 / ((k as f64).sqrt() * style_sd);
    let vis_proj: Vec<f64> = (0..config.visual_dim * k)
        .map(|_| scale * proj_rng.normal())
        .collect();
    let txt_proj: Vec<f64> = (0..config.textual_dim * k)
        .map(|_| scale * proj_rng.normal())
        .collect();

    let mut visual = FeatureStore::new(FeatureKind::Visual, config.visual_dim);
    let mut textual = FeatureStore::new(FeatureKind::Textual, config.textual_dim);
    let mut vis_rng = Rng::for_stream(seed, "features/visual");
    let mut txt_rng = Rng::for_stream(seed, "features/textual");
    for (idx, id) in item_ids.iter().enumerate() {
        let style = &styles[idx * k..(idx + 1) * k];
        // Quantize to feature-file precision so the in-memory stores match
        // the emitted binaries bit for bit.
        let view = |proj: &[f64], dim: usize, rng: &mut Rng, noise: f64| -> Vec<f64> {
            (0..dim)
                .map(|r| {
                    let signal: f64 = (0..k).map(|c| proj[r * k + c] * style[c]).sum();
                    (signal + noise * rng.normal()) as f32 as f64
                })
                .collect()
        };
        visual.insert(id, view(&vis_proj, config.visual_dim, &mut vis_rng, config.feature_noise))?;
        textual.insert(id, view(&txt_proj, config.textual_dim, &mut txt_rng, config.feature_noise))?;
    }

    // Outfits: one theme each, distinct categories, dispersion-gated.
    let mut outfit_rng = Rng::for_stream(seed, "outfits");
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut records = Vec::new();
    let plan = [
        (Split::Train, config.train_outfits),
        (Split::Valid, config.valid_outfits),
        (Split::Test, config.test_outfits),
    ];
    for (split, count) in plan {
        for n in 0..count {
            let mut accepted = None;
            for _ in 0..MAX_OUTFIT_ATTEMPTS {
                let theme = outfit_rng.below(config.themes);
                let size = config.min_items + outfit_rng.below(config.max_items - config.min_items + 1);
                let mut cats: Vec<usize> = (0..config.categories).collect();
                outfit_rng.shuffle(&mut cats);
                let mut members = Vec::with_capacity(size);
                let mut ok = true;
                for &c in cats.iter().take(size) {
                    let pool = &by_theme_cat[theme][c];
                    if pool.is_empty() {
                        ok = false;
                        break;
                    }
                    members.push(pool[outfit_rng.below(pool.len())]);
                }
                if !ok {
                    continue;
                }
                let member_styles: Vec<&[f64]> = members
                    .iter()
                    .map(|&i| &styles[i * k..(i + 1) * k])
                    .collect();
                if mean_pairwise_distance(&member_styles) >= config.dispersion_threshold {
                    continue;
                }
                let mut key = members.clone();
                key.sort_unstable();
                if !seen.insert(key) {
                    continue;
                }
                accepted = Some((theme, members));
                break;
            }
            let Some((theme, members)) = accepted else {
                return Err(Error::Generation(format!(
                    "could not assemble outfit {n} for split {split} within \
                     {MAX_OUTFIT_ATTEMPTS} attempts; loosen the dispersion threshold \
                     or enlarge the world"
                )));
            };
            let items = members
                .iter()
                .map(|&idx| {
                    let c = idx / config.items_per_category;
                    ItemRecord {
                        item_id: item_ids[idx].clone(),
                        category: category_name(c),
                        title: format!("{} theme{theme} piece", category_name(c)),
                        visual_key: None,
                        textual_key: None,
                    }
                })
                .collect();
            records.push(OutfitRecord {
                outfit_id: format!("synth-{split}-{n:05}"),
                split,
                items,
            });
        }
    }

    // Run the emitted records through the ordinary pipeline.
    let vocab = build_vocab(&records, 0)?;
    let corpus = ingest(&records, &vocab, config.max_items);

    let index = item_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i))
        .collect();
    Ok(SynthData {
        records,
        corpus,
        vocab,
        visual,
        textual,
        world: PlantedWorld {
            config: config.clone(),
            item_ids,
            styles,
            index,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{write_records, Item};

    fn small_config() -> WorldConfig {
        WorldConfig {
            categories: 8,
            items_per_category: 20,
            train_outfits: 120,
            valid_outfits: 20,
            test_outfits: 40,
            ..WorldConfig::default()
        }
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let cfg = small_config();
        let a = generate(&cfg, 77).unwrap();
        let b = generate(&cfg, 77).unwrap();
        let serialize = |d: &SynthData| {
            let mut buf = Vec::new();
            write_records(&mut buf, &d.records).unwrap();
            buf
        };
        assert_eq!(serialize(&a), serialize(&b));
        assert_eq!(a.visual.content_hash(), b.visual.content_hash());
        assert_eq!(a.textual.content_hash(), b.textual.content_hash());
        let c = generate(&cfg, 78).unwrap();
        assert_ne!(serialize(&a), serialize(&c));
    }

    #[test]
    fn outfit_sizes_and_splits_are_as_planned() {
        let cfg = small_config();
        let data = generate(&cfg, 5).unwrap();
        assert_eq!(data.corpus.split(Split::Train).len(), cfg.train_outfits);
        assert_eq!(data.corpus.split(Split::Valid).len(), cfg.valid_outfits);
        assert_eq!(data.corpus.split(Split::Test).len(), cfg.test_outfits);
        for outfit in &data.corpus.outfits {
            assert!(outfit.len() >= cfg.min_items && outfit.len() <= cfg.max_items);
            let mut cats = outfit.category_indices();
            cats.sort_unstable();
            cats.dedup();
            assert_eq!(cats.len(), outfit.len());
        }
        // Outfits are distinct as item sets across the whole corpus.
        let mut sets = HashSet::new();
        for outfit in &data.corpus.outfits {
            let mut ids: Vec<&str> = outfit.items.iter().map(|i| i.item_id.as_str()).collect();
            ids.sort_unstable();
            assert!(sets.insert(ids));
        }
    }

    #[test]
    fn every_item_has_features_of_declared_dims() {
        let cfg = small_config();
        let data = generate(&cfg, 3).unwrap();
        assert_eq!(data.visual.dim(), cfg.visual_dim);
        assert_eq!(data.textual.dim(), cfg.textual_dim);
        for outfit in &data.corpus.outfits {
            for item in &outfit.items {
                assert_eq!(data.visual.get(&item.visual_key).unwrap().len(), cfg.visual_dim);
                assert_eq!(data.textual.get(&item.textual_key).unwrap().len(), cfg.textual_dim);
            }
        }
    }

    #[test]
    fn oracle_basics() {
        let cfg = small_config();
        let data = generate(&cfg, 9).unwrap();
        let outfit = data.corpus.outfits[0].clone();

        // Order invariance.
        let mut reversed = outfit.clone();
        reversed.items.reverse();
        assert_eq!(
            data.world.oracle_score(&outfit).unwrap(),
            data.world.oracle_score(&reversed).unwrap()
        );

        // Two-item outfit scores the negative style distance.
        let two = Outfit {
            outfit_id: "two".into(),
            split: Split::Test,
            items: outfit.items[..2].to_vec(),
        };
        let expected = -euclidean(
            data.world.style(&two.items[0].item_id).unwrap(),
            data.world.style(&two.items[1].item_id).unwrap(),
        );
        assert_eq!(data.world.oracle_score(&two).unwrap(), expected);

        // Unknown items error.
        let mut ghost = outfit;
        ghost.items[0].item_id = "missing".into();
        assert!(data.world.oracle_score(&ghost).is_err());
    }

    #[test]
    fn oracle_separates_positives_from_random_sets() {
        let cfg = small_config();
        let data = generate(&cfg, 13).unwrap();
        let outfits = &data.corpus.outfits;
        let pool: Vec<Item> = data.corpus.item_pool(&[Split::Train, Split::Valid, Split::Test]);

        let mut rng = Rng::for_stream(99, "oracle-check");
        let mut wins = 0;
        let draws = 1000;
        for _ in 0..draws {
            let positive = &outfits[rng.below(outfits.len())];
            // A uniformly random same-size set with distinct categories.
            let mut items: Vec<Item> = Vec::new();
            let mut cats = Vec::new();
            while items.len() < positive.len() {
                let item = rng.choose(&pool);
                if cats.contains(&item.category) {
                    continue;
                }
                cats.push(item.category);
                items.push(item.clone());
            }
            let random = Outfit {
                outfit_id: "random".into(),
                split: Split::Test,
                items,
            };
            let pos_score = data.world.oracle_score(positive).unwrap();
            let neg_score = data.world.oracle_score(&random).unwrap();
            if pos_score > neg_score {
                wins += 1;
            }
        }
        assert!(
            wins as f64 >= 0.95 * draws as f64,
            "positives beat random sets only {wins}/{draws} times"
        );
    }

    #[test]
    fn infeasible_configs_error() {
        let mut cfg = small_config();
        cfg.categories = 3;
        assert!(generate(&cfg, 1).is_err());

        let mut cfg = small_config();
        cfg.items_per_category = 5;
        assert!(generate(&cfg, 1).is_err());

        // A threshold nothing can pass shows up as a generation error.
        let mut cfg = small_config();
        cfg.dispersion_threshold = 0.0;
        let err = generate(&cfg, 1).unwrap_err();
        assert!(matches!(err, Error::Generation(_)), "{err}");
    }

    #[test]
    fn emitted_records_roundtrip_and_reingest() {
        let cfg = small_config();
        let data = generate(&cfg, 21).unwrap();
        let mut buf = Vec::new();
        write_records(&mut buf, &data.records).unwrap();
        let back = crate::corpus::read_records(buf.as_slice()).unwrap();
        let vocab = build_vocab(&back, 0).unwrap();
        let corpus = ingest(&back, &vocab, cfg.max_items);
        assert_eq!(corpus.outfits.len(), data.corpus.outfits.len());
        assert_eq!(vocab.content_hash(), data.vocab.content_hash());
        let graph = data.build_graph().unwrap();
        assert_eq!(graph.node_count(), cfg.categories);
    }
}
