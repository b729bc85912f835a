//! Category vocabulary, the weighted category graph, and per-outfit
//! subgraph extraction.
//!
//! The graph has one node per kept category. Two categories that ever appear
//! in the same outfit are connected by two directed edges, one per direction.
//! The weight of the edge i -> j divides j's inverse-popularity-scaled
//! co-occurrence with i by the same quantity summed over all of i's
//! neighbors, so every node with outgoing edges has an outgoing weight mass
//! of exactly 1. Weights are directional: w(i, j) != w(j, i) in general.

use std::collections::HashMap;
use std::io::Write;

use crate::corpus::{Outfit, OutfitRecord};
use crate::error::{Error, Result};
use crate::hash::Fnv1a;

/// Kept categories with stable, contiguous indices.
///
/// Ordering is deterministic: descending outfit count, ties broken by
/// category name. Permuting the input corpus does not change the result.
#[derive(Clone, Debug)]
pub struct CategoryVocab {
    names: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl CategoryVocab {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    /// Outfit count observed when the vocabulary was built.
    pub fn count(&self, idx: usize) -> u64 {
        self.counts[idx]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Build a vocabulary directly from known names and counts. Intended for
    /// synthetic worlds and tests; `build_vocab` is the corpus path.
    pub fn from_parts(names: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        if names.len() != counts.len() {
            return Err(Error::Contract(
                "names and counts must have equal length".into(),
            ));
        }
        let mut index = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::Contract(format!("duplicate category name '{n}'")));
            }
        }
        Ok(CategoryVocab {
            names,
            counts,
            index,
        })
    }

    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write_u64(self.names.len() as u64);
        for (name, count) in self.names.iter().zip(&self.counts) {
            h.write_str(name);
            h.write_u64(*count);
        }
        h.finish()
    }

    /// Delimited-text export: index, name, outfit count.
    pub fn export<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# index\tcategory\toutfit_count")?;
        for (i, (name, count)) in self.names.iter().zip(&self.counts).enumerate() {
            writeln!(w, "{i}\t{name}\t{count}")?;
        }
        Ok(())
    }
}

/// Count categories over raw records and keep those appearing in more than
/// `keep_threshold` outfits. A category occurring several times within one
/// outfit still counts once.
pub fn build_vocab(records: &[OutfitRecord], keep_threshold: u64) -> Result<CategoryVocab> {
    if records.is_empty() {
        return Err(Error::Ingestion("empty corpus".into()));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for rec in records {
        let mut seen: Vec<&str> = Vec::new();
        for item in &rec.items {
            if !seen.contains(&item.category.as_str()) {
                seen.push(&item.category);
                *counts.entry(&item.category).or_insert(0) += 1;
            }
        }
    }
    let mut kept: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c > keep_threshold)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let names: Vec<String> = kept.iter().map(|(n, _)| n.to_string()).collect();
    let counts: Vec<u64> = kept.iter().map(|&(_, c)| c).collect();
    CategoryVocab::from_parts(names, counts)
}

/// The weighted directed category graph.
#[derive(Clone, Debug)]
pub struct FashionGraph {
    vocab: CategoryVocab,
    /// Row-major |N| x |N|; entry (i, j) is the weight of edge i -> j, zero
    /// when the edge is absent. The diagonal is always zero.
    weights: Vec<f64>,
    /// Directed edges with positive weight, sorted by (source, target).
    edges: Vec<(usize, usize)>,
    edge_index: HashMap<(usize, usize), usize>,
    /// Outfits containing each category, over the corpus the graph was
    /// built from. All zeros for graphs assembled from raw weights.
    occurrences: Vec<u64>,
    /// Row-major symmetric outfit co-occurrence counts; same caveat.
    cooccurrences: Vec<u64>,
}

impl FashionGraph {
    /// Count co-occurrences over `outfits` and derive edge weights.
    ///
    /// Counts are taken over the outfits passed in (normally the train
    /// split): a category's occurrence count is the number of these outfits
    /// containing it, and a pair's co-occurrence count the number containing
    /// both. Each outfit contributes at most once per unordered pair.
    pub fn build(outfits: &[&Outfit], vocab: CategoryVocab) -> Result<Self> {
        let n = vocab.len();
        let mut occur = vec![0u64; n];
        let mut cooccur = vec![0u64; n * n];
        let mut any = false;
        for outfit in outfits {
            let cats = outfit.category_indices();
            for &c in &cats {
                occur[c] += 1;
                any = true;
            }
            for a in 0..cats.len() {
                for b in (a + 1)..cats.len() {
                    let (i, j) = (cats[a], cats[b]);
                    cooccur[i * n + j] += 1;
                    cooccur[j * n + i] += 1;
                }
            }
        }
        if !any {
            return Err(Error::Ingestion(
                "corpus and vocabulary share no categories; graph would be empty".into(),
            ));
        }

        // w(i, j) = (cooccur[i][j] / occur[j]) / sum_k (cooccur[i][k] / occur[k])
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            let mut denom = 0.0;
            for k in 0..n {
                let c = cooccur[i * n + k];
                if c > 0 {
                    denom += c as f64 / occur[k] as f64;
                }
            }
            if denom == 0.0 {
                continue;
            }
            for j in 0..n {
                let c = cooccur[i * n + j];
                if c > 0 {
                    weights[i * n + j] = (c as f64 / occur[j] as f64) / denom;
                }
            }
        }

        let mut graph = Self::from_weights(vocab, weights)?;
        graph.occurrences = occur;
        graph.cooccurrences = cooccur;
        Ok(graph)
    }

    /// Assemble a graph from explicit weights. Used by benchmarks and tests
    /// that need prescribed adjacency (e.g. complete unit-weight graphs);
    /// weights built this way are not required to be row-normalized and
    /// carry zero occurrence counts.
    pub fn from_weights(vocab: CategoryVocab, weights: Vec<f64>) -> Result<Self> {
        let n = vocab.len();
        if weights.len() != n * n {
            return Err(Error::Contract(format!(
                "adjacency must be {n}x{n}, got {} entries",
                weights.len()
            )));
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let w = weights[i * n + j];
                if w < 0.0 || !w.is_finite() {
                    return Err(Error::Contract(format!(
                        "edge weight ({i}, {j}) = {w} must be finite and nonnegative"
                    )));
                }
                if i == j && w != 0.0 {
                    return Err(Error::Contract(format!("self-loop at node {i}")));
                }
                if w > 0.0 {
                    edges.push((i, j));
                }
            }
        }
        let edge_index = edges
            .iter()
            .enumerate()
            .map(|(pos, &e)| (e, pos))
            .collect();
        let n = vocab.len();
        Ok(FashionGraph {
            vocab,
            weights,
            edges,
            edge_index,
            occurrences: vec![0; n],
            cooccurrences: vec![0; n * n],
        })
    }

    /// Complete directed graph on `n` unnamed nodes with unit weights.
    pub fn complete_unit(n: usize) -> Self {
        let names: Vec<String> = (0..n).map(|i| format!("node{i:03}")).collect();
        let vocab = CategoryVocab::from_parts(names, vec![0; n]).expect("unique names");
        let mut weights = vec![1.0; n * n];
        for i in 0..n {
            weights[i * n + i] = 0.0;
        }
        Self::from_weights(vocab, weights).expect("valid adjacency")
    }

    pub fn vocab(&self) -> &CategoryVocab {
        &self.vocab
    }

    pub fn node_count(&self) -> usize {
        self.vocab.len()
    }

    /// Weight of edge `from -> to`; zero when absent.
    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.weights[from * self.node_count() + to]
    }

    /// Directed edges with positive weight, sorted by (source, target).
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Position of a directed edge in `edges()`, if present.
    pub fn edge_position(&self, from: usize, to: usize) -> Option<usize> {
        self.edge_index.get(&(from, to)).copied()
    }

    /// Outfits containing category `c` in the corpus the graph was built
    /// from.
    pub fn occurrence_count(&self, c: usize) -> u64 {
        self.occurrences[c]
    }

    /// Outfits containing both categories in the corpus the graph was built
    /// from.
    pub fn cooccurrence_count(&self, a: usize, b: usize) -> u64 {
        self.cooccurrences[a * self.node_count() + b]
    }

    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write_u64(self.vocab.content_hash());
        h.write_u64(self.edges.len() as u64);
        for &(i, j) in &self.edges {
            h.write_u64(i as u64);
            h.write_u64(j as u64);
            h.write_f64(self.weight(i, j));
        }
        h.finish()
    }

    /// Edge-list export: source category, target category, weight with 13
    /// significant digits.
    pub fn export_edges<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# source\ttarget\tweight")?;
        for &(i, j) in &self.edges {
            writeln!(
                w,
                "{}\t{}\t{:.12e}",
                self.vocab.name(i),
                self.vocab.name(j),
                self.weight(i, j)
            )?;
        }
        Ok(())
    }
}

/// The induced subgraph an outfit occupies.
///
/// Nodes are stored in ascending global index order so that every later
/// computation visits them in a canonical order regardless of how the
/// outfit's items were listed. Adjacency entries are copied from the global
/// graph without renormalization.
#[derive(Clone, Debug)]
pub struct OutfitSubgraph {
    nodes: Vec<usize>,
    item_of_node: Vec<usize>,
    weights: Vec<f64>,
}

impl OutfitSubgraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Global category index of local node `a`.
    pub fn global_node(&self, a: usize) -> usize {
        self.nodes[a]
    }

    /// Outfit item index carried by local node `a`.
    pub fn item_index(&self, a: usize) -> usize {
        self.item_of_node[a]
    }

    /// Restricted adjacency: weight of local edge `a -> b`.
    pub fn weight(&self, a: usize, b: usize) -> f64 {
        self.weights[a * self.nodes.len() + b]
    }
}

/// Restrict the graph to the outfit's categories.
pub fn extract_subgraph(outfit: &Outfit, graph: &FashionGraph) -> Result<OutfitSubgraph> {
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(outfit.len());
    for (item_idx, item) in outfit.items.iter().enumerate() {
        if item.category >= graph.node_count() {
            return Err(Error::Lookup(format!(
                "outfit {}: category index {} outside graph with {} nodes",
                outfit.outfit_id,
                item.category,
                graph.node_count()
            )));
        }
        pairs.push((item.category, item_idx));
    }
    pairs.sort_by_key(|&(cat, _)| cat);
    for w in pairs.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::Contract(format!(
                "outfit {}: duplicate category '{}' reached subgraph extraction",
                outfit.outfit_id,
                graph.vocab().name(w[0].0)
            )));
        }
    }

    let nodes: Vec<usize> = pairs.iter().map(|&(c, _)| c).collect();
    let item_of_node: Vec<usize> = pairs.iter().map(|&(_, i)| i).collect();
    let k = nodes.len();
    let mut weights = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            weights[a * k + b] = graph.weight(nodes[a], nodes[b]);
        }
    }
    Ok(OutfitSubgraph {
        nodes,
        item_of_node,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ingest, Item, ItemRecord, Split};

    fn record(id: &str, cats: &[&str]) -> OutfitRecord {
        OutfitRecord {
            outfit_id: id.to_string(),
            split: Split::Train,
            items: cats
                .iter()
                .enumerate()
                .map(|(i, c)| ItemRecord {
                    item_id: format!("{id}-{i}"),
                    category: c.to_string(),
                    title: String::new(),
                    visual_key: None,
                    textual_key: None,
                })
                .collect(),
        }
    }

    fn item(id: &str, category: usize) -> Item {
        Item {
            item_id: id.to_string(),
            category,
            title: String::new(),
            visual_key: id.to_string(),
            textual_key: id.to_string(),
        }
    }

    /// The three-outfit corpus used across graph tests: {A,B}, {A,B,C}, {B,C}.
    fn hand_records() -> Vec<OutfitRecord> {
        vec![
            record("o1", &["A", "B"]),
            record("o2", &["A", "B", "C"]),
            record("o3", &["B", "C"]),
        ]
    }

    fn hand_graph() -> FashionGraph {
        let records = hand_records();
        let vocab = build_vocab(&records, 0).unwrap();
        // Assemble outfits directly: these are deliberately below the
        // ingestion minimum size.
        let outfits: Vec<Outfit> = records
            .iter()
            .map(|r| Outfit {
                outfit_id: r.outfit_id.clone(),
                split: r.split,
                items: r
                    .items
                    .iter()
                    .map(|it| item(&it.item_id, vocab.lookup(&it.category).unwrap()))
                    .collect(),
            })
            .collect();
        let refs: Vec<&Outfit> = outfits.iter().collect();
        FashionGraph::build(&refs, vocab).unwrap()
    }

    #[test]
    fn vocab_counts_and_ordering() {
        let records = vec![record("o1", &["A", "B"]), record("o2", &["A", "C"])];
        let vocab = build_vocab(&records, 0).unwrap();
        // A appears twice, B and C once; ties break by name.
        assert_eq!(vocab.names(), &["A", "B", "C"]);
        assert_eq!(vocab.count(0), 2);
        assert_eq!(vocab.count(1), 1);
        assert_eq!(vocab.count(2), 1);
    }

    #[test]
    fn vocab_threshold_is_strictly_greater() {
        let records = vec![record("o1", &["A", "B"]), record("o2", &["A", "C"])];
        let vocab = build_vocab(&records, 1).unwrap();
        assert_eq!(vocab.names(), &["A"]);
    }

    #[test]
    fn vocab_counts_category_once_per_outfit() {
        let records = vec![record("o1", &["A", "A", "B"])];
        let vocab = build_vocab(&records, 0).unwrap();
        assert_eq!(vocab.count(vocab.lookup("A").unwrap()), 1);
    }

    #[test]
    fn vocab_empty_corpus_errors() {
        assert!(build_vocab(&[], 0).is_err());
    }

    #[test]
    fn vocab_order_independent_of_corpus_permutation() {
        let mut records = vec![
            record("o1", &["x", "y", "z"]),
            record("o2", &["y", "z"]),
            record("o3", &["z", "q"]),
        ];
        let a = build_vocab(&records, 0).unwrap();
        records.reverse();
        let b = build_vocab(&records, 0).unwrap();
        assert_eq!(a.names(), b.names());
        assert_eq!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn hand_corpus_edge_weights() {
        let g = hand_graph();
        let (a, b, c) = (
            g.vocab().lookup("A").unwrap(),
            g.vocab().lookup("B").unwrap(),
            g.vocab().lookup("C").unwrap(),
        );
        // Out of A: toward B (2/3)/(2/3 + 1/2) = 4/7, toward C 3/7.
        assert!((g.weight(a, b) - 4.0 / 7.0).abs() < 1e-12);
        assert!((g.weight(a, c) - 3.0 / 7.0).abs() < 1e-12);
        assert!((g.weight(b, a) - 0.5).abs() < 1e-12);
        assert!((g.weight(b, c) - 0.5).abs() < 1e-12);
        assert!((g.weight(c, a) - 3.0 / 7.0).abs() < 1e-12);
        assert!((g.weight(c, b) - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn counts_are_retained_from_the_corpus() {
        let g = hand_graph();
        let (a, b, c) = (
            g.vocab().lookup("A").unwrap(),
            g.vocab().lookup("B").unwrap(),
            g.vocab().lookup("C").unwrap(),
        );
        assert_eq!(g.occurrence_count(a), 2);
        assert_eq!(g.occurrence_count(b), 3);
        assert_eq!(g.occurrence_count(c), 2);
        assert_eq!(g.cooccurrence_count(a, b), 2);
        assert_eq!(g.cooccurrence_count(b, a), 2);
        assert_eq!(g.cooccurrence_count(a, c), 1);
        assert_eq!(g.cooccurrence_count(b, c), 2);
    }

    #[test]
    fn out_rows_sum_to_one() {
        let g = hand_graph();
        for i in 0..g.node_count() {
            let row: f64 = (0..g.node_count()).map(|j| g.weight(i, j)).sum();
            assert!((row - 1.0).abs() < 1e-9, "row {i} sums to {row}");
        }
    }

    #[test]
    fn never_cooccurring_pair_has_zero_weight_and_no_self_loops() {
        let records = vec![record("o1", &["A", "B"]), record("o2", &["C", "D"])];
        let vocab = build_vocab(&records, 0).unwrap();
        let o1 = Outfit {
            outfit_id: "o1".into(),
            split: Split::Train,
            items: vec![
                item("x", vocab.lookup("A").unwrap()),
                item("y", vocab.lookup("B").unwrap()),
            ],
        };
        let g = FashionGraph::build(&[&o1], vocab).unwrap();
        let (a, c) = (
            g.vocab().lookup("A").unwrap(),
            g.vocab().lookup("C").unwrap(),
        );
        assert_eq!(g.weight(a, c), 0.0);
        for i in 0..g.node_count() {
            assert_eq!(g.weight(i, i), 0.0);
        }
    }

    #[test]
    fn support_is_symmetric_weights_are_not() {
        let g = hand_graph();
        let n = g.node_count();
        let mut found_asymmetric_weight = false;
        for i in 0..n {
            for j in 0..n {
                assert_eq!(g.weight(i, j) > 0.0, g.weight(j, i) > 0.0);
                if g.weight(i, j) > 0.0 && (g.weight(i, j) - g.weight(j, i)).abs() > 1e-12 {
                    found_asymmetric_weight = true;
                }
            }
        }
        assert!(found_asymmetric_weight);
    }

    #[test]
    fn rebuild_is_bit_identical() {
        let a = hand_graph();
        let b = hand_graph();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_eq!(a.weights, b.weights);
    }

    #[test]
    fn subgraph_restriction_is_exact() {
        let g = hand_graph();
        // Outfit with categories {A, C}, listed C first.
        let outfit = Outfit {
            outfit_id: "probe".into(),
            split: Split::Test,
            items: vec![
                item("p0", g.vocab().lookup("C").unwrap()),
                item("p1", g.vocab().lookup("A").unwrap()),
            ],
        };
        let sub = extract_subgraph(&outfit, &g).unwrap();
        assert_eq!(sub.len(), 2);
        // Nodes come out in ascending global order: A before C here.
        let (a_local, c_local) = if g.vocab().name(sub.global_node(0)) == "A" {
            (0, 1)
        } else {
            (1, 0)
        };
        assert_eq!(g.vocab().name(sub.global_node(a_local)), "A");
        assert_eq!(g.vocab().name(sub.global_node(c_local)), "C");
        // Item mapping survives the reorder.
        assert_eq!(sub.item_index(a_local), 1);
        assert_eq!(sub.item_index(c_local), 0);
        // Weights equal the global entries exactly — no renormalization.
        let a_glob = g.vocab().lookup("A").unwrap();
        let c_glob = g.vocab().lookup("C").unwrap();
        assert_eq!(sub.weight(a_local, c_local), g.weight(a_glob, c_glob));
        assert!((sub.weight(a_local, c_local) - 3.0 / 7.0).abs() < 1e-12);
        assert!((sub.weight(c_local, a_local) - 3.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn single_item_subgraph_has_no_edges() {
        let g = hand_graph();
        let outfit = Outfit {
            outfit_id: "solo".into(),
            split: Split::Test,
            items: vec![item("s", 0)],
        };
        let sub = extract_subgraph(&outfit, &g).unwrap();
        assert_eq!(sub.len(), 1);
        assert_eq!(sub.weight(0, 0), 0.0);
    }

    #[test]
    fn full_cover_subgraph_equals_graph() {
        let g = hand_graph();
        let outfit = Outfit {
            outfit_id: "all".into(),
            split: Split::Test,
            items: (0..g.node_count())
                .map(|c| item(&format!("i{c}"), c))
                .collect(),
        };
        let sub = extract_subgraph(&outfit, &g).unwrap();
        for a in 0..g.node_count() {
            for b in 0..g.node_count() {
                assert_eq!(sub.weight(a, b), g.weight(sub.global_node(a), sub.global_node(b)));
            }
        }
    }

    #[test]
    fn duplicate_categories_rejected_by_extraction() {
        let g = hand_graph();
        let outfit = Outfit {
            outfit_id: "bad".into(),
            split: Split::Test,
            items: vec![item("x", 0), item("y", 0)],
        };
        assert!(extract_subgraph(&outfit, &g).is_err());
    }

    #[test]
    fn edge_export_has_high_precision() {
        let g = hand_graph();
        let mut buf = Vec::new();
        g.export_edges(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("5.714285714286e-1"), "{text}");
    }

    #[test]
    fn ingest_then_build_pipeline() {
        let records = vec![
            record("o1", &["top", "pants", "shoes"]),
            record("o2", &["top", "pants", "bag"]),
            record("o3", &["top", "shoes", "bag"]),
        ];
        let vocab = build_vocab(&records, 0).unwrap();
        let corpus = ingest(&records, &vocab, 8);
        let train = corpus.split(Split::Train);
        let g = FashionGraph::build(&train, vocab).unwrap();
        assert_eq!(g.node_count(), 4);
        for i in 0..g.node_count() {
            let row: f64 = (0..g.node_count()).map(|j| g.weight(i, j)).sum();
            assert!((row - 1.0).abs() < 1e-9);
        }
    }
}
