use super::*;
use crate::corpus::{Item, Outfit};
use crate::features::{FeatureKind, FeatureStore};
use crate::graph::{CategoryVocab, FashionGraph};
use crate::model::{write_checkpoint, ModelConfig, ParamKind, Variant};

/// A small deterministic world: `cats` categories, `per_cat` items each,
/// random features, random train/valid outfits of 3..=4 items.
pub(crate) struct ToyWorld {
    pub corpus: Corpus,
    pub graph: FashionGraph,
    pub visual: FeatureStore,
    pub textual: FeatureStore,
}

pub(crate) fn toy_world(cats: usize, per_cat: usize, train: usize, valid: usize) -> ToyWorld {
    let mut rng = Rng::from_seed(2024);
    let mut visual = FeatureStore::new(FeatureKind::Visual, 3);
    let mut textual = FeatureStore::new(FeatureKind::Textual, 2);
    let mut items: Vec<Vec<Item>> = Vec::new();
    for c in 0..cats {
        let mut row = Vec::new();
        for i in 0..per_cat {
            let id = format!("c{c}i{i}");
            visual
                .insert(&id, (0..3).map(|_| rng.normal()).collect())
                .unwrap();
            textual
                .insert(&id, (0..2).map(|_| rng.normal()).collect())
                .unwrap();
            row.push(Item {
                item_id: id.clone(),
                category: c,
                title: String::new(),
                visual_key: id.clone(),
                textual_key: id,
            });
        }
        items.push(row);
    }

    let mut outfits = Vec::new();
    let mut make = |split: Split, count: usize, rng: &mut Rng| {
        for n in 0..count {
            let size = 3 + rng.below(2);
            let mut cat_order: Vec<usize> = (0..cats).collect();
            rng.shuffle(&mut cat_order);
            let members: Vec<Item> = cat_order[..size]
                .iter()
                .map(|&c| items[c][rng.below(per_cat)].clone())
                .collect();
            outfits.push(Outfit {
                outfit_id: format!("{split}-{n}"),
                split,
                items: members,
            });
        }
    };
    make(Split::Train, train, &mut rng);
    make(Split::Valid, valid, &mut rng);
    make(Split::Test, valid, &mut rng);

    let corpus = Corpus {
        outfits,
        stats: Default::default(),
    };
    let names: Vec<String> = (0..cats).map(|c| format!("cat{c}")).collect();
    let vocab = CategoryVocab::from_parts(names, vec![train as u64; cats]).unwrap();
    let train_refs = corpus.split(Split::Train);
    let graph = FashionGraph::build(&train_refs, vocab).unwrap();
    ToyWorld {
        corpus,
        graph,
        visual,
        textual,
    }
}

fn toy_model_config(variant: Variant, modality: Modality) -> ModelConfig {
    ModelConfig {
        latent_dim: 3,
        steps: 2,
        variant,
        modality,
        fusion_weight: 0.2,
    }
}

#[test]
fn sampler_rejects_pool_of_only_the_replaced_item() {
    let world = toy_world(4, 2, 4, 2);
    let outfit = world.corpus.split(Split::Train)[0].clone();
    // A pool holding exact copies of the outfit's own items leaves no valid
    // replacement for any slot: same item is skipped, other categories clash.
    let pool: Vec<Item> = outfit.items.clone();
    let mut rng = Rng::from_seed(5);
    let err = sample_negative(&outfit, &pool, &mut rng, 50).unwrap_err();
    assert!(matches!(err, Error::Sampling(_)), "{err}");
}

#[test]
fn sampler_avoids_category_collisions() {
    let world = toy_world(4, 6, 10, 2);
    let pool = world.corpus.item_pool(&[Split::Train]);
    let mut rng = Rng::from_seed(9);
    for outfit in world.corpus.split(Split::Train) {
        let pair = sample_negative(outfit, &pool, &mut rng, 1000).unwrap();
        let mut cats = pair.negative.category_indices();
        cats.sort_unstable();
        cats.dedup();
        assert_eq!(cats.len(), pair.negative.len(), "categories must stay distinct");
        // Exactly one item differs.
        let differing = pair
            .positive
            .items
            .iter()
            .zip(&pair.negative.items)
            .filter(|(a, b)| a.item_id != b.item_id)
            .count();
        assert_eq!(differing, 1);
        assert_ne!(
            pair.positive.items[pair.replaced_slot].item_id,
            pair.negative.items[pair.replaced_slot].item_id
        );
    }
}

#[test]
fn sampler_is_reproducible_for_a_seed() {
    let world = toy_world(5, 5, 8, 2);
    let pool = world.corpus.item_pool(&[Split::Train]);
    let draw = || {
        let mut rng = Rng::for_stream(42, "negatives");
        world
            .corpus
            .split(Split::Train)
            .iter()
            .map(|o| {
                let p = sample_negative(o, &pool, &mut rng, 1000).unwrap();
                (p.replaced_slot, p.negative.items[p.replaced_slot].item_id.clone())
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(draw(), draw());
}

#[test]
fn gradients_are_zero_for_nodes_outside_the_pair() {
    let world = toy_world(5, 4, 6, 2);
    let config = toy_model_config(Variant::Ngnn, Modality::Visual);
    let params = crate::model::ModelParams::init(
        config,
        &world.graph,
        &[(FeatureKind::Visual, 3)],
        11,
    )
    .unwrap();
    let features = FeatureSet::visual_only(&world.visual);
    let pool = world.corpus.item_pool(&[Split::Train]);

    let outfit = world.corpus.split(Split::Train)[0].clone();
    let mut rng = Rng::from_seed(3);
    let pair = sample_negative(&outfit, &pool, &mut rng, 1000).unwrap();

    let mut touched: Vec<usize> = pair
        .positive
        .category_indices()
        .into_iter()
        .chain(pair.negative.category_indices())
        .collect();
    touched.sort_unstable();
    touched.dedup();

    let mut tape = Tape::new();
    let mut binder = ParamBinder::new(&params);
    let loss = batch_loss(
        &mut tape,
        &mut binder,
        std::slice::from_ref(&pair),
        &world.graph,
        &features,
        &config,
        0.001,
        false,
    )
    .unwrap();
    let grads = tape.backward(loss).unwrap();
    let per_param = binder.collect_grads(&tape, &grads);

    // Node-owned parameters of untouched nodes must not appear at all.
    for (id, grad) in &per_param {
        match id.kind {
            ParamKind::LatentMap(n)
            | ParamKind::InputTransform(n)
            | ParamKind::OutputTransform(n) => {
                assert!(touched.contains(&n), "node {n} was bound but never used");
                assert!(grad.iter().any(|&g| g != 0.0) || grad.iter().all(|&g| g == 0.0));
            }
            _ => {}
        }
    }
    let bound_nodes: Vec<usize> = per_param
        .iter()
        .filter_map(|(id, _)| match id.kind {
            ParamKind::LatentMap(n) => Some(n),
            _ => None,
        })
        .collect();
    for n in 0..world.graph.node_count() {
        if !touched.contains(&n) {
            assert!(!bound_nodes.contains(&n));
        }
    }
}

#[test]
fn training_loss_decreases_and_is_deterministic() {
    let world = toy_world(5, 6, 64, 8);
    let features = FeatureSet::both(&world.visual, &world.textual);
    let model_config = toy_model_config(Variant::Ngnn, Modality::Multimodal);
    let config = TrainConfig {
        epochs: 5,
        patience: 10,
        learning_rate: 0.01,
        seed: 7,
        ..TrainConfig::default()
    };

    let run = || train(&world.corpus, &world.graph, &features, model_config, &config).unwrap();
    let a = run();
    assert_eq!(a.metrics.len(), 5);
    assert!(
        a.metrics[4].train_loss < a.metrics[0].train_loss,
        "loss did not decrease: {:?}",
        a.metrics.iter().map(|m| m.train_loss).collect::<Vec<_>>()
    );

    let b = run();
    let bytes = |outcome: &TrainOutcome| {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &outcome.checkpoint).unwrap();
        buf
    };
    assert_eq!(bytes(&a), bytes(&b));
    assert_eq!(
        a.metrics.iter().map(|m| m.valid_loss.to_bits()).collect::<Vec<_>>(),
        b.metrics.iter().map(|m| m.valid_loss.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn patience_zero_stops_at_first_non_improving_epoch() {
    let world = toy_world(4, 4, 10, 4);
    let features = FeatureSet::visual_only(&world.visual);
    let model_config = toy_model_config(Variant::Ggnn, Modality::Visual);
    let config = TrainConfig {
        epochs: 10,
        patience: 0,
        // An improvement bar no epoch can clear after the first.
        min_delta: 1e9,
        seed: 3,
        ..TrainConfig::default()
    };
    let outcome = train(&world.corpus, &world.graph, &features, model_config, &config).unwrap();
    assert_eq!(outcome.stop, StopReason::EarlyStopped { epoch: 2 });
    assert_eq!(outcome.metrics.len(), 2);
}

#[test]
fn huge_regularizer_shrinks_parameters_toward_zero() {
    let world = toy_world(4, 4, 12, 4);
    let features = FeatureSet::visual_only(&world.visual);
    let model_config = toy_model_config(Variant::Ngnn, Modality::Visual);
    let config = TrainConfig {
        epochs: 12,
        patience: 100,
        l2_weight: 1e6,
        seed: 1,
        ..TrainConfig::default()
    };
    let outcome = train(&world.corpus, &world.graph, &features, model_config, &config).unwrap();
    // With parameters crushed to zero every score ties and the ranking loss
    // settles at ln 2.
    let final_valid = outcome.metrics.last().unwrap().valid_loss;
    assert!(
        (final_valid - std::f64::consts::LN_2).abs() < 0.05,
        "valid loss {final_valid}"
    );
}

#[test]
fn batch_loss_with_zeroed_parameters_is_ln_two_per_pair() {
    let world = toy_world(4, 4, 8, 2);
    let config = toy_model_config(Variant::Ngnn, Modality::Visual);
    let mut params = crate::model::ModelParams::init(
        config,
        &world.graph,
        &[(FeatureKind::Visual, 3)],
        5,
    )
    .unwrap();
    for id in params.param_ids() {
        params.tensor_mut(&id).unwrap().data_mut().fill(0.0);
    }
    let features = FeatureSet::visual_only(&world.visual);
    let pool = world.corpus.item_pool(&[Split::Train]);
    let mut rng = Rng::from_seed(4);
    let batch: Vec<TrainPair> = world
        .corpus
        .split(Split::Train)
        .iter()
        .take(3)
        .map(|o| sample_negative(o, &pool, &mut rng, 1000).unwrap())
        .collect();

    // Scores all tie at zero, so each pair contributes exactly ln 2; with
    // zero parameters the regularizer adds nothing even when enabled.
    for l2_weight in [0.0, 0.5] {
        let mut tape = Tape::new();
        let mut binder = ParamBinder::new(&params);
        let loss = batch_loss(
            &mut tape,
            &mut binder,
            &batch,
            &world.graph,
            &features,
            &config,
            l2_weight,
            false,
        )
        .unwrap();
        let got = tape.value(loss).item().unwrap();
        let expected = 3.0 * std::f64::consts::LN_2;
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }
}

#[test]
fn one_pair_batch_matches_hand_assembled_objective() {
    // Compose the objective from independently scored pieces: ranking loss
    // of the two public scores plus half the squared norm of exactly the
    // parameters the pair touches.
    let world = toy_world(5, 4, 8, 2);
    let config = toy_model_config(Variant::Ngnn, Modality::Visual);
    let params = crate::model::ModelParams::init(
        config,
        &world.graph,
        &[(FeatureKind::Visual, 3)],
        23,
    )
    .unwrap();
    let features = FeatureSet::visual_only(&world.visual);
    let pool = world.corpus.item_pool(&[Split::Train]);
    let mut rng = Rng::from_seed(6);
    let outfit = world.corpus.split(Split::Train)[1].clone();
    let pair = sample_negative(&outfit, &pool, &mut rng, 1000).unwrap();
    let l2_weight = 0.01;

    let mut tape = Tape::new();
    let mut binder = ParamBinder::new(&params);
    let loss = batch_loss(
        &mut tape,
        &mut binder,
        std::slice::from_ref(&pair),
        &world.graph,
        &features,
        &config,
        l2_weight,
        false,
    )
    .unwrap();
    let got = tape.value(loss).item().unwrap();

    let pos = crate::model::score_outfit(&pair.positive, &world.graph, &params, &features)
        .unwrap()
        .score;
    let neg = crate::model::score_outfit(&pair.negative, &world.graph, &params, &features)
        .unwrap()
        .score;
    let squared_norm: f64 = binder
        .bound()
        .iter()
        .map(|(id, _)| {
            params
                .tensor(id)
                .unwrap()
                .data()
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
        })
        .sum();
    let expected = bpr_loss(pos, neg) + l2_weight / 2.0 * squared_norm;
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
}

#[test]
fn exploding_learning_rate_diverges_and_keeps_a_checkpoint() {
    let world = toy_world(4, 4, 12, 4);
    let features = FeatureSet::visual_only(&world.visual);
    let model_config = toy_model_config(Variant::Ngnn, Modality::Visual);
    // One optimizer step lands parameters near 1e200; the squared-norm
    // regularizer of the next batch then overflows to infinity.
    let config = TrainConfig {
        epochs: 50,
        patience: 100,
        learning_rate: 1e200,
        seed: 2,
        ..TrainConfig::default()
    };
    let outcome = train(&world.corpus, &world.graph, &features, model_config, &config);
    match outcome {
        Ok(outcome) => {
            assert!(
                matches!(outcome.stop, StopReason::Diverged { .. }),
                "expected divergence, got {:?}",
                outcome.stop
            );
            // The retained checkpoint is still finite and serializable.
            let mut buf = Vec::new();
            write_checkpoint(&mut buf, &outcome.checkpoint).unwrap();
            for id in outcome.checkpoint.params.param_ids() {
                assert!(outcome.checkpoint.params.tensor(&id).unwrap().is_finite());
            }
        }
        // A non-finite gradient caught by the optimizer is the other legal
        // outcome of an exploding step.
        Err(Error::Training(msg)) => assert!(msg.contains("gradient"), "{msg}"),
        Err(other) => panic!("unexpected error {other}"),
    }
}

#[test]
fn analytic_gradient_matches_finite_differences_on_one_pair() {
    let world = toy_world(4, 4, 6, 2);
    let config = toy_model_config(Variant::Ngnn, Modality::Multimodal);
    let mut params = crate::model::ModelParams::init(
        config,
        &world.graph,
        &[(FeatureKind::Visual, 3), (FeatureKind::Textual, 2)],
        17,
    )
    .unwrap();
    let features = FeatureSet::both(&world.visual, &world.textual);
    let pool = world.corpus.item_pool(&[Split::Train]);
    let outfit = world.corpus.split(Split::Train)[0].clone();
    let mut rng = Rng::from_seed(8);
    let pair = sample_negative(&outfit, &pool, &mut rng, 1000).unwrap();

    let loss_of = |params: &crate::model::ModelParams| -> f64 {
        let mut tape = Tape::new();
        let mut binder = ParamBinder::new(params);
        let loss = batch_loss(
            &mut tape,
            &mut binder,
            std::slice::from_ref(&pair),
            &world.graph,
            &features,
            &config,
            0.001,
            false,
        )
        .unwrap();
        tape.value(loss).item().unwrap()
    };

    let mut tape = Tape::new();
    let mut binder = ParamBinder::new(&params);
    let loss = batch_loss(
        &mut tape,
        &mut binder,
        std::slice::from_ref(&pair),
        &world.graph,
        &features,
        &config,
        0.001,
        false,
    )
    .unwrap();
    let grads = tape.backward(loss).unwrap();
    let analytic = binder.collect_grads(&tape, &grads);

    let step = 1e-5;
    for (id, grad) in &analytic {
        #[allow(clippy::needless_range_loop)]
        for e in 0..grad.len() {
            let orig = params.tensor(id).unwrap().data()[e];
            params.tensor_mut(id).unwrap().data_mut()[e] = orig + step;
            let plus = loss_of(&params);
            params.tensor_mut(id).unwrap().data_mut()[e] = orig - step;
            let minus = loss_of(&params);
            params.tensor_mut(id).unwrap().data_mut()[e] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let denom = grad[e].abs().max(numeric.abs()).max(1e-6);
            assert!(
                (grad[e] - numeric).abs() / denom < 1e-4,
                "{} entry {e}: analytic {} vs numeric {numeric}",
                id.name(),
                grad[e]
            );
        }
    }
}

#[test]
fn missing_valid_split_is_an_error() {
    let mut world = toy_world(4, 4, 6, 2);
    world.corpus.outfits.retain(|o| o.split != Split::Valid);
    let features = FeatureSet::visual_only(&world.visual);
    let err = train(
        &world.corpus,
        &world.graph,
        &features,
        toy_model_config(Variant::Ngnn, Modality::Visual),
        &TrainConfig::default(),
    )
    .unwrap_err();
    assert!(err.to_string().contains("valid"), "{err}");
}
