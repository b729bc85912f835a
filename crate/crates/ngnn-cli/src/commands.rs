//! Subcommand implementations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::json;

use ngnn::corpus::{ingest, read_records_from_path, write_records, Corpus, Split};
use ngnn::error::{Error, Result};
use ngnn::evaluation::{
    auc, build_auc_set, build_fitb_set, eval_set_hash, export_jsonl, fitb_accuracy, import_jsonl,
    EvalPair, EvalReport, FitbQuestion, ModelScorer,
};
use ngnn::features::{build_text_features, build_text_vocab, FeatureStore};
use ngnn::graph::{build_vocab, FashionGraph};
use ngnn::model::{
    read_checkpoint_from_path, write_checkpoint_to_path, Checkpoint, FeatureSet, ModelConfig,
    Modality,
};
use ngnn::synthetic::{generate, WorldConfig};
use ngnn::training::{self, TrainConfig};

use crate::config::{
    check_input, default_model_config, default_train_config, default_world_config,
    finish_validation, pick, prepare_out_dir, require, FileConfig,
};
use crate::{BenchArgs, BuildGraphArgs, EvalArgs, GenSynthArgs, InspectArgs, TrainArgs};

const DEFAULT_KEEP_THRESHOLD: u64 = 100;
const DEFAULT_MAX_OUTFIT_SIZE: usize = 8;
const DEFAULT_BENCH_MIN_NODES: usize = 2;
const DEFAULT_BENCH_MAX_NODES: usize = 30;
const DEFAULT_BENCH_FEATURE_DIM: usize = 32;
const DEFAULT_BENCH_REPETITIONS: usize = 7;

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, value)?;
    writeln!(stdout)?;
    Ok(())
}

fn write_text(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn report_warnings(corpus: &Corpus) {
    for w in &corpus.stats.warnings {
        eprintln!("warning: {w}");
    }
}

fn load_corpus(path: &Path, keep_threshold: u64, max_outfit_size: usize) -> Result<(Corpus, FashionGraph)> {
    let records = read_records_from_path(path)?;
    let vocab = build_vocab(&records, keep_threshold)?;
    let corpus = ingest(&records, &vocab, max_outfit_size);
    report_warnings(&corpus);
    let train_split = corpus.split(Split::Train);
    if train_split.is_empty() {
        return Err(Error::Ingestion(
            "corpus has no train outfits after ingestion".into(),
        ));
    }
    let graph = FashionGraph::build(&train_split, vocab)?;
    Ok((corpus, graph))
}

pub fn gen_synth(args: GenSynthArgs, file: &FileConfig, cli_seed: Option<u64>) -> Result<()> {
    let d = default_world_config();
    let world_config = WorldConfig {
        categories: pick(args.categories, file.synth.categories, d.categories),
        items_per_category: pick(
            args.items_per_category,
            file.synth.items_per_category,
            d.items_per_category,
        ),
        style_dim: pick(args.style_dim, file.synth.style_dim, d.style_dim),
        themes: pick(args.themes, file.synth.themes, d.themes),
        theme_spread: pick(args.theme_spread, file.synth.theme_spread, d.theme_spread),
        style_noise: pick(args.style_noise, file.synth.style_noise, d.style_noise),
        visual_dim: pick(args.visual_dim, file.synth.visual_dim, d.visual_dim),
        textual_dim: pick(args.textual_dim, file.synth.textual_dim, d.textual_dim),
        feature_noise: pick(args.feature_noise, file.synth.feature_noise, d.feature_noise),
        dispersion_threshold: pick(
            args.dispersion_threshold,
            file.synth.dispersion_threshold,
            d.dispersion_threshold,
        ),
        train_outfits: pick(args.train_outfits, file.synth.train_outfits, d.train_outfits),
        valid_outfits: pick(args.valid_outfits, file.synth.valid_outfits, d.valid_outfits),
        test_outfits: pick(args.test_outfits, file.synth.test_outfits, d.test_outfits),
        min_items: pick(args.min_items, file.synth.min_items, d.min_items),
        max_items: pick(args.max_items, file.synth.max_items, d.max_items),
    };
    let seed = pick(cli_seed, file.seed, 0);

    let mut problems = Vec::new();
    let out = require(args.out, file.paths.out.clone(), "--out", &mut problems);
    if let Some(out) = &out {
        prepare_out_dir(out, &mut problems);
    }
    if let Err(e) = world_config.validate() {
        problems.push(e.to_string());
    }
    finish_validation(problems)?;
    let out = out.expect("validated");

    let data = generate(&world_config, seed)?;
    let corpus_path = out.join("corpus.jsonl");
    write_text(&corpus_path, |w| write_records(w, &data.records))?;
    let visual_path = out.join("visual.feat");
    data.visual.write_to_path(&visual_path)?;
    let textual_path = out.join("textual.feat");
    data.textual.write_to_path(&textual_path)?;
    write_text(&out.join("world.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &json!({ "seed": seed, "config": world_config }))?;
        writeln!(w)?;
        Ok(())
    })?;
    write_text(&out.join("styles.tsv"), |w| data.world.export_styles(w))?;

    print_json(&json!({
        "command": "gen-synth",
        "seed": seed,
        "out": out,
        "outfits": {
            "train": data.corpus.split(Split::Train).len(),
            "valid": data.corpus.split(Split::Valid).len(),
            "test": data.corpus.split(Split::Test).len(),
        },
        "items": data.world.item_ids().len(),
        "categories": world_config.categories,
        "files": ["corpus.jsonl", "visual.feat", "textual.feat", "world.json", "styles.tsv"],
    }))
}

pub fn build_graph(args: BuildGraphArgs, file: &FileConfig) -> Result<()> {
    let keep_threshold = pick(args.keep_threshold, file.data.keep_threshold, DEFAULT_KEEP_THRESHOLD);
    let max_outfit_size = pick(
        args.max_outfit_size,
        file.data.max_outfit_size,
        DEFAULT_MAX_OUTFIT_SIZE,
    );

    let mut problems = Vec::new();
    let corpus_path = require(args.corpus, file.paths.corpus.clone(), "--corpus", &mut problems);
    if let Some(p) = &corpus_path {
        check_input(p, "corpus", &mut problems);
    }
    let out = require(args.out, file.paths.out.clone(), "--out", &mut problems);
    if let Some(out) = &out {
        prepare_out_dir(out, &mut problems);
    }
    finish_validation(problems)?;
    let (corpus_path, out) = (corpus_path.expect("validated"), out.expect("validated"));

    let (corpus, graph) = load_corpus(&corpus_path, keep_threshold, max_outfit_size)?;
    write_text(&out.join("vocab.tsv"), |w| graph.vocab().export(w))?;
    write_text(&out.join("edges.tsv"), |w| graph.export_edges(w))?;

    // Text vocabulary over distinct item titles, plus the encoded Boolean
    // features so the textual channel can train on real corpora.
    let pool = corpus.item_pool(&[Split::Train, Split::Valid, Split::Test]);
    let titles: Vec<&str> = pool.iter().map(|i| i.title.as_str()).collect();
    let text_vocab = build_text_vocab(&titles)?;
    write_text(&out.join("text_vocab.tsv"), |w| text_vocab.export(w))?;
    let text_features = build_text_features(&pool, &text_vocab)?;
    text_features.write_to_path(&out.join("textual.feat"))?;

    print_json(&json!({
        "command": "build-graph",
        "out": out,
        "categories": graph.node_count(),
        "edges": graph.edge_count(),
        "vocab_hash": format!("{:016x}", graph.vocab().content_hash()),
        "graph_hash": format!("{:016x}", graph.content_hash()),
        "text_vocab_words": text_vocab.len(),
        "textual_features": out.join("textual.feat"),
        "outfits_kept": corpus.stats.outfits_kept,
        "outfits_dropped_small": corpus.stats.outfits_dropped_small,
        "outfits_dropped_large": corpus.stats.outfits_dropped_large,
        "items_dropped_unknown_category": corpus.stats.items_dropped_unknown_category,
        "items_dropped_duplicate_category": corpus.stats.items_dropped_duplicate_category,
    }))
}

fn resolve_model_config(args: &TrainArgs, file: &FileConfig) -> ModelConfig {
    let d = default_model_config();
    ModelConfig {
        latent_dim: pick(args.latent_dim, file.model.latent_dim, d.latent_dim),
        steps: pick(args.steps, file.model.steps, d.steps),
        variant: pick(args.variant.map(Into::into), file.model.variant, d.variant),
        modality: pick(args.modality.map(Into::into), file.model.modality, d.modality),
        fusion_weight: pick(args.fusion_weight, file.model.fusion_weight, d.fusion_weight),
    }
}

fn resolve_train_config(args: &TrainArgs, file: &FileConfig, seed: u64) -> TrainConfig {
    let d = default_train_config();
    TrainConfig {
        learning_rate: pick(args.learning_rate, file.train.learning_rate, d.learning_rate),
        batch_size: pick(args.batch_size, file.train.batch_size, d.batch_size),
        l2_weight: pick(args.l2_weight, file.train.l2_weight, d.l2_weight),
        epochs: pick(args.epochs, file.train.epochs, d.epochs),
        patience: pick(args.patience, file.train.patience, d.patience),
        min_delta: pick(args.min_delta, file.train.min_delta, d.min_delta),
        seed,
        global_regularizer: args.global_regularizer
            || file.train.global_regularizer.unwrap_or(d.global_regularizer),
        ..d
    }
}

/// Feature stores the modality requires. `expected` pins dimensions when a
/// checkpoint dictates them.
struct LoadedFeatures {
    visual: Option<FeatureStore>,
    textual: Option<FeatureStore>,
}

impl LoadedFeatures {
    fn as_set(&self) -> FeatureSet<'_> {
        FeatureSet {
            visual: self.visual.as_ref(),
            textual: self.textual.as_ref(),
        }
    }
}

fn load_features(
    modality: Modality,
    visual_path: Option<&Path>,
    textual_path: Option<&Path>,
    expected: &[(ngnn::features::FeatureKind, usize)],
) -> Result<LoadedFeatures> {
    let expected_dim = |kind: ngnn::features::FeatureKind| {
        expected.iter().find(|(k, _)| *k == kind).map(|&(_, d)| d)
    };
    let needs_visual = matches!(modality, Modality::Visual | Modality::Multimodal);
    let needs_textual = matches!(modality, Modality::Textual | Modality::Multimodal);

    let mut problems = Vec::new();
    if needs_visual && visual_path.is_none() {
        problems.push(format!("--visual-features is required for {modality} models"));
    }
    if needs_textual && textual_path.is_none() {
        problems.push(format!("--textual-features is required for {modality} models"));
    }
    if let Some(p) = visual_path.filter(|_| needs_visual) {
        check_input(p, "visual features", &mut problems);
    }
    if let Some(p) = textual_path.filter(|_| needs_textual) {
        check_input(p, "textual features", &mut problems);
    }
    finish_validation(problems)?;

    let visual = if needs_visual {
        Some(FeatureStore::read_from_path(
            visual_path.expect("validated"),
            expected_dim(ngnn::features::FeatureKind::Visual),
        )?)
    } else {
        None
    };
    let textual = if needs_textual {
        Some(FeatureStore::read_from_path(
            textual_path.expect("validated"),
            expected_dim(ngnn::features::FeatureKind::Textual),
        )?)
    } else {
        None
    };
    Ok(LoadedFeatures { visual, textual })
}

/// A fusion weight of exactly 0 or 1 silently ignores one channel; require
/// the single-modality config instead.
fn guard_degenerate_fusion(config: &ModelConfig, problems: &mut Vec<String>) {
    if config.modality == Modality::Multimodal {
        if config.fusion_weight == 0.0 {
            problems.push(
                "fusion_weight 0 on a multimodal model leaves the visual channel dead; \
                 use --modality textual instead"
                    .into(),
            );
        }
        if config.fusion_weight == 1.0 {
            problems.push(
                "fusion_weight 1 on a multimodal model leaves the textual channel dead; \
                 use --modality visual instead"
                    .into(),
            );
        }
    }
}

pub fn train(args: TrainArgs, file: &FileConfig, cli_seed: Option<u64>) -> Result<()> {
    let seed = pick(cli_seed, file.seed, 0);
    let keep_threshold = pick(args.keep_threshold, file.data.keep_threshold, DEFAULT_KEEP_THRESHOLD);
    let max_outfit_size = pick(
        args.max_outfit_size,
        file.data.max_outfit_size,
        DEFAULT_MAX_OUTFIT_SIZE,
    );
    let model_config = resolve_model_config(&args, file);
    let train_config = resolve_train_config(&args, file, seed);

    let mut problems = Vec::new();
    let corpus_path = require(
        args.corpus.clone(),
        file.paths.corpus.clone(),
        "--corpus",
        &mut problems,
    );
    if let Some(p) = &corpus_path {
        check_input(p, "corpus", &mut problems);
    }
    let out = require(args.out.clone(), file.paths.out.clone(), "--out", &mut problems);
    if let Some(out) = &out {
        prepare_out_dir(out, &mut problems);
    }
    if let Err(e) = model_config.validate() {
        problems.push(e.to_string());
    }
    if let Err(e) = train_config.validate() {
        problems.push(e.to_string());
    }
    guard_degenerate_fusion(&model_config, &mut problems);
    finish_validation(problems)?;
    let (corpus_path, out) = (corpus_path.expect("validated"), out.expect("validated"));

    let visual_path = args.visual_features.clone().or(file.paths.visual_features.clone());
    let textual_path = args
        .textual_features
        .clone()
        .or(file.paths.textual_features.clone());
    let features = load_features(
        model_config.modality,
        visual_path.as_deref(),
        textual_path.as_deref(),
        &[],
    )?;

    let (corpus, graph) = load_corpus(&corpus_path, keep_threshold, max_outfit_size)?;
    let outcome = training::train(
        &corpus,
        &graph,
        &features.as_set(),
        model_config,
        &train_config,
    )?;

    let checkpoint_path = out.join("checkpoint.ngnn");
    write_checkpoint_to_path(&checkpoint_path, &outcome.checkpoint)?;
    write_text(&out.join("metrics.jsonl"), |w| {
        export_jsonl(w, &outcome.metrics)?;
        Ok(())
    })?;

    let diverged = matches!(outcome.stop, training::StopReason::Diverged { .. });
    print_json(&json!({
        "command": "train",
        "seed": seed,
        "checkpoint": checkpoint_path,
        "metrics": out.join("metrics.jsonl"),
        "epochs_run": outcome.metrics.len(),
        "stop": outcome.stop,
        "best_valid_loss": outcome.best_valid_loss,
        "checkpoint_hash": format!("{:016x}", outcome.checkpoint.content_hash()?),
    }))?;
    if diverged {
        return Err(Error::Training(
            "training diverged; the best earlier checkpoint was kept".into(),
        ));
    }
    Ok(())
}

pub enum EvalKind {
    Fitb,
    Auc,
}

pub fn eval(args: EvalArgs, file: &FileConfig, cli_seed: Option<u64>, kind: EvalKind) -> Result<()> {
    let seed = pick(cli_seed, file.eval.seed.or(file.seed), 0);
    let keep_threshold = pick(args.keep_threshold, file.data.keep_threshold, DEFAULT_KEEP_THRESHOLD);
    let max_outfit_size = pick(
        args.max_outfit_size,
        file.data.max_outfit_size,
        DEFAULT_MAX_OUTFIT_SIZE,
    );
    let same_category = args.same_category || file.eval.same_category.unwrap_or(false);

    let mut problems = Vec::new();
    let corpus_path = require(
        args.corpus.clone(),
        file.paths.corpus.clone(),
        "--corpus",
        &mut problems,
    );
    if let Some(p) = &corpus_path {
        check_input(p, "corpus", &mut problems);
    }
    let checkpoint_path = require(
        args.checkpoint.clone(),
        file.paths.checkpoint.clone(),
        "--checkpoint",
        &mut problems,
    );
    if let Some(p) = &checkpoint_path {
        check_input(p, "checkpoint", &mut problems);
    }
    if let Some(p) = &args.import_set {
        check_input(p, "imported eval set", &mut problems);
    }
    finish_validation(problems)?;
    let (corpus_path, checkpoint_path) =
        (corpus_path.expect("validated"), checkpoint_path.expect("validated"));

    let checkpoint = read_checkpoint_from_path(&checkpoint_path)?;
    let expected_dims: Vec<(ngnn::features::FeatureKind, usize)> = checkpoint
        .params
        .channels()
        .iter()
        .map(|(kind, params)| (*kind, params.feature_dim))
        .collect();
    let features = load_features(
        checkpoint.config().modality,
        args.visual_features
            .clone()
            .or(file.paths.visual_features.clone())
            .as_deref(),
        args.textual_features
            .clone()
            .or(file.paths.textual_features.clone())
            .as_deref(),
        &expected_dims,
    )?;

    let (corpus, graph) = load_corpus(&corpus_path, keep_threshold, max_outfit_size)?;
    if graph.vocab().content_hash() != checkpoint.vocab_hash
        || graph.content_hash() != checkpoint.graph_hash
    {
        return Err(Error::Config(format!(
            "corpus-derived graph does not match the checkpoint \
             (vocab {:016x} vs {:016x}, graph {:016x} vs {:016x}); \
             evaluate against the same corpus and keep-threshold used in training",
            graph.vocab().content_hash(),
            checkpoint.vocab_hash,
            graph.content_hash(),
            checkpoint.graph_hash
        )));
    }

    let test = corpus.split(Split::Test);
    let pool = corpus.item_pool(&[Split::Train, Split::Valid, Split::Test]);
    let scorer = ModelScorer {
        params: &checkpoint.params,
        graph: &graph,
        features: features.as_set(),
    };
    let checkpoint_hash = format!("{:016x}", checkpoint.content_hash()?);

    let report = match kind {
        EvalKind::Fitb => {
            let questions: Vec<FitbQuestion> = match &args.import_set {
                Some(path) => import_jsonl(std::io::BufReader::new(File::open(path)?))?,
                None => build_fitb_set(&test, &pool, seed, same_category)?,
            };
            if let Some(path) = &args.export_set {
                write_text(path, |w| export_jsonl(w, &questions))?;
            }
            let set_hash = format!("{:016x}", eval_set_hash(&questions)?);
            let r = fitb_accuracy(&questions, &scorer)?;
            EvalReport {
                metric: "fitb_accuracy".into(),
                value: r.accuracy,
                tie_count: r.tie_count,
                total: r.total,
                seed,
                checkpoint_hash,
                eval_set_hash: set_hash,
            }
        }
        EvalKind::Auc => {
            let pairs: Vec<EvalPair> = match &args.import_set {
                Some(path) => import_jsonl(std::io::BufReader::new(File::open(path)?))?,
                None => build_auc_set(&test, &pool, seed)?,
            };
            if let Some(path) = &args.export_set {
                write_text(path, |w| export_jsonl(w, &pairs))?;
            }
            let set_hash = format!("{:016x}", eval_set_hash(&pairs)?);
            let r = auc(&pairs, &scorer)?;
            EvalReport {
                metric: "compatibility_auc".into(),
                value: r.auc,
                tie_count: r.tie_count,
                total: r.total,
                seed,
                checkpoint_hash,
                eval_set_hash: set_hash,
            }
        }
    };

    let value = serde_json::to_value(&report)?;
    print_json(&value)?;
    if let Some(path) = &args.out {
        write_text(path, |w| {
            serde_json::to_writer_pretty(&mut *w, &report)?;
            writeln!(w)?;
            Ok(())
        })?;
    }
    Ok(())
}

pub fn bench(args: BenchArgs, file: &FileConfig, cli_seed: Option<u64>) -> Result<()> {
    let seed = pick(cli_seed, file.seed, 0);
    let min_nodes = pick(args.min_nodes, file.bench.min_nodes, DEFAULT_BENCH_MIN_NODES);
    let max_nodes = pick(args.max_nodes, file.bench.max_nodes, DEFAULT_BENCH_MAX_NODES);
    let latent_dim = pick(args.latent_dim, file.bench.latent_dim, 12);
    let feature_dim = pick(args.feature_dim, file.bench.feature_dim, DEFAULT_BENCH_FEATURE_DIM);
    let repetitions = pick(args.repetitions, file.bench.repetitions, DEFAULT_BENCH_REPETITIONS);

    let mut problems = Vec::new();
    if min_nodes >= max_nodes {
        problems.push(format!("--min-nodes {min_nodes} must be below --max-nodes {max_nodes}"));
    }
    if let Some(out) = &args.out {
        prepare_out_dir(out, &mut problems);
    }
    finish_validation(problems)?;

    let records = ngnn::benchmark::run_bench(
        min_nodes..=max_nodes,
        latent_dim,
        feature_dim,
        repetitions,
        seed,
    )?;

    let out = args.out.or(file.paths.out.clone());
    if let Some(out) = &out {
        std::fs::create_dir_all(out)?;
        write_text(&out.join("bench.tsv"), |w| {
            ngnn::benchmark::export_records(w, &records)
        })?;
        write_text(&out.join("bench.dat"), |w| {
            ngnn::benchmark::export_gnuplot(w, &records)
        })?;
    }

    let mut fits = serde_json::Map::new();
    for variant in [
        ngnn::model::Variant::Ngnn,
        ngnn::model::Variant::Ggnn,
        ngnn::model::Variant::Egnn,
    ] {
        let (ns, params): (Vec<usize>, Vec<f64>) = records
            .iter()
            .filter(|r| r.variant == variant)
            .map(|r| (r.nodes, r.param_count as f64))
            .unzip();
        let times: Vec<f64> = records
            .iter()
            .filter(|r| r.variant == variant)
            .map(|r| r.median_seconds)
            .collect();
        let param_fit = ngnn::benchmark::fit_scaling(&ns, &params)?;
        let time_fit = ngnn::benchmark::fit_scaling(&ns, &times)?;
        fits.insert(
            variant.to_string(),
            json!({
                "param_verdict": param_fit.verdict,
                "param_r2_linear": param_fit.linear.r_squared,
                "param_r2_quadratic": param_fit.quadratic.r_squared,
                // Wall-time fits are reported, not asserted: machine noise.
                "time_verdict": time_fit.verdict,
            }),
        );
    }

    print_json(&json!({
        "command": "bench",
        "seed": seed,
        "nodes": [min_nodes, max_nodes],
        "latent_dim": latent_dim,
        "feature_dim": feature_dim,
        "repetitions": repetitions,
        "out": out,
        "fits": fits,
    }))
}

pub fn inspect_checkpoint(args: InspectArgs, file: &FileConfig) -> Result<()> {
    let mut problems = Vec::new();
    let path = require(
        args.checkpoint,
        file.paths.checkpoint.clone(),
        "--checkpoint",
        &mut problems,
    );
    if let Some(p) = &path {
        check_input(p, "checkpoint", &mut problems);
    }
    finish_validation(problems)?;
    let path = path.expect("validated");

    let checkpoint: Checkpoint = read_checkpoint_from_path(&path)?;
    let mut channels = Vec::new();
    for (kind, params) in checkpoint.params.channels() {
        // Aggregate the per-node/per-edge families instead of listing
        // every tensor.
        let family = |name: &str, count: usize, shape: &[usize]| {
            json!({ "family": name, "tensors": count, "shape": shape })
        };
        let d = checkpoint.config().latent_dim;
        let mut families = vec![family(
            "latent_map",
            params.latent_maps.len(),
            &[d, params.feature_dim],
        )];
        match &params.propagation {
            ngnn::model::Propagation::NodeWise {
                input_transforms, ..
            } => {
                families.push(family("input_transform", input_transforms.len(), &[d, d]));
                families.push(family("output_transform", input_transforms.len(), &[d, d]));
            }
            ngnn::model::Propagation::Shared { .. } => {
                families.push(family("shared_transform", 1, &[d, d]));
            }
            ngnn::model::Propagation::EdgeWise { transforms } => {
                families.push(family("edge_transform", transforms.len(), &[d, d]));
            }
        }
        families.push(family("gru", 9, &[d, d]));
        families.push(family("attention", 4, &[1, d]));
        channels.push(json!({
            "channel": kind.to_string(),
            "feature_dim": params.feature_dim,
            "param_count": params.count(),
            "families": families,
        }));
    }

    print_json(&json!({
        "command": "inspect-checkpoint",
        "checkpoint": path,
        "config": checkpoint.config(),
        "vocab_hash": format!("{:016x}", checkpoint.vocab_hash),
        "graph_hash": format!("{:016x}", checkpoint.graph_hash),
        "content_hash": format!("{:016x}", checkpoint.content_hash()?),
        "total_params": checkpoint.params.count(),
        "channels": channels,
    }))
}
