use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use zsl_core::experiment::{
    candidate_classifiers, candidates, conse_scores, conse_scores_from_probs, depth_hidden, evaluate_gcn, EvalTask,
    GraphVariant,
};
use zsl_core::gcn::{forward, init_model, load_checkpoint, DEFAULT_SLOPE};
use zsl_core::kgraph::{build_graph, extract_bfs_subgraph, normalize_adjacency};
use zsl_core::linalg::{row_l2_normalize, DenseMatrix};
use zsl_core::matio::{read_matrix, write_atomic, write_json};
use zsl_core::synth::{generate_world, write_task, WorldConfig};
use zsl_core::train::{fit, loss_history_csv, FitOptions, LossMode, Target, TrainConfig};
use zsl_core::zeroshot::{classifier_neighbor_distances, evaluate_topk, ClassifierMatrix, EvalReport};
use zsl_core::{Error, Result};

use crate::args::*;
use crate::io::{graph_files, load_graph_inputs, read_features, read_seen_matrix, test_images, with_sidecar, LoadedGraph};
use crate::manifest::{hash_inputs, write_manifest};
use crate::CliError;

type CliResult<T = ()> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn check_ks(ks: &[usize]) -> CliResult {
    if ks.is_empty() || ks.contains(&0) {
        return Err(usage("--ks needs one or more positive values"));
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    write_atomic(path, text.as_bytes())?;
    Ok(path.to_path_buf())
}

fn write_report(out_dir: &Path, report: &EvalReport) -> Result<PathBuf> {
    let path = out_dir.join("report.json");
    write_json(&path, report)?;
    Ok(path)
}

/// sha256 over the flags (without the output directory) and the input digests.
fn config_hash<F: Serialize>(flags: &F, inputs: &[PathBuf]) -> Result<String> {
    let mut value = serde_json::to_value(flags).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("out_dir");
    }
    let digests: Vec<String> = hash_inputs(inputs)?.into_values().collect();
    let payload = serde_json::json!({ "flags": value, "inputs": digests });
    Ok(hex::encode(Sha256::digest(payload.to_string().as_bytes())))
}

pub fn synth(args: &SynthArgs) -> CliResult {
    if !(args.unseen_frac > 0.0 && args.unseen_frac < 1.0) {
        return Err(usage("--unseen-frac must lie in (0, 1)"));
    }
    let cfg = WorldConfig {
        num_classes: args.classes,
        embed_dim: args.embed_dim,
        classifier_dim: args.classifier_dim,
        images_per_class: args.images_per_class,
        embed_noise: args.embed_noise,
        feature_noise: args.feature_noise,
        extra_edges: args.extra_edges,
        unseen_fraction: args.unseen_frac,
        seed: args.seed,
        ..WorldConfig::default()
    };
    let task = generate_world(&cfg).map_err(|e| match e {
        Error::InvalidArgument(msg) => usage(msg),
        other => other.into(),
    })?;
    let outputs = write_task(&args.out_dir, &task)?;
    write_manifest("synth", args, vec![args.seed], &[], &outputs, &args.out_dir)?;
    Ok(())
}

pub fn extract_subgraph(args: &ExtractArgs) -> CliResult {
    if args.max_hops == 0 {
        return Err(usage("--max-hops must be at least 1"));
    }
    let graph = build_graph(&args.nodes, &args.edges, args.min_confidence)?;
    let sub = extract_bfs_subgraph(&graph, args.max_hops)?;
    let (nodes, edges) = graph_files(&args.out_dir);
    let outputs = vec![
        write_text(&nodes, &sub.graph.to_nodes_tsv())?,
        write_text(&edges, &sub.graph.to_edges_tsv())?,
        write_text(&args.out_dir.join("id_map.tsv"), &sub.id_map_tsv())?,
    ];
    let inputs = [args.nodes.clone(), args.edges.clone()];
    write_manifest("extract-subgraph", args, vec![], &inputs, &outputs, &args.out_dir)?;
    Ok(())
}

fn layer_dims(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    std::iter::once(input).chain(hidden.iter().copied()).chain(std::iter::once(output)).collect()
}

pub fn train(args: &TrainArgs) -> CliResult {
    if args.dims.contains(&0) {
        return Err(usage("--dims widths must be positive"));
    }
    let opt = &args.optimizer;
    let cfg = TrainConfig {
        learning_rate: opt.lr,
        weight_decay: opt.wd,
        epochs: opt.epochs,
        seed: opt.seed,
        loss_mode: args.loss_mode,
        ..TrainConfig::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let loaded = load_graph_inputs(&args.inputs)?;
    let mut inputs = loaded.input_files.clone();
    let adj = normalize_adjacency(&loaded.graph);
    let k = loaded.inputs.cols();
    let checkpoints = args.out_dir.join("checkpoints");
    let opts = FitOptions {
        checkpoint_dir: Some(checkpoints.clone()),
        checkpoint_every: args.checkpoint_every,
    };
    let outcome = match args.loss_mode {
        LossMode::Regression => {
            let gt_path = args
                .gt_classifiers
                .as_ref()
                .ok_or_else(|| usage("--gt-classifiers is required with --loss-mode regression"))?;
            inputs.extend(with_sidecar(gt_path));
            let gt = row_l2_normalize(&read_seen_matrix(gt_path, &loaded.graph, &loaded.mask)?);
            let model = init_model(&layer_dims(k, &args.dims, gt.cols()), DEFAULT_SLOPE, true, cfg.seed)?;
            let target = Target::Regression {
                classifiers: &gt,
                mask: &loaded.mask,
            };
            fit(model, &adj, &loaded.inputs, target, &cfg, &opts)?
        }
        LossMode::Softmax => {
            let mut labels = vec![0; loaded.graph.num_nodes()];
            for (pos, &id) in loaded.seen_order.iter().enumerate() {
                labels[id] = pos;
            }
            let m = loaded.seen_order.len();
            let model = init_model(&layer_dims(k, &args.dims, m), DEFAULT_SLOPE, false, cfg.seed)?;
            let target = Target::Softmax {
                labels: &labels,
                mask: &loaded.mask,
            };
            fit(model, &adj, &loaded.inputs, target, &cfg, &opts)?
        }
    };
    let loss = write_text(&args.out_dir.join("loss.csv"), &loss_history_csv(&outcome.loss_history))?;
    write_manifest("train", args, vec![cfg.seed], &inputs, &[checkpoints, loss], &args.out_dir)?;
    Ok(())
}

/// Classifier predicted by `model` for every graph node.
fn predict(checkpoint: &Path, loaded: &LoadedGraph) -> CliResult<DenseMatrix> {
    let (model, _) = load_checkpoint(checkpoint)?;
    if model.input_dim() != loaded.inputs.cols() {
        return Err(CliError::Core(Error::Format {
            path: checkpoint.to_path_buf(),
            msg: format!(
                "model expects {}-dimensional inputs, embeddings have {}",
                model.input_dim(),
                loaded.inputs.cols()
            ),
        }));
    }
    let (pred, _) = forward(&model, &normalize_adjacency(&loaded.graph), &loaded.inputs)?;
    Ok(pred)
}

pub fn eval(args: &EvalArgs) -> CliResult {
    check_ks(&args.images.ks)?;
    let loaded = load_graph_inputs(&args.inputs)?;
    let mut inputs = loaded.input_files.clone();
    inputs.push(args.checkpoint.clone());
    inputs.extend(with_sidecar(&args.images.features));
    let predicted = predict(&args.checkpoint, &loaded)?;
    let gt = match &args.gt_classifiers {
        Some(p) => {
            inputs.extend(with_sidecar(p));
            Some(read_seen_matrix(p, &loaded.graph, &loaded.mask)?)
        }
        None => None,
    };
    let classifiers = candidate_classifiers(&predicted, gt.as_ref(), &loaded.mask)?;
    let (features, labels) = read_features(&args.images.features, &loaded.graph)?;
    if features.cols() != classifiers.cols() {
        return Err(CliError::Core(Error::Format {
            path: args.images.features.clone(),
            msg: format!("features have {} columns, classifiers {}", features.cols(), classifiers.cols()),
        }));
    }
    let (features, labels) = test_images(&features, &labels, &loaded.mask.unseen());
    let scores = zsl_core::linalg::matmul_nt(&features, &classifiers)?;
    let setting = args.images.setting;
    let mut report = evaluate_topk(&scores, &labels, &args.images.ks, &candidates(&loaded.mask, setting), setting)?;
    report.config_hash = config_hash(args, &inputs)?;
    let out = write_report(&args.out_dir, &report)?;
    write_manifest("eval", args, vec![], &inputs, &[out], &args.out_dir)?;
    Ok(())
}

pub fn conse(args: &ConseArgs) -> CliResult {
    check_ks(&args.images.ks)?;
    if args.top_t == 0 {
        return Err(usage("--top-t must be at least 1"));
    }
    let loaded = load_graph_inputs(&args.inputs)?;
    let mut inputs = loaded.input_files.clone();
    inputs.extend(with_sidecar(&args.images.features));
    let (features, labels) = read_features(&args.images.features, &loaded.graph)?;
    let scores = match (&args.probs, &args.gt_classifiers) {
        (Some(p), _) => {
            inputs.push(p.clone());
            let probs = read_matrix(p)?;
            if probs.rows() != features.rows() || probs.cols() != loaded.seen_order.len() {
                return Err(CliError::Core(Error::Format {
                    path: p.clone(),
                    msg: format!(
                        "expected {} × {} probabilities, found {} × {}",
                        features.rows(),
                        loaded.seen_order.len(),
                        probs.rows(),
                        probs.cols()
                    ),
                }));
            }
            // columns arrive in seen-list order; the scorer wants ascending ids
            let ascending = loaded.mask.seen();
            let mut cols = vec![0; ascending.len()];
            for (pos, &id) in loaded.seen_order.iter().enumerate() {
                cols[ascending.binary_search(&id).expect("seen list defines the mask")] = pos;
            }
            let reordered = probs.transpose().select_rows(&cols).transpose();
            conse_scores_from_probs(&reordered, &loaded.inputs, &loaded.mask, args.top_t)?
        }
        (None, Some(g)) => {
            inputs.extend(with_sidecar(g));
            let gt = read_seen_matrix(g, &loaded.graph, &loaded.mask)?;
            if !(args.temperature > 0.0) {
                return Err(usage("--temperature must be positive"));
            }
            conse_scores(&features, &loaded.inputs, &gt, &loaded.mask, args.top_t, args.temperature)?
        }
        (None, None) => return Err(usage("either --probs or --gt-classifiers is required")),
    };
    let unseen = loaded.mask.unseen();
    let keep: Vec<usize> = (0..labels.len()).filter(|&r| unseen.contains(&labels[r])).collect();
    let scores = scores.select_rows(&keep);
    let labels: Vec<usize> = keep.iter().map(|&r| labels[r]).collect();
    let setting = args.images.setting;
    let mut report = evaluate_topk(&scores, &labels, &args.images.ks, &candidates(&loaded.mask, setting), setting)?;
    report.config_hash = config_hash(args, &inputs)?;
    let out = write_report(&args.out_dir, &report)?;
    write_manifest("conse", args, vec![], &inputs, &[out], &args.out_dir)?;
    Ok(())
}

struct AblationTask {
    task: EvalTask,
    inputs: Vec<PathBuf>,
}

fn load_ablation(common: &AblateCommon) -> CliResult<AblationTask> {
    check_ks(&common.ks)?;
    if common.seeds.is_empty() {
        return Err(usage("--seeds needs at least one value"));
    }
    if common.width_divisor == 0 {
        return Err(usage("--width-divisor must be positive"));
    }
    let loaded = load_graph_inputs(&common.inputs)?;
    let mut inputs = loaded.input_files.clone();
    inputs.extend(with_sidecar(&common.gt_classifiers));
    inputs.extend(with_sidecar(&common.features));
    let gt = read_seen_matrix(&common.gt_classifiers, &loaded.graph, &loaded.mask)?;
    let (features, labels) = read_features(&common.features, &loaded.graph)?;
    let (test_features, test_labels) = test_images(&features, &labels, &loaded.mask.unseen());
    let task = EvalTask {
        graph: loaded.graph,
        inputs: loaded.inputs,
        gt_classifiers: gt,
        mask: loaded.mask,
        test_features,
        test_labels,
    };
    Ok(AblationTask { task, inputs })
}

fn hidden_for(layers: usize, divisor: usize) -> CliResult<Vec<usize>> {
    let widths = depth_hidden(layers).map_err(|e| usage(e.to_string()))?;
    Ok(widths.iter().map(|w| (w / divisor).max(1)).collect())
}

/// Mean hits over the configured seeds; `variant` builds the graph variant for a seed.
fn mean_hits(
    at: &AblationTask,
    common: &AblateCommon,
    hidden: &[usize],
    variant: impl Fn(u64) -> GraphVariant,
) -> CliResult<Vec<f64>> {
    let mut sum = vec![0.0; common.ks.len()];
    for &seed in &common.seeds {
        let cfg = TrainConfig {
            learning_rate: common.lr,
            weight_decay: common.wd,
            epochs: common.epochs,
            seed,
            ..TrainConfig::default()
        };
        let (_, report) = evaluate_gcn(&at.task, variant(seed), hidden, &cfg, &common.ks)?;
        sum.iter_mut().zip(&report.hits).for_each(|(s, h)| *s += h);
    }
    Ok(sum.iter().map(|s| s / common.seeds.len() as f64).collect())
}

fn csv_header(first: &str, ks: &[usize], extra: &[&str]) -> String {
    let mut cols = vec![first.to_string()];
    cols.extend(ks.iter().map(|k| format!("hit@{k}")));
    cols.extend(extra.iter().map(|s| s.to_string()));
    cols.join(",") + "\n"
}

fn csv_row(out: &mut String, first: &str, hits: &[f64], extra: &[f64]) {
    let cells: Vec<String> = std::iter::once(first.to_string())
        .chain(hits.iter().chain(extra).map(|h| format!("{h:.6}")))
        .collect();
    let _ = writeln!(out, "{}", cells.join(","));
}

fn finish_ablation<F: Serialize>(name: &str, flags: &F, common: &AblateCommon, at: &AblationTask, csv: &str) -> CliResult {
    let out = write_text(&common.out_dir.join(format!("{name}.csv")), csv)?;
    write_manifest(&format!("ablate {name}"), flags, common.seeds.clone(), &at.inputs, &[out], &common.out_dir)?;
    Ok(())
}

pub fn ablate(cmd: &AblateCommand) -> CliResult {
    match cmd {
        AblateCommand::DropEdges(args) => {
            let c = &args.common;
            if args.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
                return Err(usage("--fractions must lie in [0, 1]"));
            }
            let hidden = hidden_for(args.layers, c.width_divisor)?;
            let at = load_ablation(c)?;
            let mut csv = csv_header("fraction", &c.ks, &[]);
            for &fraction in &args.fractions {
                let hits = mean_hits(&at, c, &hidden, |seed| {
                    if fraction == 0.0 {
                        GraphVariant::Original
                    } else {
                        GraphVariant::DropEdges { fraction, seed }
                    }
                })?;
                csv_row(&mut csv, &fraction.to_string(), &hits, &[]);
            }
            finish_ablation("drop_edges", args, c, &at, &csv)
        }
        AblateCommand::Depth(args) => {
            let c = &args.common;
            let hidden = args
                .layers
                .iter()
                .map(|&l| hidden_for(l, c.width_divisor))
                .collect::<CliResult<Vec<_>>>()?;
            let at = load_ablation(c)?;
            let mut csv = csv_header("layers", &c.ks, &[]);
            for (layers, h) in args.layers.iter().zip(&hidden) {
                let hits = mean_hits(&at, c, h, |_| GraphVariant::Original)?;
                csv_row(&mut csv, &layers.to_string(), &hits, &[]);
            }
            finish_ablation("depth", args, c, &at, &csv)
        }
        AblateCommand::Trivial(args) => {
            let c = &args.common;
            let hidden = hidden_for(args.layers, c.width_divisor)?;
            let at = load_ablation(c)?;
            let chance = at.task.chance_at_1();
            let mut csv = csv_header("graph", &c.ks, &["chance@1"]);
            let original = mean_hits(&at, c, &hidden, |_| GraphVariant::Original)?;
            csv_row(&mut csv, "original", &original, &[chance]);
            let (label, hits) = match args.kind {
                TrivialKind::Star => ("star", mean_hits(&at, c, &hidden, |_| GraphVariant::Star)?),
                TrivialKind::Random => ("random", mean_hits(&at, c, &hidden, |seed| GraphVariant::Random { seed })?),
            };
            csv_row(&mut csv, label, &hits, &[chance]);
            finish_ablation("trivial", args, c, &at, &csv)
        }
    }
}

pub fn analyze_distances(args: &DistanceArgs) -> CliResult {
    if args.max_hops == 0 {
        return Err(usage("--max-hops must be at least 1"));
    }
    let loaded = load_graph_inputs(&args.inputs)?;
    let mut inputs = loaded.input_files.clone();
    inputs.push(args.checkpoint.clone());
    inputs.extend(with_sidecar(&args.gt_classifiers));
    let predicted = predict(&args.checkpoint, &loaded)?;
    let gt = read_seen_matrix(&args.gt_classifiers, &loaded.graph, &loaded.mask)?;
    if gt.cols() != predicted.cols() {
        return Err(CliError::Core(Error::Format {
            path: args.gt_classifiers.clone(),
            msg: format!("classifiers have {} columns, the model predicts {}", gt.cols(), predicted.cols()),
        }));
    }
    let unseen = ClassifierMatrix::from_nodes(&predicted, &loaded.mask.unseen(), true)?;
    let training = ClassifierMatrix::from_nodes(&gt, &loaded.mask.seen(), true)?;
    let distances = classifier_neighbor_distances(&unseen, &training, &loaded.graph, args.max_hops)?;
    let mut csv = String::from("class,distance\n");
    for d in &distances {
        let name = &loaded.graph.node_names()[d.class];
        if d.distance.is_finite() {
            let _ = writeln!(csv, "{name},{:.9}", d.distance);
        } else {
            let _ = writeln!(csv, "{name},inf");
        }
    }
    let out = write_text(&args.out_dir.join("distances.csv"), &csv)?;
    write_manifest("analyze-distances", args, vec![], &inputs, &[out], &args.out_dir)?;
    Ok(())
}
