//! End-to-end runs on a task: GCN training over a (possibly perturbed) graph,
//! evaluation of predicted classifiers, and the ConSE and MLP baselines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn::{forward, init_model, DEFAULT_HIDDEN, DEFAULT_SLOPE};
use crate::kgraph::{drop_edges, make_random_graph, make_star_graph, normalize_adjacency, Edge, KnowledgeGraph};
use crate::linalg::{matmul_nt, row_l2_normalize, DenseMatrix};
use crate::synth::SyntheticTask;
use crate::train::{fit, FitOptions, FitOutcome, SeenMask, Target, TrainConfig};
use crate::zeroshot::{conse_combine, cosine_scores, evaluate_topk, mlp_baseline, softmax_rows, EvalReport, Setting};

/// Hidden widths of the full-size model with 2, 4 or 6 graph-convolution layers.
pub fn depth_hidden(layers: usize) -> Result<Vec<usize>> {
    match layers {
        2 => Ok(vec![512]),
        4 => Ok(vec![2048, 1024, 512]),
        6 => Ok(DEFAULT_HIDDEN.to_vec()),
        other => Err(Error::invalid(format!("no width schedule for {other} layers (use 2, 4 or 6)"))),
    }
}

/// Width divisor between the full-size schedules and the synthetic fixture.
pub const FIXTURE_WIDTH_DIVISOR: usize = 16;

/// [`depth_hidden`] scaled down for the synthetic fixture.
pub fn fixture_hidden(layers: usize) -> Result<Vec<usize>> {
    Ok(depth_hidden(layers)?.into_iter().map(|w| w / FIXTURE_WIDTH_DIVISOR).collect())
}

/// Hidden widths of the fixture-scale MLP baseline.
pub const FIXTURE_MLP_HIDDEN: [usize; 2] = [32, 32];

/// Graph the GCN propagates over, built from the task graph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GraphVariant {
    Original,
    DropEdges { fraction: f64, seed: u64 },
    /// Every class attached to one extra root node with a zero embedding.
    Star,
    /// As many uniformly random edges as the task graph has.
    Random { seed: u64 },
}

/// The propagation graph and how many nodes it adds after the task's classes.
pub fn variant_graph(graph: &KnowledgeGraph, variant: GraphVariant) -> Result<(KnowledgeGraph, usize)> {
    let n = graph.num_nodes();
    match variant {
        GraphVariant::Original => Ok((graph.clone(), 0)),
        GraphVariant::DropEdges { fraction, seed } => Ok((drop_edges(graph, fraction, seed)?, 0)),
        GraphVariant::Star => {
            // put the root last so class ids keep their node ids
            let star = make_star_graph(n + 1)?;
            let relabel = |i: usize| if i == 0 { n } else { i - 1 };
            let mut names: Vec<String> = graph.node_names().to_vec();
            names.push("root".into());
            let mut flags = graph.seed_flags().to_vec();
            flags.push(false);
            let edges = star
                .edges()
                .iter()
                .map(|e| Edge {
                    u: relabel(e.u),
                    v: relabel(e.v),
                    confidence: e.confidence,
                })
                .collect();
            Ok((KnowledgeGraph::new(names, flags, edges)?, 1))
        }
        GraphVariant::Random { seed } => {
            let edges = crate::kgraph::symmetrize(graph).num_edges();
            let random = make_random_graph(n, edges, seed)?;
            let g = KnowledgeGraph::new(graph.node_names().to_vec(), graph.seed_flags().to_vec(), random.edges().to_vec())?;
            Ok((g, 0))
        }
    }
}

fn pad_rows(m: &DenseMatrix, extra: usize) -> DenseMatrix {
    let mut data = m.data().to_vec();
    data.resize((m.rows() + extra) * m.cols(), 0.0);
    DenseMatrix::from_vec(m.rows() + extra, m.cols(), data).expect("padding keeps values finite")
}

#[derive(Clone, Debug)]
pub struct GcnRun {
    pub outcome: FitOutcome,
    /// Normalized classifier prediction for every task class (`n×D`).
    pub predicted: DenseMatrix,
}

/// Trains a regression GCN with `hidden` widths over `graph` and predicts a
/// classifier for every node. `graph` may carry extra nodes after the `n`
/// supervised ones; they get zero inputs, no supervision, and are dropped from
/// the returned predictions.
pub fn train_gcn(
    graph: &KnowledgeGraph,
    inputs: &DenseMatrix,
    gt_classifiers: &DenseMatrix,
    mask: &SeenMask,
    hidden: &[usize],
    cfg: &TrainConfig,
) -> Result<GcnRun> {
    let n = inputs.rows();
    if gt_classifiers.rows() != n || mask.len() != n || graph.num_nodes() < n {
        return Err(Error::shape("train_gcn", "inputs, targets, mask and graph disagree on n"));
    }
    let extra = graph.num_nodes() - n;
    let x = pad_rows(inputs, extra);
    let gt = pad_rows(&row_l2_normalize(gt_classifiers), extra);
    let mut flags = mask.flags().to_vec();
    flags.resize(n + extra, false);
    let full_mask = SeenMask::new(flags)?;
    let dims: Vec<usize> = std::iter::once(inputs.cols())
        .chain(hidden.iter().copied())
        .chain(std::iter::once(gt_classifiers.cols()))
        .collect();
    let model = init_model(&dims, DEFAULT_SLOPE, true, cfg.seed)?;
    let adj = normalize_adjacency(graph);
    let outcome = fit(
        model,
        &adj,
        &x,
        Target::Regression {
            classifiers: &gt,
            mask: &full_mask,
        },
        cfg,
        &FitOptions::default(),
    )?;
    let (pred, _) = forward(outcome.model(), &adj, &x)?;
    let predicted = pred.select_rows(&(0..n).collect::<Vec<_>>());
    Ok(GcnRun { outcome, predicted })
}

/// Per-class classifiers to score with: predictions for unseen classes, and for
/// seen classes the ground truth when available (predictions otherwise).
pub fn candidate_classifiers(predicted: &DenseMatrix, gt: Option<&DenseMatrix>, mask: &SeenMask) -> Result<DenseMatrix> {
    if predicted.rows() != mask.len() {
        return Err(Error::shape("candidate_classifiers", "one prediction per class required"));
    }
    let mut out = row_l2_normalize(predicted);
    if let Some(gt) = gt {
        if gt.shape() != predicted.shape() {
            return Err(Error::shape("candidate_classifiers", "ground truth and predictions differ in shape"));
        }
        let gt = row_l2_normalize(gt);
        for i in mask.seen() {
            out.row_mut(i).copy_from_slice(gt.row(i));
        }
    }
    Ok(out)
}

pub fn candidates(mask: &SeenMask, setting: Setting) -> Vec<usize> {
    match setting {
        Setting::UnseenOnly => mask.unseen(),
        Setting::Generalized => (0..mask.len()).collect(),
    }
}

/// hit@k of `features` (labelled with class ids) scored against per-class classifiers.
pub fn evaluate_classifiers(
    features: &DenseMatrix,
    labels: &[usize],
    classifiers: &DenseMatrix,
    mask: &SeenMask,
    setting: Setting,
    ks: &[usize],
) -> Result<EvalReport> {
    let scores = matmul_nt(features, classifiers)?;
    evaluate_topk(&scores, labels, ks, &candidates(mask, setting), setting)
}

/// ConSE scores over all classes (images × n). Seen-class probabilities are a
/// softmax of the seen ground-truth classifier scores at `temperature`.
pub fn conse_scores(
    features: &DenseMatrix,
    embeddings: &DenseMatrix,
    gt_classifiers: &DenseMatrix,
    mask: &SeenMask,
    t: usize,
    temperature: f64,
) -> Result<DenseMatrix> {
    if !(temperature > 0.0) {
        return Err(Error::invalid("temperature must be positive"));
    }
    let seen = mask.seen();
    let seen_gt = row_l2_normalize(&gt_classifiers.select_rows(&seen));
    let probs = softmax_rows(&matmul_nt(features, &seen_gt)?, temperature);
    conse_scores_from_probs(&probs, embeddings, mask, t)
}

/// ConSE scores over all classes from given seen-class probabilities (columns in
/// ascending seen-id order).
pub fn conse_scores_from_probs(probs: &DenseMatrix, embeddings: &DenseMatrix, mask: &SeenMask, t: usize) -> Result<DenseMatrix> {
    if embeddings.rows() != mask.len() {
        return Err(Error::shape("conse", "one embedding per class required"));
    }
    let seen = mask.seen();
    let combined = conse_combine(probs, &embeddings.select_rows(&seen), t)?;
    cosine_scores(&combined, embeddings)
}

pub const CONSE_T: usize = 10;
pub const CONSE_TEMPERATURE: f64 = 0.2;

/// Everything an experiment reads: the graph, per-class inputs and targets, the
/// seen mask, and the unseen-class test images.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalTask {
    pub graph: KnowledgeGraph,
    pub inputs: DenseMatrix,
    pub gt_classifiers: DenseMatrix,
    pub mask: SeenMask,
    pub test_features: DenseMatrix,
    pub test_labels: Vec<usize>,
}

impl EvalTask {
    pub fn chance_at_1(&self) -> f64 {
        1.0 / (self.mask.len() - self.mask.num_seen()) as f64
    }
}

impl From<&SyntheticTask> for EvalTask {
    fn from(task: &SyntheticTask) -> Self {
        let (test_features, test_labels) = task.test_set();
        Self {
            graph: task.graph.clone(),
            inputs: task.input.matrix.clone(),
            gt_classifiers: task.gt_classifiers.matrix.clone(),
            mask: task.seen_mask.clone(),
            test_features,
            test_labels,
        }
    }
}

/// Headline numbers for one task: GCN, ConSE and MLP in the unseen-only setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub gcn: EvalReport,
    pub conse: EvalReport,
    pub mlp: EvalReport,
    pub chance_at_1: f64,
}

/// Trains on the chosen graph variant and evaluates in the unseen-only setting.
pub fn evaluate_gcn(task: &EvalTask, variant: GraphVariant, hidden: &[usize], cfg: &TrainConfig, ks: &[usize]) -> Result<(GcnRun, EvalReport)> {
    let (graph, _) = variant_graph(&task.graph, variant)?;
    let run = train_gcn(&graph, &task.inputs, &task.gt_classifiers, &task.mask, hidden, cfg)?;
    let classifiers = candidate_classifiers(&run.predicted, Some(&task.gt_classifiers), &task.mask)?;
    let report = evaluate_classifiers(&task.test_features, &task.test_labels, &classifiers, &task.mask, Setting::UnseenOnly, ks)?;
    Ok((run, report))
}

pub fn evaluate_conse(task: &EvalTask, t: usize, temperature: f64, setting: Setting, ks: &[usize]) -> Result<EvalReport> {
    let scores = conse_scores(&task.test_features, &task.inputs, &task.gt_classifiers, &task.mask, t, temperature)?;
    evaluate_topk(&scores, &task.test_labels, ks, &candidates(&task.mask, setting), setting)
}

pub fn evaluate_mlp(task: &EvalTask, hidden: &[usize], cfg: &TrainConfig, ks: &[usize]) -> Result<EvalReport> {
    let unseen = mlp_baseline(&task.inputs, &task.gt_classifiers, &task.mask, hidden, cfg)?;
    let mut predicted = row_l2_normalize(&task.gt_classifiers);
    for (r, &c) in unseen.class_ids.iter().enumerate() {
        predicted.row_mut(c).copy_from_slice(unseen.matrix.row(r));
    }
    evaluate_classifiers(&task.test_features, &task.test_labels, &predicted, &task.mask, Setting::UnseenOnly, ks)
}

pub fn compare_methods(task: &EvalTask, cfg: &TrainConfig, ks: &[usize]) -> Result<Comparison> {
    let (_, gcn) = evaluate_gcn(task, GraphVariant::Original, &fixture_hidden(6)?, cfg, ks)?;
    let conse = evaluate_conse(task, CONSE_T, CONSE_TEMPERATURE, Setting::UnseenOnly, ks)?;
    let mlp = evaluate_mlp(task, &FIXTURE_MLP_HIDDEN, cfg, ks)?;
    Ok(Comparison {
        gcn,
        conse,
        mlp,
        chance_at_1: task.chance_at_1(),
    })
}
