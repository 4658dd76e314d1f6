//! Scoring, top-k evaluation, the ConSE and direct-MLP baselines, and the
//! nearest-training-classifier distance analysis.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn::{forward, init_model, DEFAULT_SLOPE};
use crate::kgraph::{KnowledgeGraph, NormalizedAdjacency};
use crate::linalg::{dot, matmul_nt, norm, row_l2_normalize, DenseMatrix};
use crate::train::{fit, FitOptions, SeenMask, Target, TrainConfig};

pub const DEFAULT_KS: [usize; 5] = [1, 2, 5, 10, 20];

/// Rows are classifiers; `class_ids[r]` is the graph node of row `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierMatrix {
    pub matrix: DenseMatrix,
    pub class_ids: Vec<usize>,
    pub normalized: bool,
}

impl ClassifierMatrix {
    pub fn new(matrix: DenseMatrix, class_ids: Vec<usize>, normalized: bool) -> Result<Self> {
        if matrix.rows() != class_ids.len() {
            return Err(Error::shape("ClassifierMatrix", "one class id per row required"));
        }
        if normalized {
            for r in 0..matrix.rows() {
                let n = norm(matrix.row(r));
                if n > 0.0 && (n - 1.0).abs() > 1e-6 {
                    return Err(Error::invalid(format!("row {r} has norm {n}, expected 1")));
                }
            }
        }
        Ok(Self {
            matrix,
            class_ids,
            normalized,
        })
    }

    /// Row-normalizes `matrix`.
    pub fn normalized(matrix: &DenseMatrix, class_ids: Vec<usize>) -> Result<Self> {
        Self::new(row_l2_normalize(matrix), class_ids, true)
    }

    /// Rows `ids` of an `n×D` per-node matrix.
    pub fn from_nodes(per_node: &DenseMatrix, ids: &[usize], normalize: bool) -> Result<Self> {
        let m = per_node.select_rows(ids);
        if normalize {
            Self::normalized(&m, ids.to_vec())
        } else {
            Self::new(m, ids.to_vec(), false)
        }
    }

    pub fn len(&self) -> usize {
        self.class_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_ids.is_empty()
    }

    pub fn row_of(&self, class: usize) -> Option<usize> {
        self.class_ids.iter().position(|&c| c == class)
    }
}

/// `features · classifiersᵀ` (images × classes).
pub fn score_images(features: &DenseMatrix, classifiers: &ClassifierMatrix) -> Result<DenseMatrix> {
    if !classifiers.normalized {
        return Err(Error::invalid("scoring expects normalized classifiers"));
    }
    if features.cols() != classifiers.matrix.cols() {
        return Err(Error::shape(
            "score_images",
            format!("features have {} dims, classifiers {}", features.cols(), classifiers.matrix.cols()),
        ));
    }
    matmul_nt(features, &classifiers.matrix)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    /// Candidates are the unseen classes only.
    #[serde(rename = "unseen")]
    UnseenOnly,
    /// Candidates are seen ∪ unseen; test images still come from unseen classes.
    #[serde(rename = "generalized")]
    Generalized,
}

impl std::str::FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unseen" | "unseen-only" => Ok(Self::UnseenOnly),
            "generalized" => Ok(Self::Generalized),
            other => Err(Error::invalid(format!("unknown setting `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub setting: Setting,
    pub ks: Vec<usize>,
    pub hits: Vec<f64>,
    pub num_images: usize,
    pub num_candidates: usize,
    pub config_hash: String,
}

impl EvalReport {
    pub fn hit_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.hits[i])
    }
}

/// Descending score, ties broken by ascending column index.
fn ranks_before(a: (usize, f64), b: (usize, f64)) -> bool {
    a.1 > b.1 || (a.1 == b.1 && a.0 < b.0)
}

/// Candidates sorted best-first (descending score, ascending index on ties).
pub fn rank_candidates(scores: &[f64], candidates: &[usize]) -> Vec<usize> {
    let mut order = candidates.to_vec();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// hit@k = fraction of images whose true column is among the `k` best candidate
/// columns. `true_labels` and `candidates` index the score columns.
pub fn evaluate_topk(
    scores: &DenseMatrix,
    true_labels: &[usize],
    ks: &[usize],
    candidates: &[usize],
    setting: Setting,
) -> Result<EvalReport> {
    if candidates.is_empty() {
        return Err(Error::invalid("empty candidate set"));
    }
    if true_labels.len() != scores.rows() {
        return Err(Error::shape("evaluate_topk", "one label per score row required"));
    }
    if let Some(&c) = candidates.iter().find(|&&c| c >= scores.cols()) {
        return Err(Error::invalid(format!("candidate {c} outside score columns")));
    }
    let mut is_candidate = vec![false; scores.cols()];
    candidates.iter().for_each(|&c| is_candidate[c] = true);
    let mut counts = vec![0usize; ks.len()];
    for (i, &label) in true_labels.iter().enumerate() {
        if label >= scores.cols() || !is_candidate[label] {
            return Err(Error::invalid(format!("true label {label} of image {i} is not a candidate")));
        }
        let row = scores.row(i);
        let target = (label, row[label]);
        let rank = candidates
            .iter()
            .filter(|&&c| c != label && ranks_before((c, row[c]), target))
            .count();
        for (count, &k) in counts.iter_mut().zip(ks) {
            if rank < k {
                *count += 1;
            }
        }
    }
    let num_images = true_labels.len();
    let hits = counts
        .iter()
        .map(|&c| if num_images == 0 { 0.0 } else { c as f64 / num_images as f64 })
        .collect();
    let mut unique = candidates.to_vec();
    unique.sort_unstable();
    unique.dedup();
    Ok(EvalReport {
        setting,
        ks: ks.to_vec(),
        hits,
        num_images,
        num_candidates: unique.len(),
        config_hash: String::new(),
    })
}

/// Row-wise softmax of `scores / temperature`.
pub fn softmax_rows(scores: &DenseMatrix, temperature: f64) -> DenseMatrix {
    let mut out = scores.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = ((*v - max) / temperature).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// `(1/T) Σ p_i x_i` over each image's `T` most probable seen classes.
pub fn conse_combine(seen_probs: &DenseMatrix, seen_embeddings: &DenseMatrix, t: usize) -> Result<DenseMatrix> {
    let m = seen_probs.cols();
    if seen_embeddings.rows() != m {
        return Err(Error::shape("conse", "one seen embedding per probability column required"));
    }
    if t == 0 || t > m {
        return Err(Error::invalid(format!("T = {t} outside [1, {m}]")));
    }
    let all: Vec<usize> = (0..m).collect();
    let k = seen_embeddings.cols();
    let mut out = DenseMatrix::zeros(seen_probs.rows(), k);
    for i in 0..seen_probs.rows() {
        let probs = seen_probs.row(i);
        let top = rank_candidates(probs, &all);
        let row = out.row_mut(i);
        for &c in &top[..t] {
            for (o, &x) in row.iter_mut().zip(seen_embeddings.row(c)) {
                *o += probs[c] * x;
            }
        }
        row.iter_mut().for_each(|v| *v /= t as f64);
    }
    Ok(out)
}

/// Cosine similarity of each combined embedding to each candidate embedding.
pub fn cosine_scores(combined: &DenseMatrix, candidate_embeddings: &DenseMatrix) -> Result<DenseMatrix> {
    if combined.cols() != candidate_embeddings.cols() {
        return Err(Error::shape("cosine_scores", "embedding dimensions differ"));
    }
    let cand_norms: Vec<f64> = (0..candidate_embeddings.rows())
        .map(|j| norm(candidate_embeddings.row(j)))
        .collect();
    let mut out = DenseMatrix::zeros(combined.rows(), candidate_embeddings.rows());
    for i in 0..combined.rows() {
        let a = combined.row(i);
        let na = norm(a);
        for (j, &nb) in cand_norms.iter().enumerate() {
            let denom = na * nb;
            let s = if denom > 0.0 { dot(a, candidate_embeddings.row(j)) / denom } else { 0.0 };
            out.set(i, j, s);
        }
    }
    Ok(out)
}

/// ConSE: candidate scores (images × candidates) by cosine similarity to the
/// probability-weighted average of the top-`t` seen-class embeddings.
pub fn conse_predict(
    seen_probs: &DenseMatrix,
    seen_embeddings: &DenseMatrix,
    candidate_embeddings: &DenseMatrix,
    t: usize,
) -> Result<DenseMatrix> {
    let combined = conse_combine(seen_probs, seen_embeddings, t)?;
    cosine_scores(&combined, candidate_embeddings)
}

/// Layer widths of the direct embedding-to-classifier baseline.
pub const MLP_HIDDEN: [usize; 2] = [512, 512];

/// Trains an MLP (identity propagation) from seen embeddings to seen classifiers and
/// returns normalized predictions for the unseen nodes.
pub fn mlp_baseline(
    inputs: &DenseMatrix,
    gt_classifiers: &DenseMatrix,
    mask: &SeenMask,
    hidden: &[usize],
    cfg: &TrainConfig,
) -> Result<ClassifierMatrix> {
    if mask.num_seen() < 2 {
        return Err(Error::invalid("the MLP baseline needs at least 2 seen classes"));
    }
    if inputs.rows() != mask.len() || gt_classifiers.rows() != mask.len() {
        return Err(Error::shape("mlp_baseline", "inputs, targets and mask disagree on n"));
    }
    let targets = row_l2_normalize(gt_classifiers);
    let dims: Vec<usize> = std::iter::once(inputs.cols())
        .chain(hidden.iter().copied())
        .chain(std::iter::once(gt_classifiers.cols()))
        .collect();
    let model = init_model(&dims, DEFAULT_SLOPE, true, cfg.seed)?;
    // identity propagation: each row sees only its own embedding
    let adj = NormalizedAdjacency::identity(inputs.rows());
    let outcome = fit(
        model,
        &adj,
        inputs,
        Target::Regression {
            classifiers: &targets,
            mask,
        },
        cfg,
        &FitOptions::default(),
    )?;
    let (pred, _) = forward(outcome.model(), &adj, inputs)?;
    let unseen = mask.unseen();
    ClassifierMatrix::new(pred.select_rows(&unseen), unseen, true)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDistance {
    pub class: usize,
    /// `f64::INFINITY` when no training class lies within the hop limit.
    pub distance: f64,
}

/// For each predicted classifier, the minimum Euclidean distance to a training
/// classifier whose class is within `max_hops` in the graph; sorted ascending.
pub fn classifier_neighbor_distances(
    predicted: &ClassifierMatrix,
    training: &ClassifierMatrix,
    graph: &KnowledgeGraph,
    max_hops: usize,
) -> Result<Vec<ClassDistance>> {
    let n = graph.num_nodes();
    if let Some(&c) = predicted.class_ids.iter().chain(&training.class_ids).find(|&&c| c >= n) {
        return Err(Error::invalid(format!("class {c} is not a graph node")));
    }
    if predicted.matrix.cols() != training.matrix.cols() {
        return Err(Error::shape("classifier_neighbor_distances", "classifier dimensions differ"));
    }
    let mut training_row = vec![None; n];
    for (r, &c) in training.class_ids.iter().enumerate() {
        training_row[c] = Some(r);
    }
    let mut out = Vec::with_capacity(predicted.len());
    for (r, &class) in predicted.class_ids.iter().enumerate() {
        let hops = graph.bfs_distances(&[class]);
        let w = predicted.matrix.row(r);
        let distance = (0..n)
            .filter(|&j| hops[j] <= max_hops)
            .filter_map(|j| training_row[j])
            .map(|tr| {
                w.iter()
                    .zip(training.matrix.row(tr))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        out.push(ClassDistance { class, distance });
    }
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.class.cmp(&b.class)));
    Ok(out)
}
