//! Seeded synthetic zero-shot worlds.
//!
//! A world is a random tree plus extra random edges over `num_classes` nodes. Each
//! node gets an i.i.d. Gaussian vector that is then smoothed over the graph
//! (`p ← s·p + (1−s)·mean(neighbors)`), so classifiers of adjacent classes are
//! correlated. The normalized result is the ground-truth classifier; the class
//! embedding is a fixed random projection of it plus noise; image features are the
//! classifier plus noise.

use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embed::{format_embeddings, InputMatrix, InputSidecar};
use crate::error::{Error, Result};
use crate::kgraph::{Edge, KnowledgeGraph};
use crate::linalg::{matmul, row_l2_normalize, DenseMatrix};
use crate::matio::{self, Dtype};
use crate::rng::{seeded, stream};
use crate::train::SeenMask;
use crate::zeroshot::ClassifierMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub num_classes: usize,
    pub embed_dim: usize,
    pub classifier_dim: usize,
    pub images_per_class: usize,
    /// Embedding noise norm relative to the (unit) projected prototype.
    pub embed_noise: f64,
    /// Feature noise norm relative to the (unit) prototype.
    pub feature_noise: f64,
    /// Random non-tree edges added on top of the spanning tree.
    pub extra_edges: usize,
    pub diffusion_rounds: usize,
    pub diffusion_self_weight: f64,
    pub unseen_fraction: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            num_classes: 60,
            embed_dim: 16,
            classifier_dim: 24,
            images_per_class: 30,
            embed_noise: 3.0,
            feature_noise: 0.3,
            extra_edges: 20,
            diffusion_rounds: 3,
            diffusion_self_weight: 0.5,
            unseen_fraction: 0.15,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTask {
    pub graph: KnowledgeGraph,
    pub input: InputMatrix,
    /// All `n` classes, row-normalized, `class_ids = 0..n`.
    pub gt_classifiers: ClassifierMatrix,
    pub features: DenseMatrix,
    /// Class (node id) of each feature row.
    pub labels: Vec<usize>,
    pub seen_mask: SeenMask,
    pub config: WorldConfig,
}

impl SyntheticTask {
    pub fn num_classes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn seen(&self) -> Vec<usize> {
        self.seen_mask.seen()
    }

    pub fn unseen(&self) -> Vec<usize> {
        self.seen_mask.unseen()
    }

    /// Features and labels of unseen classes only; the evaluation set.
    pub fn test_set(&self) -> (DenseMatrix, Vec<usize>) {
        let rows: Vec<usize> = (0..self.labels.len())
            .filter(|&i| !self.seen_mask.is_seen(self.labels[i]))
            .collect();
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        (self.features.select_rows(&rows), labels)
    }
}

pub fn class_name(i: usize) -> String {
    format!("cls{i:03}")
}

fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> DenseMatrix {
    let data = (0..rows * cols)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    DenseMatrix::from_vec(rows, cols, data).expect("finite gaussian samples")
}

fn random_tree_plus_edges(n: usize, extra: usize, seed: u64) -> Result<KnowledgeGraph> {
    let mut rng = seeded(seed, stream::WORLD_GRAPH);
    let mut present = vec![false; n * n];
    let mut pairs = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        present[u * n + v] = true;
        pairs.push((u, v));
    }
    let free: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
        .filter(|&(u, v)| !present[u * n + v])
        .collect();
    if extra > free.len() {
        return Err(Error::invalid(format!("{extra} extra edges requested, only {} pairs free", free.len())));
    }
    let mut picks = index::sample(&mut rng, free.len(), extra).into_vec();
    picks.sort_unstable();
    pairs.extend(picks.into_iter().map(|i| free[i]));
    pairs.sort_unstable();
    let names = (0..n).map(class_name).collect();
    let edges = pairs.into_iter().map(|(u, v)| Edge { u, v, confidence: 1.0 }).collect();
    KnowledgeGraph::new(names, vec![true; n], edges)
}

/// Smooths rows over the graph: `p ← s·p + (1 − s)·mean(neighbors)`, `rounds` times.
pub fn diffuse(graph: &KnowledgeGraph, x: &DenseMatrix, rounds: usize, self_weight: f64) -> DenseMatrix {
    let nb = graph.neighbors();
    let mut p = x.clone();
    for _ in 0..rounds {
        let prev = p.clone();
        for (i, list) in nb.iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            let inv = 1.0 / list.len() as f64;
            let row = p.row_mut(i);
            for (c, v) in row.iter_mut().enumerate() {
                let mean: f64 = list.iter().map(|&j| prev.get(j, c)).sum::<f64>() * inv;
                *v = self_weight * prev.get(i, c) + (1.0 - self_weight) * mean;
            }
        }
    }
    p
}

pub fn generate_world(cfg: &WorldConfig) -> Result<SyntheticTask> {
    if cfg.num_classes < 10 {
        return Err(Error::invalid("a world needs at least 10 classes"));
    }
    if cfg.embed_dim == 0 || cfg.classifier_dim == 0 {
        return Err(Error::invalid("embedding and classifier dims must be positive"));
    }
    if cfg.images_per_class == 0 {
        return Err(Error::invalid("images_per_class must be positive"));
    }
    if !(cfg.embed_noise >= 0.0 && cfg.feature_noise >= 0.0) {
        return Err(Error::invalid("noise levels must be non-negative"));
    }
    if !(0.0..=1.0).contains(&cfg.diffusion_self_weight) {
        return Err(Error::invalid("diffusion self weight must lie in [0, 1]"));
    }
    let (n, k, d) = (cfg.num_classes, cfg.embed_dim, cfg.classifier_dim);
    let graph = random_tree_plus_edges(n, cfg.extra_edges, cfg.seed)?;

    let base = gaussian(&mut seeded(cfg.seed, stream::WORLD_PROTOTYPES), n, d, 1.0);
    let prototypes = diffuse(&graph, &base, cfg.diffusion_rounds, cfg.diffusion_self_weight);
    let gt = row_l2_normalize(&prototypes);

    let projection = gaussian(&mut seeded(cfg.seed, stream::WORLD_PROJECTION), d, k, 1.0 / (k as f64).sqrt());
    let mut embeddings = matmul(&gt, &projection)?;
    let noise = gaussian(&mut seeded(cfg.seed, stream::WORLD_EMBED_NOISE), n, k, cfg.embed_noise / (k as f64).sqrt());
    embeddings
        .data_mut()
        .iter_mut()
        .zip(noise.data())
        .for_each(|(e, z)| *e += z);

    let mut rng = seeded(cfg.seed, stream::WORLD_FEATURES);
    let total = n * cfg.images_per_class;
    let mut features = DenseMatrix::zeros(total, d);
    let mut labels = Vec::with_capacity(total);
    let sigma = cfg.feature_noise / (d as f64).sqrt();
    for c in 0..n {
        for _ in 0..cfg.images_per_class {
            let r = labels.len();
            for (j, v) in features.row_mut(r).iter_mut().enumerate() {
                *v = gt.get(c, j) + sigma * rng.sample::<f64, _>(StandardNormal);
            }
            labels.push(c);
        }
    }

    let placeholder = SeenMask::new((0..n).map(|i| i > 0).collect())?;
    let task = SyntheticTask {
        graph,
        input: InputMatrix {
            matrix: embeddings,
            coverage: vec![1.0; n],
        },
        gt_classifiers: ClassifierMatrix::new(gt, (0..n).collect(), true)?,
        features,
        labels,
        seen_mask: placeholder,
        config: cfg.clone(),
    };
    split_seen_unseen(task, cfg.unseen_fraction, cfg.seed)
}

/// Marks `ceil(fraction · n)` uniformly chosen classes as unseen.
pub fn split_seen_unseen(mut task: SyntheticTask, unseen_fraction: f64, seed: u64) -> Result<SyntheticTask> {
    let n = task.num_classes();
    if !(unseen_fraction > 0.0 && unseen_fraction < 1.0) {
        return Err(Error::invalid(format!("unseen fraction {unseen_fraction} outside (0, 1)")));
    }
    // tolerance keeps e.g. 0.15 * 60 from rounding up to 10
    let unseen = ((unseen_fraction * n as f64) - 1e-9).ceil() as usize;
    if unseen == 0 || unseen >= n {
        return Err(Error::invalid(format!("fraction {unseen_fraction} leaves no seen or no unseen classes")));
    }
    let mut rng = seeded(seed, stream::SPLIT);
    let mut flags = vec![true; n];
    for i in index::sample(&mut rng, n, unseen) {
        flags[i] = false;
    }
    task.seen_mask = SeenMask::new(flags)?;
    task.config.unseen_fraction = unseen_fraction;
    Ok(task)
}

/// Sidecar for the per-node classifier matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSidecar {
    pub node_order: Vec<String>,
    pub dim: usize,
}

/// Sidecar mapping feature (or probability) rows to images and labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub image_ids: Vec<String>,
    /// Class (node name) of each row.
    pub labels: Vec<String>,
}

pub mod files {
    pub const NODES: &str = "nodes.tsv";
    pub const EDGES: &str = "edges.tsv";
    pub const EMBEDDINGS: &str = "embeddings.txt";
    pub const INPUT: &str = "input.zslm";
    pub const INPUT_SIDECAR: &str = "input.json";
    pub const GT: &str = "gt_classifiers.zslm";
    pub const GT_SIDECAR: &str = "gt_classifiers.json";
    pub const FEATURES: &str = "features.zslm";
    pub const FEATURES_SIDECAR: &str = "features.json";
    pub const SEEN: &str = "seen.txt";
    pub const UNSEEN: &str = "unseen.txt";
    pub const WORLD: &str = "world.json";
}

fn name_list(task: &SyntheticTask, ids: &[usize]) -> String {
    ids.iter().map(|&i| format!("{}\n", task.graph.node_names()[i])).collect()
}

/// Writes every task file into `dir`; returns the paths written, in a fixed order.
pub fn write_task(dir: &Path, task: &SyntheticTask) -> Result<Vec<PathBuf>> {
    let names = task.graph.node_names();
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let p = dir.join(name);
        matio::write_atomic(&p, &bytes)?;
        written.push(p);
        Ok(())
    };
    put(files::NODES, task.graph.to_nodes_tsv().into_bytes())?;
    put(files::EDGES, task.graph.to_edges_tsv().into_bytes())?;
    let emb = &task.input.matrix;
    put(
        files::EMBEDDINGS,
        format_embeddings(names.iter().enumerate().map(|(i, n)| (n.as_str(), emb.row(i)))).into_bytes(),
    )?;
    put(files::INPUT, matio::encode(emb, Dtype::F64))?;
    put(files::INPUT_SIDECAR, json_bytes(&InputSidecar {
        node_order: names.to_vec(),
        dim: emb.cols(),
    })?)?;
    put(files::GT, matio::encode(&task.gt_classifiers.matrix, Dtype::F64))?;
    put(files::GT_SIDECAR, json_bytes(&ClassifierSidecar {
        node_order: names.to_vec(),
        dim: task.gt_classifiers.matrix.cols(),
    })?)?;
    put(files::FEATURES, matio::encode(&task.features, Dtype::F32))?;
    put(files::FEATURES_SIDECAR, json_bytes(&FeatureSidecar {
        image_ids: (0..task.labels.len()).map(|i| format!("img{i:05}")).collect(),
        labels: task.labels.iter().map(|&l| names[l].clone()).collect(),
    })?)?;
    put(files::SEEN, name_list(task, &task.seen()).into_bytes())?;
    put(files::UNSEEN, name_list(task, &task.unseen()).into_bytes())?;
    put(files::WORLD, json_bytes(&task.config)?)?;
    Ok(written)
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::invalid(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}
