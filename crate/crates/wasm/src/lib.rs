//! Browser bindings for the demo page. Every export takes and returns JSON strings;
//! the plain Rust functions behind them are usable (and tested) natively.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;
use zsl_core::experiment::{
    depth_hidden, evaluate_conse, evaluate_gcn, EvalTask, GraphVariant, CONSE_T, CONSE_TEMPERATURE,
};
use zsl_core::kgraph::{extract_bfs_subgraph, parse_graph, symmetrize, KnowledgeGraph};
use zsl_core::synth::{generate_world, WorldConfig};
use zsl_core::train::TrainConfig;
use zsl_core::zeroshot::{classifier_neighbor_distances, ClassifierMatrix, Setting};
use zsl_core::Result;

/// Knobs exposed on the page; anything omitted keeps the library default.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default)]
pub struct DemoConfig {
    pub classes: usize,
    pub unseen_fraction: f64,
    pub embed_noise: f64,
    pub extra_edges: usize,
    pub world_seed: u64,
    pub train_seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub layers: usize,
    pub width_divisor: usize,
    pub max_hops: usize,
    pub ks: Vec<usize>,
}

impl Default for DemoConfig {
    fn default() -> Self {
        let world = WorldConfig::default();
        let train = TrainConfig::default();
        Self {
            classes: world.num_classes,
            unseen_fraction: world.unseen_fraction,
            embed_noise: world.embed_noise,
            extra_edges: world.extra_edges,
            world_seed: world.seed,
            train_seed: train.seed,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            layers: 6,
            width_divisor: 16,
            max_hops: 3,
            ks: vec![1, 2, 5],
        }
    }
}

impl DemoConfig {
    fn world(&self) -> WorldConfig {
        WorldConfig {
            num_classes: self.classes,
            unseen_fraction: self.unseen_fraction,
            embed_noise: self.embed_noise,
            extra_edges: self.extra_edges,
            seed: self.world_seed,
            ..WorldConfig::default()
        }
    }

    fn train(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            ..TrainConfig::default()
        }
    }

    fn hidden(&self) -> Result<Vec<usize>> {
        let divisor = self.width_divisor.max(1);
        Ok(depth_hidden(self.layers)?.iter().map(|w| (w / divisor).max(1)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphView {
    pub names: Vec<String>,
    pub seen: Vec<bool>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassDistanceView {
    pub class: String,
    /// `None` when no training class is within the hop limit.
    pub distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub loss: Vec<f64>,
    pub ks: Vec<usize>,
    pub gcn: Vec<f64>,
    pub conse: Vec<f64>,
    pub chance_at_1: f64,
    pub distances: Vec<ClassDistanceView>,
    pub graph: GraphView,
}

fn edge_pairs(g: &KnowledgeGraph) -> Vec<(usize, usize)> {
    symmetrize(g).edges().iter().map(|e| (e.u.min(e.v), e.u.max(e.v))).collect()
}

/// Generates a world, trains a GCN, and reports its loss curve, hit@k next to ConSE,
/// and the distance from each unseen prediction to nearby training classifiers.
pub fn run_experiment(cfg: &DemoConfig) -> Result<ExperimentResult> {
    let world = generate_world(&cfg.world())?;
    let task = EvalTask::from(&world);
    let (run, gcn) = evaluate_gcn(&task, GraphVariant::Original, &cfg.hidden()?, &cfg.train(cfg.train_seed), &cfg.ks)?;
    let conse = evaluate_conse(&task, CONSE_T.min(task.mask.num_seen()), CONSE_TEMPERATURE, Setting::UnseenOnly, &cfg.ks)?;
    let predicted = ClassifierMatrix::from_nodes(&run.predicted, &task.mask.unseen(), true)?;
    let training = ClassifierMatrix::from_nodes(&task.gt_classifiers, &task.mask.seen(), true)?;
    let names = task.graph.node_names();
    let distances = classifier_neighbor_distances(&predicted, &training, &task.graph, cfg.max_hops)?
        .into_iter()
        .map(|d| ClassDistanceView {
            class: names[d.class].clone(),
            distance: d.distance.is_finite().then_some(d.distance),
        })
        .collect();
    Ok(ExperimentResult {
        loss: run.outcome.losses(),
        ks: cfg.ks.clone(),
        gcn: gcn.hits,
        conse: conse.hits,
        chance_at_1: task.chance_at_1(),
        distances,
        graph: GraphView {
            names: names.to_vec(),
            seen: task.mask.flags().to_vec(),
            edges: edge_pairs(&task.graph),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubgraphResult {
    pub names: Vec<String>,
    pub seeds: Vec<bool>,
    pub edges: Vec<(usize, usize)>,
    pub kept_nodes: Vec<bool>,
    pub kept_edges: Vec<bool>,
    /// Hops to the nearest seed; `None` when unreachable.
    pub seed_distance: Vec<Option<usize>>,
}

/// Parses node/edge TSV text and marks what BFS extraction keeps.
pub fn bfs_subgraph(nodes_tsv: &str, edges_tsv: &str, max_hops: usize) -> Result<SubgraphResult> {
    let g = parse_graph(nodes_tsv, "nodes.tsv", edges_tsv, "edges.tsv", 0.0)?;
    let sub = extract_bfs_subgraph(&g, max_hops)?;
    let mut kept_nodes = vec![false; g.num_nodes()];
    sub.id_map.iter().for_each(|&i| kept_nodes[i] = true);
    let kept: BTreeSet<(usize, usize)> = sub
        .graph
        .edges()
        .iter()
        .map(|e| {
            let (a, b) = (sub.id_map[e.u], sub.id_map[e.v]);
            (a.min(b), a.max(b))
        })
        .collect();
    let edges = edge_pairs(&g);
    let kept_edges = edges.iter().map(|p| kept.contains(p)).collect();
    let seed_distance = g
        .bfs_distances(&g.seeds())
        .into_iter()
        .map(|d| (d != usize::MAX).then_some(d))
        .collect();
    Ok(SubgraphResult {
        names: g.node_names().to_vec(),
        seeds: g.seed_flags().to_vec(),
        edges,
        kept_nodes,
        kept_edges,
        seed_distance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub fraction: f64,
    pub hits: Vec<f64>,
}

/// GCN hit@k after dropping each fraction of edges (drop seed = training seed).
pub fn edge_drop_sweep(cfg: &DemoConfig, fractions: &[f64]) -> Result<Vec<SweepRow>> {
    let task = EvalTask::from(&generate_world(&cfg.world())?);
    let hidden = cfg.hidden()?;
    let train = cfg.train(cfg.train_seed);
    fractions
        .iter()
        .map(|&fraction| {
            let variant = if fraction == 0.0 {
                GraphVariant::Original
            } else {
                GraphVariant::DropEdges {
                    fraction,
                    seed: cfg.train_seed,
                }
            };
            let (_, report) = evaluate_gcn(&task, variant, &hidden, &train, &cfg.ks)?;
            Ok(SweepRow {
                fraction,
                hits: report.hits,
            })
        })
        .collect()
}

fn parse_config(json: &str) -> std::result::Result<DemoConfig, JsError> {
    if json.trim().is_empty() {
        return Ok(DemoConfig::default());
    }
    serde_json::from_str(json).map_err(|e| JsError::new(&format!("bad config: {e}")))
}

fn to_json<T: Serialize>(v: &T) -> std::result::Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

fn js(e: zsl_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = defaultConfig)]
pub fn default_config_js() -> String {
    serde_json::to_string(&DemoConfig::default()).unwrap_or_default()
}

#[wasm_bindgen(js_name = runExperiment)]
pub fn run_experiment_js(config_json: &str) -> std::result::Result<String, JsError> {
    to_json(&run_experiment(&parse_config(config_json)?).map_err(js)?)
}

#[wasm_bindgen(js_name = bfsSubgraph)]
pub fn bfs_subgraph_js(nodes_tsv: &str, edges_tsv: &str, max_hops: usize) -> std::result::Result<String, JsError> {
    to_json(&bfs_subgraph(nodes_tsv, edges_tsv, max_hops).map_err(js)?)
}

#[wasm_bindgen(js_name = edgeDropSweep)]
pub fn edge_drop_sweep_js(config_json: &str, fractions: Vec<f64>) -> std::result::Result<String, JsError> {
    to_json(&edge_drop_sweep(&parse_config(config_json)?, &fractions).map_err(js)?)
}
