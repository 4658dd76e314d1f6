//! Knowledge graphs: TSV ingestion, symmetrization, the renormalized adjacency
//! `D^{-1/2}(A+I)D^{-1/2}`, seed-anchored subgraph extraction, and the graph
//! perturbations used by the ablations (edge dropping, star and random graphs).

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::rng::{seeded, stream};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnowledgeGraph {
    node_names: Vec<String>,
    seed_flags: Vec<bool>,
    edges: Vec<Edge>,
}

impl KnowledgeGraph {
    /// Edges are stored as given (possibly directed or duplicated) until [`symmetrize`].
    pub fn new(node_names: Vec<String>, seed_flags: Vec<bool>, edges: Vec<Edge>) -> Result<Self> {
        if node_names.len() != seed_flags.len() {
            return Err(Error::invalid("node_names and seed_flags differ in length"));
        }
        let n = node_names.len();
        for e in &edges {
            if e.u >= n || e.v >= n {
                return Err(Error::invalid(format!("edge ({}, {}) references a node outside [0, {n})", e.u, e.v)));
            }
            if e.u == e.v {
                return Err(Error::invalid(format!("self-loop on node {}", e.u)));
            }
            if !(0.0..=1.0).contains(&e.confidence) {
                return Err(Error::invalid(format!("confidence {} outside [0, 1]", e.confidence)));
            }
        }
        Ok(Self {
            node_names,
            seed_flags,
            edges,
        })
    }

    /// Unweighted graph over `names`, all nodes flagged as seeds.
    pub fn from_pairs(names: Vec<String>, pairs: &[(usize, usize)]) -> Result<Self> {
        let n = names.len();
        let edges = pairs
            .iter()
            .map(|&(u, v)| Edge { u, v, confidence: 1.0 })
            .collect();
        Self::new(names, vec![true; n], edges)
    }

    pub fn num_nodes(&self) -> usize {
        self.node_names.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn seed_flags(&self) -> &[bool] {
        &self.seed_flags
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn seeds(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&i| self.seed_flags[i]).collect()
    }

    pub fn node_id(&self, name: &str) -> Option<usize> {
        self.node_names.iter().position(|n| n == name)
    }

    /// Same nodes, different edge set.
    pub fn with_edges(&self, edges: Vec<Edge>) -> Result<Self> {
        Self::new(self.node_names.clone(), self.seed_flags.clone(), edges)
    }

    pub fn with_seed_flags(mut self, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != self.num_nodes() {
            return Err(Error::invalid("seed flag count differs from node count"));
        }
        self.seed_flags = flags;
        Ok(self)
    }

    /// True when edges are canonical (`u < v`), sorted, and unique.
    pub fn is_symmetric(&self) -> bool {
        self.edges.iter().all(|e| e.u < e.v)
            && self.edges.windows(2).all(|w| (w[0].u, w[0].v) < (w[1].u, w[1].v))
    }

    /// Undirected neighbor lists, ascending and deduplicated.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes()];
        for e in &self.edges {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Hop distances from `sources` (multi-source BFS); `usize::MAX` when unreachable.
    pub fn bfs_distances(&self, sources: &[usize]) -> Vec<usize> {
        bfs(&self.neighbors(), sources)
    }

    pub fn to_nodes_tsv(&self) -> String {
        let mut out = String::new();
        for (i, name) in self.node_names.iter().enumerate() {
            let _ = writeln!(out, "{i}\t{name}\t{}", u8::from(self.seed_flags[i]));
        }
        out
    }

    pub fn to_edges_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let _ = writeln!(out, "{}\t{}\t{}", e.u, e.v, e.confidence);
        }
        out
    }
}

fn bfs(adj: &[Vec<usize>], sources: &[usize]) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::new();
    for &s in sources {
        if dist[s] != 0 {
            dist[s] = 0;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

fn canonical(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Merges unordered duplicates keeping the max confidence; output sorted by `(u, v)`, `u < v`.
fn merge_undirected(edges: impl IntoIterator<Item = Edge>) -> Vec<Edge> {
    let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in edges {
        let key = canonical(e.u, e.v);
        let c = merged.entry(key).or_insert(e.confidence);
        if e.confidence > *c {
            *c = e.confidence;
        }
    }
    merged
        .into_iter()
        .map(|((u, v), confidence)| Edge { u, v, confidence })
        .collect()
}

/// Replaces every directed edge by an undirected one. Idempotent.
pub fn symmetrize(g: &KnowledgeGraph) -> KnowledgeGraph {
    KnowledgeGraph {
        node_names: g.node_names.clone(),
        seed_flags: g.seed_flags.clone(),
        edges: merge_undirected(g.edges.iter().copied()),
    }
}

/// Parses node and edge TSV text. `*_origin` only labels errors.
pub fn parse_graph(
    node_text: &str,
    node_origin: &str,
    edge_text: &str,
    edge_origin: &str,
    min_confidence: f64,
) -> Result<KnowledgeGraph> {
    let parse_err = |path: &str, line: usize, msg: String| Error::Parse {
        path: path.to_string(),
        line,
        msg,
    };

    let mut names = Vec::new();
    let mut seeds = Vec::new();
    for (lineno, line) in node_text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(node_origin, lineno, format!("expected 3 tab-separated fields, got {}", fields.len())));
        }
        let id: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(node_origin, lineno, format!("bad node id `{}`", fields[0])))?;
        if id != names.len() {
            return Err(parse_err(node_origin, lineno, format!("node id {id} out of order, expected {}", names.len())));
        }
        let name = fields[1].trim();
        if name.is_empty() {
            return Err(parse_err(node_origin, lineno, "empty node name".into()));
        }
        let seed = match fields[2].trim() {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(node_origin, lineno, format!("is_seed must be 0 or 1, got `{other}`"))),
        };
        names.push(name.to_string());
        seeds.push(seed);
    }

    let by_name: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let n = names.len();
    let resolve = |field: &str, lineno: usize| -> Result<usize> {
        let field = field.trim();
        let found = match field.parse::<usize>() {
            Ok(id) => (id < n).then_some(id),
            Err(_) => by_name.get(field).copied(),
        };
        found.ok_or_else(|| Error::UnknownReference {
            path: edge_origin.to_string(),
            line: lineno,
            reference: field.to_string(),
        })
    };

    let mut edges = Vec::new();
    for (lineno, line) in edge_text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(parse_err(edge_origin, lineno, format!("expected 2 or 3 tab-separated fields, got {}", fields.len())));
        }
        let u = resolve(fields[0], lineno)?;
        let v = resolve(fields[1], lineno)?;
        if u == v {
            return Err(parse_err(edge_origin, lineno, format!("self-loop on node {u}")));
        }
        let confidence = match fields.get(2) {
            Some(c) => c
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|c| (0.0..=1.0).contains(c))
                .ok_or_else(|| parse_err(edge_origin, lineno, format!("bad confidence `{c}`")))?,
            None => 1.0,
        };
        if confidence < min_confidence {
            continue;
        }
        edges.push(Edge { u, v, confidence });
    }

    KnowledgeGraph::new(names, seeds, merge_undirected(edges))
}

/// Reads node and edge TSV files, drops edges below `min_confidence`, and merges
/// duplicate unordered pairs (max confidence wins).
pub fn build_graph(node_file: &Path, edge_file: &Path, min_confidence: f64) -> Result<KnowledgeGraph> {
    let nodes = fs::read_to_string(node_file).map_err(|e| Error::io(node_file, e))?;
    let edges = fs::read_to_string(edge_file).map_err(|e| Error::io(edge_file, e))?;
    parse_graph(
        &nodes,
        &node_file.display().to_string(),
        &edges,
        &edge_file.display().to_string(),
        min_confidence,
    )
}

/// `Â`: symmetric, entries in (0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: SparseMatrix,
}

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn size(&self) -> usize {
        self.matrix.rows()
    }

    /// Identity propagation (no neighbors); turns the GCN into a per-node MLP.
    pub fn identity(n: usize) -> Self {
        Self {
            matrix: SparseMatrix::identity(n),
        }
    }
}

/// `D^{-1/2}(A+I)D^{-1/2}` with binary `A` (edge confidences are ignored) and `D = diag(1 + degree)`.
pub fn normalize_adjacency(g: &KnowledgeGraph) -> NormalizedAdjacency {
    let adj = g.neighbors();
    let deg: Vec<f64> = adj.iter().map(|nb| (1 + nb.len()) as f64).collect();
    let n = adj.len();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    row_offsets.push(0);
    for (i, nb) in adj.iter().enumerate() {
        let mut cols = nb.clone();
        let pos = cols.binary_search(&i).unwrap_err();
        cols.insert(pos, i);
        for j in cols {
            col_indices.push(j);
            values.push(1.0 / (deg[i] * deg[j]).sqrt());
        }
        row_offsets.push(col_indices.len());
    }
    NormalizedAdjacency {
        matrix: SparseMatrix::new(n, n, row_offsets, col_indices, values).expect("well-formed CSR"),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Subgraph {
    pub graph: KnowledgeGraph,
    /// `id_map[new_id] = old_id`, ascending.
    pub id_map: Vec<usize>,
}

impl Subgraph {
    pub fn id_map_tsv(&self) -> String {
        let mut out = String::new();
        for (new, old) in self.id_map.iter().enumerate() {
            let _ = writeln!(out, "{old}\t{new}");
        }
        out
    }
}

/// Keeps every edge on some seed-to-seed walk of at most `max_hops` edges.
///
/// With `d(x)` the hop distance to the nearest seed, edge `(u, v)` is kept iff
/// `d(u) + 1 + d(v) <= max_hops`. Kept nodes are the seeds plus every endpoint of a
/// kept edge; they are renumbered densely in ascending original-id order.
pub fn extract_bfs_subgraph(g: &KnowledgeGraph, max_hops: usize) -> Result<Subgraph> {
    let seeds = g.seeds();
    if seeds.is_empty() {
        return Err(Error::invalid("subgraph extraction needs at least one seed node"));
    }
    if max_hops == 0 {
        return Err(Error::invalid("max_hops must be at least 1"));
    }
    let d = g.bfs_distances(&seeds);
    let sym = symmetrize(g);
    let kept: Vec<Edge> = sym
        .edges
        .iter()
        .filter(|e| {
            d[e.u] != usize::MAX && d[e.v] != usize::MAX && d[e.u] + 1 + d[e.v] <= max_hops
        })
        .copied()
        .collect();
    let mut keep = g.seed_flags.clone();
    for e in &kept {
        keep[e.u] = true;
        keep[e.v] = true;
    }
    let id_map: Vec<usize> = (0..g.num_nodes()).filter(|&i| keep[i]).collect();
    let mut new_id = vec![usize::MAX; g.num_nodes()];
    for (new, &old) in id_map.iter().enumerate() {
        new_id[old] = new;
    }
    let graph = KnowledgeGraph {
        node_names: id_map.iter().map(|&i| g.node_names[i].clone()).collect(),
        seed_flags: id_map.iter().map(|&i| g.seed_flags[i]).collect(),
        edges: kept
            .iter()
            .map(|e| Edge {
                u: new_id[e.u],
                v: new_id[e.v],
                confidence: e.confidence,
            })
            .collect(),
    };
    Ok(Subgraph { graph, id_map })
}

/// Removes `floor(fraction * |E|)` undirected edges chosen uniformly without replacement.
pub fn drop_edges(g: &KnowledgeGraph, fraction: f64, seed: u64) -> Result<KnowledgeGraph> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(format!("drop fraction {fraction} outside [0, 1]")));
    }
    let sym = symmetrize(g);
    let total = sym.edges.len();
    // tolerance guards products like 0.35 * 100 landing a hair under the integer
    let remove = ((fraction * total as f64) + 1e-9).floor() as usize;
    let remove = remove.min(total);
    let mut rng = seeded(seed, stream::DROP_EDGES);
    let mut drop = vec![false; total];
    for i in index::sample(&mut rng, total, remove) {
        drop[i] = true;
    }
    let edges = sym
        .edges
        .iter()
        .zip(&drop)
        .filter(|(_, &d)| !d)
        .map(|(e, _)| *e)
        .collect();
    Ok(KnowledgeGraph { edges, ..sym })
}

/// Node 0 is a non-seed root connected to every other node.
pub fn make_star_graph(n: usize) -> Result<KnowledgeGraph> {
    if n < 2 {
        return Err(Error::invalid("a star graph needs at least 2 nodes"));
    }
    let names = std::iter::once("root".to_string())
        .chain((1..n).map(|i| format!("node{i}")))
        .collect();
    let mut seeds = vec![true; n];
    seeds[0] = false;
    let edges = (1..n).map(|i| Edge { u: 0, v: i, confidence: 1.0 }).collect();
    KnowledgeGraph::new(names, seeds, edges)
}

/// `num_edges` distinct unordered pairs sampled uniformly.
pub fn make_random_graph(n: usize, num_edges: usize, seed: u64) -> Result<KnowledgeGraph> {
    let total = n * n.saturating_sub(1) / 2;
    if num_edges > total {
        return Err(Error::invalid(format!(
            "{num_edges} edges requested but only {total} node pairs exist"
        )));
    }
    let mut rng = seeded(seed, stream::RANDOM_GRAPH);
    let mut picks = index::sample(&mut rng, total, num_edges).into_vec();
    picks.sort_unstable();
    let edges = picks
        .into_iter()
        .map(|t| {
            let (u, v) = pair_from_index(n, t);
            Edge { u, v, confidence: 1.0 }
        })
        .collect();
    let names = (0..n).map(|i| format!("node{i}")).collect();
    KnowledgeGraph::new(names, vec![true; n], edges)
}

// Pairs (u, v), u < v, enumerated row by row: (0,1), (0,2), ..., (1,2), ...
fn pair_from_index(n: usize, mut t: usize) -> (usize, usize) {
    let mut u = 0;
    loop {
        let row = n - 1 - u;
        if t < row {
            return (u, u + 1 + t);
        }
        t -= row;
        u += 1;
    }
}
