use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use zsl_core::embed::{assemble_input_matrix, load_embeddings, MissingPolicy};
use zsl_core::kgraph::{build_graph, KnowledgeGraph};
use zsl_core::linalg::DenseMatrix;
use zsl_core::matio::{read_json, read_matrix};
use zsl_core::synth::FeatureSidecar;
use zsl_core::train::SeenMask;
use zsl_core::{Error, Result};

use crate::args::GraphInputs;

/// Graph, inputs and split assembled from the shared input flags.
pub struct LoadedGraph {
    pub graph: KnowledgeGraph,
    pub inputs: DenseMatrix,
    pub mask: SeenMask,
    /// Seen ids in the order of the seen-list file.
    pub seen_order: Vec<usize>,
    pub input_files: Vec<PathBuf>,
}

pub fn graph_files(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join("nodes.tsv"), dir.join("edges.tsv"))
}

pub fn load_graph_inputs(args: &GraphInputs) -> Result<LoadedGraph> {
    let (nodes, edges) = graph_files(&args.graph_dir);
    let graph = build_graph(&nodes, &edges, args.min_confidence)?;
    let table = load_embeddings(&args.embeddings)?;
    let policy: MissingPolicy = args.missing_policy.parse()?;
    let input = assemble_input_matrix(&graph, &table, policy)?;
    let partial: Vec<&str> = input
        .coverage
        .iter()
        .zip(graph.node_names())
        .filter(|(&c, _)| c < 1.0)
        .map(|(_, n)| n.as_str())
        .collect();
    if !partial.is_empty() {
        eprintln!(
            "warning: {} of {} class names are not fully covered by the embeddings (first: {})",
            partial.len(),
            graph.num_nodes(),
            partial[0]
        );
    }
    let seen_order = read_name_list(&args.seen_list, &graph)?;
    let mask = SeenMask::from_indices(graph.num_nodes(), &seen_order)?;
    Ok(LoadedGraph {
        graph,
        inputs: input.matrix,
        mask,
        seen_order,
        input_files: vec![nodes, edges, args.embeddings.clone(), args.seen_list.clone()],
    })
}

/// Node ids for a newline-separated list of node names; blank lines and `#` comments are skipped.
pub fn read_name_list(path: &Path, graph: &KnowledgeGraph) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut ids = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let name = line.trim();
        if name.is_empty() || name.starts_with('#') {
            continue;
        }
        let id = graph.node_id(name).ok_or_else(|| Error::UnknownReference {
            path: path.display().to_string(),
            line: i + 1,
            reference: name.to_string(),
        })?;
        if ids.contains(&id) {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                msg: format!("duplicate class `{name}`"),
            });
        }
        ids.push(id);
    }
    Ok(ids)
}

/// `<dir>/<stem>.json` next to a matrix file.
pub fn sidecar_path(matrix: &Path) -> PathBuf {
    matrix.with_extension("json")
}

#[derive(Deserialize)]
struct NodeOrder {
    node_order: Vec<String>,
}

/// Per-node matrix aligned to graph order. Rows are matched by the sidecar's
/// `node_order`; without a sidecar the file must have one row per node.
/// Returns the matrix and which nodes had a row.
pub fn read_node_matrix(path: &Path, graph: &KnowledgeGraph) -> Result<(DenseMatrix, Vec<bool>)> {
    let m = read_matrix(path)?;
    let side = sidecar_path(path);
    let n = graph.num_nodes();
    if !side.exists() {
        if m.rows() != n {
            return Err(Error::Format {
                path: path.to_path_buf(),
                msg: format!("{} rows for {n} graph nodes and no sidecar", m.rows()),
            });
        }
        return Ok((m, vec![true; n]));
    }
    let order: NodeOrder = read_json(&side)?;
    if order.node_order.len() != m.rows() {
        return Err(Error::Format {
            path: side,
            msg: format!("node_order has {} names for {} rows", order.node_order.len(), m.rows()),
        });
    }
    let mut out = DenseMatrix::zeros(n, m.cols());
    let mut present = vec![false; n];
    for (r, name) in order.node_order.iter().enumerate() {
        let id = graph.node_id(name).ok_or_else(|| Error::UnknownReference {
            path: side.display().to_string(),
            line: r + 1,
            reference: name.clone(),
        })?;
        out.row_mut(id).copy_from_slice(m.row(r));
        present[id] = true;
    }
    Ok((out, present))
}

/// Node matrix that must have a row for every seen class.
pub fn read_seen_matrix(path: &Path, graph: &KnowledgeGraph, mask: &SeenMask) -> Result<DenseMatrix> {
    let (m, present) = read_node_matrix(path, graph)?;
    if let Some(i) = mask.seen().into_iter().find(|&i| !present[i]) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!("no row for seen class `{}`", graph.node_names()[i]),
        });
    }
    Ok(m)
}

/// Image features and their class ids.
pub fn read_features(path: &Path, graph: &KnowledgeGraph) -> Result<(DenseMatrix, Vec<usize>)> {
    let m = read_matrix(path)?;
    let side = sidecar_path(path);
    let meta: FeatureSidecar = read_json(&side)?;
    if meta.labels.len() != m.rows() {
        return Err(Error::Format {
            path: side,
            msg: format!("{} labels for {} feature rows", meta.labels.len(), m.rows()),
        });
    }
    let labels = meta
        .labels
        .iter()
        .enumerate()
        .map(|(r, name)| {
            graph.node_id(name).ok_or_else(|| Error::UnknownReference {
                path: side.display().to_string(),
                line: r + 1,
                reference: name.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((m, labels))
}

/// Keeps the images whose class is a candidate in the chosen setting.
pub fn test_images(features: &DenseMatrix, labels: &[usize], candidates: &[usize]) -> (DenseMatrix, Vec<usize>) {
    let keep: Vec<usize> = (0..labels.len()).filter(|&r| candidates.contains(&labels[r])).collect();
    (features.select_rows(&keep), keep.iter().map(|&r| labels[r]).collect())
}

/// A matrix file plus its sidecar when one exists.
pub fn with_sidecar(path: &Path) -> Vec<PathBuf> {
    let side = sidecar_path(path);
    if side.exists() {
        vec![path.to_path_buf(), side]
    } else {
        vec![path.to_path_buf()]
    }
}
