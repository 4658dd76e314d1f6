//! Word-vector tables (GloVe text format) and the per-node input matrix.
//!
//! A class name is split on whitespace, `_` and `-`, lowercased, and its embedding is
//! the mean of the vectors of the tokens found in the table.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kgraph::KnowledgeGraph;
use crate::linalg::DenseMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    /// Inserts in order; later duplicates (after lowercasing) are ignored.
    pub fn from_entries<I>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut vectors = HashMap::new();
        for (token, v) in entries {
            if v.len() != dim {
                return Err(Error::invalid(format!("vector for `{token}` has length {}, expected {dim}", v.len())));
            }
            let token = token.to_lowercase();
            if token.is_empty() {
                return Err(Error::invalid("empty token"));
            }
            vectors.entry(token).or_insert(v);
        }
        Ok(Self { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }
}

/// Parses `token v1 … vk` lines; `k` is fixed by the first non-empty line.
pub fn parse_embeddings(text: &str, origin: &str) -> Result<EmbeddingTable> {
    let mut dim = None;
    let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else { continue };
        let values = parts
            .map(|p| p.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::Parse {
                path: origin.to_string(),
                line: lineno,
                msg: "non-numeric vector component".into(),
            })?;
        let expected = *dim.get_or_insert(values.len());
        if values.len() != expected || expected == 0 {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: lineno,
                msg: format!("vector has {} components, expected {expected}", values.len()),
            });
        }
        vectors.entry(token.to_lowercase()).or_insert(values);
    }
    Ok(EmbeddingTable {
        dim: dim.unwrap_or(0),
        vectors,
    })
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text, &path.display().to_string())
}

/// GloVe-style text, one `token v1 … vk` line per entry, in the given order.
pub fn format_embeddings<'a>(entries: impl IntoIterator<Item = (&'a str, &'a [f64])>) -> String {
    let mut out = String::new();
    for (token, v) in entries {
        out.push_str(token);
        for x in v {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
    }
    out
}

pub fn tokenize(name: &str) -> Vec<String> {
    name.split(|c: char| c.is_whitespace() || c == '_' || c == '-')
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassEmbedding {
    pub vector: Vec<f64>,
    /// Fraction of the name's tokens found in the table.
    pub coverage: f64,
}

/// Mean of the found tokens' vectors; `None` when no token is found.
pub fn class_embedding(name: &str, table: &EmbeddingTable) -> Option<ClassEmbedding> {
    let tokens = tokenize(name);
    let mut sum = vec![0.0; table.dim];
    let mut found = 0usize;
    for t in &tokens {
        if let Some(v) = table.get(t) {
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            found += 1;
        }
    }
    if found == 0 {
        return None;
    }
    sum.iter_mut().for_each(|s| *s /= found as f64);
    Some(ClassEmbedding {
        vector: sum,
        coverage: found as f64 / tokens.len() as f64,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MissingPolicy {
    /// Abort if any node has a token that is not in the table.
    Fail,
    /// Zero rows for nodes with no token found; partially found names still average.
    Zero,
    /// Average whatever was found; zero row if nothing was.
    #[default]
    PartialAverage,
}

impl std::str::FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fail" => Ok(Self::Fail),
            "zero" => Ok(Self::Zero),
            "partial-average" => Ok(Self::PartialAverage),
            other => Err(Error::invalid(format!("unknown missing policy `{other}`"))),
        }
    }
}

/// The `n×k` input matrix aligned to graph node order.
#[derive(Clone, Debug, PartialEq)]
pub struct InputMatrix {
    pub matrix: DenseMatrix,
    pub coverage: Vec<f64>,
}

/// Sidecar metadata written next to a serialized input matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputSidecar {
    pub node_order: Vec<String>,
    pub dim: usize,
}

pub fn assemble_input_matrix(
    g: &KnowledgeGraph,
    table: &EmbeddingTable,
    policy: MissingPolicy,
) -> Result<InputMatrix> {
    let n = g.num_nodes();
    let k = table.dim();
    let mut matrix = DenseMatrix::zeros(n, k);
    let mut coverage = vec![0.0; n];
    let mut incomplete = Vec::new();
    for (i, name) in g.node_names().iter().enumerate() {
        match class_embedding(name, table) {
            Some(ce) => {
                if ce.coverage < 1.0 {
                    incomplete.push(name.clone());
                }
                matrix.row_mut(i).copy_from_slice(&ce.vector);
                coverage[i] = ce.coverage;
            }
            None => incomplete.push(name.clone()),
        }
    }
    if policy == MissingPolicy::Fail && !incomplete.is_empty() {
        return Err(Error::MissingEmbeddings(incomplete));
    }
    Ok(InputMatrix { matrix, coverage })
}
