//! The stacked graph-convolution network.
//!
//! Layer `l` computes `Z_l = LeakyReLU(Â Z_{l-1} W_l)`; the last layer is linear and its
//! rows are L2-normalized when `normalize_output` is set. [`backward`] is a hand-written
//! reverse pass over the cached intermediates.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kgraph::NormalizedAdjacency;
use crate::linalg::{
    leaky_relu, leaky_relu_grad, matmul, matmul_nt, matmul_tn, row_l2_normalize, row_l2_normalize_grad, spmm,
    DenseMatrix,
};
use crate::matio::{self, Dtype};
use crate::rng::{seeded, stream};

pub const DEFAULT_SLOPE: f64 = 0.2;
/// Output widths of the hidden layers in the reference architecture.
pub const DEFAULT_HIDDEN: [usize; 5] = [2048, 2048, 1024, 1024, 512];

/// `[k, 2048, 2048, 1024, 1024, 512, d]`.
pub fn default_layer_dims(input_dim: usize, output_dim: usize) -> Vec<usize> {
    std::iter::once(input_dim)
        .chain(DEFAULT_HIDDEN)
        .chain(std::iter::once(output_dim))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GcnModel {
    layer_dims: Vec<usize>,
    weights: Vec<DenseMatrix>,
    slope: f64,
    normalize_output: bool,
}

impl GcnModel {
    pub fn from_weights(weights: Vec<DenseMatrix>, slope: f64, normalize_output: bool) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("model needs at least one layer"));
        }
        if !(slope > 0.0 && slope < 1.0) {
            return Err(Error::invalid(format!("slope {slope} outside (0, 1)")));
        }
        let mut layer_dims = vec![weights[0].rows()];
        for w in &weights {
            if w.rows() != *layer_dims.last().unwrap() {
                return Err(Error::shape("from_weights", "consecutive weights do not chain"));
            }
            if !w.is_finite() {
                return Err(Error::invalid("non-finite weight"));
            }
            layer_dims.push(w.cols());
        }
        Ok(Self {
            layer_dims,
            weights,
            slope,
            normalize_output,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn weights(&self) -> &[DenseMatrix] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [DenseMatrix] {
        &mut self.weights
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn normalize_output(&self) -> bool {
        self.normalize_output
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn weight_norms(&self) -> Vec<f64> {
        self.weights.iter().map(DenseMatrix::frobenius_norm).collect()
    }
}

/// Glorot-uniform weights: `U[-a, a]`, `a = sqrt(6 / (fan_in + fan_out))`.
pub fn init_model(layer_dims: &[usize], slope: f64, normalize_output: bool, seed: u64) -> Result<GcnModel> {
    if layer_dims.len() < 2 || layer_dims.contains(&0) {
        return Err(Error::invalid(format!("invalid layer dims {layer_dims:?}")));
    }
    let mut rng = seeded(seed, stream::INIT);
    let weights = layer_dims
        .windows(2)
        .map(|w| {
            let a = (6.0 / (w[0] + w[1]) as f64).sqrt();
            DenseMatrix::from_fn(w[0], w[1], |_, _| rng.random_range(-a..=a))
        })
        .collect();
    GcnModel::from_weights(weights, slope, normalize_output)
}

/// Intermediates kept by [`forward`] for [`backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `Â Z_{l-1}` per layer.
    pub propagated: Vec<DenseMatrix>,
    /// `Â Z_{l-1} W_l` per layer (before the nonlinearity).
    pub pre_activations: Vec<DenseMatrix>,
    /// Final-layer output before row normalization.
    pub raw_output: DenseMatrix,
    layer_dims: Vec<usize>,
}

pub fn forward(model: &GcnModel, adj: &NormalizedAdjacency, x: &DenseMatrix) -> Result<(DenseMatrix, ForwardCache)> {
    if x.cols() != model.input_dim() {
        return Err(Error::shape(
            "forward",
            format!("input has {} columns, model expects {}", x.cols(), model.input_dim()),
        ));
    }
    if adj.size() != x.rows() {
        return Err(Error::shape(
            "forward",
            format!("adjacency is {0}x{0} but input has {1} rows", adj.size(), x.rows()),
        ));
    }
    let last = model.num_layers() - 1;
    let mut propagated = Vec::with_capacity(model.num_layers());
    let mut pre_activations = Vec::with_capacity(model.num_layers());
    let mut z = x.clone();
    for (l, w) in model.weights.iter().enumerate() {
        let p = spmm(adj.matrix(), &z)?;
        let h = matmul(&p, w)?;
        z = if l < last { leaky_relu(&h, model.slope) } else { h.clone() };
        propagated.push(p);
        pre_activations.push(h);
    }
    let out = if model.normalize_output { row_l2_normalize(&z) } else { z.clone() };
    Ok((
        out,
        ForwardCache {
            propagated,
            pre_activations,
            raw_output: z,
            layer_dims: model.layer_dims.clone(),
        },
    ))
}

/// Gradients of a scalar loss with respect to every `W_l`, given `upstream = dL/d(output)`.
pub fn backward(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    cache: &ForwardCache,
    upstream: &DenseMatrix,
) -> Result<Vec<DenseMatrix>> {
    if cache.layer_dims != model.layer_dims || cache.propagated.len() != model.num_layers() {
        return Err(Error::invalid("forward cache does not match this model"));
    }
    if upstream.shape() != cache.raw_output.shape() {
        return Err(Error::shape(
            "backward",
            format!("upstream {:?} vs output {:?}", upstream.shape(), cache.raw_output.shape()),
        ));
    }
    let mut delta = if model.normalize_output {
        row_l2_normalize_grad(&cache.raw_output, upstream)?
    } else {
        upstream.clone()
    };
    let last = model.num_layers() - 1;
    let mut grads = vec![DenseMatrix::zeros(0, 0); model.num_layers()];
    for l in (0..model.num_layers()).rev() {
        if l < last {
            delta = leaky_relu_grad(&cache.pre_activations[l], &delta, model.slope)?;
        }
        grads[l] = matmul_tn(&cache.propagated[l], &delta)?;
        if l > 0 {
            // Â is symmetric, so Âᵀ·(δ Wᵀ) = Â·(δ Wᵀ)
            delta = spmm(adj.matrix(), &matmul_nt(&delta, &model.weights[l])?)?;
        }
    }
    Ok(grads)
}

/// JSON manifest of a checkpoint directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub layer_dims: Vec<usize>,
    pub slope: f64,
    pub normalize_output: bool,
    pub seed: u64,
    pub epoch: usize,
    pub weights: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerFiles>,
}

/// Adam moment files, so training can resume exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerFiles {
    pub step: u64,
    pub first_moments: Vec<String>,
    pub second_moments: Vec<String>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Writes `manifest.json` plus one `ZSLM` (f64) file per weight into `dir`.
pub fn save_checkpoint(dir: &Path, model: &GcnModel, seed: u64, epoch: usize) -> Result<CheckpointManifest> {
    let mut weights = Vec::new();
    for (l, w) in model.weights.iter().enumerate() {
        let name = format!("weight_{l}.zslm");
        matio::write_matrix(&dir.join(&name), w, Dtype::F64)?;
        weights.push(name);
    }
    let manifest = CheckpointManifest {
        layer_dims: model.layer_dims.clone(),
        slope: model.slope,
        normalize_output: model.normalize_output,
        seed,
        epoch,
        weights,
        optimizer: None,
    };
    matio::write_json(&dir.join(MANIFEST_NAME), &manifest)?;
    Ok(manifest)
}

/// Accepts a checkpoint directory or the path of its `manifest.json`.
pub fn load_checkpoint(path: &Path) -> Result<(GcnModel, CheckpointManifest)> {
    let (dir, manifest_path) = checkpoint_paths(path);
    let manifest: CheckpointManifest = matio::read_json(&manifest_path)?;
    let weights = manifest
        .weights
        .iter()
        .map(|name| matio::read_matrix(&dir.join(name)))
        .collect::<Result<Vec<_>>>()?;
    let model = GcnModel::from_weights(weights, manifest.slope, manifest.normalize_output)?;
    if model.layer_dims != manifest.layer_dims {
        return Err(Error::Format {
            path: manifest_path,
            msg: "weight shapes disagree with layer_dims".into(),
        });
    }
    Ok((model, manifest))
}

pub(crate) fn checkpoint_paths(path: &Path) -> (PathBuf, PathBuf) {
    if path.is_dir() {
        (path.to_path_buf(), path.join(MANIFEST_NAME))
    } else {
        (path.parent().unwrap_or(Path::new(".")).to_path_buf(), path.to_path_buf())
    }
}
