//! Losses, Adam with L2-coupled weight decay, and the full-batch training loop.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn::{self, backward, forward, GcnModel, OptimizerFiles};
use crate::kgraph::NormalizedAdjacency;
use crate::linalg::{norm, DenseMatrix};
use crate::matio::{self, Dtype};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    #[default]
    Regression,
    Softmax,
}

impl std::str::FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Self::Regression),
            "softmax" => Ok(Self::Softmax),
            other => Err(Error::invalid(format!("unknown loss mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub loss_mode: LossMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            weight_decay: 0.0005,
            epochs: 300,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            loss_mode: LossMode::Regression,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.weight_decay >= 0.0 && self.eps > 0.0) {
            return Err(Error::invalid("learning rate, weight decay and eps must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("Adam betas must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Which nodes carry supervision. `1 <= m < n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeenMask {
    flags: Vec<bool>,
    count: usize,
}

impl SeenMask {
    pub fn new(flags: Vec<bool>) -> Result<Self> {
        let count = flags.iter().filter(|&&f| f).count();
        if count == 0 || count == flags.len() {
            return Err(Error::invalid(format!(
                "seen mask must have between 1 and n-1 seen nodes (got {count} of {})",
                flags.len()
            )));
        }
        Ok(Self { flags, count })
    }

    pub fn from_indices(n: usize, seen: &[usize]) -> Result<Self> {
        let mut flags = vec![false; n];
        for &i in seen {
            if i >= n {
                return Err(Error::invalid(format!("seen index {i} out of range")));
            }
            flags[i] = true;
        }
        Self::new(flags)
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn num_seen(&self) -> usize {
        self.count
    }

    pub fn is_seen(&self, i: usize) -> bool {
        self.flags[i]
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn seen(&self) -> Vec<usize> {
        (0..self.flags.len()).filter(|&i| self.flags[i]).collect()
    }

    pub fn unseen(&self) -> Vec<usize> {
        (0..self.flags.len()).filter(|&i| !self.flags[i]).collect()
    }
}

/// `(1/m) Σ_seen (1/D)‖ŵ_i − w_i‖²` and its gradient (zero on unseen rows).
pub fn masked_mse_loss(pred: &DenseMatrix, target: &DenseMatrix, mask: &SeenMask) -> Result<(f64, DenseMatrix)> {
    if pred.shape() != target.shape() || pred.rows() != mask.len() {
        return Err(Error::shape(
            "masked_mse_loss",
            format!("pred {:?}, target {:?}, mask {}", pred.shape(), target.shape(), mask.len()),
        ));
    }
    let m = mask.num_seen() as f64;
    let d = pred.cols() as f64;
    let mut loss = 0.0;
    let mut grad = DenseMatrix::zeros(pred.rows(), pred.cols());
    for i in mask.seen() {
        let g = grad.row_mut(i);
        for ((gv, &p), &t) in g.iter_mut().zip(pred.row(i)).zip(target.row(i)) {
            let diff = p - t;
            loss += diff * diff;
            *gv = 2.0 * diff / (m * d);
        }
    }
    Ok((loss / (m * d), grad))
}

/// Mean cross-entropy over seen rows; gradient `(softmax − onehot)/m` on seen rows.
pub fn masked_softmax_loss(logits: &DenseMatrix, labels: &[usize], mask: &SeenMask) -> Result<(f64, DenseMatrix)> {
    if logits.rows() != labels.len() || logits.rows() != mask.len() {
        return Err(Error::shape("masked_softmax_loss", "logits, labels and mask disagree on n"));
    }
    let classes = logits.cols();
    let m = mask.num_seen() as f64;
    let mut loss = 0.0;
    let mut grad = DenseMatrix::zeros(logits.rows(), classes);
    for i in mask.seen() {
        let label = labels[i];
        if label >= classes {
            return Err(Error::invalid(format!("label {label} out of range for {classes} classes")));
        }
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&z| (z - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - row[label];
        for (c, g) in grad.row_mut(i).iter_mut().enumerate() {
            let p = (row[c] - log_z).exp();
            *g = (p - if c == label { 1.0 } else { 0.0 }) / m;
        }
    }
    Ok((loss / m, grad))
}

/// First/second moment accumulators mirroring the model weights.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first: Vec<DenseMatrix>,
    pub second: Vec<DenseMatrix>,
    pub step: u64,
}

impl AdamState {
    pub fn new(weights: &[DenseMatrix]) -> Self {
        let zeros: Vec<DenseMatrix> = weights.iter().map(|w| DenseMatrix::zeros(w.rows(), w.cols())).collect();
        Self {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }
}

/// One Adam update with bias correction. Weight decay is folded into the gradient
/// (`g ← g + λw`) before the moment updates.
pub fn adam_step(weights: &mut [DenseMatrix], grads: &[DenseMatrix], state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    if weights.len() != grads.len() || weights.len() != state.first.len() {
        return Err(Error::shape("adam_step", "parameter, gradient and state counts differ"));
    }
    for (w, g) in weights.iter().zip(grads) {
        if w.shape() != g.shape() {
            return Err(Error::shape("adam_step", format!("{:?} vs {:?}", w.shape(), g.shape())));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (l, (w, g)) in weights.iter_mut().zip(grads).enumerate() {
        let m = state.first[l].data_mut();
        let v = state.second[l].data_mut();
        for (((wv, &gv), mv), vv) in w.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
            let grad = gv + cfg.weight_decay * *wv;
            *mv = cfg.beta1 * *mv + (1.0 - cfg.beta1) * grad;
            *vv = cfg.beta2 * *vv + (1.0 - cfg.beta2) * grad * grad;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *wv -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Supervision for [`fit`].
#[derive(Clone, Copy, Debug)]
pub enum Target<'a> {
    /// Row-normalized ground-truth classifiers (`n×D`); only seen rows are read.
    Regression { classifiers: &'a DenseMatrix, mask: &'a SeenMask },
    /// Class index per node; only seen rows are read.
    Softmax { labels: &'a [usize], mask: &'a SeenMask },
}

impl Target<'_> {
    fn loss(&self, pred: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
        match *self {
            Target::Regression { classifiers, mask } => masked_mse_loss(pred, classifiers, mask),
            Target::Softmax { labels, mask } => masked_softmax_loss(pred, labels, mask),
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        match *self {
            Target::Regression { classifiers, mask } => {
                if classifiers.rows() != n || mask.len() != n {
                    return Err(Error::shape("fit", "targets or mask do not cover every node"));
                }
                for i in mask.seen() {
                    if (norm(classifiers.row(i)) - 1.0).abs() > 1e-6 {
                        return Err(Error::invalid(format!(
                            "ground-truth classifier row {i} is not L2-normalized"
                        )));
                    }
                }
            }
            Target::Softmax { labels, mask } => {
                if labels.len() != n || mask.len() != n {
                    return Err(Error::shape("fit", "labels or mask do not cover every node"));
                }
            }
        }
        Ok(())
    }
}

/// Model, optimizer and epoch counter: everything needed to continue a run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub model: GcnModel,
    pub adam: AdamState,
    pub epoch: usize,
}

impl TrainState {
    pub fn new(model: GcnModel) -> Self {
        let adam = AdamState::new(model.weights());
        Self { model, adam, epoch: 0 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct FitOptions {
    /// Checkpoints go to `<dir>/epoch_NNNN` every `checkpoint_every` epochs and to `<dir>/final`.
    pub checkpoint_dir: Option<PathBuf>,
    pub checkpoint_every: usize,
}

impl FitOptions {
    pub fn with_checkpoints(dir: impl Into<PathBuf>) -> Self {
        Self {
            checkpoint_dir: Some(dir.into()),
            checkpoint_every: 50,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub state: TrainState,
    /// `(epoch, loss)`, epochs counted from 1; loss measured before that epoch's update.
    pub loss_history: Vec<(usize, f64)>,
}

impl FitOutcome {
    pub fn model(&self) -> &GcnModel {
        &self.state.model
    }

    pub fn losses(&self) -> Vec<f64> {
        self.loss_history.iter().map(|&(_, l)| l).collect()
    }
}

pub fn fit(
    model: GcnModel,
    adj: &NormalizedAdjacency,
    x: &DenseMatrix,
    target: Target<'_>,
    cfg: &TrainConfig,
    opts: &FitOptions,
) -> Result<FitOutcome> {
    fit_from(TrainState::new(model), adj, x, target, cfg, opts)
}

/// Runs epochs `state.epoch + 1 ..= cfg.epochs`.
pub fn fit_from(
    mut state: TrainState,
    adj: &NormalizedAdjacency,
    x: &DenseMatrix,
    target: Target<'_>,
    cfg: &TrainConfig,
    opts: &FitOptions,
) -> Result<FitOutcome> {
    cfg.validate()?;
    target.check(x.rows())?;
    let mut history = Vec::with_capacity(cfg.epochs.saturating_sub(state.epoch));
    while state.epoch < cfg.epochs {
        let epoch = state.epoch + 1;
        let (pred, cache) = forward(&state.model, adj, x)?;
        let (loss, upstream) = target.loss(&pred)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                layer_norms: state.model.weight_norms(),
            });
        }
        history.push((epoch, loss));
        let grads = backward(&state.model, adj, &cache, &upstream)?;
        adam_step(state.model.weights_mut(), &grads, &mut state.adam, cfg)?;
        state.epoch = epoch;
        if let Some(dir) = &opts.checkpoint_dir {
            if opts.checkpoint_every > 0 && epoch % opts.checkpoint_every == 0 {
                save_train_state(&dir.join(format!("epoch_{epoch:04}")), &state, cfg.seed)?;
            }
        }
    }
    if let Some(dir) = &opts.checkpoint_dir {
        save_train_state(&dir.join("final"), &state, cfg.seed)?;
    }
    Ok(FitOutcome {
        state,
        loss_history: history,
    })
}

/// Checkpoint including Adam moments.
pub fn save_train_state(dir: &Path, state: &TrainState, seed: u64) -> Result<()> {
    let mut manifest = gcn::save_checkpoint(dir, &state.model, seed, state.epoch)?;
    let mut files = OptimizerFiles {
        step: state.adam.step,
        first_moments: Vec::new(),
        second_moments: Vec::new(),
    };
    for (l, (m, v)) in state.adam.first.iter().zip(&state.adam.second).enumerate() {
        let (mf, vf) = (format!("adam_m_{l}.zslm"), format!("adam_v_{l}.zslm"));
        matio::write_matrix(&dir.join(&mf), m, Dtype::F64)?;
        matio::write_matrix(&dir.join(&vf), v, Dtype::F64)?;
        files.first_moments.push(mf);
        files.second_moments.push(vf);
    }
    manifest.optimizer = Some(files);
    matio::write_json(&dir.join(gcn::MANIFEST_NAME), &manifest)
}

/// Loads a checkpoint; a checkpoint without optimizer files resumes with fresh moments.
pub fn load_train_state(path: &Path) -> Result<(TrainState, u64)> {
    let (model, manifest) = gcn::load_checkpoint(path)?;
    let (dir, _) = gcn::checkpoint_paths(path);
    let adam = match &manifest.optimizer {
        Some(files) => {
            let read = |names: &[String]| names.iter().map(|n| matio::read_matrix(&dir.join(n))).collect::<Result<Vec<_>>>();
            AdamState {
                first: read(&files.first_moments)?,
                second: read(&files.second_moments)?,
                step: files.step,
            }
        }
        None => AdamState::new(model.weights()),
    };
    Ok((
        TrainState {
            model,
            adam,
            epoch: manifest.epoch,
        },
        manifest.seed,
    ))
}

pub fn loss_history_csv(history: &[(usize, f64)]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (e, l) in history {
        let _ = writeln!(out, "{e},{l}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(flags: &[bool]) -> SeenMask {
        SeenMask::new(flags.to_vec()).unwrap()
    }

    #[test]
    fn mask_bounds() {
        assert!(SeenMask::new(vec![false, false]).is_err());
        assert!(SeenMask::new(vec![true, true]).is_err());
        let m = SeenMask::from_indices(4, &[0, 2]).unwrap();
        assert_eq!((m.seen(), m.unseen(), m.num_seen()), (vec![0, 2], vec![1, 3], 2));
    }

    #[test]
    fn mse_cases() {
        let pred = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![5.0, 5.0]]).unwrap();
        let target = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let (loss, grad) = masked_mse_loss(&pred, &target, &mask(&[true, false])).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(grad.data(), &[1.0, -1.0, 0.0, 0.0]);

        let (loss, grad) = masked_mse_loss(&pred, &pred, &mask(&[true, false])).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&v| v == 0.0));

        let other = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![-9.0, 2.0]]).unwrap();
        assert_eq!(masked_mse_loss(&pred, &other, &mask(&[true, false])).unwrap().0, 1.0);
        assert!(masked_mse_loss(&pred, &DenseMatrix::zeros(2, 3), &mask(&[true, false])).is_err());
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let pred = DenseMatrix::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
        let target = DenseMatrix::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
        let mk = mask(&[true, false, true, true]);
        let (_, grad) = masked_mse_loss(&pred, &target, &mk).unwrap();
        let h = 1e-5;
        for idx in 0..12 {
            let mut p = pred.clone();
            p.data_mut()[idx] += h;
            let up = masked_mse_loss(&p, &target, &mk).unwrap().0;
            p.data_mut()[idx] -= 2.0 * h;
            let down = masked_mse_loss(&p, &target, &mk).unwrap().0;
            let fd = (up - down) / (2.0 * h);
            let a = grad.data()[idx];
            assert!((fd - a).abs() <= 1e-6 * a.abs().max(1e-3), "{idx}: {fd} vs {a}");
        }
    }

    #[test]
    fn softmax_cases() {
        let c = 4;
        let logits = DenseMatrix::zeros(2, c);
        let (loss, _) = masked_softmax_loss(&logits, &[1, 0], &mask(&[true, false])).unwrap();
        assert!((loss - (c as f64).ln()).abs() < 1e-15);

        let big = DenseMatrix::from_rows(&[vec![0.0, 1000.0], vec![0.0, 0.0]]).unwrap();
        let (loss, _) = masked_softmax_loss(&big, &[1, 0], &mask(&[true, false])).unwrap();
        assert!(loss < 1e-12);

        // rows: [1,2] label 1, [0.5,-0.5] label 0, [3,0] unseen
        let l = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.5, -0.5], vec![3.0, 0.0]]).unwrap();
        let (loss, grad) = masked_softmax_loss(&l, &[1, 0, 0], &mask(&[true, true, false])).unwrap();
        let ce0 = (1.0f64.exp() + 2.0f64.exp()).ln() - 2.0;
        let ce1 = (0.5f64.exp() + (-0.5f64).exp()).ln() - 0.5;
        assert!((loss - (ce0 + ce1) / 2.0).abs() < 1e-12);
        let p01 = 2.0f64.exp() / (1.0f64.exp() + 2.0f64.exp());
        assert!((grad.get(0, 1) - (p01 - 1.0) / 2.0).abs() < 1e-12);
        assert_eq!(grad.row(2), &[0.0, 0.0]);

        assert!(masked_softmax_loss(&l, &[2, 0, 0], &mask(&[true, true, false])).is_err());
    }

    /// Independent scalar Adam trace.
    fn scalar_adam(mut w: f64, grads: &[f64], lr: f64, wd: f64) -> f64 {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut m, mut v) = (0.0, 0.0);
        for (t, &g0) in grads.iter().enumerate() {
            let t = (t + 1) as i32;
            let g = g0 + wd * w;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            w -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
        }
        w
    }

    #[test]
    fn adam_cases() {
        let cfg = TrainConfig {
            weight_decay: 0.0,
            ..TrainConfig::default()
        };
        let mut w = vec![DenseMatrix::from_rows(&[vec![1.0, -2.0]]).unwrap()];
        let before = w.clone();
        let mut st = AdamState::new(&w);
        adam_step(&mut w, &[DenseMatrix::zeros(1, 2)], &mut st, &cfg).unwrap();
        assert_eq!(w, before);

        let mut w = vec![DenseMatrix::from_rows(&[vec![1.0]]).unwrap()];
        let mut st = AdamState::new(&w);
        adam_step(&mut w, &[DenseMatrix::from_rows(&[vec![1.0]]).unwrap()], &mut st, &cfg).unwrap();
        assert_eq!(w[0].get(0, 0), scalar_adam(1.0, &[1.0], 0.001, 0.0));
        assert!((w[0].get(0, 0) - 0.999).abs() < 1e-10);

        let grads = [0.3, -1.2, 0.7, 0.05, 2.0];
        let cfg = TrainConfig::default();
        let mut w = vec![DenseMatrix::from_rows(&[vec![0.4]]).unwrap()];
        let mut st = AdamState::new(&w);
        for &g in &grads {
            adam_step(&mut w, &[DenseMatrix::from_rows(&[vec![g]]).unwrap()], &mut st, &cfg).unwrap();
        }
        assert_eq!(w[0].get(0, 0), scalar_adam(0.4, &grads, 0.001, 0.0005));
    }

    #[test]
    fn adam_rejects_mismatched_shapes() {
        let mut w = vec![DenseMatrix::zeros(2, 2)];
        let mut st = AdamState::new(&w);
        assert!(adam_step(&mut w, &[DenseMatrix::zeros(1, 2)], &mut st, &TrainConfig::default()).is_err());
    }

    #[test]
    fn csv_format() {
        assert_eq!(loss_history_csv(&[(1, 0.5), (2, 0.25)]), "epoch,loss\n1,0.5\n2,0.25\n");
    }
}
