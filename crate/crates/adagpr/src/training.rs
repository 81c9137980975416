//! Transductive training: masked cross-entropy over the labeled nodes, Adam
//! with three weight-decay groups, early stopping on validation loss, and a
//! best-snapshot contract — the reported test accuracy always comes from the
//! parameters with the lowest validation loss, not the final ones.
//!
//! Everything is driven by one seeded ChaCha stream: weight initialization,
//! then the per-epoch dropout masks. Identical configs produce bitwise
//! identical runs.

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, GprCoefficients};
use crate::models::{forward, CoeffMode, ModelSpec, ParameterSet};

use crate::data::Dataset;

/// Disjoint train/validation/test node index sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Pairwise disjoint, all ids in range, train non-empty.
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::Split("training set is empty".into()));
        }
        let mut owner = vec![None::<&'static str>; num_nodes];
        for (name, ids) in [
            ("train", &self.train),
            ("val", &self.val),
            ("test", &self.test),
        ] {
            for &id in ids {
                if id >= num_nodes {
                    return Err(Error::Split(format!(
                        "{name} contains node {id}, outside [0, {num_nodes})"
                    )));
                }
                match owner[id] {
                    Some(other) => {
                        return Err(Error::Split(format!(
                            "node {id} appears in both {other} and {name}"
                        )))
                    }
                    None => owner[id] = Some(name),
                }
            }
        }
        Ok(())
    }
}

/// How to carve a split out of the full label vector.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitMode {
    /// The citation-benchmark convention: the first `per_class` nodes of
    /// each class (in id order) train; the next `val_size` remaining nodes
    /// validate; the following `test_size` nodes test.
    Standard {
        per_class: usize,
        val_size: usize,
        test_size: usize,
    },
    /// Class-stratified random split with the given fractions.
    RandomFractions { train: f64, val: f64, test: f64 },
}

impl SplitMode {
    /// The 60/20/20 stratified split.
    pub fn random_60_20_20() -> Self {
        SplitMode::RandomFractions {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

/// Build a split from labels. `seed` matters only for the random mode.
pub fn make_split(labels: &[usize], mode: &SplitMode, seed: u64) -> Result<Split> {
    let n = labels.len();
    let split = match *mode {
        SplitMode::Standard {
            per_class,
            val_size,
            test_size,
        } => {
            let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
            let mut counts = vec![0usize; num_classes];
            let mut train = Vec::new();
            for (id, &label) in labels.iter().enumerate() {
                if counts[label] < per_class {
                    counts[label] += 1;
                    train.push(id);
                }
            }
            for (class, &count) in counts.iter().enumerate() {
                if count < per_class {
                    return Err(Error::Split(format!(
                        "class {class} has only {count} nodes, need {per_class}"
                    )));
                }
            }
            let in_train = {
                let mut flags = vec![false; n];
                for &id in &train {
                    flags[id] = true;
                }
                flags
            };
            let rest: Vec<usize> = (0..n).filter(|&id| !in_train[id]).collect();
            if rest.len() < val_size + test_size {
                return Err(Error::Split(format!(
                    "{} unlabeled-for-training nodes cannot fill val {val_size} + test {test_size}",
                    rest.len()
                )));
            }
            Split {
                train,
                val: rest[..val_size].to_vec(),
                test: rest[val_size..val_size + test_size].to_vec(),
            }
        }
        SplitMode::RandomFractions { train, val, test } => {
            if !(train > 0.0 && val >= 0.0 && test >= 0.0 && train + val + test <= 1.0 + 1e-12) {
                return Err(Error::Split(format!(
                    "fractions ({train}, {val}, {test}) must be nonnegative and sum to at most 1"
                )));
            }
            let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut split = Split {
                train: Vec::new(),
                val: Vec::new(),
                test: Vec::new(),
            };
            for class in 0..num_classes {
                let mut ids: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
                ids.shuffle(&mut rng);
                let n_train = (train * ids.len() as f64).round() as usize;
                let n_val = (val * ids.len() as f64).round() as usize;
                let n_val_end = (n_train + n_val).min(ids.len());
                let n_test = (test * ids.len() as f64).round() as usize;
                let n_test_end = (n_val_end + n_test).min(ids.len());
                split.train.extend(&ids[..n_train.min(ids.len())]);
                split.val.extend(&ids[n_train.min(ids.len())..n_val_end]);
                split.test.extend(&ids[n_val_end..n_test_end]);
            }
            split.train.sort_unstable();
            split.val.sort_unstable();
            split.test.sort_unstable();
            split
        }
    };
    split.validate(n)?;
    Ok(split)
}

/// Optimizer and run-control settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    /// Weight decay for the initial embedding W0.
    pub wd_initial: f64,
    /// Weight decay for the per-layer weights.
    pub wd_hidden: f64,
    /// Weight decay for the coefficient logits.
    pub wd_coeff: f64,
    pub max_epochs: usize,
    /// Epochs without a new best validation loss before stopping; 0 stops
    /// after the first evaluation.
    pub patience: usize,
    pub seed: u64,
    /// Coefficient-trace recording cadence in epochs.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            wd_initial: 0.01,
            wd_hidden: 0.0001,
            wd_coeff: 0.01,
            max_epochs: 1500,
            patience: 100,
            seed: 0,
            eval_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "lr",
                detail: format!("{} must be positive", self.lr),
            });
        }
        for (name, wd) in [
            ("wd1", self.wd_initial),
            ("wd2", self.wd_hidden),
            ("wd3", self.wd_coeff),
        ] {
            if wd < 0.0 {
                return Err(Error::InvalidParameter {
                    name: "weight decay",
                    detail: format!("{name} = {wd} must be nonnegative"),
                });
            }
        }
        if self.max_epochs == 0 || self.patience > self.max_epochs {
            return Err(Error::InvalidParameter {
                name: "epochs",
                detail: format!(
                    "max_epochs {} must be positive and at least patience {}",
                    self.max_epochs, self.patience
                ),
            });
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidParameter {
                name: "eval_every",
                detail: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Per-epoch curves plus the final outcome of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub test_accuracy: f64,
    /// 1-based epoch whose snapshot is returned.
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub wall_seconds: f64,
}

impl Metrics {
    /// Equality over everything except the measured wall time, which is the
    /// one field a seeded rerun cannot reproduce.
    pub fn same_outcome(&self, other: &Metrics) -> bool {
        self.train_loss == other.train_loss
            && self.val_loss == other.val_loss
            && self.val_accuracy == other.val_accuracy
            && self.test_accuracy == other.test_accuracy
            && self.best_epoch == other.best_epoch
            && self.epochs_run == other.epochs_run
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// First/second moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<DenseMatrix>,
    v: Vec<DenseMatrix>,
    t: usize,
}

impl AdamState {
    pub fn new(shapes: &[(usize, usize)]) -> Self {
        Self {
            m: shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect(),
            t: 0,
        }
    }

    pub fn step(&self) -> usize {
        self.t
    }
}

/// One Adam update. L2 regularization enters as an additive `wd * param`
/// term on the gradient (classic, not decoupled); `decays[i]` is the decay
/// of parameter tensor i.
pub fn adam_step(
    params: &mut [DenseMatrix],
    grads: &[DenseMatrix],
    decays: &[f64],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    let mut refs: Vec<&mut DenseMatrix> = params.iter_mut().collect();
    adam_step_refs(&mut refs, grads, decays, state, lr)
}

/// Mean negative log-likelihood of `log_probs` over `mask`.
pub fn masked_nll(log_probs: &DenseMatrix, labels: &[usize], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::DegenerateLoss);
    }
    let total: f64 = mask.iter().map(|&n| -log_probs.get(n, labels[n])).sum();
    Ok(total / mask.len() as f64)
}

/// Fraction of argmax-correct nodes over `mask`; argmax ties break toward
/// the lowest class index.
pub fn accuracy(log_probs: &DenseMatrix, labels: &[usize], mask: &[usize]) -> f64 {
    if mask.is_empty() {
        return 0.0;
    }
    let correct = mask
        .iter()
        .filter(|&&n| {
            let row = log_probs.row(n);
            let mut best = 0usize;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best == labels[n]
        })
        .count();
    correct as f64 / mask.len() as f64
}

/// Everything a training run produces.
pub struct FitResult {
    /// The best-validation-loss snapshot.
    pub params: ParameterSet,
    pub metrics: Metrics,
    /// Coefficient tables recorded every `eval_every` epochs (plus the first
    /// and last), as (epoch, table) pairs. Empty for models without
    /// coefficients.
    pub coeff_trace: Vec<(usize, GprCoefficients)>,
    /// Coefficients of the returned snapshot.
    pub final_coefficients: Option<GprCoefficients>,
    /// Logit clamp events seen across all forward passes.
    pub clamp_events: usize,
}

/// Train `spec` on a dataset transductively and return the best snapshot.
pub fn fit(
    spec: &ModelSpec,
    config: &TrainConfig,
    dataset: &Dataset,
    split: &Split,
) -> Result<FitResult> {
    spec.validate()?;
    config.validate()?;
    split.validate(dataset.num_nodes())?;
    if split.val.is_empty() || split.test.is_empty() {
        return Err(Error::Split(
            "fit requires non-empty validation and test sets".into(),
        ));
    }
    let start = Instant::now();

    let adj = Arc::new(normalize_adjacency(&dataset.graph));
    let x = &dataset.features;
    let labels = &dataset.labels;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ParameterSet::init(spec, &mut rng);
    let decays = parameter_decays(config, &params);
    let shapes: Vec<(usize, usize)> = params
        .weights
        .iter()
        .chain(&params.coeff_logits)
        .map(DenseMatrix::shape)
        .collect();
    let mut adam = AdamState::new(&shapes);

    let mut metrics = Metrics {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        val_accuracy: Vec::new(),
        test_accuracy: 0.0,
        best_epoch: 0,
        epochs_run: 0,
        wall_seconds: 0.0,
    };
    let mut coeff_trace = Vec::new();
    let mut clamp_events = 0usize;
    let mut best: Option<(f64, usize, ParameterSet)> = None;
    let mut since_best = 0usize;

    for epoch in 1..=config.max_epochs {
        // Training step on the current parameters.
        let mut pass = forward(spec, &params, &adj, x, true, &mut rng)?;
        clamp_events += pass.clamp_events;
        let loss_id = pass.tape.nll_loss_masked(pass.output, labels, &split.train)?;
        let train_loss = pass.tape.value(loss_id).get(0, 0);
        if !train_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        pass.tape.backward(loss_id)?;

        let grads: Vec<DenseMatrix> = pass
            .weight_ids
            .iter()
            .chain(&pass.logit_ids)
            .enumerate()
            .map(|(i, &id)| {
                pass.tape
                    .grad(id)
                    .cloned()
                    .unwrap_or_else(|| DenseMatrix::zeros(shapes[i].0, shapes[i].1))
            })
            .collect();
        // Free the training tape before the eval pass allocates its own.
        drop(pass);
        {
            let mut all: Vec<&mut DenseMatrix> = params
                .weights
                .iter_mut()
                .chain(params.coeff_logits.iter_mut())
                .collect();
            adam_step_refs(&mut all, &grads, &decays, &mut adam, config.lr)?;
        }

        // Evaluate the updated parameters; eval mode draws no randomness.
        let mut eval = forward(spec, &params, &adj, x, false, &mut rng)?;
        let val_loss_id = eval.tape.nll_loss_masked(eval.output, labels, &split.val)?;
        let val_loss = eval.tape.value(val_loss_id).get(0, 0);
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let out = eval.tape.value(eval.output);
        metrics.train_loss.push(train_loss);
        metrics.val_loss.push(val_loss);
        metrics.val_accuracy.push(accuracy(out, labels, &split.val));
        metrics.epochs_run = epoch;

        let improved = best.as_ref().is_none_or(|(b, _, _)| val_loss < *b);
        if improved {
            best = Some((val_loss, epoch, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }

        let last = epoch == config.max_epochs || since_best >= config.patience;
        if let Some(coeffs) = eval.coefficients.take() {
            if epoch == 1 || epoch % config.eval_every == 0 || last {
                coeff_trace.push((epoch, coeffs));
            }
        }
        if since_best >= config.patience {
            break;
        }
    }

    let (_, best_epoch, best_params) = best.expect("at least one epoch ran");
    let mut throwaway = ChaCha8Rng::seed_from_u64(config.seed);
    let final_pass = forward(spec, &best_params, &adj, x, false, &mut throwaway)?;
    metrics.test_accuracy = accuracy(final_pass.tape.value(final_pass.output), labels, &split.test);
    metrics.best_epoch = best_epoch;
    metrics.wall_seconds = start.elapsed().as_secs_f64();

    Ok(FitResult {
        params: best_params,
        metrics,
        coeff_trace,
        final_coefficients: final_pass.coefficients,
        clamp_events,
    })
}

/// Decay constants per parameter tensor in (weights, logits) order: W0 is
/// the `initial` group, the remaining weights `hidden`, logits `coeff`.
fn parameter_decays(config: &TrainConfig, params: &ParameterSet) -> Vec<f64> {
    let mut decays = Vec::with_capacity(params.weights.len() + params.coeff_logits.len());
    for (i, _) in params.weights.iter().enumerate() {
        decays.push(if i == 0 {
            config.wd_initial
        } else {
            config.wd_hidden
        });
    }
    decays.extend(std::iter::repeat_n(
        config.wd_coeff,
        params.coeff_logits.len(),
    ));
    decays
}

/// adam_step over a scattered list of mutable references.
fn adam_step_refs(
    params: &mut [&mut DenseMatrix],
    grads: &[DenseMatrix],
    decays: &[f64],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != decays.len() || params.len() != state.m.len()
    {
        return Err(Error::Contract(format!(
            "adam_step: {} params, {} grads, {} decays, {} moment pairs",
            params.len(),
            grads.len(),
            decays.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let bias1 = 1.0 - ADAM_BETA1.powi(t);
    let bias2 = 1.0 - ADAM_BETA2.powi(t);
    for i in 0..params.len() {
        let param = &mut *params[i];
        let grad = &grads[i];
        if param.shape() != grad.shape() {
            return Err(Error::Contract(format!(
                "adam_step: parameter {:?} vs gradient {:?}",
                param.shape(),
                grad.shape()
            )));
        }
        let wd = decays[i];
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for ((p, &g), (mi, vi)) in param
            .as_mut_slice()
            .iter_mut()
            .zip(grad.as_slice())
            .zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice().iter_mut()))
        {
            let g = g + wd * *p;
            *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * g;
            *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *mi / bias1;
            let v_hat = *vi / bias2;
            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

/// Evaluate a parameter snapshot without training: (val_loss, test_accuracy).
pub fn evaluate(
    spec: &ModelSpec,
    params: &ParameterSet,
    dataset: &Dataset,
    split: &Split,
) -> Result<(f64, f64)> {
    let adj = Arc::new(normalize_adjacency(&dataset.graph));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut pass = forward(spec, params, &adj, &dataset.features, false, &mut rng)?;
    let val_loss_id = pass
        .tape
        .nll_loss_masked(pass.output, &dataset.labels, &split.val)?;
    let val_loss = pass.tape.value(val_loss_id).get(0, 0);
    let test_acc = accuracy(pass.tape.value(pass.output), &dataset.labels, &split.test);
    Ok((val_loss, test_acc))
}

/// Coefficient table of a parameter snapshot (None for gcn/gcnii).
pub fn snapshot_coefficients(
    spec: &ModelSpec,
    params: &ParameterSet,
) -> Result<Option<GprCoefficients>> {
    match (&spec.coeff_mode, spec.variant.has_coefficients()) {
        (_, false) => Ok(None),
        (CoeffMode::Frozen(table), true) => Ok(Some(table.clone())),
        (CoeffMode::Learned, true) => {
            let rows: Result<Vec<Vec<f64>>> = params
                .coeff_logits
                .iter()
                .map(|v| {
                    crate::sparsemax::coeff_activation(v.as_slice()).map(|a| a.mu().to_vec())
                })
                .collect();
            Ok(Some(GprCoefficients::new(rows?)?))
        }
    }
}
