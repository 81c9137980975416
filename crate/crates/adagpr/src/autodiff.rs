//! Reverse-mode automatic differentiation over dense matrices.
//!
//! The tape records a fixed operator vocabulary: dense and sparse-constant
//! products, affine combinations, relu, inverted dropout, row-wise
//! log-softmax, the identity-mixed weight multiply, generalized-Pagerank
//! combination (with constant or learned coefficients), the coefficient
//! activation, and a masked negative-log-likelihood head. There is no
//! broadcasting; every shape is explicit and checked at record time.
//!
//! Sparse matrices enter the tape only as constants: gradients never flow
//! into the adjacency. A tape is single-threaded; distinct tapes may run
//! concurrently.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{gpr_combine, gpr_powers, SparseMatrix};
use crate::sparsemax::{coeff_activation, CoeffActivation};

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(usize);

struct Node {
    value: DenseMatrix,
    grad: Option<DenseMatrix>,
    requires_grad: bool,
    op: Op,
}

enum Op {
    Leaf,
    Matmul {
        a: TensorId,
        b: TensorId,
    },
    SpmmConst {
        m: Arc<SparseMatrix>,
        x: TensorId,
    },
    Add {
        a: TensorId,
        b: TensorId,
    },
    Scale {
        x: TensorId,
        c: f64,
    },
    AffineCombine {
        a: TensorId,
        b: TensorId,
        ca: f64,
        cb: f64,
    },
    Relu {
        x: TensorId,
    },
    Dropout {
        x: TensorId,
        keep_scale: f64,
        mask: Vec<bool>,
    },
    LogSoftmaxRows {
        x: TensorId,
    },
    IdentityMix {
        h: TensorId,
        w: TensorId,
        beta: f64,
    },
    /// sum_k mu_k M^k x with fixed coefficients.
    GprConst {
        m: Arc<SparseMatrix>,
        mu: Vec<f64>,
        x: TensorId,
    },
    /// sum_k mu_k M^k x where mu is a 1 x K tensor on the tape.
    GprLearned {
        m: Arc<SparseMatrix>,
        mu: TensorId,
        x: TensorId,
        powers: Vec<DenseMatrix>,
    },
    /// sparsemax(exp(v)) over a 1 x K logit tensor.
    CoeffActivation {
        v: TensorId,
        act: CoeffActivation,
    },
    NllMasked {
        log_probs: TensorId,
        labels: Vec<usize>,
        mask: Vec<usize>,
    },
    SumAll {
        x: TensorId,
    },
}

/// Records a forward computation and replays it in reverse for gradients.
pub struct Tape {
    nodes: Vec<Node>,
    backward_done: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Record a leaf tensor. Parameters pass `requires_grad = true`;
    /// constants (features, frozen tables) pass false.
    pub fn leaf(&mut self, value: DenseMatrix, requires_grad: bool) -> TensorId {
        self.push(value, requires_grad, Op::Leaf)
    }

    pub fn constant(&mut self, value: DenseMatrix) -> TensorId {
        self.leaf(value, false)
    }

    pub fn value(&self, id: TensorId) -> &DenseMatrix {
        &self.nodes[id.0].value
    }

    /// Gradient of the last backward pass, if this tensor received one.
    pub fn grad(&self, id: TensorId) -> Option<&DenseMatrix> {
        self.nodes[id.0].grad.as_ref()
    }

    pub fn requires_grad(&self, id: TensorId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Whether a coefficient-activation node clamped an overflowing logit.
    pub fn coeff_was_clamped(&self, id: TensorId) -> bool {
        matches!(&self.nodes[id.0].op, Op::CoeffActivation { act, .. } if act.clamped)
    }

    fn push(&mut self, value: DenseMatrix, requires_grad: bool, op: Op) -> TensorId {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        TensorId(self.nodes.len() - 1)
    }

    fn push_derived(&mut self, value: DenseMatrix, inputs: &[TensorId], op: Op) -> TensorId {
        let requires = inputs.iter().any(|&i| self.nodes[i.0].requires_grad);
        self.push(value, requires, op)
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let value = self.nodes[a.0].value.matmul(&self.nodes[b.0].value)?;
        Ok(self.push_derived(value, &[a, b], Op::Matmul { a, b }))
    }

    /// Product with a constant sparse matrix; no gradient flows into `m`.
    pub fn spmm_const(&mut self, m: &Arc<SparseMatrix>, x: TensorId) -> Result<TensorId> {
        let value = m.spmm(&self.nodes[x.0].value)?;
        Ok(self.push_derived(
            value,
            &[x],
            Op::SpmmConst {
                m: Arc::clone(m),
                x,
            },
        ))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let value = self.nodes[a.0].value.add(&self.nodes[b.0].value)?;
        Ok(self.push_derived(value, &[a, b], Op::Add { a, b }))
    }

    pub fn scale(&mut self, x: TensorId, c: f64) -> TensorId {
        let value = self.nodes[x.0].value.scale(c);
        self.push_derived(value, &[x], Op::Scale { x, c })
    }

    /// `ca * a + cb * b` elementwise.
    pub fn affine_combine(&mut self, a: TensorId, b: TensorId, ca: f64, cb: f64) -> Result<TensorId> {
        let value = self.nodes[a.0]
            .value
            .affine_combine(&self.nodes[b.0].value, ca, cb)?;
        Ok(self.push_derived(value, &[a, b], Op::AffineCombine { a, b, ca, cb }))
    }

    /// Elementwise max(x, 0); the subgradient at 0 is 0.
    pub fn relu(&mut self, x: TensorId) -> TensorId {
        let value = self.nodes[x.0].value.map(|v| v.max(0.0));
        self.push_derived(value, &[x], Op::Relu { x })
    }

    /// Inverted dropout: kept entries are scaled by 1/(1-rate) so the
    /// expectation matches eval mode. With `train = false` or rate 0 the
    /// input passes through untouched and no randomness is consumed.
    pub fn dropout(
        &mut self,
        x: TensorId,
        rate: f64,
        train: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<TensorId> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidParameter {
                name: "dropout rate",
                detail: format!("{rate} not in [0, 1)"),
            });
        }
        if !train || rate == 0.0 {
            return Ok(x);
        }
        let keep_scale = 1.0 / (1.0 - rate);
        let mask: Vec<bool> = (0..self.nodes[x.0].value.len())
            .map(|_| rng.random::<f64>() >= rate)
            .collect();
        let src = &self.nodes[x.0].value;
        let mut value = DenseMatrix::zeros(src.rows(), src.cols());
        for (i, (&keep, &v)) in mask.iter().zip(src.as_slice()).enumerate() {
            if keep {
                value.as_mut_slice()[i] = v * keep_scale;
            }
        }
        Ok(self.push_derived(
            value,
            &[x],
            Op::Dropout {
                x,
                keep_scale,
                mask,
            },
        ))
    }

    /// Row-wise log-softmax with max subtraction.
    pub fn log_softmax_rows(&mut self, x: TensorId) -> TensorId {
        let src = &self.nodes[x.0].value;
        let (rows, cols) = src.shape();
        let mut value = DenseMatrix::zeros(rows, cols);
        for i in 0..rows {
            let row = src.row(i);
            let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
            for j in 0..cols {
                value.set(i, j, row[j] - lse);
            }
        }
        self.push_derived(value, &[x], Op::LogSoftmaxRows { x })
    }

    /// `h ((1-beta) I + beta w)`. For rectangular `w` the identity is the
    /// rectangular identity, i.e. `h` truncated or zero-padded to `w`'s
    /// column count.
    pub fn identity_mix(&mut self, h: TensorId, w: TensorId, beta: f64) -> Result<TensorId> {
        let hv = &self.nodes[h.0].value;
        let wv = &self.nodes[w.0].value;
        if hv.cols() != wv.rows() {
            return Err(Error::DimensionMismatch {
                op: "identity_mix",
                detail: format!("{:?} vs {:?}", hv.shape(), wv.shape()),
            });
        }
        let mixed = hv.matmul(wv)?;
        let value = hv
            .resize_cols(wv.cols())
            .affine_combine(&mixed, 1.0 - beta, beta)?;
        Ok(self.push_derived(value, &[h, w], Op::IdentityMix { h, w, beta }))
    }

    /// Generalized Pagerank with fixed coefficients. Zero coefficients are
    /// skipped; the vertex coefficient vectors e0/e1 reproduce the identity
    /// and the plain sparse product bit for bit.
    pub fn gpr_const(
        &mut self,
        m: &Arc<SparseMatrix>,
        mu: &[f64],
        x: TensorId,
    ) -> Result<TensorId> {
        if mu.is_empty() {
            return Err(Error::InvalidOrder);
        }
        // Iterate only up to the last nonzero coefficient; with mu = e0 the
        // adjacency is never touched.
        let effective = trimmed_order(mu);
        let powers = gpr_powers(m, effective, &self.nodes[x.0].value)?;
        let value = gpr_combine(&mu[..effective], &powers);
        Ok(self.push_derived(
            value,
            &[x],
            Op::GprConst {
                m: Arc::clone(m),
                mu: mu.to_vec(),
                x,
            },
        ))
    }

    /// Generalized Pagerank whose coefficients are a 1 x K tensor; gradients
    /// flow into both the coefficients and the features.
    pub fn gpr_learned(
        &mut self,
        m: &Arc<SparseMatrix>,
        mu: TensorId,
        x: TensorId,
    ) -> Result<TensorId> {
        let mu_val = &self.nodes[mu.0].value;
        if mu_val.rows() != 1 {
            return Err(Error::DimensionMismatch {
                op: "gpr_learned",
                detail: format!("coefficients must be 1 x K, got {:?}", mu_val.shape()),
            });
        }
        let powers = gpr_powers(m, mu_val.cols(), &self.nodes[x.0].value)?;
        let value = gpr_combine(mu_val.as_slice(), &powers);
        Ok(self.push_derived(
            value,
            &[mu, x],
            Op::GprLearned {
                m: Arc::clone(m),
                mu,
                x,
                powers,
            },
        ))
    }

    /// sparsemax(exp(v)) for a 1 x K logit tensor.
    pub fn coeff_activation(&mut self, v: TensorId) -> Result<TensorId> {
        let vv = &self.nodes[v.0].value;
        if vv.rows() != 1 {
            return Err(Error::DimensionMismatch {
                op: "coeff_activation",
                detail: format!("logits must be 1 x K, got {:?}", vv.shape()),
            });
        }
        let act = coeff_activation(vv.as_slice())?;
        let value = DenseMatrix::from_vec(1, vv.cols(), act.mu().to_vec())?;
        Ok(self.push_derived(value, &[v], Op::CoeffActivation { v, act }))
    }

    /// Mean negative log-likelihood over the masked rows of a log-prob
    /// matrix. The gradient is nonzero only on masked rows.
    pub fn nll_loss_masked(
        &mut self,
        log_probs: TensorId,
        labels: &[usize],
        mask: &[usize],
    ) -> Result<TensorId> {
        let lp = &self.nodes[log_probs.0].value;
        if mask.is_empty() {
            return Err(Error::DegenerateLoss);
        }
        if labels.len() != lp.rows() {
            return Err(Error::DimensionMismatch {
                op: "nll_loss_masked",
                detail: format!("{} labels for {} rows", labels.len(), lp.rows()),
            });
        }
        for &n in mask {
            if n >= lp.rows() {
                return Err(Error::InvalidParameter {
                    name: "mask",
                    detail: format!("node {n} outside [0, {})", lp.rows()),
                });
            }
            if labels[n] >= lp.cols() {
                return Err(Error::InvalidParameter {
                    name: "labels",
                    detail: format!("label {} outside [0, {})", labels[n], lp.cols()),
                });
            }
        }
        let total: f64 = mask.iter().map(|&n| -lp.get(n, labels[n])).sum();
        let value = DenseMatrix::from_vec(1, 1, vec![total / mask.len() as f64])?;
        Ok(self.push_derived(
            value,
            &[log_probs],
            Op::NllMasked {
                log_probs,
                labels: labels.to_vec(),
                mask: mask.to_vec(),
            },
        ))
    }

    /// Sum of all entries; handy as a scalar root in tests.
    pub fn sum_all(&mut self, x: TensorId) -> TensorId {
        let value = DenseMatrix::from_vec(1, 1, vec![self.nodes[x.0].value.sum()])
            .expect("1x1 shape");
        self.push_derived(value, &[x], Op::SumAll { x })
    }

    /// Reverse pass from a scalar root. Each node is visited exactly once in
    /// reverse topological (record) order. Calling twice on one tape is an
    /// error; build a fresh tape instead.
    pub fn backward(&mut self, root: TensorId) -> Result<()> {
        if self.backward_done {
            return Err(Error::Contract(
                "backward already ran on this tape".into(),
            ));
        }
        let root_shape = self.nodes[root.0].value.shape();
        if root_shape != (1, 1) {
            return Err(Error::Contract(format!(
                "backward root must be a 1x1 scalar, got {root_shape:?}"
            )));
        }
        self.backward_done = true;
        self.nodes[root.0].grad = Some(DenseMatrix::from_vec(1, 1, vec![1.0])?);

        for id in (0..=root.0).rev() {
            if self.nodes[id].grad.is_none() || !self.nodes[id].requires_grad {
                continue;
            }
            self.propagate(id)?;
        }
        Ok(())
    }

    fn accumulate(&mut self, target: TensorId, contribution: &DenseMatrix) -> Result<()> {
        if !self.nodes[target.0].requires_grad {
            return Ok(());
        }
        let node = &mut self.nodes[target.0];
        match &mut node.grad {
            Some(g) => g.add_assign(contribution)?,
            None => node.grad = Some(contribution.clone()),
        }
        Ok(())
    }

    fn needs(&self, id: TensorId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn propagate(&mut self, id: usize) -> Result<()> {
        let grad = self.nodes[id]
            .grad
            .clone()
            .expect("caller checked grad presence");
        // Borrow discipline: compute each contribution from immutable state,
        // then accumulate. Contributions for inputs outside the gradient
        // path are never computed — the feature matrix would otherwise cost
        // a full dense product per epoch.
        match &self.nodes[id].op {
            Op::Leaf => Ok(()),
            Op::Matmul { a, b } => {
                let (a, b) = (*a, *b);
                if self.needs(a) {
                    let da = grad.matmul_nt(&self.nodes[b.0].value)?;
                    self.accumulate(a, &da)?;
                }
                if self.needs(b) {
                    let db = self.nodes[a.0].value.matmul_tn(&grad)?;
                    self.accumulate(b, &db)?;
                }
                Ok(())
            }
            Op::SpmmConst { m, x } => {
                let x = *x;
                if self.needs(x) {
                    let dx = m.spmm_t(&grad)?;
                    self.accumulate(x, &dx)?;
                }
                Ok(())
            }
            Op::Add { a, b } => {
                let (a, b) = (*a, *b);
                self.accumulate(a, &grad)?;
                self.accumulate(b, &grad)
            }
            Op::Scale { x, c } => {
                let (x, c) = (*x, *c);
                if self.needs(x) {
                    self.accumulate(x, &grad.scale(c))?;
                }
                Ok(())
            }
            Op::AffineCombine { a, b, ca, cb } => {
                let (a, b, ca, cb) = (*a, *b, *ca, *cb);
                if self.needs(a) {
                    self.accumulate(a, &grad.scale(ca))?;
                }
                if self.needs(b) {
                    self.accumulate(b, &grad.scale(cb))?;
                }
                Ok(())
            }
            Op::Relu { x } => {
                let x = *x;
                if !self.needs(x) {
                    return Ok(());
                }
                let input = &self.nodes[x.0].value;
                let mut dx = grad.clone();
                for (g, &v) in dx.as_mut_slice().iter_mut().zip(input.as_slice()) {
                    if v <= 0.0 {
                        *g = 0.0;
                    }
                }
                self.accumulate(x, &dx)
            }
            Op::Dropout {
                x,
                keep_scale,
                mask,
            } => {
                let (x, keep_scale) = (*x, *keep_scale);
                if !self.needs(x) {
                    return Ok(());
                }
                let mut dx = grad.clone();
                for (g, &keep) in dx.as_mut_slice().iter_mut().zip(mask) {
                    *g = if keep { *g * keep_scale } else { 0.0 };
                }
                self.accumulate(x, &dx)
            }
            Op::LogSoftmaxRows { x } => {
                let x = *x;
                if !self.needs(x) {
                    return Ok(());
                }
                let out = &self.nodes[id].value;
                let (rows, cols) = out.shape();
                let mut dx = DenseMatrix::zeros(rows, cols);
                for i in 0..rows {
                    let row_sum: f64 = (0..cols).map(|j| grad.get(i, j)).sum();
                    for j in 0..cols {
                        dx.set(i, j, grad.get(i, j) - out.get(i, j).exp() * row_sum);
                    }
                }
                self.accumulate(x, &dx)
            }
            Op::IdentityMix { h, w, beta } => {
                let (h, w, beta) = (*h, *w, *beta);
                let hv = &self.nodes[h.0].value;
                let wv = &self.nodes[w.0].value;
                if self.needs(h) {
                    let dh = grad
                        .resize_cols(hv.cols())
                        .scale(1.0 - beta)
                        .add(&grad.matmul_nt(wv)?.scale(beta))?;
                    self.accumulate(h, &dh)?;
                }
                if self.needs(w) {
                    let dw = self.nodes[h.0].value.matmul_tn(&grad)?.scale(beta);
                    self.accumulate(w, &dw)?;
                }
                Ok(())
            }
            Op::GprConst { m, mu, x } => {
                let x = *x;
                if self.needs(x) {
                    let dx = gpr_input_grad(m, mu, &grad)?;
                    self.accumulate(x, &dx)?;
                }
                Ok(())
            }
            Op::GprLearned { m, mu, x, powers } => {
                let (mu_id, x_id) = (*mu, *x);
                let dmu = if self.needs(mu_id) {
                    let mut dmu = DenseMatrix::zeros(1, powers.len());
                    for (k, power) in powers.iter().enumerate() {
                        dmu.set(0, k, grad.dot(power)?);
                    }
                    Some(dmu)
                } else {
                    None
                };
                let dx = if self.needs(x_id) {
                    let mu_vals = self.nodes[mu_id.0].value.as_slice().to_vec();
                    Some(gpr_input_grad(m, &mu_vals, &grad)?)
                } else {
                    None
                };
                if let Some(dmu) = dmu {
                    self.accumulate(mu_id, &dmu)?;
                }
                if let Some(dx) = dx {
                    self.accumulate(x_id, &dx)?;
                }
                Ok(())
            }
            Op::CoeffActivation { v, act } => {
                let v = *v;
                if !self.needs(v) {
                    return Ok(());
                }
                let dv = act.backward(grad.as_slice());
                let dv = DenseMatrix::from_vec(1, dv.len(), dv)?;
                self.accumulate(v, &dv)
            }
            Op::NllMasked {
                log_probs,
                labels,
                mask,
            } => {
                let lp = *log_probs;
                if !self.needs(lp) {
                    return Ok(());
                }
                let upstream = grad.get(0, 0);
                let shape = self.nodes[lp.0].value.shape();
                let mut dx = DenseMatrix::zeros(shape.0, shape.1);
                let weight = upstream / mask.len() as f64;
                for &n in mask {
                    dx.set(n, labels[n], dx.get(n, labels[n]) - weight);
                }
                self.accumulate(lp, &dx)
            }
            Op::SumAll { x } => {
                let x = *x;
                if !self.needs(x) {
                    return Ok(());
                }
                let shape = self.nodes[x.0].value.shape();
                let ones = DenseMatrix::from_vec(
                    shape.0,
                    shape.1,
                    vec![grad.get(0, 0); shape.0 * shape.1],
                )?;
                self.accumulate(x, &ones)
            }
        }
    }
}

/// dL/dx for y = sum_k mu_k M^k x: iterate q <- M^T q accumulating mu_k q_k,
/// with the same zero-skip and unit fast path as the forward combine.
fn gpr_input_grad(m: &SparseMatrix, mu: &[f64], grad: &DenseMatrix) -> Result<DenseMatrix> {
    let order = trimmed_order(mu);
    let mut powers = Vec::with_capacity(order);
    powers.push(grad.clone());
    for _ in 1..order {
        let next = m.spmm_t(powers.last().expect("non-empty"))?;
        powers.push(next);
    }
    Ok(gpr_combine(&mu[..order], &powers))
}

/// Index one past the last nonzero coefficient, at least 1.
fn trimmed_order(mu: &[f64]) -> usize {
    mu.iter().rposition(|&c| c != 0.0).map_or(1, |i| i + 1)
}
