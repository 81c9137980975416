//! The four model families assembled as tape programs.
//!
//! * Vanilla GCN: L sparse convolutions, relu between them, log-softmax head.
//! * GCNII: initial-residual layers with identity-mapped weights; the
//!   convolution is a single product with the normalized adjacency.
//! * GPR-GNN: a two-layer perceptron followed by one global generalized
//!   Pagerank with learned coefficients.
//! * AdaGPR: GCNII with each layer's convolution replaced by a layer-specific
//!   generalized Pagerank whose coefficients come from sparsemax over
//!   exponentiated logits. Freezing the coefficients at e1 recovers GCNII
//!   exactly; freezing at e0 removes the graph entirely.
//!
//! Dropout is applied to the input of every weight multiplication. All
//! variants output rows of log-probabilities.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, TensorId};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{GprCoefficients, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Gcn,
    Gcnii,
    GprGnn,
    AdaGpr,
    /// AdaGPR ablation with all coefficients frozen at the uniform 1/K.
    AdaGprFixedUniform,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Gcn => "gcn",
            Variant::Gcnii => "gcnii",
            Variant::GprGnn => "gprgnn",
            Variant::AdaGpr => "adagpr",
            Variant::AdaGprFixedUniform => "adagpr-uniform",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(Variant::Gcn),
            "gcnii" => Ok(Variant::Gcnii),
            "gprgnn" => Ok(Variant::GprGnn),
            "adagpr" => Ok(Variant::AdaGpr),
            "adagpr-uniform" => Ok(Variant::AdaGprFixedUniform),
            other => Err(Error::InvalidParameter {
                name: "model",
                detail: format!(
                    "unknown variant '{other}' (expected gcn, gcnii, gprgnn, adagpr, adagpr-uniform)"
                ),
            }),
        }
    }

    /// Whether this variant carries generalized-Pagerank coefficients.
    pub fn has_coefficients(self) -> bool {
        matches!(
            self,
            Variant::GprGnn | Variant::AdaGpr | Variant::AdaGprFixedUniform
        )
    }
}

/// How the coefficient vectors are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum CoeffMode {
    /// Logits v are parameters; mu = sparsemax(exp(v)) per layer.
    Learned,
    /// A fixed table; no gradient reaches the coefficient group.
    Frozen(GprCoefficients),
}

/// Architecture description shared by all variants.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub variant: Variant,
    /// Convolution layer count L. Ignored by gprgnn (its perceptron is
    /// fixed at two layers with one global propagation).
    pub layers: usize,
    /// Generalized Pagerank order K; meaningful for gprgnn and the adagpr
    /// variants.
    pub gpr_order: usize,
    pub hidden: usize,
    pub classes: usize,
    pub features: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub dropout: f64,
    pub coeff_mode: CoeffMode,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::InvalidParameter {
                name: "layers",
                detail: "at least one convolution layer is required".into(),
            });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                detail: format!("{} not in (0, 1)", self.alpha),
            });
        }
        if self.lambda <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "lambda",
                detail: format!("{} must be positive", self.lambda),
            });
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParameter {
                name: "dropout",
                detail: format!("{} not in [0, 1)", self.dropout),
            });
        }
        if self.hidden == 0 || self.classes == 0 || self.features == 0 {
            return Err(Error::InvalidParameter {
                name: "dimensions",
                detail: "hidden, classes, and features must be positive".into(),
            });
        }
        if self.variant.has_coefficients() && self.gpr_order == 0 {
            return Err(Error::InvalidOrder);
        }
        if let CoeffMode::Frozen(table) = &self.coeff_mode {
            let expected_layers = match self.variant {
                Variant::GprGnn => 1,
                _ => self.layers,
            };
            if table.num_layers() != expected_layers || table.order() != self.gpr_order {
                return Err(Error::InvalidParameter {
                    name: "coeff_mode",
                    detail: format!(
                        "frozen table is {}x{}, expected {}x{}",
                        table.num_layers(),
                        table.order(),
                        expected_layers,
                        self.gpr_order
                    ),
                });
            }
        }
        Ok(())
    }

    /// Weight shapes (rows, cols) in parameter order for this variant.
    pub fn weight_shapes(&self) -> Vec<(usize, usize)> {
        let (q, h, c, l) = (self.features, self.hidden, self.classes, self.layers);
        match self.variant {
            Variant::Gcn => {
                if l == 1 {
                    vec![(q, c)]
                } else {
                    let mut shapes = vec![(q, h)];
                    shapes.extend(std::iter::repeat_n((h, h), l - 2));
                    shapes.push((h, c));
                    shapes
                }
            }
            Variant::Gcnii | Variant::AdaGpr | Variant::AdaGprFixedUniform => {
                let mut shapes = vec![(q, h)];
                shapes.extend(std::iter::repeat_n((h, h), l - 1));
                shapes.push((h, c));
                shapes
            }
            Variant::GprGnn => vec![(q, h), (h, c)],
        }
    }

    /// Number of coefficient logit vectors a learned-mode model carries.
    pub fn num_logit_vectors(&self) -> usize {
        match self.variant {
            Variant::AdaGpr => self.layers,
            Variant::GprGnn => 1,
            _ => 0,
        }
    }
}

/// Identity-mapping strength for convolution layer `layer` (1-based):
/// beta = ln(lambda / layer + 1).
pub fn beta_schedule(lambda: f64, layer: usize) -> f64 {
    (lambda / layer as f64 + 1.0).ln()
}

/// Trainable state: weight matrices in layer order plus coefficient logits.
///
/// Weight-decay groups: `weights[0]` is the `initial` group, the remaining
/// weights are `hidden`, and the logits are `coeff`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub weights: Vec<DenseMatrix>,
    pub coeff_logits: Vec<DenseMatrix>,
}

impl ParameterSet {
    /// Initialize weights uniform in (-1/sqrt(fan_in), +1/sqrt(fan_in)) in a
    /// fixed draw order; coefficient logits start at zero so every layer
    /// begins at the uniform Pagerank 1/K.
    pub fn init(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> Self {
        let weights = spec
            .weight_shapes()
            .into_iter()
            .map(|(rows, cols)| {
                let bound = 1.0 / (rows as f64).sqrt();
                let data = (0..rows * cols)
                    .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * bound)
                    .collect();
                DenseMatrix::from_vec(rows, cols, data).expect("shape matches data")
            })
            .collect();
        let logits = match spec.coeff_mode {
            CoeffMode::Learned => (0..spec.num_logit_vectors())
                .map(|_| DenseMatrix::zeros(1, spec.gpr_order))
                .collect(),
            CoeffMode::Frozen(_) => Vec::new(),
        };
        Self {
            weights,
            coeff_logits: logits,
        }
    }
}

/// A recorded forward pass: the tape, the log-prob output node, and the
/// leaf ids needed to read gradients back out.
pub struct ForwardPass {
    pub tape: Tape,
    pub output: TensorId,
    pub weight_ids: Vec<TensorId>,
    pub logit_ids: Vec<TensorId>,
    /// Coefficients in effect for this pass (for traces and reports); None
    /// for variants without coefficients.
    pub coefficients: Option<GprCoefficients>,
    /// Number of coefficient activations that clamped an overflowing logit.
    pub clamp_events: usize,
}

/// Record one forward pass of `spec` on features `x` over adjacency `adj`.
///
/// `train` enables dropout, drawing masks from `rng`; eval passes consume no
/// randomness.
pub fn forward(
    spec: &ModelSpec,
    params: &ParameterSet,
    adj: &Arc<SparseMatrix>,
    x: &DenseMatrix,
    train: bool,
    rng: &mut ChaCha8Rng,
) -> Result<ForwardPass> {
    spec.validate()?;
    if x.cols() != spec.features {
        return Err(Error::DimensionMismatch {
            op: "forward",
            detail: format!("features are {}-wide, spec says {}", x.cols(), spec.features),
        });
    }
    if x.rows() != adj.n_rows() {
        return Err(Error::DimensionMismatch {
            op: "forward",
            detail: format!("{} feature rows vs {} nodes", x.rows(), adj.n_rows()),
        });
    }
    match spec.variant {
        Variant::Gcn => build_gcn(spec, params, adj, x, train, rng),
        Variant::Gcnii => build_gcnii(spec, params, adj, x, train, rng),
        Variant::GprGnn => build_gprgnn(spec, params, adj, x, train, rng),
        Variant::AdaGpr | Variant::AdaGprFixedUniform => {
            build_adagpr(spec, params, adj, x, train, rng)
        }
    }
}

fn leaf_params(tape: &mut Tape, params: &ParameterSet) -> (Vec<TensorId>, Vec<TensorId>) {
    let weight_ids = params
        .weights
        .iter()
        .map(|w| tape.leaf(w.clone(), true))
        .collect();
    let logit_ids = params
        .coeff_logits
        .iter()
        .map(|v| tape.leaf(v.clone(), true))
        .collect();
    (weight_ids, logit_ids)
}

fn build_gcn(
    spec: &ModelSpec,
    params: &ParameterSet,
    adj: &Arc<SparseMatrix>,
    x: &DenseMatrix,
    train: bool,
    rng: &mut ChaCha8Rng,
) -> Result<ForwardPass> {
    let mut tape = Tape::new();
    let (weight_ids, logit_ids) = leaf_params(&mut tape, params);
    let mut h = tape.constant(x.clone());
    for l in 0..spec.layers {
        let dropped = tape.dropout(h, spec.dropout, train, rng)?;
        let aggregated = tape.spmm_const(adj, dropped)?;
        let z = tape.matmul(aggregated, weight_ids[l])?;
        h = if l + 1 < spec.layers { tape.relu(z) } else { z };
    }
    let output = tape.log_softmax_rows(h);
    Ok(ForwardPass {
        tape,
        output,
        weight_ids,
        logit_ids,
        coefficients: None,
        clamp_events: 0,
    })
}

/// Per-layer convolution of the residual stack.
enum ConvKind {
    /// Single product with the adjacency (GCNII).
    Sparse,
    /// Fixed coefficient table (frozen AdaGPR, uniform ablation).
    Frozen(GprCoefficients),
    /// Layer-specific logits through the coefficient activation.
    Learned,
}

/// Shared skeleton of GCNII and AdaGPR: initial embedding, then L layers of
/// (1-alpha) conv + alpha h0 through identity-mixed weights with the
/// decaying beta schedule, then log-softmax.
fn build_residual_stack(
    spec: &ModelSpec,
    params: &ParameterSet,
    adj: &Arc<SparseMatrix>,
    x: &DenseMatrix,
    train: bool,
    rng: &mut ChaCha8Rng,
    conv: ConvKind,
) -> Result<ForwardPass> {
    let mut tape = Tape::new();
    let (weight_ids, logit_ids) = leaf_params(&mut tape, params);
    let x_id = tape.constant(x.clone());
    let x_dropped = tape.dropout(x_id, spec.dropout, train, rng)?;
    let embedded = tape.matmul(x_dropped, weight_ids[0])?;
    let h0 = tape.relu(embedded);

    let mut mu_rows: Vec<Vec<f64>> = Vec::new();
    let mut clamp_events = 0;
    let mut h = h0;
    for l in 1..=spec.layers {
        let dropped = tape.dropout(h, spec.dropout, train, rng)?;
        let conv_out = match &conv {
            ConvKind::Sparse => tape.spmm_const(adj, dropped)?,
            ConvKind::Frozen(table) => tape.gpr_const(adj, table.layer(l - 1), dropped)?,
            ConvKind::Learned => {
                let mu = tape.coeff_activation(logit_ids[l - 1])?;
                clamp_events += usize::from(tape.coeff_was_clamped(mu));
                mu_rows.push(tape.value(mu).as_slice().to_vec());
                tape.gpr_learned(adj, mu, dropped)?
            }
        };
        let combined = tape.affine_combine(conv_out, h0, 1.0 - spec.alpha, spec.alpha)?;
        let mixed = tape.identity_mix(combined, weight_ids[l], beta_schedule(spec.lambda, l))?;
        h = tape.relu(mixed);
    }
    let output = tape.log_softmax_rows(h);

    let coefficients = match conv {
        ConvKind::Sparse => None,
        ConvKind::Frozen(table) => Some(table),
        ConvKind::Learned => Some(GprCoefficients::new(mu_rows)?),
    };
    Ok(ForwardPass {
        tape,
        output,
        weight_ids,
        logit_ids,
        coefficients,
        clamp_events,
    })
}

fn build_gcnii(
    spec: &ModelSpec,
    params: &ParameterSet,
    adj: &Arc<SparseMatrix>,
    x: &DenseMatrix,
    train: bool,
    rng: &mut ChaCha8Rng,
) -> Result<ForwardPass> {
    build_residual_stack(spec, params, adj, x, train, rng, ConvKind::Sparse)
}

fn build_adagpr(
    spec: &ModelSpec,
    params: &ParameterSet,
    adj: &Arc<SparseMatrix>,
    x: &DenseMatrix,
    train: bool,
    rng: &mut ChaCha8Rng,
) -> Result<ForwardPass> {
    let conv = match (&spec.coeff_mode, spec.variant) {
        (_, Variant::AdaGprFixedUniform) => {
            ConvKind::Frozen(GprCoefficients::uniform(spec.layers, spec.gpr_order)?)
        }
        (CoeffMode::Frozen(table), _) => ConvKind::Frozen(table.clone()),
        (CoeffMode::Learned, _) => ConvKind::Learned,
    };
    build_residual_stack(spec, params, adj, x, train, rng, conv)
}

fn build_gprgnn(
    spec: &ModelSpec,
    params: &ParameterSet,
    adj: &Arc<SparseMatrix>,
    x: &DenseMatrix,
    train: bool,
    rng: &mut ChaCha8Rng,
) -> Result<ForwardPass> {
    let mut tape = Tape::new();
    let (weight_ids, logit_ids) = leaf_params(&mut tape, params);
    let x_id = tape.constant(x.clone());
    let x_dropped = tape.dropout(x_id, spec.dropout, train, rng)?;
    let first = tape.matmul(x_dropped, weight_ids[0])?;
    let hidden = tape.relu(first);
    let hidden_dropped = tape.dropout(hidden, spec.dropout, train, rng)?;
    let h0 = tape.matmul(hidden_dropped, weight_ids[1])?;

    let (propagated, coefficients, clamp_events) = match &spec.coeff_mode {
        CoeffMode::Learned => {
            let mu = tape.coeff_activation(logit_ids[0])?;
            let coeffs = GprCoefficients::new(vec![tape.value(mu).as_slice().to_vec()])?;
            let clamps = usize::from(tape.coeff_was_clamped(mu));
            (tape.gpr_learned(adj, mu, h0)?, coeffs, clamps)
        }
        CoeffMode::Frozen(table) => (
            tape.gpr_const(adj, table.layer(0), h0)?,
            table.clone(),
            0,
        ),
    };
    let output = tape.log_softmax_rows(propagated);
    Ok(ForwardPass {
        tape,
        output,
        weight_ids,
        logit_ids,
        coefficients: Some(coefficients),
        clamp_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, Graph};
    use crate::sparsemax::coeff_activation;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_features(n: usize, q: usize, seed: u64) -> DenseMatrix {
        let mut r = rng(seed);
        DenseMatrix::from_vec(n, q, (0..n * q).map(|_| r.random::<f64>() * 2.0 - 1.0).collect())
            .unwrap()
    }

    fn ring(n: usize) -> (Arc<SparseMatrix>, Graph) {
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let g = Graph::new(n, &edges).unwrap();
        (Arc::new(normalize_adjacency(&g)), g)
    }

    fn spec(variant: Variant, layers: usize, order: usize, q: usize) -> ModelSpec {
        ModelSpec {
            variant,
            layers,
            gpr_order: order,
            hidden: 5,
            classes: 3,
            features: q,
            alpha: 0.2,
            lambda: 0.7,
            dropout: 0.0,
            coeff_mode: CoeffMode::Learned,
        }
    }

    // Straight-line eval-mode reimplementation without the tape.
    fn manual_log_softmax(m: &DenseMatrix) -> DenseMatrix {
        let mut out = m.clone();
        for i in 0..m.rows() {
            let row = m.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            for j in 0..m.cols() {
                out.set(i, j, m.get(i, j) - lse);
            }
        }
        out
    }

    fn manual_gpr(adj: &SparseMatrix, mu: &[f64], x: &DenseMatrix) -> DenseMatrix {
        let mut acc = DenseMatrix::zeros(x.rows(), x.cols());
        let mut power = x.clone();
        for (k, &c) in mu.iter().enumerate() {
            if k > 0 {
                power = adj.spmm(&power).unwrap();
            }
            acc.add_scaled_assign(&power, c).unwrap();
        }
        acc
    }

    fn manual_residual_stack(
        spec: &ModelSpec,
        params: &ParameterSet,
        adj: &SparseMatrix,
        x: &DenseMatrix,
        mu_of_layer: impl Fn(usize) -> Vec<f64>,
    ) -> DenseMatrix {
        let h0 = x.matmul(&params.weights[0]).unwrap().map(|v| v.max(0.0));
        let mut h = h0.clone();
        for l in 1..=spec.layers {
            let conv = manual_gpr(adj, &mu_of_layer(l), &h);
            let combined = conv
                .scale(1.0 - spec.alpha)
                .add(&h0.scale(spec.alpha))
                .unwrap();
            let beta = beta_schedule(spec.lambda, l);
            let w = &params.weights[l];
            let mixed = combined
                .resize_cols(w.cols())
                .scale(1.0 - beta)
                .add(&combined.matmul(w).unwrap().scale(beta))
                .unwrap();
            h = mixed.map(|v| v.max(0.0));
        }
        manual_log_softmax(&h)
    }

    #[test]
    fn beta_schedule_values() {
        assert!((beta_schedule(0.5, 1) - 1.5f64.ln()).abs() < 1e-15);
        assert!((beta_schedule(0.5, 2) - 1.25f64.ln()).abs() < 1e-15);
        assert!((beta_schedule(0.5, 1) - 0.4055).abs() < 1e-4);
        assert!((beta_schedule(0.5, 2) - 0.2231).abs() < 1e-4);
    }

    #[test]
    fn adagpr_matches_straight_line_oracle() {
        let (adj, _) = ring(6);
        let q = 4;
        let s = spec(Variant::AdaGpr, 2, 3, q);
        let mut r = rng(5);
        let mut params = ParameterSet::init(&s, &mut r);
        // Move the logits off the uniform point so the oracle exercises a
        // non-trivial projection.
        for (i, v) in params.coeff_logits[0].as_mut_slice().iter_mut().enumerate() {
            *v = 0.3 * i as f64 - 0.2;
        }
        let x = random_features(6, q, 8);
        let pass = forward(&s, &params, &adj, &x, false, &mut rng(0)).unwrap();

        let logits = params.coeff_logits.clone();
        let oracle = manual_residual_stack(&s, &params, &adj, &x, |l| {
            coeff_activation(logits[l - 1].as_slice()).unwrap().mu().to_vec()
        });
        assert!(pass.tape.value(pass.output).max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn gcnii_matches_straight_line_oracle() {
        let (adj, _) = ring(5);
        let q = 3;
        let mut s = spec(Variant::Gcnii, 3, 1, q);
        s.hidden = 4;
        let mut r = rng(21);
        let params = ParameterSet::init(&s, &mut r);
        let x = random_features(5, q, 22);
        let pass = forward(&s, &params, &adj, &x, false, &mut rng(0)).unwrap();
        let oracle = manual_residual_stack(&s, &params, &adj, &x, |_| vec![0.0, 1.0]);
        assert!(pass.tape.value(pass.output).max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn gcn_matches_straight_line_oracle() {
        let (adj, _) = ring(5);
        let q = 3;
        let s = spec(Variant::Gcn, 2, 1, q);
        let mut r = rng(31);
        let params = ParameterSet::init(&s, &mut r);
        let x = random_features(5, q, 32);
        let pass = forward(&s, &params, &adj, &x, false, &mut rng(0)).unwrap();

        let layer1 = adj
            .spmm(&x)
            .unwrap()
            .matmul(&params.weights[0])
            .unwrap()
            .map(|v| v.max(0.0));
        let layer2 = adj
            .spmm(&layer1)
            .unwrap()
            .matmul(&params.weights[1])
            .unwrap();
        let oracle = manual_log_softmax(&layer2);
        assert!(pass.tape.value(pass.output).max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn gprgnn_matches_straight_line_oracle() {
        let (adj, _) = ring(6);
        let q = 4;
        let s = spec(Variant::GprGnn, 1, 4, q);
        let mut r = rng(41);
        let mut params = ParameterSet::init(&s, &mut r);
        for (i, v) in params.coeff_logits[0].as_mut_slice().iter_mut().enumerate() {
            *v = 0.1 * (i as f64) - 0.15;
        }
        let x = random_features(6, q, 42);
        let pass = forward(&s, &params, &adj, &x, false, &mut rng(0)).unwrap();

        let h0 = x
            .matmul(&params.weights[0])
            .unwrap()
            .map(|v| v.max(0.0))
            .matmul(&params.weights[1])
            .unwrap();
        let mu = coeff_activation(params.coeff_logits[0].as_slice()).unwrap();
        let oracle = manual_log_softmax(&manual_gpr(&adj, mu.mu(), &h0));
        assert!(pass.tape.value(pass.output).max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn frozen_e1_reproduces_gcnii_bitwise() {
        let (adj, _) = ring(7);
        let q = 4;
        let mut gcnii = spec(Variant::Gcnii, 3, 1, q);
        gcnii.dropout = 0.4;
        let mut ada = spec(Variant::AdaGpr, 3, 4, q);
        ada.dropout = 0.4;
        ada.coeff_mode = CoeffMode::Frozen(GprCoefficients::vertex(3, 4, 1).unwrap());

        let params_a = ParameterSet::init(&gcnii, &mut rng(9));
        let params_b = ParameterSet::init(&ada, &mut rng(9));
        assert_eq!(params_a, params_b);

        let x = random_features(7, q, 10);
        let labels = vec![0usize, 1, 2, 0, 1, 2, 0];
        let mask = vec![0usize, 2, 4];

        let run = |s: &ModelSpec, p: &ParameterSet| {
            let mut pass = forward(s, p, &adj, &x, true, &mut rng(77)).unwrap();
            let loss = pass
                .tape
                .nll_loss_masked(pass.output, &labels, &mask)
                .unwrap();
            pass.tape.backward(loss).unwrap();
            let out_bits: Vec<u64> = pass
                .tape
                .value(pass.output)
                .as_slice()
                .iter()
                .map(|v| v.to_bits())
                .collect();
            let grad_bits: Vec<Vec<u64>> = pass
                .weight_ids
                .iter()
                .map(|&w| {
                    pass.tape
                        .grad(w)
                        .unwrap()
                        .as_slice()
                        .iter()
                        .map(|v| v.to_bits())
                        .collect()
                })
                .collect();
            (out_bits, grad_bits)
        };
        let (out_g, grads_g) = run(&gcnii, &params_a);
        let (out_a, grads_a) = run(&ada, &params_b);
        assert_eq!(out_g, out_a);
        assert_eq!(grads_g, grads_a);
    }

    #[test]
    fn frozen_e0_is_invariant_to_rewiring() {
        let n = 6;
        let q = 3;
        let (adj_ring, _) = ring(n);
        let star = Graph::new(n, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]).unwrap();
        let adj_star = Arc::new(normalize_adjacency(&star));

        let mut s = spec(Variant::AdaGpr, 2, 3, q);
        s.dropout = 0.3;
        s.coeff_mode = CoeffMode::Frozen(GprCoefficients::vertex(2, 3, 0).unwrap());
        let params = ParameterSet::init(&s, &mut rng(4));
        let x = random_features(n, q, 6);

        let run = |adj: &Arc<SparseMatrix>| {
            let pass = forward(&s, &params, adj, &x, true, &mut rng(123)).unwrap();
            pass.tape
                .value(pass.output)
                .as_slice()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<u64>>()
        };
        assert_eq!(run(&adj_ring), run(&adj_star));
    }

    #[test]
    fn gcnii_alpha_near_one_ignores_graph() {
        let (adj, _) = ring(6);
        let q = 3;
        let mut s = spec(Variant::Gcnii, 2, 1, q);
        s.alpha = 1.0 - 1e-12;
        let params = ParameterSet::init(&s, &mut rng(2));
        let x = random_features(6, q, 3);
        let pass = forward(&s, &params, &adj, &x, false, &mut rng(0)).unwrap();

        // Reference with the graph term removed entirely.
        let h0 = x.matmul(&params.weights[0]).unwrap().map(|v| v.max(0.0));
        let mut h = h0.clone();
        for l in 1..=s.layers {
            let beta = beta_schedule(s.lambda, l);
            let w = &params.weights[l];
            let mixed = h0
                .resize_cols(w.cols())
                .scale(1.0 - beta)
                .add(&h0.matmul(w).unwrap().scale(beta))
                .unwrap();
            h = mixed.map(|v| v.max(0.0));
        }
        let oracle = manual_log_softmax(&h);
        assert!(pass.tape.value(pass.output).max_abs_diff(&oracle) < 1e-9);
    }

    #[test]
    fn gcn_single_node_is_weight_chain() {
        let g = Graph::new(1, &[]).unwrap();
        let adj = Arc::new(normalize_adjacency(&g));
        let q = 3;
        let s = spec(Variant::Gcn, 2, 1, q);
        let params = ParameterSet::init(&s, &mut rng(14));
        let x = random_features(1, q, 15);
        let pass = forward(&s, &params, &adj, &x, false, &mut rng(0)).unwrap();

        let chain = x
            .matmul(&params.weights[0])
            .unwrap()
            .map(|v| v.max(0.0))
            .matmul(&params.weights[1])
            .unwrap();
        let oracle = manual_log_softmax(&chain);
        assert!(pass.tape.value(pass.output).max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn gcn_complete_graph_equal_features_give_equal_rows() {
        let n = 5;
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        let g = Graph::new(n, &edges).unwrap();
        let adj = Arc::new(normalize_adjacency(&g));
        let q = 3;
        let s = spec(Variant::Gcn, 2, 1, q);
        let params = ParameterSet::init(&s, &mut rng(55));
        let row: Vec<f64> = vec![0.3, -0.7, 1.1];
        let x = DenseMatrix::from_rows(&vec![row; n]).unwrap();
        let pass = forward(&s, &params, &adj, &x, false, &mut rng(0)).unwrap();
        let out = pass.tape.value(pass.output);
        for i in 1..n {
            for j in 0..out.cols() {
                assert!((out.get(i, j) - out.get(0, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gprgnn_e0_is_plain_mlp() {
        let (adj, _) = ring(6);
        let q = 4;
        let mut s = spec(Variant::GprGnn, 1, 3, q);
        s.coeff_mode = CoeffMode::Frozen(GprCoefficients::vertex(1, 3, 0).unwrap());
        let params = ParameterSet::init(&s, &mut rng(61));
        let x = random_features(6, q, 62);
        let pass = forward(&s, &params, &adj, &x, false, &mut rng(0)).unwrap();

        let mlp = x
            .matmul(&params.weights[0])
            .unwrap()
            .map(|v| v.max(0.0))
            .matmul(&params.weights[1])
            .unwrap();
        let oracle = manual_log_softmax(&mlp);
        assert!(pass.tape.value(pass.output).max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn gprgnn_e1_is_one_hop_mlp() {
        let (adj, _) = ring(6);
        let q = 4;
        let mut s = spec(Variant::GprGnn, 1, 3, q);
        s.coeff_mode = CoeffMode::Frozen(GprCoefficients::vertex(1, 3, 1).unwrap());
        let params = ParameterSet::init(&s, &mut rng(71));
        let x = random_features(6, q, 72);
        let pass = forward(&s, &params, &adj, &x, false, &mut rng(0)).unwrap();

        let mlp = x
            .matmul(&params.weights[0])
            .unwrap()
            .map(|v| v.max(0.0))
            .matmul(&params.weights[1])
            .unwrap();
        let oracle = manual_log_softmax(&adj.spmm(&mlp).unwrap());
        assert!(pass.tape.value(pass.output).max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn output_rows_are_log_probabilities() {
        let (adj, _) = ring(6);
        let q = 4;
        for variant in [
            Variant::Gcn,
            Variant::Gcnii,
            Variant::GprGnn,
            Variant::AdaGpr,
            Variant::AdaGprFixedUniform,
        ] {
            let s = spec(variant, 2, 3, q);
            let params = ParameterSet::init(&s, &mut rng(81));
            let x = random_features(6, q, 82);
            let pass = forward(&s, &params, &adj, &x, false, &mut rng(0)).unwrap();
            let out = pass.tape.value(pass.output);
            for i in 0..out.rows() {
                let lse: f64 = out.row(i).iter().map(|v| v.exp()).sum();
                assert!((lse.ln()).abs() < 1e-9, "{variant:?} row {i}: {lse}");
            }
        }
    }

    #[test]
    fn permutation_equivariance_eval_mode() {
        let n = 6;
        let q = 4;
        let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (1, 4)];
        let g = Graph::new(n, &edges).unwrap();
        let adj = Arc::new(normalize_adjacency(&g));
        let perm = vec![4usize, 2, 0, 5, 1, 3];
        let permuted = Arc::new(normalize_adjacency(&g.permute(&perm).unwrap()));
        let x = random_features(n, q, 91);
        // Rows of the permuted input: new row i is old row perm[i]... the
        // permuted graph maps old node perm[i] to new id i.
        let mut inverse = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let x_perm = x.permute_rows(&perm);

        for variant in [
            Variant::Gcn,
            Variant::Gcnii,
            Variant::GprGnn,
            Variant::AdaGpr,
        ] {
            let s = spec(variant, 2, 2, q);
            let params = ParameterSet::init(&s, &mut rng(17));
            let base = forward(&s, &params, &adj, &x, false, &mut rng(0)).unwrap();
            let moved = forward(&s, &params, &permuted, &x_perm, false, &mut rng(0)).unwrap();
            let out = base.tape.value(base.output);
            let out_moved = moved.tape.value(moved.output);
            for new in 0..n {
                let old = perm[new];
                for j in 0..out.cols() {
                    assert!(
                        (out_moved.get(new, j) - out.get(old, j)).abs() < 1e-12,
                        "{variant:?} node {old}->{new}"
                    );
                }
            }
        }
    }

    #[test]
    fn gcnii_two_layer_gradients_match_finite_differences() {
        let n = 5;
        let q = 3;
        let g = Graph::new(n, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]).unwrap();
        let adj = Arc::new(normalize_adjacency(&g));
        let mut s = spec(Variant::Gcnii, 2, 1, q);
        s.hidden = 4;
        let params = ParameterSet::init(&s, &mut rng(23));
        let x = random_features(n, q, 24);
        let labels = vec![0usize, 1, 2, 1, 0];
        let mask = vec![0usize, 1, 3, 4];

        let loss_of = |p: &ParameterSet| {
            let mut pass = forward(&s, p, &adj, &x, false, &mut rng(0)).unwrap();
            let loss = pass
                .tape
                .nll_loss_masked(pass.output, &labels, &mask)
                .unwrap();
            pass.tape.value(loss).get(0, 0)
        };

        let mut pass = forward(&s, &params, &adj, &x, false, &mut rng(0)).unwrap();
        let loss = pass
            .tape
            .nll_loss_masked(pass.output, &labels, &mask)
            .unwrap();
        pass.tape.backward(loss).unwrap();

        let h = 1e-6;
        for (w_idx, w) in params.weights.iter().enumerate() {
            let analytic = pass.tape.grad(pass.weight_ids[w_idx]).unwrap();
            for e in 0..w.len() {
                let mut plus = params.clone();
                plus.weights[w_idx].as_mut_slice()[e] += h;
                let mut minus = params.clone();
                minus.weights[w_idx].as_mut_slice()[e] -= h;
                let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
                let a = analytic.as_slice()[e];
                let denom = a.abs().max(fd.abs());
                assert!(
                    (a - fd).abs() <= 1e-9 || (a - fd).abs() / denom < 1e-5,
                    "W{w_idx}[{e}]: analytic {a} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn frozen_mode_gives_no_coefficient_gradient() {
        let (adj, _) = ring(5);
        let q = 3;
        let mut s = spec(Variant::AdaGpr, 2, 2, q);
        s.coeff_mode = CoeffMode::Frozen(GprCoefficients::uniform(2, 2).unwrap());
        let params = ParameterSet::init(&s, &mut rng(2));
        assert!(params.coeff_logits.is_empty());
        let x = random_features(5, q, 3);
        let mut pass = forward(&s, &params, &adj, &x, false, &mut rng(0)).unwrap();
        assert!(pass.logit_ids.is_empty());
        let loss = pass
            .tape
            .nll_loss_masked(pass.output, &[0, 1, 2, 0, 1], &[0, 1])
            .unwrap();
        pass.tape.backward(loss).unwrap();
        // Weight gradients exist, and the weights got nonzero signal.
        assert!(pass.tape.grad(pass.weight_ids[0]).is_some());
    }

    #[test]
    fn spec_validation_rejects_bad_ranges() {
        let mut s = spec(Variant::AdaGpr, 2, 2, 3);
        s.alpha = 0.0;
        assert!(s.validate().is_err());
        let mut s = spec(Variant::AdaGpr, 0, 2, 3);
        s.layers = 0;
        assert!(s.validate().is_err());
        let mut s = spec(Variant::AdaGpr, 2, 0, 3);
        s.gpr_order = 0;
        assert!(s.validate().is_err());
        let mut s = spec(Variant::Gcnii, 2, 1, 3);
        s.lambda = 0.0;
        assert!(s.validate().is_err());
    }
}
