//! Sparsemax: exact Euclidean projection onto the probability simplex, its
//! Jacobian action, and the exp-input variant used to turn coefficient
//! logits into generalized-Pagerank weights.
//!
//! The forward pass sorts the input descending (stable, so ties keep their
//! original order and receive identical outputs), finds the support size via
//! the cumulative threshold rule, and clips below the threshold. The result
//! is exactly sparse: entries off the support are 0.0, not merely small.

use crate::error::{Error, Result};

/// Inputs above this are clamped before exponentiation in
/// [`coeff_activation`]; exp(700) is near the f64 overflow edge.
pub const EXP_CLAMP: f64 = 700.0;

/// Projection of one vector onto the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsemaxResult {
    /// The projected vector; nonnegative, sums to 1.
    pub output: Vec<f64>,
    /// Indices with strictly positive output, ascending.
    pub support: Vec<usize>,
    /// Threshold subtracted from every supported entry.
    pub tau: f64,
}

/// Euclidean projection of `z` onto the probability simplex.
///
/// Supported entries satisfy `output[i] = z[i] - tau`; all others are zero.
pub fn sparsemax(z: &[f64]) -> Result<SparsemaxResult> {
    if z.is_empty() {
        return Err(Error::InvalidParameter {
            name: "z",
            detail: "sparsemax input must have at least one entry".into(),
        });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "sparsemax input",
        });
    }

    // Work on z - max(z): the projection is shift invariant and the shifted
    // values keep the threshold rule well conditioned even for inputs near
    // the f64 overflow edge (exp-clamped logits reach ~1e304).
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = z.iter().map(|v| v - max).collect();

    // Stable descending sort of (value, original index).
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| shifted[b].partial_cmp(&shifted[a]).expect("finite entries"));

    // Largest k with 1 + k * z_(k) > sum_{j<=k} z_(j). The top entry is 0
    // after the shift, so k = 1 always qualifies.
    let mut cumulative = 0.0;
    let mut support_size = 0;
    let mut support_sum = 0.0;
    for (rank, &idx) in order.iter().enumerate() {
        let k = (rank + 1) as f64;
        cumulative += shifted[idx];
        if 1.0 + k * shifted[idx] > cumulative {
            support_size = rank + 1;
            support_sum = cumulative;
        }
    }
    let shifted_tau = (support_sum - 1.0) / support_size as f64;

    let mut output = vec![0.0; z.len()];
    let mut support: Vec<usize> = order[..support_size].to_vec();
    support.sort_unstable();
    for &idx in &support {
        output[idx] = shifted[idx] - shifted_tau;
    }
    Ok(SparsemaxResult {
        output,
        support,
        tau: shifted_tau + max,
    })
}

/// Jacobian-transpose action of sparsemax at `result` applied to `upstream`.
///
/// On the support the Jacobian is `I - 11^T / |S|`; off the support the
/// output is exactly zero.
pub fn sparsemax_backward(result: &SparsemaxResult, upstream: &[f64]) -> Vec<f64> {
    assert!(
        !result.support.is_empty(),
        "sparsemax output always has nonempty support"
    );
    let mean: f64 = result.support.iter().map(|&i| upstream[i]).sum::<f64>()
        / result.support.len() as f64;
    let mut grad = vec![0.0; upstream.len()];
    for &i in &result.support {
        grad[i] = upstream[i] - mean;
    }
    grad
}

/// Coefficient activation: sparsemax of the elementwise exponential.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffActivation {
    pub projection: SparsemaxResult,
    /// exp of the (possibly clamped) logits, kept for the chain rule.
    pub exp_values: Vec<f64>,
    /// True when any logit exceeded [`EXP_CLAMP`] and was clamped.
    pub clamped: bool,
}

impl CoeffActivation {
    pub fn mu(&self) -> &[f64] {
        &self.projection.output
    }

    /// Chain `upstream` through the projection and the exponential.
    pub fn backward(&self, upstream: &[f64]) -> Vec<f64> {
        let through_projection = sparsemax_backward(&self.projection, upstream);
        through_projection
            .iter()
            .zip(&self.exp_values)
            .map(|(g, e)| g * e)
            .collect()
    }
}

/// Map logits `v` to simplex coefficients via `sparsemax(exp(v))`.
///
/// Logits above [`EXP_CLAMP`] are clamped (flagged in the result) so the
/// exponential cannot overflow; their gradient still uses the clamped value.
pub fn coeff_activation(v: &[f64]) -> Result<CoeffActivation> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: "coefficient logits",
        });
    }
    let clamped = v.iter().any(|&x| x > EXP_CLAMP);
    let exp_values: Vec<f64> = v.iter().map(|&x| x.min(EXP_CLAMP).exp()).collect();
    let projection = sparsemax(&exp_values)?;
    Ok(CoeffActivation {
        projection,
        exp_values,
        clamped,
    })
}
