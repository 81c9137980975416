//! Central finite-difference verification of the reverse-mode gradients
//! through a full AdaGPR forward pass, including the sparsemax coefficient
//! path.
//!
//!     cargo run --release --example gradient_check

use std::sync::Arc;

use adagpr::data::generate_sbm;
use adagpr::graph::normalize_adjacency;
use adagpr::models::{forward, CoeffMode, ModelSpec, ParameterSet, Variant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> adagpr::Result<()> {
    let dataset = generate_sbm(4, 2, 0.6, 0.2, 3, 0.4, 1)?;
    let adj = Arc::new(normalize_adjacency(&dataset.graph));
    let spec = ModelSpec {
        variant: Variant::AdaGpr,
        layers: 2,
        gpr_order: 3,
        hidden: 4,
        classes: dataset.num_classes,
        features: dataset.num_features(),
        alpha: 0.2,
        lambda: 0.7,
        dropout: 0.0,
        coeff_mode: CoeffMode::Learned,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut params = ParameterSet::init(&spec, &mut rng);
    for v in &mut params.coeff_logits {
        for (i, x) in v.as_mut_slice().iter_mut().enumerate() {
            *x = 0.2 * i as f64 - 0.15;
        }
    }
    let labels = dataset.labels.clone();
    let mask: Vec<usize> = (0..dataset.num_nodes()).collect();

    let loss_of = |p: &ParameterSet| -> f64 {
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let mut pass = forward(&spec, p, &adj, &dataset.features, false, &mut r).unwrap();
        let loss = pass
            .tape
            .nll_loss_masked(pass.output, &labels, &mask)
            .unwrap();
        pass.tape.value(loss).get(0, 0)
    };

    let mut r = ChaCha8Rng::seed_from_u64(0);
    let mut pass = forward(&spec, &params, &adj, &dataset.features, false, &mut r)?;
    let loss = pass.tape.nll_loss_masked(pass.output, &labels, &mask)?;
    pass.tape.backward(loss)?;

    let step = 1e-6;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for (idx, id) in pass
        .weight_ids
        .iter()
        .chain(&pass.logit_ids)
        .enumerate()
    {
        let analytic = pass.tape.grad(*id).expect("parameters receive gradients");
        let weights = params.weights.len();
        for e in 0..analytic.len() {
            let nudge = |delta: f64| {
                let mut p = params.clone();
                let slot = if idx < weights {
                    &mut p.weights[idx]
                } else {
                    &mut p.coeff_logits[idx - weights]
                };
                slot.as_mut_slice()[e] += delta;
                loss_of(&p)
            };
            let fd = (nudge(step) - nudge(-step)) / (2.0 * step);
            let a = analytic.as_slice()[e];
            let denom = a.abs().max(fd.abs()).max(1e-8);
            worst = worst.max((a - fd).abs() / denom);
            checked += 1;
        }
    }
    println!("checked {checked} parameter derivatives");
    println!("worst relative error vs central differences: {worst:.3e}");
    assert!(worst < 1e-4, "gradient check failed");
    println!("gradient check passed");
    Ok(())
}
