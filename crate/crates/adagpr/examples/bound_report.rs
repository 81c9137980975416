//! Evaluate the transductive complexity index for a trained AdaGPR model
//! and compare it against the GCNII value on the same graph: coefficient
//! mass on higher Pagerank orders shrinks the spectral sums and with them
//! the index.
//!
//!     cargo run --release --example bound_report

use adagpr::bounds::{gpr_complexity_index, BoundInput};
use adagpr::data::generate_sbm;
use adagpr::graph::normalize_adjacency;
use adagpr::models::{CoeffMode, ModelSpec, Variant};
use adagpr::spectrum::{compute_spectrum, SpectrumMode};
use adagpr::training::{fit, make_split, SplitMode, TrainConfig};

fn main() -> adagpr::Result<()> {
    let dataset = generate_sbm(40, 3, 0.2, 0.02, 8, 0.5, 3)?;
    let split = make_split(&dataset.labels, &SplitMode::random_60_20_20(), 3)?;
    let spec = ModelSpec {
        variant: Variant::AdaGpr,
        layers: 3,
        gpr_order: 4,
        hidden: 16,
        classes: dataset.num_classes,
        features: dataset.num_features(),
        alpha: 0.2,
        lambda: 0.5,
        dropout: 0.2,
        coeff_mode: CoeffMode::Learned,
    };
    let config = TrainConfig {
        lr: 0.01,
        wd_initial: 0.0005,
        wd_hidden: 0.0005,
        wd_coeff: 0.001,
        max_epochs: 300,
        patience: 100,
        seed: 3,
        eval_every: 50,
    };
    let result = fit(&spec, &config, &dataset, &split)?;
    let coefficients = result.final_coefficients.expect("adagpr has coefficients");

    // Norm bounds from the trained weights: max column L1 norm per layer.
    let norm_bounds: Vec<f64> = result
        .params
        .weights
        .iter()
        .map(|w| {
            (0..w.cols())
                .map(|c| (0..w.rows()).map(|r| w.get(r, c).abs()).sum::<f64>())
                .fold(0.0, f64::max)
        })
        .collect();

    let spectrum = compute_spectrum(&normalize_adjacency(&dataset.graph), SpectrumMode::Dense)?;
    let input = BoundInput {
        spectrum,
        coefficients,
        num_layers: spec.layers,
        alpha: spec.alpha,
        norm_bounds,
        output_bound: 1.0,
        train_size: split.train.len(),
        test_size: split.test.len(),
        feature_norm: dataset.features.frobenius_norm(),
        delta: 0.1,
    };
    let report = gpr_complexity_index(&input)?;

    println!("test accuracy {:.4}", result.metrics.test_accuracy);
    println!("layer spectral sums: {:?}", report.spectral_sums);
    println!("complexity index       {:.6e}", report.complexity_index);
    println!("gcnii comparison (e1)  {:.6e}", report.gcnii_comparison);
    println!("concentration tail     {:.4}", report.concentration_tail);
    println!("confidence tail (d=.1) {:.4}", report.confidence_tail);
    Ok(())
}
