//! Depth sweep on a homophilous stochastic block model: Vanilla GCN
//! collapses as layers stack, AdaGPR holds its accuracy.
//!
//!     cargo run --release --example oversmoothing_depth_sweep

use adagpr::data::generate_sbm;
use adagpr::models::{CoeffMode, ModelSpec, Variant};
use adagpr::training::{fit, make_split, SplitMode, TrainConfig};

fn main() -> adagpr::Result<()> {
    let depths = [2usize, 16];
    let seeds = 0..5u64;

    println!("model,layers,mean_test_accuracy");
    for variant in [Variant::Gcn, Variant::AdaGpr] {
        for &layers in &depths {
            let mut total = 0.0;
            let mut count = 0;
            for seed in seeds.clone() {
                let dataset = generate_sbm(100, 3, 0.1, 0.01, 12, 1.0, seed)?;
                let split = make_split(&dataset.labels, &SplitMode::random_60_20_20(), seed)?;
                let spec = ModelSpec {
                    variant,
                    layers,
                    gpr_order: 4,
                    hidden: 16,
                    classes: dataset.num_classes,
                    features: dataset.num_features(),
                    alpha: 0.1,
                    lambda: 0.5,
                    dropout: 0.1,
                    coeff_mode: CoeffMode::Learned,
                };
                let config = TrainConfig {
                    lr: 0.01,
                    wd_initial: 0.0005,
                    wd_hidden: 0.0005,
                    wd_coeff: 0.001,
                    max_epochs: 300,
                    patience: 50,
                    seed,
                    eval_every: 50,
                };
                let result = fit(&spec, &config, &dataset, &split)?;
                total += result.metrics.test_accuracy;
                count += 1;
            }
            println!(
                "{},{layers},{:.4}",
                variant.name(),
                total / f64::from(count)
            );
        }
    }
    Ok(())
}
