//! All five model variants on one synthetic task, same split and budget.
//!
//!     cargo run --release --example model_zoo

use adagpr::data::generate_sbm;
use adagpr::models::{CoeffMode, ModelSpec, Variant};
use adagpr::training::{fit, make_split, SplitMode, TrainConfig};

fn main() -> adagpr::Result<()> {
    let dataset = generate_sbm(60, 3, 0.12, 0.01, 10, 1.2, 17)?;
    let split = make_split(&dataset.labels, &SplitMode::random_60_20_20(), 17)?;

    println!("model,layers,test_accuracy,best_epoch");
    for (variant, layers, k) in [
        (Variant::Gcn, 2, 1),
        (Variant::Gcnii, 8, 1),
        (Variant::GprGnn, 2, 4),
        (Variant::AdaGpr, 8, 4),
        (Variant::AdaGprFixedUniform, 8, 4),
    ] {
        let spec = ModelSpec {
            variant,
            layers,
            gpr_order: k,
            hidden: 16,
            classes: dataset.num_classes,
            features: dataset.num_features(),
            alpha: 0.1,
            lambda: 0.5,
            dropout: 0.2,
            coeff_mode: CoeffMode::Learned,
        };
        let config = TrainConfig {
            lr: 0.01,
            wd_initial: 0.0005,
            wd_hidden: 0.0005,
            wd_coeff: 0.001,
            max_epochs: 400,
            patience: 100,
            seed: 17,
            eval_every: 50,
        };
        let result = fit(&spec, &config, &dataset, &split)?;
        println!(
            "{},{layers},{:.4},{}",
            variant.name(),
            result.metrics.test_accuracy,
            result.metrics.best_epoch
        );
    }
    Ok(())
}
