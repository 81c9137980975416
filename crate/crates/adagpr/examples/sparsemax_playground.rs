//! Sparsemax versus softmax on the same inputs: the projection produces
//! exact zeros, which is what makes learned Pagerank coefficients readable.
//!
//!     cargo run --example sparsemax_playground

use adagpr::sparsemax::{coeff_activation, sparsemax};

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn show(z: &[f64]) {
    let s = sparsemax(z).expect("finite input");
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.3}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    println!("z          = [{}]", fmt(z));
    println!("softmax    = [{}]", fmt(&softmax(z)));
    println!("sparsemax  = [{}]  support {:?}, tau {:.3}", fmt(&s.output), s.support, s.tau);
    println!();
}

fn main() {
    show(&[0.0, 0.0, 0.0, 0.0]);
    show(&[1.0, 0.5, 0.1, -0.4]);
    show(&[2.0, 0.0, -1.0, -2.0]);
    show(&[0.5, 0.3, 0.2]);

    println!("coefficient activation (sparsemax of exp):");
    for v in [&[0.0, 0.0][..], &[1.0, -1.0], &[3.0, 0.0, -3.0]] {
        let c = coeff_activation(v).expect("finite logits");
        let fmt: Vec<String> = c.mu().iter().map(|x| format!("{x:.3}")).collect();
        println!("  v = {v:?} -> mu = [{}]", fmt.join(", "));
    }
}
