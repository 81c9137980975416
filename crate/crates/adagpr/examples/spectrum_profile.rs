//! Eigenvalue spectrum of the normalized adjacency and the shrinkage of
//! sum_i |lambda_i|^k with the power k — the quantity that makes deep
//! convolution stacks "simpler" and oversmoothed.
//!
//!     cargo run --release --example spectrum_profile

use adagpr::bounds::oversmoothing_profile;
use adagpr::data::generate_sbm;
use adagpr::graph::normalize_adjacency;
use adagpr::spectrum::{compute_spectrum, SpectrumMode};

fn main() -> adagpr::Result<()> {
    println!("density,sum_abs_lambda_k1,k2,k4,k8");
    for &(p_in, p_out) in &[(0.05, 0.01), (0.15, 0.03), (0.4, 0.1)] {
        let dataset = generate_sbm(34, 3, p_in, p_out, 4, 0.2, 11)?;
        let adjacency = normalize_adjacency(&dataset.graph);
        let spectrum = compute_spectrum(&adjacency, SpectrumMode::Dense)?;
        let profile = oversmoothing_profile(&spectrum, 8)?;
        println!(
            "p=({p_in},{p_out}),{:.3},{:.3},{:.3},{:.3}",
            profile[1], profile[2], profile[4], profile[8]
        );
    }

    let dataset = generate_sbm(34, 3, 0.15, 0.03, 4, 0.2, 11)?;
    let adjacency = normalize_adjacency(&dataset.graph);
    let spectrum = compute_spectrum(&adjacency, SpectrumMode::Dense)?;
    println!("\nlargest eigenvalues of the (0.15, 0.03) graph:");
    for (i, ev) in spectrum.eigenvalues().iter().take(6).enumerate() {
        println!("  lambda_{} = {ev:.6}", i + 1);
    }
    println!("  ...");
    println!(
        "  lambda_{} = {:.6}",
        spectrum.len(),
        spectrum.eigenvalues().last().unwrap()
    );
    Ok(())
}
