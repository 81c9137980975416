//! Adaptive layer-wise generalized-Pagerank graph convolution networks.
//!
//! This crate implements AdaGPR — a GCNII-style deep graph convolution
//! network where each layer's convolution is a learned generalized Pagerank
//! whose coefficients come from a sparsemax over exponentiated logits —
//! together with the Vanilla GCN, GCNII, and GPR-GNN baselines, a
//! transductive training harness, and a numerical evaluator of the
//! spectrum-dependent transductive Rademacher complexity index that
//! quantifies oversmoothing.
//!
//! Start with the runnable programs under `examples/`; the `adagpr` binary
//! exposes the same capabilities as subcommands (`train`, `coeffs`,
//! `spectrum`, `bound`, `gen`).

#![allow(clippy::needless_range_loop)]

pub mod autodiff;
pub mod bounds;
pub mod cli;
pub mod data;
pub mod dense;
pub mod error;
pub mod graph;
pub mod models;
pub mod sparsemax;
pub mod spectrum;
pub mod training;

pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use graph::{apply_gpr, normalize_adjacency, GprCoefficients, Graph, SparseMatrix};
pub use models::{CoeffMode, ModelSpec, ParameterSet, Variant};
pub use spectrum::{compute_spectrum, lanczos_spectrum, Spectrum, SpectrumMethod, SpectrumMode};
