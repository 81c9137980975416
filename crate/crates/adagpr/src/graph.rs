//! Graphs, the symmetric normalized adjacency in CSR form, and generalized
//! Pagerank application.
//!
//! The normalized adjacency is built as D^{-1/2} (A + I) D^{-1/2} where D is
//! the degree matrix of the self-loop augmented adjacency. Input edges are
//! symmetrized and deduplicated first; input self-loops are dropped so the
//! augmentation adds exactly one loop per node. Isolated nodes therefore get
//! degree 1 and no division by zero can occur.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// An undirected graph over nodes `0..num_nodes`.
///
/// Construction canonicalizes the edge list: both directions of every edge are
/// kept exactly once, self-loops are removed, and edges are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Canonicalize `edges` over `num_nodes` nodes. Edges may appear in any
    /// direction, repeatedly, and with self-loops; the stored form is the
    /// deduplicated symmetric closure without loops.
    pub fn new(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::EmptyGraph);
        }
        for &(src, dst) in edges {
            if src >= num_nodes || dst >= num_nodes {
                return Err(Error::NodeOutOfRange {
                    src,
                    dst,
                    num_nodes,
                });
            }
        }
        let mut canonical: Vec<(usize, usize)> = edges
            .iter()
            .filter(|(u, v)| u != v)
            .flat_map(|&(u, v)| [(u, v), (v, u)])
            .collect();
        canonical.sort_unstable();
        canonical.dedup();
        Ok(Self {
            num_nodes,
            edges: canonical,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Directed edge pairs of the symmetric closure (each undirected edge twice).
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Number of undirected edges (each counted once).
    pub fn num_undirected_edges(&self) -> usize {
        self.edges.len() / 2
    }

    /// Relabel nodes so that new node `i` is old node `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_nodes {
            return Err(Error::InvalidParameter {
                name: "perm",
                detail: format!("length {} for {} nodes", perm.len(), self.num_nodes),
            });
        }
        let mut inverse = vec![0usize; self.num_nodes];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(u, v)| (inverse[u], inverse[v]))
            .collect();
        Self::new(self.num_nodes, &edges)
    }
}

/// Compressed sparse row matrix with f64 entries.
///
/// Column indices are strictly increasing within each row. Instances are
/// immutable after construction and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        vals: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != n_rows + 1
            || row_ptr[n_rows] != vals.len()
            || col_idx.len() != vals.len()
            || row_ptr.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::DimensionMismatch {
                op: "SparseMatrix::new",
                detail: "inconsistent CSR arrays".into(),
            });
        }
        for r in 0..n_rows {
            let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= n_cols) {
                return Err(Error::DimensionMismatch {
                    op: "SparseMatrix::new",
                    detail: format!("row {r} columns not strictly increasing in [0, {n_cols})"),
                });
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            vals,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn vals(&self) -> &[f64] {
        &self.vals
    }

    /// Entry (i, j) by binary search within row i.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(pos) => self.vals[self.row_ptr[i] + pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.set(i, self.col_idx[k], self.vals[k]);
            }
        }
        out
    }

    /// Largest deviation |a_ij - a_ji| over stored entries; 0 for symmetric.
    pub fn symmetry_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                worst = worst.max((self.vals[k] - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn check_symmetric(&self, tol: f64) -> Result<()> {
        if self.n_rows != self.n_cols {
            return Err(Error::Asymmetric {
                row: 0,
                col: 0,
                deviation: f64::INFINITY,
            });
        }
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let dev = (self.vals[k] - self.get(j, i)).abs();
                if dev > tol {
                    return Err(Error::Asymmetric {
                        row: i,
                        col: j,
                        deviation: dev,
                    });
                }
            }
        }
        Ok(())
    }

    /// Sparse-dense product `self * x`, row-sequential and deterministic.
    pub fn spmm(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_cols != x.rows() {
            return Err(Error::DimensionMismatch {
                op: "spmm",
                detail: format!(
                    "{}x{} * {}x{}",
                    self.n_rows,
                    self.n_cols,
                    x.rows(),
                    x.cols()
                ),
            });
        }
        let cols = x.cols();
        let mut out = DenseMatrix::zeros(self.n_rows, cols);
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = self.vals[k];
                let src = x.row(self.col_idx[k]);
                let dst = &mut out.as_mut_slice()[i * cols..(i + 1) * cols];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    /// Sparse-vector product `self * x`.
    pub fn spmv(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n_rows {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            out[i] = acc;
        }
    }

    /// Transposed product `self^T * x`, scattering row contributions in the
    /// same row-major entry order as [`SparseMatrix::spmm`]; for a symmetric
    /// matrix the two agree.
    pub fn spmm_t(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_rows != x.rows() {
            return Err(Error::DimensionMismatch {
                op: "spmm_t",
                detail: format!(
                    "{}x{}^T * {}x{}",
                    self.n_rows,
                    self.n_cols,
                    x.rows(),
                    x.cols()
                ),
            });
        }
        let cols = x.cols();
        let mut out = DenseMatrix::zeros(self.n_cols, cols);
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = self.vals[k];
                let j = self.col_idx[k];
                for c in 0..cols {
                    let v = out.get(j, c) + a * x.get(i, c);
                    out.set(j, c, v);
                }
            }
        }
        Ok(out)
    }
}

/// Per-layer generalized-Pagerank coefficient vectors, one simplex vector of
/// length K per convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GprCoefficients {
    layers: Vec<Vec<f64>>,
}

impl GprCoefficients {
    const SIMPLEX_TOL: f64 = 1e-9;

    /// Validate that every layer vector is entrywise nonnegative and sums to
    /// one within 1e-9.
    pub fn new(layers: Vec<Vec<f64>>) -> Result<Self> {
        if layers.is_empty() || layers.iter().any(Vec::is_empty) {
            return Err(Error::InvalidOrder);
        }
        let order = layers[0].len();
        for (l, mu) in layers.iter().enumerate() {
            if mu.len() != order {
                return Err(Error::InvalidParameter {
                    name: "coefficients",
                    detail: format!("layer {} has order {}, expected {order}", l + 1, mu.len()),
                });
            }
            if mu.iter().any(|&c| c < 0.0 || !c.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "coefficients",
                    detail: format!("layer {} has a negative or non-finite entry", l + 1),
                });
            }
            let sum: f64 = mu.iter().sum();
            if (sum - 1.0).abs() > Self::SIMPLEX_TOL {
                return Err(Error::InvalidParameter {
                    name: "coefficients",
                    detail: format!("layer {} sums to {sum}, expected 1", l + 1),
                });
            }
        }
        Ok(Self { layers })
    }

    /// The same vertex vector e_k at every layer.
    pub fn vertex(num_layers: usize, order: usize, k: usize) -> Result<Self> {
        if k >= order {
            return Err(Error::InvalidParameter {
                name: "coefficients",
                detail: format!("vertex index {k} outside order {order}"),
            });
        }
        let mut mu = vec![0.0; order];
        mu[k] = 1.0;
        Self::new(vec![mu; num_layers])
    }

    /// The uniform vector 1/K at every layer.
    pub fn uniform(num_layers: usize, order: usize) -> Result<Self> {
        Self::new(vec![vec![1.0 / order as f64; order]; num_layers])
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn order(&self) -> usize {
        self.layers[0].len()
    }

    pub fn layer(&self, l: usize) -> &[f64] {
        &self.layers[l]
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.layers
    }
}

/// Symmetric normalized adjacency D^{-1/2} (A + I) D^{-1/2} of a graph.
///
/// Exactly one self-loop per node is present regardless of the input edge
/// list. Every stored entry is in (0, 1] and the spectrum lies in [-1, 1].
pub fn normalize_adjacency(graph: &Graph) -> SparseMatrix {
    let n = graph.num_nodes();
    // Degree of A + I: one self-loop plus the symmetric neighbor count.
    let mut degree = vec![1usize; n];
    for &(u, _) in graph.edges() {
        degree[u] += 1;
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|&d| 1.0 / (d as f64).sqrt()).collect();

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(graph.edges().len() + n);
    let mut vals = Vec::with_capacity(graph.edges().len() + n);
    row_ptr.push(0);

    let mut edge_at = 0usize;
    for u in 0..n {
        let mut self_loop_emitted = false;
        while edge_at < graph.edges().len() && graph.edges()[edge_at].0 == u {
            let v = graph.edges()[edge_at].1;
            if !self_loop_emitted && v > u {
                col_idx.push(u);
                vals.push(inv_sqrt[u] * inv_sqrt[u]);
                self_loop_emitted = true;
            }
            col_idx.push(v);
            vals.push(inv_sqrt[u] * inv_sqrt[v]);
            edge_at += 1;
        }
        if !self_loop_emitted {
            col_idx.push(u);
            vals.push(inv_sqrt[u] * inv_sqrt[u]);
        }
        row_ptr.push(col_idx.len());
    }

    // Canonical edges are sorted, so each row's columns are strictly
    // increasing by construction; new() re-validates.
    SparseMatrix::new(n, n, row_ptr, col_idx, vals)
        .expect("normalized adjacency CSR is well-formed by construction")
}

/// Apply the generalized Pagerank sum_k mu_k A^k to `x` by iterated products;
/// `A^k` is never materialized. The k = 0 term is the identity.
pub fn apply_gpr(a: &SparseMatrix, mu: &[f64], x: &DenseMatrix) -> Result<DenseMatrix> {
    let powers = gpr_powers(a, mu.len(), x)?;
    Ok(gpr_combine(mu, &powers))
}

/// The iterates x, Ax, ..., A^{K-1}x needed by a GPR of order `order`.
pub(crate) fn gpr_powers(
    a: &SparseMatrix,
    order: usize,
    x: &DenseMatrix,
) -> Result<Vec<DenseMatrix>> {
    if order == 0 {
        return Err(Error::InvalidOrder);
    }
    let mut powers = Vec::with_capacity(order);
    powers.push(x.clone());
    for _ in 1..order {
        let next = a.spmm(powers.last().expect("non-empty"))?;
        powers.push(next);
    }
    Ok(powers)
}

/// Combine precomputed iterates with coefficients. Zero coefficients are
/// skipped and a single unit coefficient returns its iterate unchanged, so
/// vertex coefficient vectors reproduce the plain paths bit for bit.
pub(crate) fn gpr_combine(mu: &[f64], powers: &[DenseMatrix]) -> DenseMatrix {
    let active: Vec<usize> = (0..mu.len()).filter(|&k| mu[k] != 0.0).collect();
    if active.len() == 1 && mu[active[0]] == 1.0 {
        return powers[active[0]].clone();
    }
    let mut out = DenseMatrix::zeros(powers[0].rows(), powers[0].cols());
    for &k in &active {
        out.add_scaled_assign(&powers[k], mu[k])
            .expect("gpr iterates share one shape");
    }
    out
}
