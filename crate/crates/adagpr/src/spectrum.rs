//! Eigenvalue spectrum of the normalized adjacency.
//!
//! Dense mode reduces the matrix to tridiagonal form with Householder
//! reflections and extracts every eigenvalue by Sturm-sequence bisection.
//! For graphs too large to densify, a Lanczos iteration with full
//! reorthogonalization yields a truncated set of Ritz values; the missing
//! eigenvalues are recorded as zeros so downstream spectral sums stay
//! conservative.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::SparseMatrix;

/// Node count above which `SpectrumMode::Auto` switches to Lanczos.
pub const DENSE_LIMIT: usize = 4096;

/// Lanczos steps used by `SpectrumMode::Auto` on large graphs.
pub const AUTO_LANCZOS_STEPS: usize = 512;

const SYMMETRY_TOL: f64 = 1e-12;
const RANGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMode {
    Dense,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMethod {
    Dense,
    LanczosTruncated,
}

/// All `n` eigenvalues of a normalized adjacency, sorted descending.
///
/// In Lanczos mode only `truncation_count` entries are computed Ritz values;
/// the rest are zero placeholders.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    method: SpectrumMethod,
    truncation_count: Option<usize>,
}

impl Spectrum {
    fn new(
        mut eigenvalues: Vec<f64>,
        method: SpectrumMethod,
        truncation_count: Option<usize>,
    ) -> Result<Self> {
        for &v in &eigenvalues {
            if !v.is_finite() || v.abs() > 1.0 + RANGE_EPS {
                return Err(Error::NonFinite {
                    context: "eigenvalue outside [-1, 1]",
                });
            }
        }
        eigenvalues.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
        Ok(Self {
            eigenvalues,
            method,
            truncation_count,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn method(&self) -> SpectrumMethod {
        self.method
    }

    pub fn truncation_count(&self) -> Option<usize> {
        self.truncation_count
    }

    pub fn is_truncated(&self) -> bool {
        self.truncation_count.is_some()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Eigenvalue spectrum of a symmetric CSR matrix.
///
/// `Auto` uses the dense path up to [`DENSE_LIMIT`] nodes and Lanczos with
/// [`AUTO_LANCZOS_STEPS`] steps beyond that. Asymmetric input (beyond 1e-12)
/// is rejected.
pub fn compute_spectrum(a: &SparseMatrix, mode: SpectrumMode) -> Result<Spectrum> {
    a.check_symmetric(SYMMETRY_TOL)?;
    match mode {
        SpectrumMode::Dense => dense_spectrum(a),
        SpectrumMode::Auto => {
            if a.n_rows() <= DENSE_LIMIT {
                dense_spectrum(a)
            } else {
                lanczos_spectrum(a, AUTO_LANCZOS_STEPS, 0)
            }
        }
    }
}

fn dense_spectrum(a: &SparseMatrix) -> Result<Spectrum> {
    let dense = a.to_dense();
    let n = a.n_rows();
    let mut work: Vec<Vec<f64>> = (0..n).map(|i| dense.row(i).to_vec()).collect();
    let (d, e) = tridiagonalize(&mut work);
    let eigenvalues = tridiag_eigenvalues(&d, &e);
    Spectrum::new(eigenvalues, SpectrumMethod::Dense, None)
}

/// Lanczos iteration with full reorthogonalization; returns `steps` Ritz
/// values (fewer on early breakdown) padded with zeros to the full dimension.
pub fn lanczos_spectrum(a: &SparseMatrix, steps: usize, seed: u64) -> Result<Spectrum> {
    a.check_symmetric(SYMMETRY_TOL)?;
    let n = a.n_rows();
    let m = steps.max(1).min(n);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let norm = dot(&v, &v).sqrt();
    for x in &mut v {
        *x /= norm;
    }

    let mut alpha = Vec::with_capacity(m);
    let mut beta = Vec::new();
    let mut basis: Vec<Vec<f64>> = vec![v.clone()];
    let mut w = vec![0.0; n];

    for j in 0..m {
        a.spmv(&v, &mut w);
        let a_j = dot(&w, &v);
        alpha.push(a_j);
        // Orthogonalize against every kept basis vector; two passes keep the
        // basis orthogonal to working precision.
        for _ in 0..2 {
            for prev in &basis {
                let proj = dot(&w, prev);
                for (wi, pi) in w.iter_mut().zip(prev) {
                    *wi -= proj * pi;
                }
            }
        }
        let b_next = dot(&w, &w).sqrt();
        if j + 1 == m || b_next < 1e-14 {
            break;
        }
        beta.push(b_next);
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / b_next;
        }
        basis.push(v.clone());
    }

    let k = alpha.len();
    let mut eigenvalues = tridiag_eigenvalues(&alpha, &beta[..k - 1]);
    // Ritz values are Rayleigh quotients of the original matrix, but the
    // bisection midpoint can overshoot the unit interval by rounding.
    for ev in &mut eigenvalues {
        *ev = ev.clamp(-1.0 - RANGE_EPS / 2.0, 1.0 + RANGE_EPS / 2.0);
    }
    eigenvalues.resize(n, 0.0);
    Spectrum::new(eigenvalues, SpectrumMethod::LanczosTruncated, Some(k))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Householder reduction of a symmetric matrix (given as rows) to
/// tridiagonal form; returns (diagonal, subdiagonal).
fn tridiagonalize(a: &mut [Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    let mut e = vec![0.0; n.saturating_sub(1)];

    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let mut x = vec![0.0; m];
        for i in 0..m {
            x[i] = a[k + 1 + i][k];
        }
        let xnorm = dot(&x, &x).sqrt();
        if xnorm == 0.0 {
            e[k] = 0.0;
            continue;
        }
        // Reflect x onto alpha * e1 with the sign chosen to avoid cancellation.
        let alpha = if x[0] >= 0.0 { -xnorm } else { xnorm };
        let mut v = x;
        v[0] -= alpha;
        let vnorm_sq = dot(&v, &v);
        if vnorm_sq == 0.0 {
            e[k] = alpha;
            continue;
        }
        let scale = 2.0 / vnorm_sq;

        // p = scale * A22 * v over the trailing (m x m) block.
        let mut p = vec![0.0; m];
        for i in 0..m {
            let mut acc = 0.0;
            for j in 0..m {
                acc += a[k + 1 + i][k + 1 + j] * v[j];
            }
            p[i] = scale * acc;
        }
        let correction = 0.5 * scale * dot(&p, &v);
        let w: Vec<f64> = p
            .iter()
            .zip(&v)
            .map(|(pi, vi)| pi - correction * vi)
            .collect();

        // A22 -= v w^T + w v^T (symmetric rank-2 update).
        for i in 0..m {
            for j in 0..m {
                a[k + 1 + i][k + 1 + j] -= v[i] * w[j] + w[i] * v[j];
            }
        }

        e[k] = alpha;
        a[k + 1][k] = alpha;
        a[k][k + 1] = alpha;
        for i in k + 2..n {
            a[i][k] = 0.0;
            a[k][i] = 0.0;
        }
    }
    if n >= 2 {
        e[n - 2] = a[n - 1][n - 2];
    }
    let d: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    (d, e)
}

/// All eigenvalues of a symmetric tridiagonal matrix, ascending, by
/// Sturm-sequence bisection.
fn tridiag_eigenvalues(d: &[f64], e: &[f64]) -> Vec<f64> {
    let n = d.len();
    if n == 0 {
        return Vec::new();
    }
    // Gershgorin bounds.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut radius = 0.0;
        if i > 0 {
            radius += e[i - 1].abs();
        }
        if i + 1 < n {
            radius += e[i].abs();
        }
        lo = lo.min(d[i] - radius);
        hi = hi.max(d[i] + radius);
    }
    let pad = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    lo -= pad;
    hi += pad;

    let e_sq: Vec<f64> = e.iter().map(|x| x * x).collect();
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..n {
            q = if i == 0 {
                d[0] - x
            } else {
                d[i] - x - e_sq[i - 1] / q
            };
            if q == 0.0 {
                q = f64::MIN_POSITIVE;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };

    (0..n)
        .map(|j| {
            // Smallest x with at least j+1 eigenvalues below it.
            let (mut a, mut b) = (lo, hi);
            for _ in 0..120 {
                let mid = 0.5 * (a + b);
                if b - a <= f64::EPSILON * mid.abs().max(1.0) {
                    break;
                }
                if count_below(mid) > j {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, Graph};

    #[test]
    fn two_node_edge_spectrum() {
        let g = Graph::new(2, &[(0, 1)]).unwrap();
        let a = normalize_adjacency(&g);
        let s = compute_spectrum(&a, SpectrumMode::Dense).unwrap();
        assert!((s.eigenvalues()[0] - 1.0).abs() < 1e-12);
        assert!(s.eigenvalues()[1].abs() < 1e-12);
        assert_eq!(s.method(), SpectrumMethod::Dense);
        assert!(!s.is_truncated());
    }

    #[test]
    fn single_node_spectrum() {
        let g = Graph::new(1, &[]).unwrap();
        let a = normalize_adjacency(&g);
        let s = compute_spectrum(&a, SpectrumMode::Auto).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s.eigenvalues()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn path3_matches_characteristic_roots() {
        // For the 3-path, trace and determinant give the quadratic for the
        // sub-leading eigenvalues: t^2 - t/3 - 1/12 = 0.
        let g = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let a = normalize_adjacency(&g);
        let s = compute_spectrum(&a, SpectrumMode::Dense).unwrap();
        let disc = (1.0f64 / 9.0 + 4.0 / 12.0).sqrt();
        let root_hi = (1.0 / 3.0 + disc) / 2.0;
        let root_lo = (1.0 / 3.0 - disc) / 2.0;
        let expected = [1.0, root_hi, root_lo];
        for (got, want) in s.eigenvalues().iter().zip(expected) {
            assert!((got - want).abs() < 1e-10, "got {got}, want {want}");
        }
        assert!(s.eigenvalues().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn cycle_spectrum_is_cosine_family() {
        // Every node of a cycle has augmented degree 3, so the normalized
        // adjacency is (A + I)/3 with eigenvalues (1 + 2 cos(2 pi j / n)) / 3.
        let n = 7;
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let g = Graph::new(n, &edges).unwrap();
        let a = normalize_adjacency(&g);
        let s = compute_spectrum(&a, SpectrumMode::Dense).unwrap();
        let mut expected: Vec<f64> = (0..n)
            .map(|j| (1.0 + 2.0 * (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos()) / 3.0)
            .collect();
        expected.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (got, want) in s.eigenvalues().iter().zip(expected) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn disconnected_components_give_repeated_unit_eigenvalues() {
        // Three disjoint triangles: lambda = 1 with multiplicity 3.
        let edges: Vec<(usize, usize)> = (0..3)
            .flat_map(|c| {
                let base = 3 * c;
                [(base, base + 1), (base + 1, base + 2), (base + 2, base)]
            })
            .collect();
        let g = Graph::new(9, &edges).unwrap();
        let a = normalize_adjacency(&g);
        let s = compute_spectrum(&a, SpectrumMode::Dense).unwrap();
        for i in 0..3 {
            assert!(
                (s.eigenvalues()[i] - 1.0).abs() < 1e-10,
                "eigenvalue {i} = {}",
                s.eigenvalues()[i]
            );
        }
        assert!(s.eigenvalues()[3] < 1.0 - 1e-6);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let m = SparseMatrix::new(2, 2, vec![0, 1, 2], vec![1, 0], vec![1.0, 0.5]).unwrap();
        assert!(matches!(
            compute_spectrum(&m, SpectrumMode::Dense),
            Err(Error::Asymmetric { .. })
        ));
    }

    #[test]
    fn leading_eigenvalue_is_one() {
        let g = Graph::new(
            9,
            &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (2, 3), (6, 7), (7, 8), (5, 6)],
        )
        .unwrap();
        let a = normalize_adjacency(&g);
        let s = compute_spectrum(&a, SpectrumMode::Dense).unwrap();
        assert!((s.eigenvalues()[0] - 1.0).abs() < 1e-9);
        assert!(s.eigenvalues().iter().all(|v| v.abs() <= 1.0 + 1e-9));
    }

    #[test]
    fn lanczos_extremes_match_dense() {
        let edges: Vec<(usize, usize)> = (0..40)
            .flat_map(|i| {
                let mut out = vec![(i, (i + 1) % 40)];
                if i % 3 == 0 {
                    out.push((i, (i + 7) % 40));
                }
                out
            })
            .collect();
        let g = Graph::new(40, &edges).unwrap();
        let a = normalize_adjacency(&g);
        let dense = compute_spectrum(&a, SpectrumMode::Dense).unwrap();
        let lanczos = lanczos_spectrum(&a, 40, 7).unwrap();
        assert_eq!(lanczos.method(), SpectrumMethod::LanczosTruncated);
        let d = dense.eigenvalues();
        let l = lanczos.eigenvalues();
        assert!((d[0] - l[0]).abs() < 1e-8, "largest: {} vs {}", d[0], l[0]);
        assert!(
            (d[39] - l[39]).abs() < 1e-8,
            "smallest: {} vs {}",
            d[39],
            l[39]
        );
    }

    #[test]
    fn lanczos_truncation_pads_with_zeros() {
        let edges: Vec<(usize, usize)> = (0..30).map(|i| (i, (i + 1) % 30)).collect();
        let g = Graph::new(30, &edges).unwrap();
        let a = normalize_adjacency(&g);
        let s = lanczos_spectrum(&a, 8, 1).unwrap();
        assert_eq!(s.len(), 30);
        assert_eq!(s.truncation_count(), Some(8));
        let zeros = s.eigenvalues().iter().filter(|v| **v == 0.0).count();
        assert!(zeros >= 22);
    }
}
