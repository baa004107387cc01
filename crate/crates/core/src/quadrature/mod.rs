//! Gaussian quadrature from moments.
//!
//! The pipeline is: Hankel moment matrix, Cholesky factor `M = R'R`,
//! recurrence coefficients read off `R`, eigen-decomposition of the
//! resulting Jacobi matrix. Eigenvalues are the nodes and squared first
//! eigenvector components (times `m_0`) are the weights. The resulting
//! `N`-point rule integrates every polynomial of degree `<= 2N - 1` exactly
//! against the measure whose moments were supplied.
//!
//! Only the first `N` rows of `R` enter the Jacobi matrix, so the final
//! pivot `r_{N+1,N+1}` (the only place `m_{2N}` appears) is never formed.
//! This lets a measure with exactly `N` support points be recovered.

mod eigen;

pub use eigen::{tridiagonal_eigen, TridiagonalEigen, MAX_QL_ITERATIONS};

use crate::error::{Error, Result};
use crate::moments::mixture_moments;
use crate::moments::{
    sample_moments, standardize, AffineTransform, GaussianMixture, MomentSequence,
};
use crate::scalar::{compensated_sum, Field, Scalar};

/// Default cap on the number of nodes for data-driven discretization.
/// Beyond this the standardized Hankel matrix becomes badly conditioned
/// for typical sample sizes.
pub const DEFAULT_MAX_NODES: usize = 9;

/// Finite distribution: strictly increasing nodes with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> DiscreteDistribution<T> {
    pub fn new(nodes: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::invalid(
                "nodes and weights must be nonempty and of equal length",
            ));
        }
        if nodes.iter().chain(&weights).any(|x| !x.is_finite()) {
            return Err(Error::invalid("nodes and weights must be finite"));
        }
        if weights.iter().any(|&w| !(w > T::zero())) {
            return Err(Error::invalid("weights must be strictly positive"));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("nodes must be strictly increasing"));
        }
        Ok(Self { nodes, weights })
    }

    /// Sorts `(node, weight)` pairs by node before validating.
    pub fn from_pairs(mut pairs: Vec<(T, T)>) -> Result<Self> {
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let (nodes, weights) = pairs.into_iter().unzip();
        Self::new(nodes, weights)
    }

    pub fn point_mass(x: T) -> Result<Self> {
        Self::new(vec![x], vec![T::one()])
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn mass(&self) -> T {
        compensated_sum(self.weights.iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `sum_n w_n g(x_n)`.
    pub fn expectation<F: Fn(T) -> T>(&self, g: F) -> T {
        compensated_sum(self.iter().map(|(x, w)| w * g(x)))
    }

    /// `sum_n w_n x_n^k`.
    pub fn moment(&self, k: usize) -> T {
        self.expectation(|x| x.powi(k as i32))
    }

    /// Nodes mapped through `affine`, weights unchanged.
    pub fn mapped(&self, affine: &AffineTransform<T>) -> Result<Self> {
        Self::new(
            self.nodes.iter().map(|&z| affine.apply(z)).collect(),
            self.weights.clone(),
        )
    }
}

/// `sum_n w_n g(x_n)`.
pub fn expectation<T: Scalar, F: Fn(T) -> T>(dist: &DiscreteDistribution<T>, g: F) -> T {
    dist.expectation(g)
}

/// Recurrence coefficients of monic orthogonal polynomials: the symmetric
/// tridiagonal matrix with diagonal `alphas` and off-diagonal `betas`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiMatrix<T> {
    pub(crate) alphas: Vec<T>,
    pub(crate) betas: Vec<T>,
}

impl<T: Scalar> JacobiMatrix<T> {
    pub fn new(alphas: Vec<T>, betas: Vec<T>) -> Result<Self> {
        if alphas.is_empty() || betas.len() + 1 != alphas.len() {
            return Err(Error::invalid("Jacobi matrix needs N alphas and N-1 betas"));
        }
        if alphas.iter().chain(&betas).any(|x| !x.is_finite()) {
            return Err(Error::invalid("Jacobi coefficients must be finite"));
        }
        if betas.iter().any(|&b| !(b > T::zero())) {
            return Err(Error::invalid(
                "Jacobi off-diagonal entries must be positive",
            ));
        }
        Ok(Self { alphas, betas })
    }

    pub fn size(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[T] {
        &self.alphas
    }

    pub fn betas(&self) -> &[T] {
        &self.betas
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        let n = self.size();
        (0..n)
            .map(|i| {
                let mut acc = self.alphas[i] * v[i];
                if i > 0 {
                    acc = acc + self.betas[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    acc = acc + self.betas[i] * v[i + 1];
                }
                acc
            })
            .collect()
    }

    pub fn frobenius_norm(&self) -> T {
        let diag = self.alphas.iter().map(|&a| a * a);
        let off = self.betas.iter().map(|&b| T::lit(2.0) * b * b);
        compensated_sum(diag.chain(off)).sqrt()
    }
}

/// Upper-triangular Cholesky factor `R` with `M = R'R`.
///
/// A factor may be partial: only its first `rows` rows are computed. A
/// complete factor has `rows == dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor<T> {
    dim: usize,
    rows: usize,
    /// Row-major `dim x dim`; zero below the diagonal and in uncomputed rows.
    entries: Vec<T>,
}

impl<T: Scalar> CholeskyFactor<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn is_complete(&self) -> bool {
        self.rows == self.dim
    }

    /// Entry `r_{ij}` with 0-based indices.
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.dim + j]
    }

    /// `R'R`, meaningful for complete factors.
    pub fn reconstruct(&self) -> Vec<Vec<T>> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        compensated_sum((0..=i.min(j)).map(|k| self.get(k, i) * self.get(k, j)))
                    })
                    .collect()
            })
            .collect()
    }
}

/// `M_{ij} = m_{i+j}` (0-based) for an `(N+1) x (N+1)` matrix.
pub fn hankel_matrix<T: Scalar>(moments: &MomentSequence<T>, n: usize) -> Result<Vec<Vec<T>>> {
    moments.require_order(2 * n)?;
    Ok((0..=n)
        .map(|i| (0..=n).map(|j| moments[i + j]).collect())
        .collect())
}

/// Full Cholesky factorization of a symmetric positive definite matrix.
///
/// A pivot at or below `1e-12` times the largest diagonal entry (for `f64`)
/// is rejected with the 1-based pivot index.
pub fn cholesky<T: Scalar>(matrix: &[Vec<T>]) -> Result<CholeskyFactor<T>> {
    cholesky_rows(matrix, matrix.len())
}

/// Computes the first `rows` rows of the Cholesky factor. Only the leading
/// `rows x rows` block needs to be positive definite.
pub fn cholesky_rows<T: Scalar>(matrix: &[Vec<T>], rows: usize) -> Result<CholeskyFactor<T>> {
    let dim = matrix.len();
    if dim == 0 || matrix.iter().any(|row| row.len() != dim) {
        return Err(Error::invalid("Cholesky needs a nonempty square matrix"));
    }
    if rows == 0 || rows > dim {
        return Err(Error::invalid("requested Cholesky rows out of range"));
    }
    if matrix.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::invalid("matrix entries must be finite"));
    }
    let scale = (0..rows).fold(T::zero(), |acc, k| acc.max(matrix[k][k].abs()));
    let floor = <T as Field>::degeneracy_floor() * scale;

    let mut r = vec![T::zero(); dim * dim];
    for k in 0..rows {
        let pivot = matrix[k][k] - compensated_sum((0..k).map(|i| r[i * dim + k] * r[i * dim + k]));
        if !(pivot > floor) {
            return Err(Error::NotPositiveDefinite {
                pivot: k + 1,
                value: pivot.to_f64_lossy(),
            });
        }
        let rkk = pivot.sqrt();
        r[k * dim + k] = rkk;
        for j in (k + 1)..dim {
            let s = matrix[k][j] - compensated_sum((0..k).map(|i| r[i * dim + k] * r[i * dim + j]));
            r[k * dim + j] = s / rkk;
        }
    }
    Ok(CholeskyFactor {
        dim,
        rows,
        entries: r,
    })
}

/// Reads the `N x N` Jacobi matrix off the first `N` rows of `R`:
/// `alpha_1 = r_12 / r_11`,
/// `alpha_n = r_{n,n+1} / r_{nn} - r_{n-1,n} / r_{n-1,n-1}`,
/// `beta_n = r_{n+1,n+1} / r_{nn}`.
pub fn jacobi_from_cholesky<T: Scalar>(r: &CholeskyFactor<T>, n: usize) -> Result<JacobiMatrix<T>> {
    if n == 0 || r.dim() < n + 1 || r.rows() < n {
        return Err(Error::invalid(format!(
            "need {n} rows of an order-{} Cholesky factor",
            n + 1
        )));
    }
    let ratio = |k: usize| r.get(k, k + 1) / r.get(k, k);
    let mut alphas = Vec::with_capacity(n);
    alphas.push(ratio(0));
    for k in 1..n {
        alphas.push(ratio(k) - ratio(k - 1));
    }
    let betas = (0..n - 1)
        .map(|k| r.get(k + 1, k + 1) / r.get(k, k))
        .collect();
    JacobiMatrix::new(alphas, betas)
}

/// `N`-point Gaussian quadrature for the measure with the given moments.
pub fn golub_welsch<T: Scalar>(
    moments: &MomentSequence<T>,
    n: usize,
) -> Result<DiscreteDistribution<T>> {
    if n == 0 {
        return Err(Error::invalid("number of nodes must be at least 1"));
    }
    let hankel = hankel_matrix(moments, n)?;
    let factor = cholesky_rows(&hankel, n)?;
    let jacobi = jacobi_from_cholesky(&factor, n)?;
    let eig = tridiagonal_eigen(&jacobi)?;
    let m0 = moments.mass();
    let weights = eig.vectors.iter().map(|v| m0 * v[0] * v[0]).collect();
    DiscreteDistribution::new(eig.values, weights)
}

/// Data-driven discretization with the default node cap.
pub fn discretize_data<T: Scalar>(data: &[T], n: usize) -> Result<DiscreteDistribution<T>> {
    discretize_data_with(data, n, DEFAULT_MAX_NODES)
}

/// Standardizes the data, feeds sample moments up to order `2N` into
/// [`golub_welsch`], and maps the nodes back to data units. The result
/// matches the sample moments of orders `0..2N`.
pub fn discretize_data_with<T: Scalar>(
    data: &[T],
    n: usize,
    max_nodes: usize,
) -> Result<DiscreteDistribution<T>> {
    if n == 0 {
        return Err(Error::invalid("number of nodes must be at least 1"));
    }
    if n > max_nodes {
        return Err(Error::invalid(format!(
            "N = {n} exceeds the node cap of {max_nodes}"
        )));
    }
    let (affine, z) = match standardize(data) {
        Ok(ok) => ok,
        Err(Error::DegenerateData(_)) if n == 1 => {
            let (mean, _) = crate::moments::mean_and_std(data)?;
            return DiscreteDistribution::point_mass(mean);
        }
        Err(e) => return Err(e),
    };
    let moments = sample_moments(&z, 2 * n)?;
    golub_welsch(&moments, n)?.mapped(&affine)
}

/// Quadrature for a Gaussian mixture, computed on the standardized law.
///
/// When the law has fewer than `N` support points (zero-variance
/// components), the rule is reduced to the number of points the moment
/// matrix can resolve.
pub fn discretize_mixture<T: Scalar>(
    mix: &GaussianMixture<T>,
    n: usize,
) -> Result<DiscreteDistribution<T>> {
    if n == 0 {
        return Err(Error::invalid("number of nodes must be at least 1"));
    }
    let (affine, standardized) = match mix.standardized() {
        Ok(ok) => ok,
        Err(Error::DegenerateData(_)) => return DiscreteDistribution::point_mass(mix.mean()),
        Err(e) => return Err(e),
    };
    let moments = mixture_moments(&standardized, 2 * n)?;
    let mut nodes = n;
    loop {
        match golub_welsch(&moments, nodes) {
            Ok(dist) => return dist.mapped(&affine),
            Err(Error::NotPositiveDefinite { pivot, .. }) if pivot >= 2 && pivot - 1 < nodes => {
                nodes = pivot - 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// For each order `k`, `|sum_n w_n x_n^k - m_k| / ((1/I) sum_i |x_i|^k)`,
/// the moment mismatch scaled by the sample absolute moment.
pub fn moment_mismatch<T: Scalar>(
    dist: &DiscreteDistribution<T>,
    data: &[T],
    max_order: usize,
) -> Result<Vec<T>> {
    let target = sample_moments(data, max_order)?;
    let count = T::from_usize(data.len()).expect("length representable");
    Ok((0..=max_order)
        .map(|k| {
            let abs_moment = compensated_sum(data.iter().map(|x| x.abs().powi(k as i32))) / count;
            let err = (dist.moment(k) - target[k]).abs();
            err / abs_moment.max(T::min_positive_value())
        })
        .collect())
}
