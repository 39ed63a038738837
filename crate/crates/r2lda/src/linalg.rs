//! Dense symmetric-matrix eigendecomposition and the partitioned spectrum
//! view the regularization selectors consume.
//!
//! Eigenvalues are stored squared-scale (as eigenvalues of the covariance
//! itself, `d2`), sorted descending, with round-off negatives clamped to
//! zero. The square root `d` is derived elementwise where a factor of the
//! covariance square root is needed, which avoids any sign ambiguity.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold under which an eigenvalue is treated as zero.
pub const SPECTRUM_CLAMP_RATIO: f64 = 1e-12;

/// A real symmetric matrix. Construction symmetrizes the entries, so the
/// invariant `a[i][j] == a[j][i]` holds exactly in storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    entries: Array2<f64>,
}

impl SymMatrix {
    /// Builds a symmetric matrix from a square array, averaging `a` with its
    /// transpose. Fails on non-square shapes, empty matrices, or non-finite
    /// entries.
    pub fn new(a: Array2<f64>) -> Result<Self> {
        let (r, c) = a.dim();
        if r != c {
            return Err(Error::invalid(format!("matrix must be square, got {r}x{c}")));
        }
        if r == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        let mut entries = a;
        for i in 0..r {
            for j in (i + 1)..r {
                let s = 0.5 * (entries[[i, j]] + entries[[j, i]]);
                entries[[i, j]] = s;
                entries[[j, i]] = s;
            }
        }
        Ok(SymMatrix { entries })
    }

    /// The identity matrix of dimension `p`.
    pub fn identity(p: usize) -> Self {
        SymMatrix { entries: Array2::eye(p) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<f64> {
        self.entries
    }
}

/// Orthogonal eigendecomposition `A = U diag(d2) Uᵀ` of a symmetric matrix,
/// eigenvalues sorted descending and clamped to be nonnegative.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenDecomposition {
    u: Array2<f64>,
    d2: Array1<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.d2.len()
    }

    /// Eigenvector matrix; column `k` pairs with `d2()[k]`.
    pub fn u(&self) -> &Array2<f64> {
        &self.u
    }

    /// Eigenvalues, descending, all nonnegative.
    pub fn d2(&self) -> &Array1<f64> {
        &self.d2
    }

    /// Reassembles a decomposition from parts, re-validating shape only.
    /// Intended for deserialized model state.
    pub fn from_parts(u: Array2<f64>, d2: Array1<f64>) -> Result<Self> {
        let (r, c) = u.dim();
        if r != c || r != d2.len() || r == 0 {
            return Err(Error::invalid("eigendecomposition parts have mismatched shapes"));
        }
        Ok(EigenDecomposition { u, d2 })
    }

    /// Projects `y` onto the eigenbasis: returns `Uᵀ y`.
    pub fn project(&self, y: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if y.len() != self.dim() {
            return Err(Error::invalid(format!(
                "vector length {} does not match decomposition dimension {}",
                y.len(),
                self.dim()
            )));
        }
        Ok(self.u.t().dot(&y))
    }
}

/// The leading block of a decomposition: the `p1` most significant
/// eigenvalues, with `p1 = min(n, p)` chosen from the training sample count.
#[derive(Debug, Clone, Copy)]
pub struct PartitionedEig<'a> {
    parent: &'a EigenDecomposition,
    p1: usize,
}

impl<'a> PartitionedEig<'a> {
    pub fn parent(&self) -> &'a EigenDecomposition {
        self.parent
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    /// Number of discarded trailing eigenvalues, `p - p1`.
    pub fn p2(&self) -> usize {
        self.parent.dim() - self.p1
    }

    /// The significant eigenvalues: the leading `p1` entries of the parent
    /// spectrum.
    pub fn d2_sig(&self) -> &'a [f64] {
        &self.parent.d2.as_slice().expect("d2 is contiguous")[..self.p1]
    }
}

/// Eigendecomposition of a symmetric matrix with spectrum hygiene applied:
/// eigenvalues sorted descending (ties keeping original order) and clamped
/// via [`clamp_spectrum`].
pub fn sym_eig(a: &SymMatrix) -> Result<EigenDecomposition> {
    let p = a.dim();
    let m = DMatrix::from_fn(p, p, |i, j| a.entries[[i, j]]);
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::numeric(format!("symmetric eigensolver failed to converge for dim {p}")))?;

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("eigenvalues are finite")
    });

    let mut u = Array2::zeros((p, p));
    let mut d2 = Array1::zeros(p);
    for (dst, &src) in order.iter().enumerate() {
        d2[dst] = eig.eigenvalues[src];
        for r in 0..p {
            u[[r, dst]] = eig.eigenvectors[(r, src)];
        }
    }
    let d2 = clamp_spectrum(&d2)?;
    Ok(EigenDecomposition { u, d2 })
}

/// Zeroes every eigenvalue smaller than `1e-12` times the largest one.
/// Removes the tiny negative round-off values a PSD matrix can produce and
/// keeps the descending order intact.
pub fn clamp_spectrum(d2: &Array1<f64>) -> Result<Array1<f64>> {
    if d2.is_empty() {
        return Err(Error::invalid("cannot clamp an empty spectrum"));
    }
    let max = d2.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let threshold = SPECTRUM_CLAMP_RATIO * max.max(0.0);
    Ok(d2.mapv(|x| if x < threshold { 0.0 } else { x }))
}

/// Splits a decomposition at `p1 = min(n, p)`, keeping the significant block.
pub fn partition_eig(eig: &EigenDecomposition, n_samples: usize) -> Result<PartitionedEig<'_>> {
    if n_samples == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let p1 = n_samples.min(eig.dim());
    Ok(PartitionedEig { parent: eig, p1 })
}
