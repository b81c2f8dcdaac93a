//! Dense symmetric linear algebra.
//!
//! Everything here works on small dense matrices (n ≤ 128): batch similarity
//! matrices, their Laplacians and the blocks cut out of them. The eigensolver
//! is cyclic Jacobi, which is slow for large n but deterministic and accurate
//! to a few ulps on the matrices we care about.

mod eigen;
pub mod io;

use std::ops::Range;

use ndarray::{s, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

pub use eigen::{eig_sym, EigenDecomposition, MAX_SWEEPS};

/// Absolute symmetry tolerance, scaled by `max(1, max|a_ij|)`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A square, finite, exactly symmetric matrix.
///
/// Construction validates symmetry up to [`SYMMETRY_TOL`] and then mirrors the
/// averaged off-diagonal so downstream code can rely on `a[i][j] == a[j][i]`
/// bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    data: Array2<f64>,
}

impl SymMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (rows, cols) = data.dim();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        check_finite(data.view())?;
        let scale = data.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let mut data = data;
        for i in 0..rows {
            for j in (i + 1)..rows {
                let (a, b) = (data[[i, j]], data[[j, i]]);
                let diff = (a - b).abs();
                if diff > SYMMETRY_TOL * scale {
                    return Err(Error::SymmetryViolation { i, j, diff });
                }
                let avg = 0.5 * (a + b);
                data[[i, j]] = avg;
                data[[j, i]] = avg;
            }
        }
        Ok(Self { data })
    }

    /// Builds from the upper triangle of `f(i, j)` (i ≤ j), mirrored.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[[i, j]] = v;
                data[[j, i]] = v;
            }
        }
        Self { data }
    }

    pub fn identity(n: usize) -> Self {
        Self { data: Array2::eye(n) }
    }

    pub fn zeros(n: usize) -> Self {
        Self { data: Array2::zeros((n, n)) }
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[[i, j]]
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { data: &self.data * c }
    }

    /// Sum of two symmetric matrices of equal size.
    pub fn plus(&self, other: &SymMatrix) -> Result<Self> {
        if other.n() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: other.n() });
        }
        Ok(Self { data: &self.data + &other.data })
    }

    /// `self + shift·I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut data = self.data.clone();
        data.diag_mut().mapv_inplace(|d| d + shift);
        Self { data }
    }

    pub fn trace(&self) -> f64 {
        self.data.diag().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Principal sub-matrix on `range` (rows and columns).
    pub fn principal_block(&self, range: Range<usize>) -> SymMatrix {
        Self { data: self.data.slice(s![range.clone(), range]).to_owned() }
    }

    /// Principal sub-matrix on an arbitrary index set, in the given order.
    pub fn select(&self, indices: &[usize]) -> SymMatrix {
        Self::from_fn(indices.len(), |a, b| self.data[[indices[a], indices[b]]])
    }

    /// Rectangular block `rows × cols`.
    pub fn block(&self, rows: Range<usize>, cols: Range<usize>) -> Array2<f64> {
        self.data.slice(s![rows, cols]).to_owned()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.data.dot(&ArrayView1::from(x)).to_vec()
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let x = ArrayView1::from(x);
        x.dot(&self.data.dot(&x))
    }
}

pub(crate) fn check_finite(a: ArrayView2<'_, f64>) -> Result<()> {
    for ((row, col), v) in a.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row, col });
        }
    }
    Ok(())
}

/// Graph Laplacian `diag(rowsums(S)) − S`.
///
/// The diagonal is accumulated from off-diagonal entries only, so rows sum to
/// zero up to a single rounding per entry regardless of `S`'s diagonal.
pub fn laplacian(s: &SymMatrix) -> SymMatrix {
    let n = s.n();
    let mut data = -&s.data;
    for i in 0..n {
        let degree: f64 = (0..n).filter(|&j| j != i).map(|j| s.data[[i, j]]).sum();
        data[[i, i]] = degree;
    }
    SymMatrix { data }
}

/// Default "numerically zero" eigenvalue threshold: `1e-8 · n · max|L|`.
pub fn default_zero_tol(l: &SymMatrix) -> f64 {
    1e-8 * l.n() as f64 * l.max_abs()
}

/// Flips `v` so its first clearly nonzero entry is positive.
pub(crate) fn canonical_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return;
    }
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-10 * scale) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Eigenvector of the smallest eigenvalue exceeding `zero_tol`.
///
/// `zero_tol` defaults to [`default_zero_tol`]. Fails with
/// [`Error::DisconnectedGraph`] when two or more eigenvalues are numerically
/// zero and with [`Error::DegenerateFiedler`] when the Fiedler eigenvalue is
/// repeated. The result has unit norm and its first nonzero entry positive.
pub fn fiedler(l: &SymMatrix, zero_tol: Option<f64>) -> Result<Vec<f64>> {
    let zero_tol = zero_tol.unwrap_or_else(|| default_zero_tol(l));
    let eig = eig_sym(l)?;
    let idx = eig.values.iter().position(|&v| v > zero_tol);
    let Some(idx) = idx else {
        return Err(Error::DisconnectedGraph { zero_count: l.n(), zero_tol });
    };
    if idx >= 2 {
        return Err(Error::DisconnectedGraph { zero_count: idx, zero_tol });
    }
    if let Some(&next) = eig.values.get(idx + 1) {
        let gap = next - eig.values[idx];
        if gap <= zero_tol.max(1e-12 * eig.values[l.n() - 1].abs()) {
            return Err(Error::DegenerateFiedler { gap });
        }
    }
    let mut v = eig.vectors.column(idx).to_vec();
    canonical_sign(&mut v);
    Ok(v)
}

/// Gram matrix of the thinner side: `BᵀB` when `B` is tall, `BBᵀ` when wide.
fn thin_gram(b: ArrayView2<'_, f64>) -> SymMatrix {
    let (m, n) = b.dim();
    let g = if m >= n { b.t().dot(&b) } else { b.dot(&b.t()) };
    let k = g.nrows();
    SymMatrix::from_fn(k, |i, j| g[[i, j]])
}

fn gram_extremes(b: ArrayView2<'_, f64>) -> (f64, f64) {
    if b.is_empty() {
        return (0.0, 0.0);
    }
    let eig = eig_sym(&thin_gram(b)).expect("Jacobi converges on finite Gram matrices");
    (eig.values[0].max(0.0), eig.values[eig.values.len() - 1].max(0.0))
}

/// Smallest of the `min(m, n)` singular values of `B`.
pub fn min_singular(b: ArrayView2<'_, f64>) -> f64 {
    gram_extremes(b).0.sqrt()
}

/// Spectral norm `‖B‖₂`.
pub fn two_norm(b: ArrayView2<'_, f64>) -> f64 {
    gram_extremes(b).1.sqrt()
}

/// Maximum absolute row sum.
pub fn inf_norm(b: ArrayView2<'_, f64>) -> f64 {
    b.rows().into_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Maximum absolute column sum.
pub fn one_norm(b: ArrayView2<'_, f64>) -> f64 {
    inf_norm(b.t())
}

/// Lower Cholesky factor of `a`, or `None` if a pivot is not positive.
pub fn cholesky(a: &SymMatrix) -> Option<Array2<f64>> {
    let n = a.n();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut v = a.get(i, j);
            for k in 0..j {
                v -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = v / d;
        }
    }
    Some(l)
}

/// Pearson correlation; zero when either side has no spread.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
