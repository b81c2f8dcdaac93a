use ndarray::Array2;

use super::{canonical_sign, SymMatrix};
use crate::error::{Error, Result};

/// Sweep budget for the cyclic Jacobi method.
pub const MAX_SWEEPS: usize = 50;

/// Eigenpairs of a symmetric matrix.
///
/// `values` are non-decreasing; column `k` of `vectors` pairs with
/// `values[k]`, has unit norm and its first clearly nonzero entry positive.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
}

impl EigenDecomposition {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k).to_vec()
    }

    /// `Q Λ Qᵀ`.
    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.vectors * &ndarray::ArrayView1::from(&self.values[..]);
        scaled.dot(&self.vectors.t())
    }
}

#[inline]
fn rotate(a: &mut [f64], n: usize, (i, j): (usize, usize), (k, l): (usize, usize), s: f64, tau: f64) {
    let g = a[i * n + j];
    let h = a[k * n + l];
    a[i * n + j] = g - s * (h + g * tau);
    a[k * n + l] = h + s * (g - h * tau);
}

/// Cyclic Jacobi eigendecomposition.
///
/// Rotations sweep the strict upper triangle row by row. After the fourth
/// sweep, off-diagonal entries that no longer change either diagonal entry in
/// floating point are zeroed outright; convergence is declared when the whole
/// off-diagonal is exactly zero.
pub fn eig_sym(m: &SymMatrix) -> Result<EigenDecomposition> {
    let n = m.n();
    let mut a: Vec<f64> = m.view().iter().copied().collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let mut d: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let mut b = d.clone();
    let mut z = vec![0.0; n];

    let mut converged = n <= 1;
    let mut off_norm = 0.0;
    for sweep in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut sm = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                sm += a[p * n + q].abs();
            }
        }
        if sm == 0.0 {
            converged = true;
            break;
        }
        let thresh = if sweep < 3 { 0.2 * sm / (n * n) as f64 } else { 0.0 };
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let g = 100.0 * apq.abs();
                if sweep > 3 && d[p].abs() + g == d[p].abs() && d[q].abs() + g == d[q].abs() {
                    a[p * n + q] = 0.0;
                    continue;
                }
                if apq.abs() <= thresh {
                    continue;
                }
                let h = d[q] - d[p];
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let h = t * apq;
                z[p] -= h;
                z[q] += h;
                d[p] -= h;
                d[q] += h;
                a[p * n + q] = 0.0;
                for j in 0..p {
                    rotate(&mut a, n, (j, p), (j, q), s, tau);
                }
                for j in (p + 1)..q {
                    rotate(&mut a, n, (p, j), (j, q), s, tau);
                }
                for j in (q + 1)..n {
                    rotate(&mut a, n, (p, j), (q, j), s, tau);
                }
                for j in 0..n {
                    rotate(&mut v, n, (j, p), (j, q), s, tau);
                }
            }
        }
        for p in 0..n {
            b[p] += z[p];
            d[p] = b[p];
            z[p] = 0.0;
        }
        off_norm = sm;
    }
    if !converged {
        let mut sm = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                sm += a[p * n + q].abs();
            }
        }
        if sm != 0.0 {
            return Err(Error::ConvergenceFailure { sweeps: MAX_SWEEPS, off_norm: off_norm.max(sm) });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (k, &src) in order.iter().enumerate() {
        let mut col: Vec<f64> = (0..n).map(|r| v[r * n + src]).collect();
        canonical_sign(&mut col);
        for (r, x) in col.into_iter().enumerate() {
            vectors[[r, k]] = x;
        }
    }
    Ok(EigenDecomposition { values, vectors })
}
