//! Symmetric eigendecomposition by the cyclic Jacobi rotation method.
//!
//! This is deliberately self-contained: the matrices fed into
//! [`crate::spectrum::decompose_gaussian`] are small covariance matrices, and
//! the classic Jacobi iteration is compact, numerically robust for symmetric
//! input, and produces orthonormal eigenvectors to machine precision.

/// Result of a symmetric eigendecomposition: `a = v * diag(values) * v^T`.
///
/// `vectors` is stored row-major; column `k` (`vectors[i * n + k]` for
/// `i = 0..n`) is the unit eigenvector paired with `values[k]`.
#[derive(Debug, Clone)]
pub(crate) struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
    pub n: usize,
}

impl SymmetricEigen {
    /// Column `k` as an owned vector.
    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.vectors[i * self.n + k]).collect()
    }
}

/// Decomposes a symmetric matrix (row-major, `n x n`) with cyclic Jacobi sweeps.
///
/// The caller is responsible for symmetry; only the upper triangle drives the
/// rotations, and the returned factors satisfy `a ~= v diag(w) v^T` to roughly
/// machine precision times the matrix norm.
pub(crate) fn jacobi_eigen(a_in: &[f64], n: usize) -> SymmetricEigen {
    assert_eq!(a_in.len(), n * n, "matrix storage must be n*n");
    let mut a = a_in.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n == 1 {
        return SymmetricEigen {
            values: vec![a[0]],
            vectors: v,
            n,
        };
    }

    let idx = |i: usize, j: usize| i * n + j;
    const MAX_SWEEPS: usize = 64;
    for sweep in 0..MAX_SWEEPS {
        // Off-diagonal Frobenius mass; convergence is quadratic once small.
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[idx(i, j)] * a[idx(i, j)];
            }
        }
        if off == 0.0 {
            break;
        }
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        if off.sqrt() <= f64::EPSILON * norm {
            break;
        }
        // During the first sweeps, rotate only entries above a shrinking
        // threshold so tiny elements do not trigger needless rotations.
        let thresh = if sweep < 3 {
            0.2 * off / (n * n) as f64
        } else {
            0.0
        };

        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = a[idx(p, q)];
                let scale = a[idx(p, p)].abs() + a[idx(q, q)].abs();
                // Entry already negligible against its diagonal: zero it.
                if apq.abs() <= f64::EPSILON * scale {
                    a[idx(p, q)] = 0.0;
                    a[idx(q, p)] = 0.0;
                    continue;
                }
                if apq * apq <= thresh {
                    continue;
                }
                let theta = (a[idx(q, q)] - a[idx(p, p)]) / (2.0 * apq);
                // tan of the rotation angle, stable for large |theta|.
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                let app = a[idx(p, p)];
                let aqq = a[idx(q, q)];
                a[idx(p, p)] = app - t * apq;
                a[idx(q, q)] = aqq + t * apq;
                a[idx(p, q)] = 0.0;
                a[idx(q, p)] = 0.0;
                for i in 0..n {
                    if i != p && i != q {
                        let aip = a[idx(i, p)];
                        let aiq = a[idx(i, q)];
                        a[idx(i, p)] = aip - s * (aiq + tau * aip);
                        a[idx(i, q)] = aiq + s * (aip - tau * aiq);
                        a[idx(p, i)] = a[idx(i, p)];
                        a[idx(q, i)] = a[idx(i, q)];
                    }
                }
                for i in 0..n {
                    let vip = v[idx(i, p)];
                    let viq = v[idx(i, q)];
                    v[idx(i, p)] = vip - s * (viq + tau * vip);
                    v[idx(i, q)] = viq + s * (vip - tau * viq);
                }
            }
        }
    }

    let values = (0..n).map(|i| a[idx(i, i)]).collect();
    SymmetricEigen {
        values,
        vectors: v,
        n,
    }
}
