//! Dense decomposition kernels: one-sided Jacobi SVD, cyclic Jacobi
//! symmetric eigensolver, and a Cholesky factorization. All are plain
//! loops over owned buffers, deterministic for fixed input.

use crate::scalar::Scalar;
use ndarray::{Array1, Array2};

/// Full SVD of a dense matrix via one-sided Jacobi applied to the tall
/// orientation. Returns `(u, sigma, v)` with `a = u * diag(sigma) * v^T`,
/// `sigma` nonincreasing, and `u`/`v` having `min(m, k)` orthonormal
/// columns (columns matching numerically zero singular values are
/// dropped by the caller, not here; they are returned as zeros).
pub(crate) fn jacobi_svd<S: Scalar>(a: &Array2<S>) -> (Array2<S>, Array1<S>, Array2<S>) {
    let (m, k) = a.dim();
    if m >= k {
        jacobi_svd_tall(a)
    } else {
        let at = a.t().to_owned();
        let (u, s, v) = jacobi_svd_tall(&at);
        (v, s, u)
    }
}

/// One-sided Jacobi on a tall matrix (m >= k): rotates column pairs of a
/// working copy until all pairs are orthogonal, accumulating the right
/// rotations. Column norms are the singular values.
fn jacobi_svd_tall<S: Scalar>(a: &Array2<S>) -> (Array2<S>, Array1<S>, Array2<S>) {
    let (m, k) = a.dim();
    debug_assert!(m >= k);
    // column-major working storage
    let mut cols: Vec<Vec<S>> = (0..k).map(|j| a.column(j).to_vec()).collect();
    let mut v: Vec<Vec<S>> = (0..k)
        .map(|j| {
            let mut e = vec![S::zero(); k];
            e[j] = S::one();
            e
        })
        .collect();

    let eps = S::epsilon() * S::cast(16.0);
    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for i in 0..k {
            for j in (i + 1)..k {
                let mut aa = S::zero();
                let mut bb = S::zero();
                let mut ab = S::zero();
                for r in 0..m {
                    let x = cols[i][r];
                    let y = cols[j][r];
                    aa += x * x;
                    bb += y * y;
                    ab += x * y;
                }
                if aa == S::zero() || bb == S::zero() {
                    continue;
                }
                if ab.abs() <= eps * (aa * bb).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (bb - aa) / (S::cast(2.0) * ab);
                let t = {
                    let s = if zeta >= S::zero() { S::one() } else { -S::one() };
                    s / (zeta.abs() + (S::one() + zeta * zeta).sqrt())
                };
                let c = S::one() / (S::one() + t * t).sqrt();
                let s = c * t;
                for r in 0..m {
                    let x = cols[i][r];
                    let y = cols[j][r];
                    cols[i][r] = c * x - s * y;
                    cols[j][r] = s * x + c * y;
                }
                for r in 0..k {
                    let x = v[i][r];
                    let y = v[j][r];
                    v[i][r] = c * x - s * y;
                    v[j][r] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // singular values = column norms; sort descending
    let mut order: Vec<usize> = (0..k).collect();
    let norms: Vec<S> = cols
        .iter()
        .map(|c| c.iter().map(|&x| x * x).sum::<S>().sqrt())
        .collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).expect("finite norms"));

    let mut u = Array2::<S>::zeros((m, k));
    let mut vt = Array2::<S>::zeros((k, k));
    let mut sigma = Array1::<S>::zeros(k);
    for (pos, &idx) in order.iter().enumerate() {
        let nrm = norms[idx];
        sigma[pos] = nrm;
        if nrm > S::zero() {
            for r in 0..m {
                u[[r, pos]] = cols[idx][r] / nrm;
            }
        }
        for r in 0..k {
            vt[[r, pos]] = v[idx][r];
        }
    }
    (u, sigma, vt)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns `(eigenvalues, eigenvectors)` with eigenvalues nonincreasing
/// and `a = q * diag(vals) * q^T`.
pub(crate) fn jacobi_eigh<S: Scalar>(a: &Array2<S>) -> (Array1<S>, Array2<S>) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut w = a.clone();
    let mut q = Array2::<S>::eye(n);
    let eps = S::epsilon() * S::cast(16.0);
    let norm: S = a.iter().map(|&x| x * x).sum::<S>().sqrt();
    if norm == S::zero() {
        return (Array1::zeros(n), q);
    }
    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut off = S::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += w[[i, j]] * w[[i, j]];
            }
        }
        if off.sqrt() <= eps * norm {
            break;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let apq = w[[i, j]];
                if apq.abs() <= eps * norm * S::cast(1e-3) {
                    continue;
                }
                let app = w[[i, i]];
                let aqq = w[[j, j]];
                let theta = (aqq - app) / (S::cast(2.0) * apq);
                let t = {
                    let s = if theta >= S::zero() { S::one() } else { -S::one() };
                    s / (theta.abs() + (S::one() + theta * theta).sqrt())
                };
                let c = S::one() / (S::one() + t * t).sqrt();
                let s = c * t;
                for r in 0..n {
                    let x = w[[r, i]];
                    let y = w[[r, j]];
                    w[[r, i]] = c * x - s * y;
                    w[[r, j]] = s * x + c * y;
                }
                for r in 0..n {
                    let x = w[[i, r]];
                    let y = w[[j, r]];
                    w[[i, r]] = c * x - s * y;
                    w[[j, r]] = s * x + c * y;
                }
                for r in 0..n {
                    let x = q[[r, i]];
                    let y = q[[r, j]];
                    q[[r, i]] = c * x - s * y;
                    q[[r, j]] = s * x + c * y;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[[j, j]].partial_cmp(&w[[i, i]]).expect("finite eigenvalues"));
    let mut vals = Array1::<S>::zeros(n);
    let mut vecs = Array2::<S>::zeros((n, n));
    for (pos, &idx) in order.iter().enumerate() {
        vals[pos] = w[[idx, idx]];
        for r in 0..n {
            vecs[[r, pos]] = q[[r, idx]];
        }
    }
    (vals, vecs)
}

/// In-place lower Cholesky factor of a symmetric positive definite
/// matrix. Returns `None` when a pivot drops below `tiny`.
pub(crate) fn cholesky<S: Scalar>(a: &Array2<S>) -> Option<Array2<S>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = Array2::<S>::zeros((n, n));
    let tiny = S::cast(1e-300);
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d <= tiny {
            return None;
        }
        let dj = d.sqrt();
        l[[j, j]] = dj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / dj;
        }
    }
    Some(l)
}

/// Solves `l * l^T * x = b` given the lower Cholesky factor.
pub(crate) fn cholesky_solve<S: Scalar>(l: &Array2<S>, b: &mut [S]) {
    let n = l.nrows();
    debug_assert_eq!(b.len(), n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * b[k];
        }
        b[i] = s / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * b[k];
        }
        b[i] = s / l[[i, i]];
    }
}

/// Dense inverse via Gauss-Jordan with partial pivoting. Intended for
/// small, well-conditioned systems (reference-oracle plumbing).
pub(crate) fn gauss_inverse<S: Scalar>(a: &Array2<S>) -> Option<Array2<S>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut w = a.clone();
    let mut inv = Array2::<S>::eye(n);
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if w[[r, col]].abs() > w[[piv, col]].abs() {
                piv = r;
            }
        }
        if w[[piv, col]].abs() < S::cast(1e-300) {
            return None;
        }
        if piv != col {
            for c in 0..n {
                let t = w[[col, c]];
                w[[col, c]] = w[[piv, c]];
                w[[piv, c]] = t;
                let t = inv[[col, c]];
                inv[[col, c]] = inv[[piv, c]];
                inv[[piv, c]] = t;
            }
        }
        let d = w[[col, col]];
        for c in 0..n {
            w[[col, c]] = w[[col, c]] / d;
            inv[[col, c]] = inv[[col, c]] / d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = w[[r, col]];
            if f == S::zero() {
                continue;
            }
            for c in 0..n {
                let wc = w[[col, c]];
                let ic = inv[[col, c]];
                w[[r, c]] = w[[r, c]] - f * wc;
                inv[[r, c]] = inv[[r, c]] - f * ic;
            }
        }
    }
    Some(inv)
}
