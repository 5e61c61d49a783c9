//! Jacobi-based symmetric eigendecomposition and SVD for the small dense
//! matrices that CCA works with.

use alloc::vec;
use alloc::vec::Vec;

use super::matrix::{dot, DenseMatrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in descending order and the matching orthonormal
/// eigenvectors as the columns of the returned matrix.
pub fn sym_eigen(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::shape("sym_eigen (square)", n, a.cols()));
    }
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    let scale: f64 = m.values().iter().map(|x| x * x).sum::<f64>();
    if scale == 0.0 {
        return Ok((vec![0.0; n], v));
    }
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m.get(p, q) * m.get(p, q);
            }
        }
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, dst, v.get(k, src));
        }
    }
    Ok((values, vectors))
}

/// Thin singular value decomposition `a = U diag(s) V^T`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `m x r` with orthonormal columns.
    pub u: DenseMatrix,
    /// Length `r = min(m, n)`, descending.
    pub singular_values: Vec<f64>,
    /// `n x r` with orthonormal columns.
    pub v: DenseMatrix,
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(a: &DenseMatrix) -> Result<Svd> {
    if a.rows() < a.cols() {
        let t = svd_tall(&a.transpose())?;
        return Ok(Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    svd_tall(a)
}

fn svd_tall(a: &DenseMatrix) -> Result<Svd> {
    let (m, n) = (a.rows(), a.cols());
    // Work on columns stored as rows for contiguous access.
    let mut cols = a.transpose();
    let mut v = DenseMatrix::identity(n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(cols.row(p), cols.row(p));
                let beta = dot(cols.row(q), cols.row(q));
                let gamma = dot(cols.row(p), cols.row(q));
                if gamma == 0.0 || gamma.abs() <= 1e-15 * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for k in 0..m {
                    let xp = cols.get(p, k);
                    let xq = cols.get(q, k);
                    cols.set(p, k, c * xp - s * xq);
                    cols.set(q, k, s * xp + c * xq);
                }
                for k in 0..n {
                    let vp = v.get(k, p);
                    let vq = v.get(k, q);
                    v.set(k, p, c * vp - s * vq);
                    v.set(k, q, s * vp + c * vq);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| libm::sqrt(dot(cols.row(j), cols.row(j)))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let smax = norms.iter().copied().fold(0.0, f64::max);
    let tiny = smax * 1e-13;

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut singular_values = Vec::with_capacity(n);
    let mut v_out = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        singular_values.push(s);
        for k in 0..n {
            v_out.set(k, dst, v.get(k, src));
        }
        if s > tiny && s > 0.0 {
            u_cols.push(cols.row(src).iter().map(|x| x / s).collect());
        } else {
            u_cols.push(orthonormal_complement(&u_cols, m));
        }
    }
    let mut u = DenseMatrix::zeros(m, n);
    for (j, col) in u_cols.iter().enumerate() {
        for (k, &x) in col.iter().enumerate() {
            u.set(k, j, x);
        }
    }
    Ok(Svd {
        u,
        singular_values,
        v: v_out,
    })
}

/// A unit vector orthogonal to every vector in `basis` (assumed orthonormal).
fn orthonormal_complement(basis: &[Vec<f64>], dim: usize) -> Vec<f64> {
    for e in 0..dim {
        let mut x = vec![0.0; dim];
        x[e] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let proj = dot(&x, b);
                x.iter_mut().zip(b).for_each(|(xi, bi)| *xi -= proj * bi);
            }
        }
        let nrm = libm::sqrt(dot(&x, &x));
        if nrm > 0.5 {
            x.iter_mut().for_each(|xi| *xi /= nrm);
            return x;
        }
    }
    vec![0.0; dim]
}
