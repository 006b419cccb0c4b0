//! Small dense kernels: block LU solves for the sweep, one-sided Jacobi SVD
//! for the incremental SVD core matrix, and a few vector helpers.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Solves `a x = rhs` in place for a row-major `n x n` block using Gaussian
/// elimination with partial pivoting. `a` is overwritten.
pub fn lu_solve_in_place(a: &mut [f64], n: usize, x: &mut [f64]) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(x.len(), n);
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for k in 0..n {
        let mut piv = k;
        let mut best = a[k * n + k].abs();
        for r in k + 1..n {
            let v = a[r * n + k].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best <= f64::EPSILON * scale || best == 0.0 {
            return Err(Error::Numerical(format!("singular {n}x{n} block at pivot {k}")));
        }
        if piv != k {
            for c in 0..n {
                a.swap(k * n + c, piv * n + c);
            }
            x.swap(k, piv);
        }
        let d = a[k * n + k];
        for r in k + 1..n {
            let f = a[r * n + k] / d;
            if f != 0.0 {
                for c in k + 1..n {
                    a[r * n + c] -= f * a[k * n + c];
                }
                x[r] -= f * x[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for c in k + 1..n {
            s -= a[k * n + c] * x[c];
        }
        x[k] = s / a[k * n + k];
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Thin SVD `a = u diag(s) v^T` by one-sided Jacobi rotations.
///
/// Singular values come back sorted nonincreasing; `u` is `m x k`, `v` is
/// `n x k` with `k = min(m, n)`. Intended for the small core matrices of the
/// incremental SVD.
pub fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    if a.nrows() < a.ncols() {
        let (u, s, v) = jacobi_svd(&a.transpose());
        return (v, s, u);
    }
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let eps = f64::EPSILON;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let mut u = DMatrix::<f64>::zeros(m, n);
    let mut vs = DMatrix::<f64>::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        let sj = norms[j];
        s.push(sj);
        vs.set_column(k, &v.column(j));
        if sj > 0.0 {
            u.set_column(k, &(w.column(j) / sj));
        }
    }
    complete_orthonormal_columns(&mut u, &s);
    (u, s, vs)
}

/// Replaces columns of `u` belonging to zero singular values by unit vectors
/// orthogonal to the rest, so `u` always has orthonormal columns.
fn complete_orthonormal_columns(u: &mut DMatrix<f64>, s: &[f64]) {
    let m = u.nrows();
    for k in 0..s.len() {
        if s[k] > 0.0 {
            continue;
        }
        for e in 0..m {
            let mut cand = nalgebra::DVector::<f64>::zeros(m);
            cand[e] = 1.0;
            for _ in 0..2 {
                for j in 0..u.ncols() {
                    if j == k || (s[j] == 0.0 && j > k) {
                        continue;
                    }
                    let c = u.column(j).dot(&cand);
                    cand -= u.column(j) * c;
                }
            }
            let nrm = cand.norm();
            if nrm > 1e-8 {
                u.set_column(k, &(cand / nrm));
                break;
            }
        }
    }
}

/// Orthonormalizes the columns of `a` by modified Gram-Schmidt with one
/// reorthogonalization pass, returning `(q, r)` with `a = q r`.
pub fn mgs_qr(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let mut q = a.clone();
    let mut r = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for _pass in 0..2 {
            for i in 0..j {
                let c = q.column(i).dot(&q.column(j));
                r[(i, j)] += c;
                let qi = q.column(i).clone_owned();
                let mut col = q.column_mut(j);
                col.axpy(-c, &qi, 1.0);
            }
        }
        let nrm = q.column(j).norm();
        r[(j, j)] = nrm;
        if nrm > 0.0 {
            q.column_mut(j).scale_mut(1.0 / nrm);
        }
    }
    debug_assert_eq!(q.nrows(), m);
    (q, r)
}

/// `max |a^T a - I|` over all entries.
pub fn orthonormality_defect(a: &DMatrix<f64>) -> f64 {
    let g = a.transpose() * a;
    let mut d = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let e = if i == j { 1.0 } else { 0.0 };
            d = d.max((g[(i, j)] - e).abs());
        }
    }
    d
}
