//! Streaming thin SVD of a growing snapshot matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{jacobi_svd, mgs_qr, orthonormality_defect};

/// Residual-norm threshold (relative to the column norm) below which a new
/// column is treated as lying in the current span.
pub const SPAN_TOL: f64 = 1e-12;
/// Orthonormality defect that triggers a re-orthonormalization pass.
pub const REORTH_TOL: f64 = 1e-12;

/// Which branch an append took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendPath {
    /// The column enlarged the basis.
    Grow,
    /// The column lay (numerically) in the span of the basis.
    Span,
    /// The column was exactly zero.
    Zero,
}

/// Thin SVD `R = U diag(s) V^T` of all columns appended so far.
#[derive(Debug, Clone)]
pub struct IncrementalSvd {
    n: usize,
    u: DMatrix<f64>,
    s: Vec<f64>,
    v: DMatrix<f64>,
    m: usize,
    trunc_tol: f64,
    rank_cap: usize,
    last_path: Option<AppendPath>,
}

impl IncrementalSvd {
    /// Empty factorization for columns of length `n`. `trunc_tol` and
    /// `rank_cap` only act on appends made with `truncate = true`.
    pub fn new(n: usize, trunc_tol: f64, rank_cap: usize) -> Self {
        Self {
            n,
            u: DMatrix::zeros(n, 0),
            s: Vec::new(),
            v: DMatrix::zeros(0, 0),
            m: 0,
            trunc_tol,
            rank_cap: rank_cap.max(1),
            last_path: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Number of columns processed.
    pub fn count(&self) -> usize {
        self.m
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.s
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn last_path(&self) -> Option<AppendPath> {
        self.last_path
    }

    /// `U diag(s) V^T`, for testing.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&DVector::from_column_slice(&self.s)) * self.v.transpose()
    }

    /// Appends one column, optionally truncating afterwards.
    pub fn append(&mut self, col: &[f64], truncate: bool) -> Result<AppendPath> {
        if col.len() != self.n {
            return Err(Error::Shape {
                expected: self.n,
                got: col.len(),
            });
        }
        if !col.iter().all(|v| v.is_finite()) {
            return Err(Error::Data("non-finite snapshot column".into()));
        }
        let c = DVector::from_column_slice(col);
        let cnorm = c.norm();
        let r = self.rank();
        let path = if cnorm == 0.0 {
            self.v = self.v.clone().insert_row(self.m, 0.0);
            AppendPath::Zero
        } else {
            let mut d = self.u.tr_mul(&c);
            let mut p = &c - &self.u * &d;
            // one reorthogonalization pass
            let d2 = self.u.tr_mul(&p);
            p -= &self.u * &d2;
            d += d2;
            let k = p.norm();
            let v_ext = {
                let mut ve = DMatrix::<f64>::zeros(self.m + 1, r + 1);
                ve.view_mut((0, 0), (self.m, r)).copy_from(&self.v);
                ve[(self.m, r)] = 1.0;
                ve
            };
            if k <= SPAN_TOL * cnorm {
                let mut core = DMatrix::<f64>::zeros(r, r + 1);
                for i in 0..r {
                    core[(i, i)] = self.s[i];
                    core[(i, r)] = d[i];
                }
                let (uc, sc, vc) = jacobi_svd(&core);
                self.u = &self.u * uc;
                self.v = v_ext * vc.columns(0, r);
                self.s = sc;
                AppendPath::Span
            } else {
                let mut core = DMatrix::<f64>::zeros(r + 1, r + 1);
                for i in 0..r {
                    core[(i, i)] = self.s[i];
                    core[(i, r)] = d[i];
                }
                core[(r, r)] = k;
                let (uc, sc, vc) = jacobi_svd(&core);
                let mut u_ext = self.u.clone().insert_column(r, 0.0);
                u_ext.set_column(r, &(p / k));
                self.u = u_ext * uc;
                self.v = v_ext * vc;
                self.s = sc;
                AppendPath::Grow
            }
        };
        self.m += 1;
        self.drop_zero_directions();
        if truncate {
            self.truncate();
        }
        self.reorthonormalize();
        self.last_path = Some(path);
        Ok(path)
    }

    /// Drops singular values with `s_k / sum(s) < trunc_tol` and enforces the
    /// rank cap.
    pub fn truncate(&mut self) {
        let total: f64 = self.s.iter().sum();
        if total == 0.0 {
            return;
        }
        let keep = self
            .s
            .iter()
            .take_while(|&&s| s / total >= self.trunc_tol)
            .count()
            .min(self.rank_cap);
        self.keep(keep);
    }

    /// Drops directions with `s_k < tol * s_1`.
    pub fn drop_relative(&mut self, tol: f64) {
        if let Some(&s1) = self.s.first() {
            let keep = self.s.iter().take_while(|&&s| s >= tol * s1).count();
            self.keep(keep);
        }
    }

    fn drop_zero_directions(&mut self) {
        let keep = self.s.iter().take_while(|&&s| s > 0.0).count();
        self.keep(keep);
    }

    fn keep(&mut self, keep: usize) {
        if keep < self.s.len() {
            self.s.truncate(keep);
            self.u = self.u.columns(0, keep).into_owned();
            self.v = self.v.columns(0, keep).into_owned();
        }
    }

    fn reorthonormalize(&mut self) {
        let r = self.rank();
        if r == 0 {
            return;
        }
        let sdiag = DMatrix::from_diagonal(&DVector::from_column_slice(&self.s));
        if orthonormality_defect(&self.u) > REORTH_TOL {
            let (q, rr) = mgs_qr(&self.u);
            let (ua, sa, va) = jacobi_svd(&(rr * &sdiag));
            self.u = q * ua;
            self.v = &self.v * va;
            self.s = sa;
        }
        if orthonormality_defect(&self.v) > REORTH_TOL {
            let sdiag = DMatrix::from_diagonal(&DVector::from_column_slice(&self.s));
            let (q, rr) = mgs_qr(&self.v);
            let (ua, sa, va) = jacobi_svd(&(sdiag * rr.transpose()));
            self.u = &self.u * ua;
            self.v = q * va;
            self.s = sa;
        }
        self.drop_zero_directions();
    }

    /// `s_min / sum(s)`, or `None` with an empty basis.
    pub fn ratio(&self) -> Option<f64> {
        let total: f64 = self.s.iter().sum();
        self.s.last().map(|s| s / total)
    }

    /// Construction stopping test: the smallest singular value relative to
    /// the sum is at most `eps`, or the last column added no new direction.
    pub fn sv_ratio_met(&self, eps: f64) -> bool {
        if self.rank() == 0 {
            return false;
        }
        matches!(self.last_path, Some(AppendPath::Span | AppendPath::Zero))
            || self.ratio().is_some_and(|r| r <= eps)
    }
}

/// Right-hand-side snapshot columns paired with an [`IncrementalSvd`].
#[derive(Debug, Clone, Default)]
pub struct SnapshotStore {
    columns: Vec<Vec<f64>>,
}

impl SnapshotStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, col: Vec<f64>) -> Result<()> {
        if !col.iter().all(|v| v.is_finite()) {
            return Err(Error::Data("non-finite snapshot column".into()));
        }
        if let Some(first) = self.columns.first() {
            if first.len() != col.len() {
                return Err(Error::Shape {
                    expected: first.len(),
                    got: col.len(),
                });
            }
        }
        self.columns.push(col);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }
}
