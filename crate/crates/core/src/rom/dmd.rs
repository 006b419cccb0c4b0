//! Data-driven reduced operators `A_r = U^T B V S^{-1}` and reduced solves.

use nalgebra::{DMatrix, DVector, LU};

use super::isvd::{IncrementalSvd, SnapshotStore};
use crate::error::{Error, Result};

/// What a reduced system is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RomRole {
    InitialGuess,
    Preconditioner,
    /// Across-iteration predictor inside one time step.
    Iteration,
}

impl RomRole {
    pub fn label(self) -> &'static str {
        match self {
            RomRole::InitialGuess => "ig",
            RomRole::Preconditioner => "pc",
            RomRole::Iteration => "mh",
        }
    }
}

/// Projected operator with its LU factorization.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    role: RomRole,
    u: DMatrix<f64>,
    ar: DMatrix<f64>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    condition: f64,
}

/// Builds `A_r = U^T B V S^{-1}` from the factorization of `R` and the
/// stored right-hand sides `B`.
pub fn dmd_reduced_operator(
    svd: &IncrementalSvd,
    store: &SnapshotStore,
    role: RomRole,
) -> Result<ReducedSystem> {
    let r = svd.rank();
    if r == 0 {
        return Err(Error::IllConditioned("empty basis".into()));
    }
    if store.len() != svd.count() {
        return Err(Error::Shape {
            expected: svd.count(),
            got: store.len(),
        });
    }
    let s = svd.singular_values();
    if s[r - 1] < 1e-14 * s[0] {
        return Err(Error::IllConditioned(format!(
            "singular value ratio {:e} below 1e-14",
            s[r - 1] / s[0]
        )));
    }
    let u = svd.u();
    let v = svd.v();
    // U^T B, one column at a time
    let mut utb = DMatrix::<f64>::zeros(r, store.len());
    for (j, col) in store.columns().iter().enumerate() {
        let c = u.tr_mul(&DVector::from_column_slice(col));
        utb.set_column(j, &c);
    }
    let mut ar = utb * v;
    for (k, sk) in s.iter().enumerate() {
        ar.column_mut(k).scale_mut(1.0 / sk);
    }
    if !ar.iter().all(|x| x.is_finite()) {
        return Err(Error::IllConditioned("non-finite reduced operator".into()));
    }
    let sv = ar.clone().svd(false, false).singular_values;
    let smin = sv.min();
    let condition = if smin > 0.0 { sv.max() / smin } else { f64::INFINITY };
    let lu = ar.clone().lu();
    Ok(ReducedSystem {
        role,
        u: u.clone(),
        ar,
        lu,
        condition,
    })
}

impl ReducedSystem {
    pub fn role(&self) -> RomRole {
        self.role
    }

    pub fn rank(&self) -> usize {
        self.ar.nrows()
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.ar
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// 2-norm condition number of `A_r`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// `U^T x`.
    pub fn project(&self, x: &[f64]) -> DVector<f64> {
        self.u.tr_mul(&DVector::from_column_slice(x))
    }

    /// `U c`.
    pub fn lift(&self, c: &DVector<f64>) -> Vec<f64> {
        (&self.u * c).as_slice().to_vec()
    }

    /// Returns `U A_r^{-1} U^T rhs`, or an error if the reduced system is
    /// singular or the result is not finite. Callers treat an error as a
    /// signal to fall back.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.u.nrows() {
            return Err(Error::Shape {
                expected: self.u.nrows(),
                got: rhs.len(),
            });
        }
        let c = self
            .lu
            .solve(&self.project(rhs))
            .ok_or_else(|| Error::IllConditioned("singular reduced operator".into()))?;
        if !c.iter().all(|v| v.is_finite()) {
            return Err(Error::IllConditioned("non-finite reduced solution".into()));
        }
        Ok(self.lift(&c))
    }
}

/// Free-function form of [`ReducedSystem::solve`].
pub fn reduced_solve(rs: &ReducedSystem, rhs: &[f64]) -> Result<Vec<f64>> {
    rs.solve(rhs)
}
