//! Across-iteration fixed-point predictor.
//!
//! Given iterates `rho^(0..m)` of an unaccelerated linear iteration, fit the
//! operator `Omega` mapping successive differences `d^(k) -> d^(k+1)` and sum
//! the remaining geometric series:
//!
//! ```text
//! rho* ~ rho^(m) + U (I - Omega_r)^{-1} Omega_r U^T d^(m)
//! ```
//!
//! The closed form is ours; only the difference snapshot matrices are given
//! in the literature.

use nalgebra::DMatrix;

use super::dmd::{dmd_reduced_operator, RomRole};
use super::isvd::{IncrementalSvd, SnapshotStore};
use crate::error::{Error, Result};
use crate::linalg::sub;

/// Relative singular-value cutoff for the difference basis.
pub const MH_TRUNCATION: f64 = 1e-12;

/// Predicts the fixed point from at least three iterates.
pub fn mh_fixed_point_predict(history: &[Vec<f64>]) -> Result<Vec<f64>> {
    if history.len() < 3 {
        return Err(Error::Data(format!(
            "predictor needs at least 3 iterates, got {}",
            history.len()
        )));
    }
    let n = history[0].len();
    let diffs: Vec<Vec<f64>> = history.windows(2).map(|w| sub(&w[1], &w[0])).collect();
    let last = history.last().expect("nonempty").clone();
    let m = diffs.len();
    let mut svd = IncrementalSvd::new(n, MH_TRUNCATION, usize::MAX);
    let mut store = SnapshotStore::new();
    for k in 0..m - 1 {
        svd.append(&diffs[k], true)?;
        store.push(diffs[k + 1].clone())?;
    }
    if svd.rank() == 0 {
        return Ok(last);
    }
    let rs = dmd_reduced_operator(&svd, &store, RomRole::Iteration)?;
    let omega = rs.operator();
    let radius = omega
        .complex_eigenvalues()
        .iter()
        .fold(0.0f64, |r, z| r.max(z.norm()));
    if !(radius < 1.0) {
        return Err(Error::IllConditioned(format!(
            "learned iteration has spectral radius {radius:.3}"
        )));
    }
    let r = rs.rank();
    let lhs = DMatrix::<f64>::identity(r, r) - omega;
    let rhs = omega * rs.project(&diffs[m - 1]);
    let c = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::IllConditioned("I - Omega is singular".into()))?;
    let jump = rs.lift(&c);
    if !jump.iter().all(|v| v.is_finite()) {
        return Err(Error::IllConditioned("non-finite prediction".into()));
    }
    Ok(last.iter().zip(&jump).map(|(a, b)| a + b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_contraction() {
        let mut h = vec![vec![0.0]];
        for _ in 0..4 {
            let x = h.last().unwrap()[0];
            h.push(vec![0.5 * x + 1.0]);
        }
        let p = mh_fixed_point_predict(&h).unwrap();
        assert!((p[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn converged_history_is_returned_unchanged() {
        let h = vec![vec![1.0, 2.0]; 4];
        assert_eq!(mh_fixed_point_predict(&h).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn diverging_iteration_is_rejected() {
        let h: Vec<Vec<f64>> = (0..5).map(|k| vec![2f64.powi(k)]).collect();
        assert!(mh_fixed_point_predict(&h).is_err());
    }

    #[test]
    fn too_short_history() {
        assert!(mh_fixed_point_predict(&[vec![0.0], vec![1.0]]).is_err());
    }

    #[test]
    fn two_mode_linear_iteration() {
        // x_{k+1} = A x_k + b with a diagonal contraction of rank 2
        let a = [0.3, -0.6];
        let b = [1.0, 2.0];
        let mut h = vec![vec![0.0, 0.0]];
        for _ in 0..4 {
            let x = h.last().unwrap().clone();
            h.push(vec![a[0] * x[0] + b[0], a[1] * x[1] + b[1]]);
        }
        let p = mh_fixed_point_predict(&h).unwrap();
        assert!((p[0] - 1.0 / 0.7).abs() < 1e-10);
        assert!((p[1] - 2.0 / 1.6).abs() < 1e-10);
    }
}
