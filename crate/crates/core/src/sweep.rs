//! Transport sweeps and the operators built from them.
//!
//! A sweep inverts `M/dt + D_j + Sigma_t` for one direction by visiting
//! cells downstream of their upwind neighbors. Everything that sums over
//! angles goes through [`angular_sum`], which reduces fixed chunks in
//! ascending angle order so results do not depend on the thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::lu_solve_in_place;
use crate::mesh::RectMesh;
use crate::operators::{gemv_add, DiscreteOperators};

/// Angles per reduction chunk.
const ANGLE_CHUNK: usize = 8;

/// Angular flux coefficients, one DG vector per direction.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularFlux {
    per_angle: Vec<Vec<f64>>,
}

impl AngularFlux {
    /// Same vector in every direction.
    pub fn isotropic(n_angles: usize, values: &[f64]) -> Self {
        Self {
            per_angle: vec![values.to_vec(); n_angles],
        }
    }

    pub fn from_vecs(per_angle: Vec<Vec<f64>>) -> Self {
        Self { per_angle }
    }

    pub fn n_angles(&self) -> usize {
        self.per_angle.len()
    }

    pub fn angle(&self, j: usize) -> &[f64] {
        &self.per_angle[j]
    }

    /// `rho = sum_j w_j f_j`.
    pub fn density(&self, weights: &[f64]) -> Vec<f64> {
        let n = self.per_angle.first().map_or(0, Vec::len);
        let mut rho = vec![0.0; n];
        for (f, w) in self.per_angle.iter().zip(weights) {
            for (r, v) in rho.iter_mut().zip(f) {
                *r += w * v;
            }
        }
        rho
    }
}

/// Cell visiting order for direction `dir`: lexicographic with each axis
/// running in the sign of the corresponding direction component.
pub fn sweep_ordering(mesh: &RectMesh, dir: [f64; 3]) -> Vec<usize> {
    let [nx, ny] = mesh.counts();
    let xs: Vec<usize> = if dir[0] >= 0.0 {
        (0..nx).collect()
    } else {
        (0..nx).rev().collect()
    };
    let ys: Vec<usize> = if mesh.dim() == 1 || dir[1] >= 0.0 {
        (0..ny).collect()
    } else {
        (0..ny).rev().collect()
    };
    let mut order = Vec::with_capacity(nx * ny);
    for &j in &ys {
        for &i in &xs {
            order.push(mesh.cell_index(i, j));
        }
    }
    order
}

/// Checks that every upwind neighbor appears before its downstream cell.
pub fn validate_ordering(ops: &DiscreteOperators, j: usize, order: &[usize]) -> Result<()> {
    let mesh = ops.space().mesh();
    let mut pos = vec![usize::MAX; mesh.num_cells()];
    for (k, &c) in order.iter().enumerate() {
        if c >= pos.len() || pos[c] != usize::MAX {
            return Err(Error::Ordering(format!("cell {c} repeated or out of range")));
        }
        pos[c] = k;
    }
    if pos.contains(&usize::MAX) {
        return Err(Error::Ordering("ordering misses cells".into()));
    }
    for &c in order {
        for (side, _) in &ops.stencil(j).upwind {
            if let Some(nb) = mesh.neighbor(c, *side) {
                if pos[nb] > pos[c] {
                    return Err(Error::Ordering(format!(
                        "angle {j}: upwind cell {nb} visited after {c}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Solves `(M/dt + D_j + Sigma_t) f = rhs` for one angle.
pub fn sweep_solve(ops: &DiscreteOperators, j: usize, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != ops.n_dofs() {
        return Err(Error::Shape {
            expected: ops.n_dofs(),
            got: rhs.len(),
        });
    }
    let mesh = ops.space().mesh();
    let b = ops.space().n_local();
    let st = ops.stencil(j);
    let order = sweep_ordering(mesh, ops.quadrature().direction(j));
    let mut f = vec![0.0; rhs.len()];
    let mut block = vec![0.0; b * b];
    let mut local = vec![0.0; b];
    let mut upwind = vec![0.0; b];
    let inv_dt = 1.0 / ops.dt();
    for &cell in &order {
        local.copy_from_slice(&rhs[cell * b..(cell + 1) * b]);
        upwind.iter_mut().for_each(|v| *v = 0.0);
        for (side, blk) in &st.upwind {
            if let Some(nb) = mesh.neighbor(cell, *side) {
                gemv_add(blk, b, &f[nb * b..(nb + 1) * b], &mut upwind);
            }
        }
        for k in 0..b {
            local[k] -= upwind[k];
        }
        let sig = ops.sigma_t_block(cell);
        for k in 0..b * b {
            block[k] = st.local[k] + sig[k];
        }
        for k in 0..b {
            block[k * b + k] += inv_dt;
        }
        lu_solve_in_place(&mut block, b, &mut local)?;
        f[cell * b..(cell + 1) * b].copy_from_slice(&local);
    }
    Ok(f)
}

/// Deterministic `sum_j w_j term(j)`: angles are split into fixed chunks,
/// each summed in ascending order, and the chunk sums are added in order.
pub fn angular_sum<F>(ops: &DiscreteOperators, term: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync,
{
    let n = ops.n_dofs();
    let weights = ops.quadrature().weights();
    let chunks: Vec<usize> = (0..ops.n_angles()).step_by(ANGLE_CHUNK).collect();
    let partial: Vec<Result<Vec<f64>>> = chunks
        .par_iter()
        .map(|&start| {
            let end = (start + ANGLE_CHUNK).min(ops.n_angles());
            let mut acc = vec![0.0; n];
            for j in start..end {
                let f = term(j)?;
                let w = weights[j];
                for (a, v) in acc.iter_mut().zip(&f) {
                    *a += w * v;
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![0.0; n];
    for p in partial {
        for (t, v) in total.iter_mut().zip(&p?) {
            *t += v;
        }
    }
    Ok(total)
}

/// `T x = sum_j w_j (M/dt + D_j + Sigma_t)^{-1} x`. Counts as one sweep.
pub fn apply_t(ops: &DiscreteOperators, x: &[f64]) -> Result<Vec<f64>> {
    ops.count_sweep();
    angular_sum(ops, |j| sweep_solve(ops, j, x))
}

/// `b~ = sum_j w_j (M/dt + D_j + Sigma_t)^{-1} (M f_j^{n-1}/dt + G + g_j)`.
/// Counts as one sweep.
pub fn compute_btilde(ops: &DiscreteOperators, previous: &AngularFlux) -> Result<Vec<f64>> {
    check_flux(ops, previous)?;
    ops.count_sweep();
    let inv_dt = 1.0 / ops.dt();
    angular_sum(ops, |j| {
        let rhs = step_rhs(ops, j, previous.angle(j), inv_dt, None);
        sweep_solve(ops, j, &rhs)
    })
}

/// Angular flux at the new time level from the converged density:
/// `f_j = (M/dt + D_j + Sigma_t)^{-1} (Sigma_s rho + M f_j^{n-1}/dt + G + g_j)`.
/// Counts as one sweep.
pub fn recover_angular_flux(
    ops: &DiscreteOperators,
    rho: &[f64],
    previous: &AngularFlux,
) -> Result<AngularFlux> {
    check_flux(ops, previous)?;
    ops.count_sweep();
    let scatter = ops.apply_sigma_s(rho);
    let inv_dt = 1.0 / ops.dt();
    let per_angle = (0..ops.n_angles())
        .into_par_iter()
        .map(|j| {
            let rhs = step_rhs(ops, j, previous.angle(j), inv_dt, Some(&scatter));
            sweep_solve(ops, j, &rhs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AngularFlux { per_angle })
}

fn step_rhs(
    ops: &DiscreteOperators,
    j: usize,
    prev: &[f64],
    inv_dt: f64,
    scatter: Option<&[f64]>,
) -> Vec<f64> {
    let mut rhs = ops.combined_source(j);
    for (r, p) in rhs.iter_mut().zip(prev) {
        *r += p * inv_dt;
    }
    if let Some(s) = scatter {
        for (r, v) in rhs.iter_mut().zip(s) {
            *r += v;
        }
    }
    rhs
}

fn check_flux(ops: &DiscreteOperators, f: &AngularFlux) -> Result<()> {
    if f.n_angles() != ops.n_angles() {
        return Err(Error::Shape {
            expected: ops.n_angles(),
            got: f.n_angles(),
        });
    }
    for v in &f.per_angle {
        if v.len() != ops.n_dofs() {
            return Err(Error::Shape {
                expected: ops.n_dofs(),
                got: v.len(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::{CrossSections, DgSpace};
    use crate::quadrature::AngularQuadrature;
    use nalgebra::DVector;

    fn slab_ops() -> DiscreteOperators {
        let space = DgSpace::new(RectMesh::new_1d((0.0, 2.0), 8).unwrap(), 1);
        let quad = AngularQuadrature::gauss_legendre_1d(4).unwrap();
        let xs = CrossSections::sample(&space, |x, _| if x < 1.0 { 0.5 } else { 2.0 }, |x, _| {
            if x < 1.0 {
                1.0
            } else {
                3.0
            }
        })
        .unwrap();
        DiscreteOperators::assemble(&space, &quad, &xs, |x, _| x, |_, _| 1.0, 0.1).unwrap()
    }

    #[test]
    fn sweep_matches_dense_solve_slab() {
        let ops = slab_ops();
        let rhs: Vec<f64> = (0..ops.n_dofs()).map(|i| (i as f64 * 0.37).sin()).collect();
        for j in 0..ops.n_angles() {
            let f = sweep_solve(&ops, j, &rhs).unwrap();
            let dense = ops.system_dense(j).lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
            let err = (DVector::from_vec(f) - &dense).norm() / dense.norm();
            assert!(err < 1e-12, "angle {j}: {err}");
        }
    }

    #[test]
    fn orderings_respect_upwinding() {
        let space = DgSpace::new(RectMesh::new_2d((0.0, 1.0), (0.0, 1.0), 4, 3).unwrap(), 1);
        let quad = AngularQuadrature::chebyshev_legendre(8, 2).unwrap();
        let xs = CrossSections::sample(&space, |_, _| 0.0, |_, _| 1.0).unwrap();
        let ops = DiscreteOperators::assemble(&space, &quad, &xs, |_, _| 0.0, |_, _| 0.0, 1.0).unwrap();
        for j in 0..quad.len() {
            let order = sweep_ordering(space.mesh(), quad.direction(j));
            validate_ordering(&ops, j, &order).unwrap();
            let mut rev = order.clone();
            rev.reverse();
            assert!(validate_ordering(&ops, j, &rev).is_err());
        }
    }

    #[test]
    fn apply_t_is_weighted_dense_inverse() {
        let ops = slab_ops();
        let x: Vec<f64> = (0..ops.n_dofs()).map(|i| 1.0 + 0.1 * i as f64).collect();
        let t = apply_t(&ops, &x).unwrap();
        let mut expect = DVector::zeros(ops.n_dofs());
        for j in 0..ops.n_angles() {
            let f = ops.system_dense(j).lu().solve(&DVector::from_vec(x.clone())).unwrap();
            expect += f * ops.quadrature().weight(j);
        }
        let err = (DVector::from_vec(t) - &expect).norm() / expect.norm();
        assert!(err < 1e-12);
        assert_eq!(ops.sweep_count(), 1);
    }

    #[test]
    fn flux_shape_is_checked() {
        let ops = slab_ops();
        let bad = AngularFlux::isotropic(3, &vec![0.0; ops.n_dofs()]);
        assert!(compute_btilde(&ops, &bad).is_err());
        assert!(sweep_solve(&ops, 0, &[1.0]).is_err());
    }

    #[test]
    fn density_of_isotropic_flux() {
        let f = AngularFlux::isotropic(4, &[2.0, -1.0]);
        let rho = f.density(&[0.25; 4]);
        assert_eq!(rho, vec![2.0, -1.0]);
    }
}
