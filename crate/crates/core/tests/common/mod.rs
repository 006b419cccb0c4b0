#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rte_accel::dg::{CrossSections, DgSpace};
use rte_accel::mesh::RectMesh;
use rte_accel::operators::DiscreteOperators;
use rte_accel::quadrature::AngularQuadrature;

/// Dense `T = sum_j w_j L_j^{-1}` from the assembled per-angle matrices.
pub fn dense_t(ops: &DiscreteOperators) -> DMatrix<f64> {
    let n = ops.n_dofs();
    let mut t = DMatrix::<f64>::zeros(n, n);
    for j in 0..ops.n_angles() {
        let inv = ops.system_dense(j).lu().try_inverse().expect("nonsingular transport block");
        t += inv * ops.quadrature().weight(j);
    }
    t
}

/// Dense `I - T Sigma_s`.
pub fn dense_a_tilde(ops: &DiscreteOperators) -> DMatrix<f64> {
    let n = ops.n_dofs();
    DMatrix::<f64>::identity(n, n) - dense_t(ops) * ops.sigma_s_dense()
}

/// Heterogeneous slab with `cells` cells and an `angles`-point rule.
pub fn small_slab(cells: usize, angles: usize, dt: f64) -> DiscreteOperators {
    let space = DgSpace::new(RectMesh::new_1d((0.0, 2.0), cells).unwrap(), 1);
    let quad = AngularQuadrature::gauss_legendre_1d(angles).unwrap();
    let xs = CrossSections::sample(&space, |x, _| 0.5 + x, |x, _| 1.0 + 2.0 * x).unwrap();
    DiscreteOperators::assemble(&space, &quad, &xs, |x, _| 1.0 + x, |_, _| 2.0, dt).unwrap()
}

/// 2D box with smoothly varying cross sections.
pub fn small_box(n: usize, n_phi: usize, n_z: usize, dt: f64) -> DiscreteOperators {
    let space = DgSpace::new(RectMesh::new_2d((0.0, 1.0), (0.0, 1.0), n, n).unwrap(), 1);
    let quad = AngularQuadrature::chebyshev_legendre(n_phi, n_z).unwrap();
    let xs = CrossSections::sample(&space, |x, y| 1.0 + x * y, |x, y| 2.0 + x + y).unwrap();
    DiscreteOperators::assemble(&space, &quad, &xs, |x, y| (x - y).cos(), |x, _| x, dt).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// Singular values of `m` in descending order.
pub fn batch_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Neumaier-compensated sum.
pub fn accurate_sum(v: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for &x in v {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}
