mod common;

use common::*;
use nalgebra::DVector;
use proptest::prelude::*;
use rte_accel::dg::{CrossSections, DgSpace};
use rte_accel::dsa::DiffusionSystem;
use rte_accel::mesh::RectMesh;
use rte_accel::operators::DiscreteOperators;
use rte_accel::quadrature::AngularQuadrature;
use rte_accel::si::{si_sa_solve, Dsa, NoAcceleration};
use rte_accel::sweep::{apply_t, compute_btilde, sweep_solve, AngularFlux};

fn check_sweeps(ops: &DiscreteOperators, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for j in 0..ops.n_angles() {
        let rhs = random_vec(&mut r, ops.n_dofs());
        let fast = sweep_solve(ops, j, &rhs).unwrap();
        let dense = ops.system_dense(j).lu().solve(&DVector::from_vec(rhs)).unwrap();
        worst = worst.max(rel_err(&fast, dense.as_slice()));
    }
    worst
}

#[test]
fn sweeps_match_dense_solves() {
    assert!(check_sweeps(&small_slab(8, 2, 0.3), 1) <= 1e-11);
    assert!(check_sweeps(&small_box(4, 4, 2, 0.3), 2) <= 1e-11);
    assert!(check_sweeps(&small_box(5, 8, 4, 1e3), 3) <= 1e-11);
}

#[test]
fn apply_t_matches_dense_weighted_inverse() {
    let ops = small_box(3, 8, 2, 0.7);
    let t = dense_t(&ops);
    let mut r = rng(9);
    let x = random_vec(&mut r, ops.n_dofs());
    let want = &t * DVector::from_vec(x.clone());
    assert!(rel_err(&apply_t(&ops, &x).unwrap(), want.as_slice()) <= 1e-11);
}

#[test]
fn converged_density_solves_the_dense_system() {
    let ops = small_slab(10, 4, 0.5);
    let space = ops.space().clone();
    let xs = CrossSections::sample(&space, |x, _| 0.5 + x, |x, _| 1.0 + 2.0 * x).unwrap();
    let dsa = DiffusionSystem::assemble(&space, &xs, 0.5).unwrap();
    let prev = AngularFlux::isotropic(ops.n_angles(), &vec![0.0; ops.n_dofs()]);
    let btilde = compute_btilde(&ops, &prev).unwrap();
    let exact = dense_a_tilde(&ops).lu().solve(&DVector::from_vec(btilde.clone())).unwrap();
    let zero = vec![0.0; ops.n_dofs()];
    let si = si_sa_solve(&ops, &btilde, &zero, &mut NoAcceleration, 1e-13, 500).unwrap();
    let acc = si_sa_solve(&ops, &btilde, &zero, &mut Dsa::new(&dsa, &ops), 1e-13, 500).unwrap();
    assert!(rel_err(&si.rho, exact.as_slice()) <= 1e-10);
    assert!(rel_err(&acc.rho, exact.as_slice()) <= 1e-10);
    assert!(acc.iterations < si.iterations);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gauss_legendre_moments(n in 1usize..=32) {
        let q = AngularQuadrature::gauss_legendre_1d(2 * n).unwrap();
        let w: f64 = q.weights().iter().sum();
        prop_assert!((w - 1.0).abs() <= 1e-14);
        prop_assert!((q.integrate(|d| d[0]) ).abs() <= 1e-14);
        prop_assert!((q.integrate(|d| d[0] * d[0]) - 1.0 / 3.0).abs() <= 1e-12);
    }

    #[test]
    fn chebyshev_legendre_moments(k in 1usize..=12, n_z in 1usize..=8) {
        let q = AngularQuadrature::chebyshev_legendre(4 * k, 2 * n_z).unwrap();
        let w: f64 = q.weights().iter().sum();
        prop_assert!((w - 1.0).abs() <= 1e-14);
        for d in q.directions() {
            prop_assert!((d[0] * d[0] + d[1] * d[1] + d[2] * d[2] - 1.0).abs() <= 1e-13);
        }
        prop_assert!((q.integrate(|d| d[0] * d[0]) - 1.0 / 3.0).abs() <= 1e-12);
        prop_assert!((q.integrate(|d| d[1] * d[1]) - 1.0 / 3.0).abs() <= 1e-12);
        prop_assert!(q.integrate(|d| d[0]).abs() <= 1e-14);
    }

    #[test]
    fn sweep_is_linear(seed in any::<u64>(), a in -3.0f64..3.0) {
        let ops = small_box(3, 4, 2, 0.4);
        let mut r = rng(seed);
        let x = random_vec(&mut r, ops.n_dofs());
        let y = random_vec(&mut r, ops.n_dofs());
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + q).collect();
        let lhs = apply_t(&ops, &combo).unwrap();
        let tx = apply_t(&ops, &x).unwrap();
        let ty = apply_t(&ops, &y).unwrap();
        let rhs: Vec<f64> = tx.iter().zip(&ty).map(|(p, q)| a * p + q).collect();
        prop_assert!(rel_err(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn diffusion_matrix_is_spd(sigma in 0.01f64..300.0, ratio in 0.0f64..1.0, dt in 1e-3f64..1e3, cells in 2usize..12) {
        let space = DgSpace::new(RectMesh::new_2d((0.0, 1.0), (0.0, 2.0), cells, cells + 1).unwrap(), 1);
        let xs = CrossSections::sample(&space, |x, _| ratio * sigma * (1.0 + x), |x, _| sigma * (1.0 + x)).unwrap();
        let c = DiffusionSystem::assemble(&space, &xs, dt).unwrap().to_dense();
        let scale = c.abs().max();
        prop_assert!((&c - c.transpose()).abs().max() <= 1e-12 * scale);
        prop_assert!(c.cholesky().is_some());
    }
}

#[test]
fn weight_sums_are_one_to_rounding() {
    let mut rules = vec![AngularQuadrature::gauss_legendre_1d(6).unwrap()];
    for (p, z) in [(4, 2), (8, 4), (40, 6), (64, 16), (128, 12)] {
        rules.push(AngularQuadrature::chebyshev_legendre(p, z).unwrap());
    }
    for q in rules {
        let s = accurate_sum(q.weights());
        assert!((s - 1.0).abs() <= 1e-15, "{} points: {:e}", q.len(), s - 1.0);
    }
}
