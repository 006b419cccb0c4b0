//! Diffusion synthetic acceleration.
//!
//! The correction solves `C d = Sigma_s (rho^{l-1/2} - rho^{l-1})`, where `C`
//! is a symmetric interior-penalty DG discretization of
//! `-div(D grad) + sigma_a + 1/dt` with `D = 1/(3 max(sigma_t, floor))`.
//! Interior faces use arithmetic flux averages with a penalty floored at 1/4.
//! Vacuum boundaries take the Marshak condition on optically thin cells and
//! half-weighted penalty terms on thick ones.

use crate::dg::{Basis1d, CrossSections, DgSpace};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::mesh::Side;
use crate::operators::{gemv_add, DiscreteOperators};

/// Floor applied to `sigma_t` in the diffusion coefficient.
pub const SIGMA_FLOOR: f64 = 1e-8;
/// Penalty constant `C`; a face penalty is `C K (K + 1) D / h`.
pub const PENALTY_C: f64 = 4.0;
/// Lower bound on the face penalty.
pub const PENALTY_FLOOR: f64 = 0.25;
/// Boundary cells with `sigma_t h` at least this large use penalty terms;
/// thinner ones use the Marshak condition.
pub const THICK_BOUNDARY: f64 = 5.0;
/// Coefficient of the Marshak vacuum condition.
pub const MARSHAK: f64 = 0.5;

/// Conjugate-gradient settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_iter: 2000,
        }
    }
}

/// Outcome of a CG solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

/// Block-sparse symmetric matrix: for each cell, its diagonal block followed
/// by the blocks coupling it to face neighbors.
#[derive(Debug, Clone)]
pub struct DiffusionSystem {
    b: usize,
    rows: Vec<Vec<(usize, Vec<f64>)>>,
    diag: Vec<f64>,
    cg: CgSettings,
}

/// Per-cell, per-side trace data at the edge quadrature points.
struct Trace {
    /// `val[a][q]`
    val: Vec<Vec<f64>>,
    /// `d[a][q]`, derivative along the face normal axis.
    d: Vec<Vec<f64>>,
}

fn basis_traces(space: &DgSpace, basis: &Basis1d, side: Side) -> Trace {
    let h = space.mesh().h();
    let axis = side.axis();
    let b = space.n_local();
    let scale = 1.0 / space.mesh().cell_measure().sqrt();
    let high = side.normal_sign() > 0.0;
    let end_val = |p: usize| if high { basis.trace_high(p) } else { basis.trace_low(p) };
    // d/dxi of sqrt(2p+1) P_p at +-1
    let end_der = |p: usize| {
        let pf = p as f64;
        let v = (2.0 * pf + 1.0).sqrt() * pf * (pf + 1.0) / 2.0;
        if high || p % 2 == 1 {
            v
        } else {
            -v
        }
    };
    let nq = if space.dim() == 1 { 1 } else { basis.points() };
    let mut val = vec![vec![0.0; nq]; b];
    let mut d = vec![vec![0.0; nq]; b];
    for a in 0..b {
        let (px, py) = space.local_degrees(a);
        let (pn, pt) = if axis == 0 { (px, py) } else { (py, px) };
        for q in 0..nq {
            let tang = if space.dim() == 1 { 1.0 } else { basis.values[pt][q] };
            val[a][q] = scale * end_val(pn) * tang;
            d[a][q] = scale * end_der(pn) * 2.0 / h[axis] * tang;
        }
    }
    Trace { val, d }
}

impl DiffusionSystem {
    /// Assembles `C` for cross sections `xs` and step `dt`.
    pub fn assemble(space: &DgSpace, xs: &CrossSections, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        let mesh = space.mesh();
        let b = space.n_local();
        let nc = mesh.num_cells();
        let basis = space.basis();
        let h = mesh.h();
        let (phi, w) = space.tabulate();
        let grads = gradient_table(space);
        let mut rows: Vec<Vec<(usize, Vec<f64>)>> = Vec::with_capacity(nc);
        let mut d_cell = Vec::with_capacity(nc);
        for cell in 0..nc {
            let st = xs.sigma_t(cell);
            let sa = xs.sigma_a(cell);
            let dq: Vec<f64> = st.iter().map(|t| diffusion_coefficient(*t)).collect();
            d_cell.push(dq.iter().zip(&w).map(|(d, w)| d * w).sum::<f64>() / w.iter().sum::<f64>());
            let mut blk = vec![0.0; b * b];
            for k in 0..b {
                for l in 0..b {
                    let mut s = 0.0;
                    for q in 0..w.len() {
                        let mut g = 0.0;
                        for axis in 0..space.dim() {
                            g += grads[axis][k][q] * grads[axis][l][q];
                        }
                        s += w[q] * (dq[q] * g + (sa[q] + 1.0 / dt) * phi[k][q] * phi[l][q]);
                    }
                    blk[k * b + l] = s;
                }
            }
            rows.push(vec![(cell, blk)]);
        }
        let k = space.degree().max(1) as f64;
        let c_pen = PENALTY_C * k * (k + 1.0);
        let edge_w: Vec<f64> = if space.dim() == 1 {
            vec![1.0]
        } else {
            basis.weights.iter().map(|w| w * 0.5).collect()
        };
        for &side in mesh.sides() {
            let own = basis_traces(space, basis, side);
            let other = basis_traces(space, basis, side.opposite());
            let axis = side.axis();
            let tang_len = if space.dim() == 1 { 1.0 } else { h[1 - axis] };
            let ew: Vec<f64> = edge_w.iter().map(|w| w * tang_len).collect();
            let sign = side.normal_sign();
            for cell in 0..nc {
                let dc = d_cell[cell];
                match mesh.neighbor(cell, side) {
                    None => {
                        let tau = h[axis] / (3.0 * dc);
                        let blk = if tau < THICK_BOUNDARY {
                            // Marshak vacuum condition: D du/dn = -u/2
                            face_block(&own, &own, &ew, dc, dc, sign, sign, 0.0, MARSHAK)
                        } else {
                            let kappa = (c_pen * dc / h[axis]).max(PENALTY_FLOOR);
                            face_block(&own, &own, &ew, dc, dc, sign, sign, 0.5, kappa)
                        };
                        add_block(&mut rows[cell], cell, &blk);
                    }
                    Some(nb) if sign > 0.0 => {
                        // each interior face is visited once, from its minus cell
                        let dn = d_cell[nb];
                        let kappa = (0.5 * c_pen * (dc + dn) / h[axis]).max(PENALTY_FLOOR);
                        let mm = face_block(&own, &own, &ew, dc, dc, 1.0, 1.0, 0.5, kappa);
                        let mp = face_block(&own, &other, &ew, dc, dn, 1.0, -1.0, 0.5, kappa);
                        let pm = face_block(&other, &own, &ew, dn, dc, -1.0, 1.0, 0.5, kappa);
                        let pp = face_block(&other, &other, &ew, dn, dn, -1.0, -1.0, 0.5, kappa);
                        add_block(&mut rows[cell], cell, &mm);
                        add_block(&mut rows[cell], nb, &mp);
                        add_block(&mut rows[nb], cell, &pm);
                        add_block(&mut rows[nb], nb, &pp);
                    }
                    Some(_) => {}
                }
            }
        }
        let mut diag = vec![0.0; nc * b];
        for (cell, row) in rows.iter().enumerate() {
            let blk = &row[0].1;
            for a in 0..b {
                diag[cell * b + a] = blk[a * b + a];
            }
        }
        if diag.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Numerical("diffusion matrix has a nonpositive diagonal".into()));
        }
        Ok(Self {
            b,
            rows,
            diag,
            cg: CgSettings::default(),
        })
    }

    pub fn with_cg(mut self, cg: CgSettings) -> Self {
        self.cg = cg;
        self
    }

    pub fn cg_settings(&self) -> CgSettings {
        self.cg
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    /// `y = C x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let b = self.b;
        let mut y = vec![0.0; x.len()];
        for (cell, row) in self.rows.iter().enumerate() {
            let yc = &mut y[cell * b..(cell + 1) * b];
            for (col, blk) in row {
                gemv_add(blk, b, &x[col * b..(col + 1) * b], yc);
            }
        }
        y
    }

    /// Dense copy of `C` (testing).
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.size();
        let b = self.b;
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for (cell, row) in self.rows.iter().enumerate() {
            for (col, blk) in row {
                for k in 0..b {
                    for l in 0..b {
                        m[(cell * b + k, col * b + l)] += blk[k * b + l];
                    }
                }
            }
        }
        m
    }

    /// Jacobi-preconditioned conjugate gradients for `C x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<(Vec<f64>, CgReport)> {
        let n = self.size();
        if rhs.len() != n {
            return Err(Error::Shape {
                expected: n,
                got: rhs.len(),
            });
        }
        let mut x = vec![0.0; n];
        let bnorm = dot(rhs, rhs).sqrt();
        if bnorm == 0.0 {
            return Ok((
                x,
                CgReport {
                    iterations: 0,
                    rel_residual: 0.0,
                    converged: true,
                },
            ));
        }
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut rel = 1.0;
        for it in 1..=self.cg.max_iter {
            let ap = self.apply(&p);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::Numerical(format!(
                    "conjugate gradients broke down (p^T C p = {pap:e})"
                )));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            rel = dot(&r, &r).sqrt() / bnorm;
            if rel <= self.cg.rel_tol {
                return Ok((
                    x,
                    CgReport {
                        iterations: it,
                        rel_residual: rel,
                        converged: true,
                    },
                ));
            }
            for i in 0..n {
                z[i] = r[i] / self.diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Ok((
            x,
            CgReport {
                iterations: self.cg.max_iter,
                rel_residual: rel,
                converged: false,
            },
        ))
    }
}

/// `D(x) = 1 / (3 max(sigma_t, floor))`.
pub fn diffusion_coefficient(sigma_t: f64) -> f64 {
    1.0 / (3.0 * sigma_t.max(SIGMA_FLOOR))
}

/// DSA correction `delta = C^{-1} Sigma_s residual`.
pub fn dsa_correct(
    system: &DiffusionSystem,
    ops: &DiscreteOperators,
    residual: &[f64],
) -> Result<(Vec<f64>, CgReport)> {
    if !residual.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("non-finite DSA residual".into()));
    }
    let rhs = ops.apply_sigma_s(residual);
    system.solve(&rhs)
}

/// `grads[axis][a][q]`: physical basis gradients at the assembly points.
fn gradient_table(space: &DgSpace) -> Vec<Vec<Vec<f64>>> {
    let basis = space.basis();
    let nq = basis.points();
    let h = space.mesh().h();
    let scale = 1.0 / space.mesh().cell_measure().sqrt();
    let b = space.n_local();
    let mut out = Vec::new();
    for axis in 0..space.dim() {
        let mut g = vec![Vec::new(); b];
        for (a, ga) in g.iter_mut().enumerate() {
            let (px, py) = space.local_degrees(a);
            if space.dim() == 1 {
                *ga = (0..nq).map(|q| scale * basis.derivs[px][q] * 2.0 / h[0]).collect();
            } else {
                for qy in 0..nq {
                    for qx in 0..nq {
                        let v = if axis == 0 {
                            basis.derivs[px][qx] * 2.0 / h[0] * basis.values[py][qy]
                        } else {
                            basis.values[px][qx] * basis.derivs[py][qy] * 2.0 / h[1]
                        };
                        ga.push(scale * v);
                    }
                }
            }
        }
        out.push(g);
    }
    out
}

/// Face contribution for test functions from `row` and trial functions from
/// `col`. `s_row`, `s_col` are the jump signs of each side, `avg` the weight
/// of each side in the flux average.
#[allow(clippy::too_many_arguments)]
fn face_block(
    row: &Trace,
    col: &Trace,
    w: &[f64],
    d_row: f64,
    d_col: f64,
    s_row: f64,
    s_col: f64,
    avg: f64,
    kappa: f64,
) -> Vec<f64> {
    let b = row.val.len();
    let mut blk = vec![0.0; b * b];
    for k in 0..b {
        for l in 0..b {
            let mut s = 0.0;
            for q in 0..w.len() {
                s += w[q]
                    * (-avg * d_col * col.d[l][q] * s_row * row.val[k][q]
                        - avg * d_row * row.d[k][q] * s_col * col.val[l][q]
                        + kappa * s_row * s_col * row.val[k][q] * col.val[l][q]);
            }
            blk[k * b + l] = s;
        }
    }
    blk
}

fn add_block(row: &mut Vec<(usize, Vec<f64>)>, col: usize, blk: &[f64]) {
    if let Some((_, existing)) = row.iter_mut().find(|(c, _)| *c == col) {
        for (e, v) in existing.iter_mut().zip(blk) {
            *e += v;
        }
    } else {
        row.push((col, blk.to_vec()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::project_to_dg;
    use crate::mesh::RectMesh;
    use crate::quadrature::AngularQuadrature;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn system(space: &DgSpace, ss: f64, st: f64, dt: f64) -> DiffusionSystem {
        let xs = CrossSections::sample(space, |_, _| ss, |_, _| st).unwrap();
        DiffusionSystem::assemble(space, &xs, dt).unwrap()
    }

    #[test]
    fn symmetric_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for space in [
            DgSpace::new(RectMesh::new_1d((0.0, 2.0), 7).unwrap(), 1),
            DgSpace::new(RectMesh::new_2d((0.0, 1.0), (0.0, 1.5), 3, 4).unwrap(), 1),
            DgSpace::new(RectMesh::new_2d((0.0, 1.0), (0.0, 1.0), 3, 3).unwrap(), 2),
        ] {
            let xs = CrossSections::sample(&space, |x, _| 1.0 + 50.0 * x, |x, _| 2.0 + 60.0 * x).unwrap();
            let c = DiffusionSystem::assemble(&space, &xs, 0.5).unwrap().to_dense();
            let cmax = c.abs().max();
            assert!((&c - c.transpose()).abs().max() <= 1e-12 * cmax);
            for _ in 0..20 {
                let u = nalgebra::DVector::from_fn(c.nrows(), |_, _| rng.random_range(-1.0..1.0));
                assert!(u.dot(&(&c * &u)) > 0.0);
            }
            assert!(c.clone().cholesky().is_some());
        }
    }

    #[test]
    fn constant_sees_only_boundary_terms() {
        let space = DgSpace::new(RectMesh::new_2d((0.0, 1.0), (0.0, 1.0), 4, 4).unwrap(), 1);
        let sys = system(&space, 1.0, 1.0, 1e9);
        let one = project_to_dg(&space, |_, _| 1.0);
        let cu = sys.apply(&one);
        let mesh = space.mesh();
        for cell in 0..mesh.num_cells() {
            let interior = mesh.sides().iter().all(|s| mesh.neighbor(cell, *s).is_some());
            let seg = &cu[cell * 4..cell * 4 + 4];
            if interior {
                assert!(seg.iter().all(|v| v.abs() < 1e-8), "{seg:?}");
            } else {
                assert!(seg.iter().any(|v| v.abs() > 1e-3));
            }
        }
    }

    #[test]
    fn reaction_block_uses_modified_absorption() {
        // sigma_a = 0: only the reaction part depends on dt, so the difference
        // between dt = 10 and dt = 5 is (0.1 - 0.2) * mass.
        let space = DgSpace::new(RectMesh::new_1d((0.0, 1.0), 2).unwrap(), 1);
        let c10 = system(&space, 3.0, 3.0, 10.0).to_dense();
        let c5 = system(&space, 3.0, 3.0, 5.0).to_dense();
        let d = c10 - c5;
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { -0.1 } else { 0.0 };
                assert!((d[(i, j)] - want).abs() < 1e-12, "{i} {j} {}", d[(i, j)]);
            }
        }
    }

    /// L2 error of `-D u'' + s u = f` on [0, 1] with `sigma_a = 0`, `s = 1/dt`.
    fn manufactured_error(n: usize, k: usize, sigma_t: f64, dt: f64, u: impl Fn(f64) -> f64, f: impl Fn(f64) -> f64) -> f64 {
        let space = DgSpace::new(RectMesh::new_1d((0.0, 1.0), n).unwrap(), k);
        let sys = system(&space, sigma_t, sigma_t, dt);
        let rhs = project_to_dg(&space, |x, _| f(x));
        let (uh_coef, rep) = sys.solve(&rhs).unwrap();
        assert!(rep.converged);
        let (phi, w) = space.tabulate();
        let mut l2 = 0.0;
        for cell in 0..space.num_cells() {
            let pts = space.quad_points(cell);
            for (q, p) in pts.iter().enumerate() {
                let uh: f64 = (0..space.n_local()).map(|a| uh_coef[cell * space.n_local() + a] * phi[a][q]).sum();
                l2 += w[q] * (uh - u(p[0])).powi(2);
            }
        }
        l2.sqrt()
    }

    fn assert_rates(errs: &[f64], k: usize) {
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(rate > k as f64 + 0.8, "K={k}: errors {errs:?}");
        }
    }

    #[test]
    fn thin_boundary_converges_to_marshak_solution() {
        // D u' = u/2 at x = 0 and D u' = -u/2 at x = 1
        let d = 1.0 / 3.0;
        let a = 2.0 * d * PI;
        let u = |x: f64| a + (PI * (x - 0.5)).cos();
        let f = |x: f64| 2.0 * u(x) + d * PI * PI * (PI * (x - 0.5)).cos();
        for k in [1usize, 2] {
            let errs: Vec<f64> = [4, 8, 16, 32].iter().map(|&n| manufactured_error(n, k, 1.0, 0.5, u, f)).collect();
            assert_rates(&errs, k);
        }
    }

    #[test]
    fn thick_boundary_approaches_dirichlet_solution() {
        let st = 200.0;
        let d = diffusion_coefficient(st);
        let u = |x: f64| (PI * x).sin();
        let f = |x: f64| (d * PI * PI + 3.0) * (PI * x).sin();
        for k in [1usize, 2] {
            // the penalty boundary is only weakly consistent with Dirichlet data
            let errs: Vec<f64> = [4, 8, 16, 32].iter().map(|&n| manufactured_error(n, k, st, 1.0 / 3.0, u, f)).collect();
            assert!(errs.windows(2).all(|w| w[1] < 0.7 * w[0]), "K={k}: errors {errs:?}");
            assert!(errs[3] < 2e-3, "K={k}: errors {errs:?}");
        }
    }

    #[test]
    fn trivial_corrections_vanish() {
        let space = DgSpace::new(RectMesh::new_1d((0.0, 1.0), 6).unwrap(), 1);
        let quad = AngularQuadrature::gauss_legendre_1d(4).unwrap();
        let xs = CrossSections::sample(&space, |_, _| 0.0, |_, _| 1.0).unwrap();
        let ops = DiscreteOperators::assemble(&space, &quad, &xs, |_, _| 0.0, |_, _| 0.0, 1.0).unwrap();
        let sys = DiffusionSystem::assemble(&space, &xs, 1.0).unwrap();
        let (d, _) = dsa_correct(&sys, &ops, &vec![1.0; 12]).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
        let xs = CrossSections::sample(&space, |_, _| 1.0, |_, _| 1.0).unwrap();
        let ops = DiscreteOperators::assemble(&space, &quad, &xs, |_, _| 0.0, |_, _| 0.0, 1.0).unwrap();
        let (d, _) = dsa_correct(&sys, &ops, &vec![0.0; 12]).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
        assert!(dsa_correct(&sys, &ops, &[f64::NAN; 12]).is_err());
    }
}
