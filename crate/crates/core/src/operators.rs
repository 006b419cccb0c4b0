//! Discrete operators of the per-angle upwind DG system
//!
//! ```text
//! (M/dt + D_j + Sigma_t) f_j = Sigma_s rho + M/dt f_j^{n-1} + G + g_j
//! ```
//!
//! With an orthonormal basis `M = I`. The advection operator `D_j` is never
//! stored globally: on a uniform mesh its volume, outflow-face and
//! upwind-coupling blocks are identical for every cell, so each angle keeps a
//! single [`AngleStencil`].

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;

use crate::dg::{CrossSections, DgSpace};
use crate::error::{Error, Result};
use crate::mesh::Side;
use crate::quadrature::AngularQuadrature;

/// Cell-independent advection blocks for one direction (row-major `b x b`).
#[derive(Debug, Clone)]
pub struct AngleStencil {
    /// Volume term plus outflow-face terms.
    pub local: Vec<f64>,
    /// Coupling to the upwind neighbor across each inflow side.
    pub upwind: Vec<(Side, Vec<f64>)>,
    /// Sides through which the direction leaves the cell.
    pub outflow: Vec<Side>,
}

/// All operators of the matrix form for one time-step size.
#[derive(Debug)]
pub struct DiscreteOperators {
    space: DgSpace,
    quad: AngularQuadrature,
    dt: f64,
    sigma_s: Vec<f64>,
    sigma_t: Vec<f64>,
    source: Vec<f64>,
    inflow: Vec<Option<Vec<f64>>>,
    stencils: Vec<AngleStencil>,
    sweeps: AtomicUsize,
}

impl DiscreteOperators {
    /// Assembles every operator. `source` is the isotropic volume source
    /// `G(x, y)`; `inflow` is the isotropic boundary value `g(x, y)` imposed
    /// on inflow edges.
    pub fn assemble(
        space: &DgSpace,
        quad: &AngularQuadrature,
        xs: &CrossSections,
        source: impl Fn(f64, f64) -> f64,
        inflow: impl Fn(f64, f64) -> f64,
        dt: f64,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if xs.n_quad() != space.n_quad() {
            return Err(Error::InvalidCrossSection(
                "cross sections sampled on a different rule".into(),
            ));
        }
        let b = space.n_local();
        let nc = space.num_cells();
        let mut sigma_s = Vec::with_capacity(nc * b * b);
        let mut sigma_t = Vec::with_capacity(nc * b * b);
        let mut g = Vec::with_capacity(nc * b);
        let rule = space.basis().points();
        for cell in 0..nc {
            sigma_s.extend(space.weighted_mass(xs.sigma_s(cell)));
            sigma_t.extend(space.weighted_mass(xs.sigma_t(cell)));
            g.extend(space.cell_moments(cell, rule, &source));
        }
        let stencils = (0..quad.len())
            .map(|j| build_stencil(space, quad.direction(j)))
            .collect();
        let inflow = (0..quad.len())
            .map(|j| inflow_vector(space, quad.direction(j), &inflow))
            .collect();
        Ok(Self {
            space: space.clone(),
            quad: quad.clone(),
            dt,
            sigma_s,
            sigma_t,
            source: g,
            inflow,
            stencils,
            sweeps: AtomicUsize::new(0),
        })
    }

    pub fn space(&self) -> &DgSpace {
        &self.space
    }

    pub fn quadrature(&self) -> &AngularQuadrature {
        &self.quad
    }

    pub fn n_dofs(&self) -> usize {
        self.space.n_dofs()
    }

    pub fn n_angles(&self) -> usize {
        self.quad.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn stencil(&self, j: usize) -> &AngleStencil {
        &self.stencils[j]
    }

    /// Row-major `Sigma_s` block of `cell`.
    pub fn sigma_s_block(&self, cell: usize) -> &[f64] {
        let b2 = self.space.n_local().pow(2);
        &self.sigma_s[cell * b2..(cell + 1) * b2]
    }

    pub fn sigma_t_block(&self, cell: usize) -> &[f64] {
        let b2 = self.space.n_local().pow(2);
        &self.sigma_t[cell * b2..(cell + 1) * b2]
    }

    /// Discrete source `G`.
    pub fn source(&self) -> &[f64] {
        &self.source
    }

    /// Boundary vector `g_j`, `None` when the inflow is zero for this angle.
    pub fn inflow(&self, j: usize) -> Option<&[f64]> {
        self.inflow[j].as_deref()
    }

    /// Combined source `G + g_j`.
    pub fn combined_source(&self, j: usize) -> Vec<f64> {
        match self.inflow(j) {
            Some(g) => self.source.iter().zip(g).map(|(a, b)| a + b).collect(),
            None => self.source.clone(),
        }
    }

    /// `y = Sigma_s x`.
    pub fn apply_sigma_s(&self, x: &[f64]) -> Vec<f64> {
        block_diag_apply(&self.sigma_s, self.space.n_local(), x)
    }

    /// `y = Sigma_t x`.
    pub fn apply_sigma_t(&self, x: &[f64]) -> Vec<f64> {
        block_diag_apply(&self.sigma_t, self.space.n_local(), x)
    }

    /// Whether every scattering block is exactly zero.
    pub fn is_purely_absorbing(&self) -> bool {
        self.sigma_s.iter().all(|&v| v == 0.0)
    }

    /// Matrix-free `D_j u`.
    pub fn apply_advection(&self, j: usize, u: &[f64]) -> Vec<f64> {
        let b = self.space.n_local();
        let mesh = self.space.mesh();
        let st = &self.stencils[j];
        let mut out = vec![0.0; u.len()];
        for cell in 0..mesh.num_cells() {
            let o = &mut out[cell * b..(cell + 1) * b];
            gemv_add(&st.local, b, &u[cell * b..(cell + 1) * b], o);
            for (side, blk) in &st.upwind {
                if let Some(nb) = mesh.neighbor(cell, *side) {
                    gemv_add(blk, b, &u[nb * b..(nb + 1) * b], o);
                }
            }
        }
        out
    }

    /// Matrix-free `(M/dt + D_j + Sigma_t) u`.
    pub fn apply_system(&self, j: usize, u: &[f64]) -> Vec<f64> {
        let mut y = self.apply_advection(j, u);
        let st = self.apply_sigma_t(u);
        for i in 0..y.len() {
            y[i] += u[i] / self.dt + st[i];
        }
        y
    }

    /// Diagonal block `M/dt + V + O + Sigma_t` of `cell` for angle `j`.
    pub fn local_block(&self, j: usize, cell: usize) -> Vec<f64> {
        let b = self.space.n_local();
        let mut a = self.stencils[j].local.clone();
        let st = self.sigma_t_block(cell);
        for k in 0..b * b {
            a[k] += st[k];
        }
        for k in 0..b {
            a[k * b + k] += 1.0 / self.dt;
        }
        a
    }

    /// Explicit `D_j` as a dense matrix (small meshes, testing).
    pub fn advection_dense(&self, j: usize) -> DMatrix<f64> {
        let n = self.n_dofs();
        let b = self.space.n_local();
        let mesh = self.space.mesh();
        let st = &self.stencils[j];
        let mut d = DMatrix::<f64>::zeros(n, n);
        for cell in 0..mesh.num_cells() {
            for k in 0..b {
                for l in 0..b {
                    d[(cell * b + k, cell * b + l)] += st.local[k * b + l];
                }
            }
            for (side, blk) in &st.upwind {
                if let Some(nb) = mesh.neighbor(cell, *side) {
                    for k in 0..b {
                        for l in 0..b {
                            d[(cell * b + k, nb * b + l)] += blk[k * b + l];
                        }
                    }
                }
            }
        }
        d
    }

    /// Explicit `M/dt + D_j + Sigma_t` (small meshes, testing).
    pub fn system_dense(&self, j: usize) -> DMatrix<f64> {
        let mut a = self.advection_dense(j);
        let b = self.space.n_local();
        for cell in 0..self.space.num_cells() {
            let st = self.sigma_t_block(cell);
            for k in 0..b {
                for l in 0..b {
                    a[(cell * b + k, cell * b + l)] += st[k * b + l];
                }
                a[(cell * b + k, cell * b + k)] += 1.0 / self.dt;
            }
        }
        a
    }

    /// Explicit block-diagonal `Sigma_s` (small meshes, testing).
    pub fn sigma_s_dense(&self) -> DMatrix<f64> {
        let n = self.n_dofs();
        let b = self.space.n_local();
        let mut s = DMatrix::<f64>::zeros(n, n);
        for cell in 0..self.space.num_cells() {
            let blk = self.sigma_s_block(cell);
            for k in 0..b {
                for l in 0..b {
                    s[(cell * b + k, cell * b + l)] = blk[k * b + l];
                }
            }
        }
        s
    }

    /// Number of transport sweeps performed so far (one sweep = all angles).
    pub fn sweep_count(&self) -> usize {
        self.sweeps.load(Ordering::Relaxed)
    }

    pub(crate) fn count_sweep(&self) {
        self.sweeps.fetch_add(1, Ordering::Relaxed);
    }
}

fn block_diag_apply(blocks: &[f64], b: usize, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for (cell, yc) in y.chunks_mut(b).enumerate() {
        gemv_add(&blocks[cell * b * b..(cell + 1) * b * b], b, &x[cell * b..(cell + 1) * b], yc);
    }
    y
}

/// `y += a x` for a row-major `b x b` block.
#[inline]
pub(crate) fn gemv_add(a: &[f64], b: usize, x: &[f64], y: &mut [f64]) {
    for k in 0..b {
        let row = &a[k * b..(k + 1) * b];
        let mut s = 0.0;
        for l in 0..b {
            s += row[l] * x[l];
        }
        y[k] += s;
    }
}

/// Per-axis 1D factor of a face or volume block, expanded to the tensor basis.
fn tensor_block(space: &DgSpace, axis: usize, one_d: &[Vec<f64>]) -> Vec<f64> {
    let b = space.n_local();
    let mut out = vec![0.0; b * b];
    for k in 0..b {
        let (kx, ky) = space.local_degrees(k);
        for l in 0..b {
            let (lx, ly) = space.local_degrees(l);
            out[k * b + l] = if axis == 0 {
                if ky == ly { one_d[kx][lx] } else { 0.0 }
            } else if kx == lx {
                one_d[ky][ly]
            } else {
                0.0
            };
        }
    }
    out
}

fn build_stencil(space: &DgSpace, dir: [f64; 3]) -> AngleStencil {
    let basis = space.basis();
    let n1 = space.degree() + 1;
    let h = space.mesh().h();
    let b = space.n_local();
    let grad = basis.grad_mass();
    let mut local = vec![0.0; b * b];
    let mut upwind = Vec::new();
    let mut outflow = Vec::new();
    for axis in 0..space.dim() {
        let v = dir[axis];
        // volume: -v int phi_k' phi_l
        let vol: Vec<Vec<f64>> = (0..n1)
            .map(|k| (0..n1).map(|l| -v * grad[k][l] / h[axis]).collect())
            .collect();
        let vb = tensor_block(space, axis, &vol);
        for (a, x) in local.iter_mut().zip(&vb) {
            *a += x;
        }
        let (low, high) = if axis == 0 {
            (Side::XLow, Side::XHigh)
        } else {
            (Side::YLow, Side::YHigh)
        };
        for side in [low, high] {
            let vn = v * side.normal_sign();
            let own = |p: usize| {
                if side.normal_sign() > 0.0 {
                    basis.trace_high(p)
                } else {
                    basis.trace_low(p)
                }
            };
            let other = |p: usize| {
                if side.normal_sign() > 0.0 {
                    basis.trace_low(p)
                } else {
                    basis.trace_high(p)
                }
            };
            if vn > 0.0 {
                let f: Vec<Vec<f64>> = (0..n1)
                    .map(|k| (0..n1).map(|l| vn * own(k) * own(l) / h[axis]).collect())
                    .collect();
                for (a, x) in local.iter_mut().zip(tensor_block(space, axis, &f)) {
                    *a += x;
                }
                outflow.push(side);
            } else {
                let f: Vec<Vec<f64>> = (0..n1)
                    .map(|k| (0..n1).map(|l| vn * own(k) * other(l) / h[axis]).collect())
                    .collect();
                upwind.push((side, tensor_block(space, axis, &f)));
            }
        }
    }
    AngleStencil {
        local,
        upwind,
        outflow,
    }
}

/// `(g_j)_k = - sum_{inflow boundary edges} int g phi_k (v . n)`.
fn inflow_vector(
    space: &DgSpace,
    dir: [f64; 3],
    g: &impl Fn(f64, f64) -> f64,
) -> Option<Vec<f64>> {
    let mesh = space.mesh();
    let basis = space.basis();
    let b = space.n_local();
    let h = mesh.h();
    let lo = mesh.lower();
    let hi = mesh.upper();
    let mut out = vec![0.0; space.n_dofs()];
    let mut any = false;
    for cell in 0..mesh.num_cells() {
        let origin = mesh.cell_origin(cell);
        for &side in mesh.sides() {
            let axis = side.axis();
            let vn = dir[axis] * side.normal_sign();
            if vn >= 0.0 || mesh.neighbor(cell, side).is_some() {
                continue;
            }
            let pos = if side.normal_sign() > 0.0 { hi[axis] } else { lo[axis] };
            let trace = |p: usize| {
                if side.normal_sign() > 0.0 {
                    basis.trace_high(p)
                } else {
                    basis.trace_low(p)
                }
            };
            let seg = &mut out[cell * b..(cell + 1) * b];
            if space.dim() == 1 {
                let gv = g(pos, 0.0);
                for k in 0..b {
                    seg[k] -= vn * gv * trace(k) / h[0].sqrt();
                }
            } else {
                let tang = 1 - axis;
                for q in 0..basis.points() {
                    let t = origin[tang] + 0.5 * (basis.nodes[q] + 1.0) * h[tang];
                    let (x, y) = if axis == 0 { (pos, t) } else { (t, pos) };
                    let gv = g(x, y);
                    if gv == 0.0 {
                        continue;
                    }
                    let w = basis.weights[q] * 0.5 * h[tang];
                    for k in 0..b {
                        let (kx, ky) = space.local_degrees(k);
                        let (kn, kt) = if axis == 0 { (kx, ky) } else { (ky, kx) };
                        let phi = trace(kn) / h[axis].sqrt() * basis.values[kt][q] / h[tang].sqrt();
                        seg[k] -= vn * w * gv * phi;
                    }
                }
            }
        }
    }
    for v in &out {
        if *v != 0.0 {
            any = true;
            break;
        }
    }
    any.then_some(out)
}
