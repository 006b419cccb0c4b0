//! Discontinuous Galerkin space of tensor-product polynomials of degree `K`
//! per axis, with an `L^2`-orthonormal Legendre basis on every cell.
//!
//! Local basis index for 2D is `a = px + (K + 1) * py`; global DOF index is
//! `cell * (K + 1)^d + a`. Orthonormality makes the global mass matrix the
//! identity.

use crate::error::{Error, Result};
use crate::mesh::RectMesh;
use crate::quadrature::{gauss_legendre_nodes, legendre};

/// Points per axis used by [`project_to_dg`]. Initial conditions such as a
/// narrow Gaussian need more resolution than the assembly rule provides.
pub const PROJECTION_POINTS: usize = 12;

/// Orthonormal Legendre basis on the reference interval, tabulated at a
/// Gauss-Legendre rule. Values are for `sqrt(2p + 1) P_p(xi)`, i.e. the
/// physical basis up to the factor `1/sqrt(h)`.
#[derive(Debug, Clone)]
pub struct Basis1d {
    pub degree: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `values[p][q]`
    pub values: Vec<Vec<f64>>,
    /// `derivs[p][q]`, derivative with respect to the reference coordinate.
    pub derivs: Vec<Vec<f64>>,
}

impl Basis1d {
    pub fn new(degree: usize, points: usize) -> Self {
        let (nodes, weights) = gauss_legendre_nodes(points);
        let mut values = vec![vec![0.0; points]; degree + 1];
        let mut derivs = vec![vec![0.0; points]; degree + 1];
        for p in 0..=degree {
            let s = (2.0 * p as f64 + 1.0).sqrt();
            for (q, &x) in nodes.iter().enumerate() {
                let (v, d) = legendre(p, x);
                values[p][q] = s * v;
                derivs[p][q] = s * d;
            }
        }
        Self {
            degree,
            nodes,
            weights,
            values,
            derivs,
        }
    }

    pub fn points(&self) -> usize {
        self.nodes.len()
    }

    /// Reference basis value at `xi` in [-1, 1].
    pub fn eval(&self, p: usize, xi: f64) -> f64 {
        (2.0 * p as f64 + 1.0).sqrt() * legendre(p, xi).0
    }

    /// Reference trace at the high (`+1`) end.
    pub fn trace_high(&self, p: usize) -> f64 {
        (2.0 * p as f64 + 1.0).sqrt()
    }

    /// Reference trace at the low (`-1`) end.
    pub fn trace_low(&self, p: usize) -> f64 {
        let s = (2.0 * p as f64 + 1.0).sqrt();
        if p % 2 == 0 {
            s
        } else {
            -s
        }
    }

    /// `int_{-1}^{1} phi_k'(xi) phi_l(xi) dxi` on the reference interval.
    pub fn grad_mass(&self) -> Vec<Vec<f64>> {
        let n = self.degree + 1;
        let mut g = vec![vec![0.0; n]; n];
        for k in 0..n {
            for l in 0..n {
                g[k][l] = (0..self.points())
                    .map(|q| self.weights[q] * self.derivs[k][q] * self.values[l][q])
                    .sum();
            }
        }
        g
    }
}

/// The `Q^K` DG space on a rectangular mesh.
#[derive(Debug, Clone)]
pub struct DgSpace {
    mesh: RectMesh,
    degree: usize,
    n_local: usize,
    basis: Basis1d,
}

impl DgSpace {
    /// Space of degree `degree` using a `(K + 2)`-point rule per axis for cell
    /// integrals.
    pub fn new(mesh: RectMesh, degree: usize) -> Self {
        let n_local = (degree + 1).pow(mesh.dim() as u32);
        let basis = Basis1d::new(degree, degree + 2);
        Self {
            mesh,
            degree,
            n_local,
            basis,
        }
    }

    pub fn mesh(&self) -> &RectMesh {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Local basis size `(K + 1)^d`.
    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn num_cells(&self) -> usize {
        self.mesh.num_cells()
    }

    /// Global DOF count `N_E (K + 1)^d`.
    pub fn n_dofs(&self) -> usize {
        self.mesh.num_cells() * self.n_local
    }

    pub fn basis(&self) -> &Basis1d {
        &self.basis
    }

    /// Split a local index into per-axis degrees.
    pub fn local_degrees(&self, a: usize) -> (usize, usize) {
        let n1 = self.degree + 1;
        if self.dim() == 1 {
            (a, 0)
        } else {
            (a % n1, a / n1)
        }
    }

    /// Number of assembly quadrature points per cell.
    pub fn n_quad(&self) -> usize {
        self.basis.points().pow(self.dim() as u32)
    }

    /// Physical coordinates of the assembly quadrature points of `cell`,
    /// ordered `qx + nq * qy`.
    pub fn quad_points(&self, cell: usize) -> Vec<[f64; 2]> {
        cell_points(&self.mesh, cell, &self.basis.nodes)
    }

    /// Values of the physical basis at the assembly points scaled by the
    /// physical quadrature weights: returns `(phi[a][q], w[q])`.
    pub fn tabulate(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        tabulate(self, &self.basis)
    }

    /// `int_cell c(x) phi_k phi_l` for `c` sampled at the assembly points.
    pub fn weighted_mass(&self, coeff: &[f64]) -> Vec<f64> {
        let (phi, w) = self.tabulate();
        let b = self.n_local;
        let mut m = vec![0.0; b * b];
        for k in 0..b {
            for l in 0..b {
                m[k * b + l] = (0..w.len())
                    .map(|q| w[q] * coeff[q] * phi[k][q] * phi[l][q])
                    .sum();
            }
        }
        m
    }

    /// Basis moments `int_cell f phi_a` with `points` Gauss points per axis.
    pub fn cell_moments(&self, cell: usize, points: usize, f: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
        let basis = if points == self.basis.points() {
            self.basis.clone()
        } else {
            Basis1d::new(self.degree, points)
        };
        let (phi, w) = tabulate(self, &basis);
        let pts = cell_points(&self.mesh, cell, &basis.nodes);
        let vals: Vec<f64> = pts.iter().map(|p| f(p[0], p[1])).collect();
        (0..self.n_local)
            .map(|a| (0..w.len()).map(|q| w[q] * vals[q] * phi[a][q]).sum())
            .collect()
    }

    /// Evaluates the DG function with coefficients `coeffs` at `point` inside
    /// `cell`.
    pub fn eval(&self, coeffs: &[f64], cell: usize, point: [f64; 2]) -> f64 {
        let o = self.mesh.cell_origin(cell);
        let h = self.mesh.h();
        let xi = 2.0 * (point[0] - o[0]) / h[0] - 1.0;
        let eta = 2.0 * (point[1] - o[1]) / h[1] - 1.0;
        let scale = 1.0 / self.mesh.cell_measure().sqrt();
        let base = cell * self.n_local;
        (0..self.n_local)
            .map(|a| {
                let (px, py) = self.local_degrees(a);
                let vy = if self.dim() == 1 { 1.0 } else { self.basis.eval(py, eta) };
                coeffs[base + a] * scale * self.basis.eval(px, xi) * vy
            })
            .sum()
    }
}

fn cell_points(mesh: &RectMesh, cell: usize, nodes: &[f64]) -> Vec<[f64; 2]> {
    let o = mesh.cell_origin(cell);
    let h = mesh.h();
    let map = |xi: f64, a: usize| o[a] + 0.5 * (xi + 1.0) * h[a];
    if mesh.dim() == 1 {
        nodes.iter().map(|&x| [map(x, 0), 0.0]).collect()
    } else {
        let mut pts = Vec::with_capacity(nodes.len() * nodes.len());
        for &y in nodes {
            for &x in nodes {
                pts.push([map(x, 0), map(y, 1)]);
            }
        }
        pts
    }
}

fn tabulate(space: &DgSpace, basis: &Basis1d) -> (Vec<Vec<f64>>, Vec<f64>) {
    let nq = basis.points();
    let mesh = space.mesh();
    let h = mesh.h();
    let scale = 1.0 / mesh.cell_measure().sqrt();
    let b = space.n_local();
    if space.dim() == 1 {
        let w = basis.weights.iter().map(|w| w * 0.5 * h[0]).collect();
        let phi = (0..b)
            .map(|a| basis.values[a].iter().map(|v| v * scale).collect())
            .collect();
        (phi, w)
    } else {
        let mut w = Vec::with_capacity(nq * nq);
        for qy in 0..nq {
            for qx in 0..nq {
                w.push(basis.weights[qx] * basis.weights[qy] * 0.25 * h[0] * h[1]);
            }
        }
        let phi = (0..b)
            .map(|a| {
                let (px, py) = space.local_degrees(a);
                let mut v = Vec::with_capacity(nq * nq);
                for qy in 0..nq {
                    for qx in 0..nq {
                        v.push(scale * basis.values[px][qx] * basis.values[py][qy]);
                    }
                }
                v
            })
            .collect();
        (phi, w)
    }
}

/// `L^2` projection of `f` onto the DG space.
pub fn project_to_dg(space: &DgSpace, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let points = PROJECTION_POINTS.max(space.degree() + 2);
    let mut out = Vec::with_capacity(space.n_dofs());
    for cell in 0..space.num_cells() {
        out.extend(space.cell_moments(cell, points, &f));
    }
    out
}

/// Mean value of the DG function over each cell.
pub fn cell_averages(space: &DgSpace, coeffs: &[f64]) -> Result<Vec<f64>> {
    if coeffs.len() != space.n_dofs() {
        return Err(Error::Shape {
            expected: space.n_dofs(),
            got: coeffs.len(),
        });
    }
    let b = space.n_local();
    let s = space.mesh().cell_measure().sqrt();
    Ok((0..space.num_cells()).map(|c| coeffs[c * b] / s).collect())
}

/// Scattering and total cross sections sampled at the assembly quadrature
/// points of every cell.
#[derive(Debug, Clone)]
pub struct CrossSections {
    n_quad: usize,
    sigma_s: Vec<f64>,
    sigma_t: Vec<f64>,
}

impl CrossSections {
    /// Samples `sigma_s(x, y)` and `sigma_t(x, y)`, rejecting any point with
    /// `sigma_t < sigma_s` or `sigma_s < 0`.
    pub fn sample(
        space: &DgSpace,
        sigma_s: impl Fn(f64, f64) -> f64,
        sigma_t: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let n_quad = space.n_quad();
        let mut ss = Vec::with_capacity(space.num_cells() * n_quad);
        let mut st = Vec::with_capacity(space.num_cells() * n_quad);
        for cell in 0..space.num_cells() {
            for p in space.quad_points(cell) {
                let s = sigma_s(p[0], p[1]);
                let t = sigma_t(p[0], p[1]);
                if !(s.is_finite() && t.is_finite()) || s < 0.0 || t < s {
                    return Err(Error::InvalidCrossSection(format!(
                        "sigma_s = {s}, sigma_t = {t} at ({}, {})",
                        p[0], p[1]
                    )));
                }
                ss.push(s);
                st.push(t);
            }
        }
        Ok(Self {
            n_quad,
            sigma_s: ss,
            sigma_t: st,
        })
    }

    pub fn n_quad(&self) -> usize {
        self.n_quad
    }

    pub fn sigma_s(&self, cell: usize) -> &[f64] {
        &self.sigma_s[cell * self.n_quad..(cell + 1) * self.n_quad]
    }

    pub fn sigma_t(&self, cell: usize) -> &[f64] {
        &self.sigma_t[cell * self.n_quad..(cell + 1) * self.n_quad]
    }

    /// Absorption `sigma_t - sigma_s` at the quadrature points of `cell`.
    pub fn sigma_a(&self, cell: usize) -> Vec<f64> {
        self.sigma_t(cell)
            .iter()
            .zip(self.sigma_s(cell))
            .map(|(t, s)| t - s)
            .collect()
    }
}
