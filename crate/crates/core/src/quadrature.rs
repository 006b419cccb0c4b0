//! Angular quadrature rules for 1D slab and 2D X-Y geometry, plus the
//! Gauss-Legendre rule used for cell integrals.
//!
//! Angular weights are normalized so they sum to one; the density is then
//! `rho = sum_j w_j f_j` in every geometry.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Evaluates the Legendre polynomial `P_n(x)` and its derivative.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // P_n'(+-1) = (+-1)^(n+1) n(n+1)/2
        let sign = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        sign * nf * (nf + 1.0) / 2.0
    } else {
        nf * (x * p - p_prev) / (x * x - 1.0)
    };
    (p, dp)
}

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`; weights sum to 2.
///
/// Nodes are found by Newton iteration on `P_n` from Chebyshev-like initial
/// guesses and mirrored so the rule is exactly symmetric.
pub fn gauss_legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..half {
        // i-th largest root
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= NEWTON_TOL {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Scales `w` to unit sum, with the sum taken in compensated arithmetic.
fn normalized(w: Vec<f64>) -> Vec<f64> {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for &v in &w {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    let total = sum + carry;
    w.into_iter().map(|v| v / total).collect()
}

/// Geometry an angular rule belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngularGeometry {
    /// Directions are cosines `mu` in (-1, 1) along x.
    Slab1d,
    /// Unit vectors on the sphere; sweeps use the x and y components.
    Sphere,
}

/// Discrete ordinates and normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularQuadrature {
    geometry: AngularGeometry,
    directions: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl AngularQuadrature {
    /// Gauss-Legendre rule for slab geometry with `n` (even) ordinates.
    pub fn gauss_legendre_1d(n: usize) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidQuadrature(format!(
                "slab rule needs an even number of ordinates >= 2, got {n}"
            )));
        }
        let (nodes, weights) = gauss_legendre_nodes(n);
        Ok(Self {
            geometry: AngularGeometry::Slab1d,
            directions: nodes.iter().map(|&mu| [mu, 0.0, 0.0]).collect(),
            weights: normalized(weights),
        })
    }

    /// Chebyshev-Legendre product rule on the unit sphere.
    ///
    /// Azimuthal nodes `phi = (2 j1 - 1) pi / n_phi` with weights `1/n_phi`,
    /// polar nodes from the normalized `n_z`-point Gauss-Legendre rule, and
    /// linear index `j = j2 * n_phi + j1` (zero based).
    ///
    /// `n_phi` must be a multiple of 4: otherwise some azimuthal node lands
    /// on a multiple of `pi/2` and the direction has no x or y component.
    pub fn chebyshev_legendre(n_phi: usize, n_z: usize) -> Result<Self> {
        if n_phi < 4 || n_phi % 4 != 0 {
            return Err(Error::InvalidQuadrature(format!(
                "azimuthal count must be a positive multiple of 4, got {n_phi}"
            )));
        }
        if n_z < 2 {
            return Err(Error::InvalidQuadrature(format!(
                "polar count must be >= 2, got {n_z}"
            )));
        }
        let (vz, wz) = gauss_legendre_nodes(n_z);
        let mut directions = Vec::with_capacity(n_phi * n_z);
        let mut weights = Vec::with_capacity(n_phi * n_z);
        for (z, wzk) in vz.iter().zip(&wz) {
            let sin_theta = (1.0 - z * z).sqrt();
            for j1 in 0..n_phi {
                let phi = (2.0 * j1 as f64 + 1.0) * PI / n_phi as f64;
                directions.push([phi.cos() * sin_theta, phi.sin() * sin_theta, *z]);
                weights.push(0.5 * wzk / n_phi as f64);
            }
        }
        Ok(Self {
            geometry: AngularGeometry::Sphere,
            directions,
            weights: normalized(weights),
        })
    }

    pub fn geometry(&self) -> AngularGeometry {
        self.geometry
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn directions(&self) -> &[[f64; 3]] {
        &self.directions
    }

    pub fn direction(&self, j: usize) -> [f64; 3] {
        self.directions[j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.weights[j]
    }

    /// `sum_j w_j g(v_j)`.
    pub fn integrate(&self, g: impl Fn([f64; 3]) -> f64) -> f64 {
        self.directions
            .iter()
            .zip(&self.weights)
            .map(|(d, w)| w * g(*d))
            .sum()
    }
}
