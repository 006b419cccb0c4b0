//! Uniform rectangular meshes in one or two dimensions.

use crate::error::{Error, Result};

/// One side of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    XLow,
    XHigh,
    YLow,
    YHigh,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::XLow, Side::XHigh, Side::YLow, Side::YHigh];

    /// Axis index (0 = x, 1 = y).
    pub fn axis(self) -> usize {
        match self {
            Side::XLow | Side::XHigh => 0,
            Side::YLow | Side::YHigh => 1,
        }
    }

    /// Sign of the outward normal along its axis.
    pub fn normal_sign(self) -> f64 {
        match self {
            Side::XLow | Side::YLow => -1.0,
            Side::XHigh | Side::YHigh => 1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::XLow => Side::XHigh,
            Side::XHigh => Side::XLow,
            Side::YLow => Side::YHigh,
            Side::YHigh => Side::YLow,
        }
    }
}

/// A mesh edge (a point in 1D). `minus` is the cell on the low side of the
/// edge along `axis`; boundary edges carry a single cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub axis: usize,
    pub minus: Option<usize>,
    pub plus: Option<usize>,
    /// Coordinate of the edge along `axis`.
    pub position: f64,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none() || self.plus.is_none()
    }
}

/// Uniform tensor-product mesh. Cells are numbered `i + nx * j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RectMesh {
    dim: usize,
    lower: [f64; 2],
    upper: [f64; 2],
    counts: [usize; 2],
    h: [f64; 2],
}

impl RectMesh {
    /// Builds a mesh from per-axis `(low, high)` bounds and cell counts; the
    /// dimension is the number of axes given (1 or 2).
    pub fn new(bounds: &[(f64, f64)], counts: &[usize]) -> Result<Self> {
        let dim = bounds.len();
        if !(1..=2).contains(&dim) || counts.len() != dim {
            return Err(Error::Config(format!(
                "mesh needs 1 or 2 axes with matching counts, got {} bounds and {} counts",
                bounds.len(),
                counts.len()
            )));
        }
        let mut lower = [0.0, 0.0];
        let mut upper = [1.0, 1.0];
        let mut n = [1, 1];
        let mut h = [1.0, 1.0];
        for a in 0..dim {
            let (lo, hi) = bounds[a];
            if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
                return Err(Error::Config(format!("axis {a}: bounds [{lo}, {hi}] not ordered")));
            }
            if counts[a] == 0 {
                return Err(Error::Config(format!("axis {a}: cell count must be positive")));
            }
            lower[a] = lo;
            upper[a] = hi;
            n[a] = counts[a];
            h[a] = (hi - lo) / counts[a] as f64;
        }
        Ok(Self {
            dim,
            lower,
            upper,
            counts: n,
            h,
        })
    }

    pub fn new_1d(x: (f64, f64), nx: usize) -> Result<Self> {
        Self::new(&[x], &[nx])
    }

    pub fn new_2d(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        Self::new(&[x, y], &[nx, ny])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_cells(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }

    /// Cell sizes per axis (the y entry is 1 in 1D).
    pub fn h(&self) -> [f64; 2] {
        self.h
    }

    pub fn lower(&self) -> [f64; 2] {
        self.lower
    }

    pub fn upper(&self) -> [f64; 2] {
        self.upper
    }

    /// Cell measure (length in 1D, area in 2D).
    pub fn cell_measure(&self) -> f64 {
        if self.dim == 1 {
            self.h[0]
        } else {
            self.h[0] * self.h[1]
        }
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        i + self.counts[0] * j
    }

    pub fn cell_ij(&self, cell: usize) -> (usize, usize) {
        (cell % self.counts[0], cell / self.counts[0])
    }

    /// Lower corner of a cell.
    pub fn cell_origin(&self, cell: usize) -> [f64; 2] {
        let (i, j) = self.cell_ij(cell);
        [
            self.lower[0] + i as f64 * self.h[0],
            self.lower[1] + j as f64 * self.h[1],
        ]
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let o = self.cell_origin(cell);
        if self.dim == 1 {
            [o[0] + 0.5 * self.h[0], 0.0]
        } else {
            [o[0] + 0.5 * self.h[0], o[1] + 0.5 * self.h[1]]
        }
    }

    /// Sides that exist for this dimension.
    pub fn sides(&self) -> &'static [Side] {
        if self.dim == 1 {
            &Side::ALL[..2]
        } else {
            &Side::ALL
        }
    }

    /// Neighbor across `side`, or `None` on the domain boundary.
    pub fn neighbor(&self, cell: usize, side: Side) -> Option<usize> {
        let (i, j) = self.cell_ij(cell);
        let [nx, ny] = self.counts;
        match side {
            Side::XLow => (i > 0).then(|| cell - 1),
            Side::XHigh => (i + 1 < nx).then(|| cell + 1),
            Side::YLow if self.dim == 2 => (j > 0).then(|| cell - nx),
            Side::YHigh if self.dim == 2 => (j + 1 < ny).then(|| cell + nx),
            _ => None,
        }
    }

    /// All edges with their incident cells.
    pub fn edges(&self) -> Vec<Edge> {
        let [nx, ny] = self.counts;
        let mut edges = Vec::new();
        for j in 0..ny {
            for i in 0..=nx {
                edges.push(Edge {
                    axis: 0,
                    minus: (i > 0).then(|| self.cell_index(i - 1, j)),
                    plus: (i < nx).then(|| self.cell_index(i, j)),
                    position: self.lower[0] + i as f64 * self.h[0],
                });
            }
        }
        if self.dim == 2 {
            for j in 0..=ny {
                for i in 0..nx {
                    edges.push(Edge {
                        axis: 1,
                        minus: (j > 0).then(|| self.cell_index(i, j - 1)),
                        plus: (j < ny).then(|| self.cell_index(i, j)),
                        position: self.lower[1] + j as f64 * self.h[1],
                    });
                }
            }
        }
        edges
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slab_spacing() {
        let m = RectMesh::new_1d((0.0, 11.0), 110).unwrap();
        assert!((m.h()[0] - 0.1).abs() < 1e-15);
        assert_eq!(m.num_cells(), 110);
    }

    #[test]
    fn square_cell_count() {
        let m = RectMesh::new_2d((-1.0, 1.0), (-1.0, 1.0), 81, 81).unwrap();
        assert_eq!(m.num_cells(), 6561);
        assert!(m.cell_measure() > 0.0);
    }

    #[test]
    fn single_cell_has_two_boundary_edges() {
        let m = RectMesh::new_1d((0.0, 1.0), 1).unwrap();
        let e = m.edges();
        assert_eq!(m.num_cells(), 1);
        assert_eq!(e.len(), 2);
        assert!(e.iter().all(|e| e.is_boundary()));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RectMesh::new_1d((0.0, 1.0), 0).is_err());
        assert!(RectMesh::new_1d((1.0, 0.0), 4).is_err());
        assert!(RectMesh::new(&[], &[]).is_err());
    }

    #[test]
    fn edge_incidence() {
        let m = RectMesh::new_2d((0.0, 1.0), (0.0, 2.0), 3, 4).unwrap();
        let mut count = vec![0usize; m.num_cells()];
        for e in m.edges() {
            let n = e.minus.is_some() as usize + e.plus.is_some() as usize;
            assert!(n == 1 || n == 2);
            assert_eq!(n == 1, e.is_boundary());
            for c in [e.minus, e.plus].into_iter().flatten() {
                count[c] += 1;
            }
        }
        assert!(count.iter().all(|&c| c == 4));
        // neighbor symmetry
        for c in 0..m.num_cells() {
            for &s in m.sides() {
                if let Some(nb) = m.neighbor(c, s) {
                    assert_eq!(m.neighbor(nb, s.opposite()), Some(c));
                }
            }
        }
    }
}
