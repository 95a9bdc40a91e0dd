use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest number of nodes allowed on any axis. Four points is what the
/// one-sided second-derivative stencil needs.
pub const MIN_POINTS: usize = 4;

/// Serializable description of a grid: what a config or sidecar stores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dims: Vec<usize>,
    pub extents: Vec<f64>,
    pub periodic: Vec<bool>,
}

/// Uniform tensor grid. Node coordinates start at zero on every axis; node
/// ordering is row-major (last axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dims: Vec<usize>,
    extents: Vec<f64>,
    periodic: Vec<bool>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    pub fn new(dims: &[usize], extents: &[f64], periodic: &[bool]) -> Result<Grid> {
        if dims.len() != extents.len() || dims.len() != periodic.len() {
            return Err(Error::DimensionMismatch(format!(
                "dims has {} entries, extents {}, periodic {}",
                dims.len(),
                extents.len(),
                periodic.len()
            )));
        }
        if dims.is_empty() {
            return Err(Error::DimensionMismatch("a grid needs at least one axis".into()));
        }
        for (axis, (&d, &e)) in dims.iter().zip(extents).enumerate() {
            if d < MIN_POINTS {
                return Err(Error::DegenerateAxis { axis, reason: format!("{d} points, need at least {MIN_POINTS}") });
            }
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::DegenerateAxis { axis, reason: format!("extent {e}") });
            }
        }
        let spacing = dims
            .iter()
            .zip(extents)
            .zip(periodic)
            .map(|((&d, &e), &p)| if p { e / d as f64 } else { e / (d - 1) as f64 })
            .collect();
        let mut strides = vec![1; dims.len()];
        for a in (0..dims.len() - 1).rev() {
            strides[a] = strides[a + 1] * dims[a + 1];
        }
        Ok(Grid {
            dims: dims.to_vec(),
            extents: extents.to_vec(),
            periodic: periodic.to_vec(),
            spacing,
            strides,
            len: dims.iter().product(),
        })
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Grid> {
        Grid::new(&spec.dims, &spec.extents, &spec.periodic)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { dims: self.dims.clone(), extents: self.extents.clone(), periodic: self.periodic.clone() }
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }
    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.len
    }
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }
    pub fn extents(&self) -> &[f64] {
        &self.extents
    }
    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }
    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// The single bounded axis, if there is exactly one.
    pub fn bounded_axes(&self) -> Vec<usize> {
        (0..self.ndim()).filter(|&a| !self.periodic[a]).collect()
    }

    pub fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.ndim() {
            return Err(Error::AxisOutOfRange { axis, ndim: self.ndim() });
        }
        Ok(())
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Index of `node` along `axis`.
    #[inline]
    pub fn coord_index(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.dims[axis]
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        (0..self.ndim()).map(|a| self.coord_index(node, a)).collect()
    }

    /// Coordinate value of index `i` along `axis`.
    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        i as f64 * self.spacing[axis]
    }

    pub fn node_coords(&self, node: usize, out: &mut [f64]) {
        for (a, o) in out.iter_mut().enumerate().take(self.ndim()) {
            *o = self.coord(a, self.coord_index(node, a));
        }
    }

    /// Node reached by stepping `offset` along `axis`; wraps on periodic
    /// axes and returns `None` past a bounded end.
    #[inline]
    pub fn shift(&self, node: usize, axis: usize, offset: isize) -> Option<usize> {
        let n = self.dims[axis] as isize;
        let i = self.coord_index(node, axis) as isize;
        let j = i + offset;
        let j = if self.periodic[axis] {
            j.rem_euclid(n)
        } else if j < 0 || j >= n {
            return None;
        } else {
            j
        };
        Some((node as isize + (j - i) * self.strides[axis] as isize) as usize)
    }

    /// One-dimensional quadrature weight of index `i` on `axis`: rectangle rule
    /// on periodic axes, trapezoid on bounded ones.
    #[inline]
    pub fn weight_1d(&self, axis: usize, i: usize) -> f64 {
        let h = self.spacing[axis];
        if !self.periodic[axis] && (i == 0 || i + 1 == self.dims[axis]) {
            0.5 * h
        } else {
            h
        }
    }

    pub fn node_weight(&self, node: usize) -> f64 {
        (0..self.ndim()).map(|a| self.weight_1d(a, self.coord_index(node, a))).product()
    }

    /// Product of the 1-d weights over every axis except `skip`.
    pub fn node_weight_except(&self, node: usize, skip: &[usize]) -> f64 {
        (0..self.ndim()).filter(|a| !skip.contains(a)).map(|a| self.weight_1d(a, self.coord_index(node, a))).product()
    }

    /// Grid with `axis` removed (the base of a graph, or a boundary slice).
    pub fn without_axis(&self, axis: usize) -> Result<Grid> {
        self.check_axis(axis)?;
        if self.ndim() == 1 {
            return Err(Error::DimensionMismatch("cannot drop the only axis".into()));
        }
        let keep = |v: &[usize]| v.iter().enumerate().filter(|(a, _)| *a != axis).map(|(_, x)| *x).collect::<Vec<_>>();
        let ext: Vec<f64> = self.extents.iter().enumerate().filter(|(a, _)| *a != axis).map(|(_, x)| *x).collect();
        let per: Vec<bool> = self.periodic.iter().enumerate().filter(|(a, _)| *a != axis).map(|(_, x)| *x).collect();
        Grid::new(&keep(&self.dims), &ext, &per)
    }

    /// Same grid with a new point count and extent along `axis`.
    pub fn with_axis(&self, axis: usize, dim: usize, extent: f64, periodic: bool) -> Result<Grid> {
        self.check_axis(axis)?;
        let mut d = self.dims.clone();
        let mut e = self.extents.clone();
        let mut p = self.periodic.clone();
        d[axis] = dim;
        e[axis] = extent;
        p[axis] = periodic;
        Grid::new(&d, &e, &p)
    }

    /// Nodes whose index along `axis` equals `i`, in row-major order.
    pub fn slice_nodes(&self, axis: usize, i: usize) -> Vec<usize> {
        (0..self.len).filter(|&p| self.coord_index(p, axis) == i).collect()
    }

    /// Whether two grids agree up to rounding in the extents.
    pub fn compatible(&self, other: &Grid) -> bool {
        self.dims == other.dims
            && self.periodic == other.periodic
            && self.extents.iter().zip(&other.extents).all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0))
    }
}

/// `build_grid` under the name used throughout the docs.
pub fn build_grid(dims: &[usize], extents: &[f64], periodic: &[bool]) -> Result<Grid> {
    Grid::new(dims, extents, periodic)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_follows_periodicity() {
        let g = build_grid(&[8, 8], &[1.0, 1.0], &[true, true]).unwrap();
        assert_eq!(g.spacing(), &[0.125, 0.125]);
        let g = build_grid(&[8, 9], &[1.0, 2.0], &[true, false]).unwrap();
        assert_eq!(g.spacing(), &[0.125, 0.25]);
    }

    #[test]
    fn rejects_degenerate_axes() {
        assert!(matches!(build_grid(&[3, 8], &[1.0, 1.0], &[true, true]), Err(Error::DegenerateAxis { axis: 0, .. })));
        assert!(matches!(build_grid(&[8, 8], &[1.0, 0.0], &[true, true]), Err(Error::DegenerateAxis { axis: 1, .. })));
        assert!(matches!(build_grid(&[8], &[1.0, 1.0], &[true]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn shift_wraps_and_stops() {
        let g = build_grid(&[4, 5], &[1.0, 1.0], &[true, false]).unwrap();
        let p = g.index(&[0, 0]);
        assert_eq!(g.shift(p, 0, -1), Some(g.index(&[3, 0])));
        assert_eq!(g.shift(p, 1, -1), None);
        assert_eq!(g.shift(p, 1, 4), Some(g.index(&[0, 4])));
        assert_eq!(g.multi_index(g.index(&[2, 3])), vec![2, 3]);
    }

    #[test]
    fn weights_sum_to_measure() {
        let g = build_grid(&[6, 7], &[2.0, 3.0], &[true, false]).unwrap();
        let total: f64 = (0..g.len()).map(|p| g.node_weight(p)).sum();
        assert!((total - 6.0).abs() < 1e-12);
    }
}
