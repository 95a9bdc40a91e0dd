//! Grids, sampled tensor fields, finite differences and quadrature.

mod diff;
mod grid;
pub mod rfld;

use std::sync::Arc;

pub use diff::{
    derivative_at, derivative_raw, partial_derivative, partial_derivative_with, scalar_jet, Closure, ScalarJet,
};
pub use grid::{build_grid, Grid, GridSpec, MIN_POINTS};

use crate::error::{Error, Result};

/// Symmetry defect tolerated (and then removed) in rank-2 fields.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A tensor field sampled at grid nodes.
///
/// Each node stores `dim^rank` components with the last index fastest. `dim`
/// is usually the grid dimension but need not be: the unit normal of a
/// hypersurface lives on the base grid while having ambient components.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    rank: usize,
    dim: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn from_parts(grid: Arc<Grid>, rank: usize, dim: usize, values: Vec<f64>) -> Result<Field> {
        if rank > 2 {
            return Err(Error::DimensionMismatch(format!("tensor rank {rank} (max 2)")));
        }
        let ncomp = dim.pow(rank as u32);
        if values.len() != grid.len() * ncomp {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for {} nodes x {} components",
                values.len(),
                grid.len(),
                ncomp
            )));
        }
        Ok(Field { grid, rank, dim, values })
    }

    pub fn scalar(grid: &Grid, values: Vec<f64>) -> Result<Field> {
        Field::from_parts(Arc::new(grid.clone()), 0, grid.ndim(), values)
    }

    pub fn scalar_on(grid: Arc<Grid>, values: Vec<f64>) -> Result<Field> {
        let d = grid.ndim();
        Field::from_parts(grid, 0, d, values)
    }

    /// Scalar field sampled from a function of the node coordinates.
    pub fn scalar_from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64 + Sync + Send) -> Field {
        let grid = Arc::new(grid.clone());
        let values = crate::par::map_indices(grid.len(), |p| {
            let mut x = vec![0.0; grid.ndim()];
            grid.node_coords(p, &mut x);
            f(&x)
        });
        let dim = grid.ndim();
        Field { grid, rank: 0, dim, values }
    }

    /// Rank-2 field that must be symmetric; defects up to [`SYMMETRY_TOL`]
    /// (relative to the entry size) are averaged away, larger ones rejected.
    pub fn symmetric(grid: Arc<Grid>, dim: usize, mut values: Vec<f64>) -> Result<Field> {
        let nc = dim * dim;
        if values.len() != grid.len() * nc {
            return Err(Error::DimensionMismatch(format!("{} samples for {} nodes", values.len(), grid.len())));
        }
        for (node, t) in values.chunks_mut(nc).enumerate() {
            for i in 0..dim {
                for j in i + 1..dim {
                    let (a, b) = (t[i * dim + j], t[j * dim + i]);
                    let defect = (a - b).abs();
                    if defect > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                        return Err(Error::AsymmetricMetric { node, defect });
                    }
                    if defect > 0.0 {
                        let m = 0.5 * (a + b);
                        t[i * dim + j] = m;
                        t[j * dim + i] = m;
                    }
                }
            }
        }
        Field::from_parts(grid, 2, dim, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn grid_arc(&self) -> Arc<Grid> {
        self.grid.clone()
    }
    pub fn rank(&self) -> usize {
        self.rank
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    /// Components per node.
    pub fn ncomp(&self) -> usize {
        self.dim.pow(self.rank as u32)
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    /// Components at one node.
    pub fn at(&self, node: usize) -> &[f64] {
        let nc = self.ncomp();
        &self.values[node * nc..(node + 1) * nc]
    }

    /// a·self + b·other on the same grid.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        if self.grid != other.grid || self.rank != other.rank || self.dim != other.dim {
            return Err(Error::IncompatibleGrids("fields live on different grids or ranks".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Field::from_parts(self.grid.clone(), self.rank, self.dim, values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            rank: self.rank,
            dim: self.dim,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// ∫ field · density over the grid: trapezoid rule on bounded axes, rectangle
/// rule on periodic ones.
pub fn integrate(field: &Field, density: &Field) -> Result<f64> {
    if field.rank() != 0 || density.rank() != 0 {
        return Err(Error::DimensionMismatch("integrate expects scalar fields".into()));
    }
    if !field.grid().compatible(density.grid()) {
        return Err(Error::IncompatibleGrids("field and density grids differ".into()));
    }
    if let Some((node, &value)) = density.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveDensity { node, value });
    }
    Ok(integrate_raw(field.grid(), field.values(), density.values()))
}

/// Unchecked quadrature over raw node arrays.
pub fn integrate_raw(grid: &Grid, f: &[f64], density: &[f64]) -> f64 {
    (0..grid.len()).map(|p| grid.node_weight(p) * f[p] * density[p]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_measure() {
        let g = Grid::new(&[4, 4], &[1.0, 1.0], &[true, true]).unwrap();
        let one = Field::scalar_from_fn(&g, |_| 1.0);
        assert_eq!(integrate(&one, &one).unwrap(), 1.0);
    }

    #[test]
    fn rectangle_rule_is_spectral_on_periodic_data() {
        let g = Grid::new(&[16], &[1.0], &[true]).unwrap();
        let f = Field::scalar_from_fn(&g, |x| (2.0 * PI * x[0]).sin().powi(2));
        let one = Field::scalar_from_fn(&g, |_| 1.0);
        assert!((integrate(&f, &one).unwrap() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn negative_density_is_rejected() {
        let g = Grid::new(&[4], &[1.0], &[true]).unwrap();
        let f = Field::scalar_from_fn(&g, |_| 1.0);
        let d = Field::scalar(&g, vec![1.0, 1.0, -0.5, 1.0]).unwrap();
        assert!(matches!(integrate(&f, &d), Err(Error::NonPositiveDensity { node: 2, .. })));
    }

    #[test]
    fn symmetric_field_rejects_large_defects() {
        let g = Arc::new(Grid::new(&[4], &[1.0], &[true]).unwrap());
        let mut v = [1.0, 0.0, 0.0, 1.0].repeat(4);
        v[1] = 1e-13;
        let f = Field::symmetric(g.clone(), 2, v.clone()).unwrap();
        assert_eq!(f.at(0)[1], f.at(0)[2]);
        v[1] = 1e-6;
        assert!(Field::symmetric(g, 2, v).is_err());
    }
}
