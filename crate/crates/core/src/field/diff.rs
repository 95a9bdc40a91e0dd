//! Second-order finite differences on uniform grids.

use super::{Field, Grid};
use crate::error::Result;
use crate::par;

/// How a bounded axis is closed at its two end nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// Second-order one-sided stencils.
    OneSided,
    /// Even reflection through the end node: the ghost value equals the first
    /// interior value. This is the discrete Neumann condition used for
    /// free-boundary graphs; the centered formula is evaluated literally with
    /// the mirrored neighbour so a doubled grid reproduces it bit for bit.
    Reflect,
}

/// Derivative of every component at one node.
///
/// `data` holds `ncomp` values per node. `order` is 1 or 2.
#[inline]
pub fn derivative_at(
    grid: &Grid,
    data: &[f64],
    ncomp: usize,
    node: usize,
    axis: usize,
    order: u8,
    closure: Closure,
    out: &mut [f64],
) {
    let n = grid.dims()[axis];
    let h = grid.spacing()[axis];
    let s = grid.stride(axis);
    let i = grid.coord_index(node, axis);
    let at = |p: usize, c: usize| data[p * ncomp + c];
    let interior = grid.periodic()[axis] || (i > 0 && i + 1 < n);
    if interior {
        let up = grid.shift(node, axis, 1).unwrap();
        let dn = grid.shift(node, axis, -1).unwrap();
        for (c, o) in out.iter_mut().enumerate().take(ncomp) {
            *o = match order {
                1 => (at(up, c) - at(dn, c)) / (2.0 * h),
                _ => (at(up, c) - 2.0 * at(node, c) + at(dn, c)) / (h * h),
            };
        }
        return;
    }
    // bounded end node: `dir` points into the interior
    let (dir, sign) = if i == 0 { (1isize, 1.0) } else { (-1isize, -1.0) };
    let p1 = (node as isize + dir * s as isize) as usize;
    match closure {
        Closure::Reflect => {
            for (c, o) in out.iter_mut().enumerate().take(ncomp) {
                let (fp, fm) = (at(p1, c), at(p1, c));
                *o = match order {
                    1 => (fp - fm) / (2.0 * h),
                    _ => (fp - 2.0 * at(node, c) + fm) / (h * h),
                };
            }
        }
        Closure::OneSided => {
            let p2 = (node as isize + 2 * dir * s as isize) as usize;
            let p3 = (node as isize + 3 * dir * s as isize) as usize;
            for (c, o) in out.iter_mut().enumerate().take(ncomp) {
                *o = match order {
                    1 => sign * (-3.0 * at(node, c) + 4.0 * at(p1, c) - at(p2, c)) / (2.0 * h),
                    _ => (2.0 * at(node, c) - 5.0 * at(p1, c) + 4.0 * at(p2, c) - at(p3, c)) / (h * h),
                };
            }
        }
    }
}

/// Derivative of a whole raw array along `axis`.
pub fn derivative_raw(grid: &Grid, data: &[f64], ncomp: usize, axis: usize, order: u8, closure: Closure) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    par::fill_chunks(&mut out, ncomp, |node, o| derivative_at(grid, data, ncomp, node, axis, order, closure, o));
    out
}

/// ∂/∂x^axis (order 1) or ∂²/∂(x^axis)² (order 2) with one-sided closure.
pub fn partial_derivative(field: &Field, axis: usize, order: u8) -> Result<Field> {
    partial_derivative_with(field, axis, order, Closure::OneSided)
}

pub fn partial_derivative_with(field: &Field, axis: usize, order: u8, closure: Closure) -> Result<Field> {
    let grid = field.grid();
    grid.check_axis(axis)?;
    if !(order == 1 || order == 2) {
        return Err(crate::Error::DimensionMismatch(format!("derivative order {order} (expected 1 or 2)")));
    }
    let values = derivative_raw(grid, field.values(), field.ncomp(), axis, order, closure);
    Field::from_parts(field.grid_arc(), field.rank(), field.dim(), values)
}

/// First and second derivatives of a scalar array: `d1[a][p]`, `d2[a][b][p]`
/// (mixed entries taken as the first derivative of the first derivative,
/// `d2[a][b] = D_b D_a`, and mirrored so the result is exactly symmetric).
pub struct ScalarJet {
    pub d1: Vec<Vec<f64>>,
    pub d2: Vec<Vec<Vec<f64>>>,
}

pub fn scalar_jet(grid: &Grid, u: &[f64], closure: Closure) -> ScalarJet {
    let n = grid.ndim();
    let d1: Vec<Vec<f64>> = (0..n).map(|a| derivative_raw(grid, u, 1, a, 1, closure)).collect();
    let mut d2 = vec![vec![Vec::new(); n]; n];
    for a in 0..n {
        d2[a][a] = derivative_raw(grid, u, 1, a, 2, closure);
        for b in a + 1..n {
            let m = derivative_raw(grid, &d1[a], 1, b, 1, closure);
            d2[b][a] = m.clone();
            d2[a][b] = m;
        }
    }
    ScalarJet { d1, d2 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn max_err(grid: &Grid, approx: &[f64], exact: impl Fn(&[f64]) -> f64) -> f64 {
        let mut x = vec![0.0; grid.ndim()];
        (0..grid.len())
            .map(|p| {
                grid.node_coords(p, &mut x);
                (approx[p] - exact(&x)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn periodic_first_derivative_is_second_order() {
        let errs: Vec<f64> = [32usize, 64]
            .iter()
            .map(|&n| {
                let g = Grid::new(&[n], &[1.0], &[true]).unwrap();
                let f = Field::scalar_from_fn(&g, |x| (2.0 * PI * x[0]).sin());
                let d = partial_derivative(&f, 0, 1).unwrap();
                max_err(&g, d.values(), |x| 2.0 * PI * (2.0 * PI * x[0]).cos())
            })
            .collect();
        // relative to sup|f'| = 2π; the absolute error of the centered stencil is (2π)³h²/6
        assert!(errs[1] / (2.0 * PI) <= 5e-3, "error {}", errs[1]);
        let ratio = errs[0] / errs[1];
        assert!((3.6..=4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn quadratic_second_derivative_is_exact_on_bounded_axis() {
        let g = Grid::new(&[9], &[1.0], &[false]).unwrap();
        let f = Field::scalar_from_fn(&g, |x| x[0] * x[0]);
        let d = partial_derivative(&f, 0, 2).unwrap();
        assert!(d.values().iter().all(|v| (v - 2.0).abs() <= 1e-10));
        let d1 = partial_derivative(&f, 0, 1).unwrap();
        assert!(max_err(&g, d1.values(), |x| 2.0 * x[0]) <= 1e-12);
    }

    #[test]
    fn constants_are_annihilated() {
        let g = Grid::new(&[5, 6], &[1.0, 2.0], &[true, false]).unwrap();
        let f = Field::scalar_from_fn(&g, |_| 3.25);
        for axis in 0..2 {
            for order in 1..=2 {
                let d = partial_derivative(&f, axis, order).unwrap();
                assert!(d.values().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn reflect_closure_matches_mirrored_data() {
        // f even about both ends of [0,1] → reflect closure must equal the
        // centered stencil on the doubled periodic grid.
        let g = Grid::new(&[9], &[1.0], &[false]).unwrap();
        let f: Vec<f64> = (0..9).map(|i| (0.3 * i as f64).cos() + 0.1 * (i as f64).powi(2)).collect();
        let d2 = derivative_raw(&g, &f, 1, 0, 2, Closure::Reflect);
        let gd = Grid::new(&[16], &[2.0], &[true]).unwrap();
        let fd: Vec<f64> = (0..16).map(|j| if j < 9 { f[j] } else { f[16 - j] }).collect();
        let dd = derivative_raw(&gd, &fd, 1, 0, 2, Closure::OneSided);
        for i in 0..9 {
            assert_eq!(d2[i].to_bits(), dd[i].to_bits(), "node {i}");
        }
        let d1 = derivative_raw(&g, &f, 1, 0, 1, Closure::Reflect);
        assert_eq!(d1[0], 0.0);
        assert_eq!(d1[8], 0.0);
    }

    #[test]
    fn axis_out_of_range() {
        let g = Grid::new(&[5], &[1.0], &[true]).unwrap();
        let f = Field::scalar_from_fn(&g, |x| x[0]);
        assert!(matches!(partial_derivative(&f, 1, 1), Err(crate::Error::AxisOutOfRange { .. })));
    }
}
