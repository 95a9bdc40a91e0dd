//! Sparse Jacobian of the discrete mean-curvature operator by coloured
//! forward differences.
//!
//! `H` at a node depends on `u` only inside a small box of neighbours (the
//! jet stencil), so columns whose boxes cannot meet a common row are
//! perturbed together. Each colour costs one evaluation of `H`.

use crate::error::Result;
use crate::field::{Closure, Grid};
use crate::hypersurface::GraphKernel;

const EPS: f64 = 1e-6;

/// Per-axis reach of the mean-curvature stencil.
pub fn dependency_radius(grid: &Grid, closure: Closure) -> Vec<usize> {
    (0..grid.ndim())
        .map(|a| if grid.periodic()[a] || closure == Closure::Reflect { 1 } else { 3 })
        .collect()
}

/// Colour period along one axis: nodes with equal `i mod k` are more than
/// `2r` apart, including across the periodic seam.
fn colour_period(n: usize, r: usize, periodic: bool) -> usize {
    let m = 2 * r + 1;
    if !periodic {
        return m.min(n);
    }
    (m..=n).find(|&k| n % k == 0 || n % k >= m).unwrap_or(n)
}

/// Triplets `(row, col, ∂H_row/∂u_col)` at heights `u`, whose mean
/// curvature `h` is already known.
pub fn mean_curvature_jacobian(kernel: &GraphKernel, u: &[f64], h: &[f64]) -> Result<Vec<(usize, usize, f64)>> {
    let grid = kernel.base_grid();
    let nd = grid.ndim();
    let radius = dependency_radius(grid, kernel.closure());
    let period: Vec<usize> =
        (0..nd).map(|a| colour_period(grid.dims()[a], radius[a], grid.periodic()[a])).collect();
    let colour = |p: usize| -> usize {
        let mut c = 0;
        for a in 0..nd {
            c = c * period[a] + grid.coord_index(p, a) % period[a];
        }
        c
    };
    let ncolour: usize = period.iter().product();
    let colours: Vec<usize> = (0..u.len()).map(colour).collect();

    // neighbour boxes, shared by every colour
    let boxes: Vec<Vec<usize>> = (0..u.len())
        .map(|p| {
            let mut out = vec![p];
            for a in 0..nd {
                let r = radius[a] as isize;
                let prev = std::mem::take(&mut out);
                for q in prev {
                    for o in -r..=r {
                        if let Some(s) = grid.shift(q, a, o) {
                            if !out.contains(&s) {
                                out.push(s);
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();

    let mut trip = Vec::with_capacity(u.len() * boxes[0].len());
    let mut up = u.to_vec();
    for c in 0..ncolour {
        let members: Vec<usize> = (0..u.len()).filter(|&p| colours[p] == c).collect();
        if members.is_empty() {
            continue;
        }
        let steps: Vec<f64> = members.iter().map(|&p| EPS * u[p].abs().max(1.0)).collect();
        for (&p, &e) in members.iter().zip(&steps) {
            up[p] = u[p] + e;
        }
        let hp = kernel.mean_curvature(&up)?;
        for (&p, &e) in members.iter().zip(&steps) {
            up[p] = u[p];
            for &row in &boxes[p] {
                let v = (hp[row] - h[row]) / e;
                if v != 0.0 {
                    trip.push((row, p, v));
                }
            }
        }
    }
    Ok(trip)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colour_periods_respect_the_seam() {
        assert_eq!(colour_period(16, 1, true), 4);
        assert_eq!(colour_period(15, 1, true), 3);
        assert_eq!(colour_period(17, 1, true), 6);
        for n in 4..40 {
            let k = colour_period(n, 1, true);
            for i in 0..n {
                for j in i + 1..n {
                    if i % k == j % k {
                        let d = (j - i).min(n - (j - i));
                        assert!(d > 2, "n={n} k={k} i={i} j={j}");
                    }
                }
            }
        }
    }
}
