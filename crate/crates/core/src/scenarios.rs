//! Reference ambients used throughout the tests, benches and CLI presets.
//!
//! All of them are charts `T^k × [0, T]` (or tori) with the graph axis `x1`
//! first, periodic coordinates of extent `2π` and the collar axis `t` last.

use std::f64::consts::TAU;

use crate::error::Result;
use crate::hypersurface::GraphHypersurface;
use crate::field::Grid;
use crate::metric::expr::smoothstep;
use crate::metric::{AmbientManifold, MetricField};

/// Flat `T^{d−1} × [0, T]` with `nx` points per periodic axis.
pub fn flat_slab(dim: usize, nx: usize, nt: usize, t_extent: f64) -> Result<AmbientManifold> {
    let grid = slab_grid(dim, nx, nt, t_extent)?;
    AmbientManifold::new(MetricField::flat(&grid), Some(dim - 1))
}

fn slab_grid(dim: usize, nx: usize, nt: usize, t_extent: f64) -> Result<Grid> {
    let mut dims = vec![nx; dim];
    let mut ext = vec![TAU; dim];
    let mut per = vec![true; dim];
    dims[dim - 1] = nt;
    ext[dim - 1] = t_extent;
    per[dim - 1] = false;
    Grid::new(&dims, &ext, &per)
}

/// Conformal factor of the bumpy slab: a valley in `x1` whose floor drifts
/// by one radian across the middle half of the collar (and wiggles with
/// `x2` in four dimensions). Product within 0.25 of either end.
pub fn bumpy_factor(x: &[f64], t_extent: f64) -> f64 {
    let d = x.len();
    let t = x[d - 1];
    let s = smoothstep(0.25 * t_extent, 0.75 * t_extent, t);
    let wiggle = if d >= 4 { 0.3 * x[1].sin() } else { 0.0 };
    let f = 1.0 + 0.2 * (x[0] - 1.0 + s + wiggle).cos();
    f * f
}

/// `ḡ = f²(x, t)·(dx1² + … ) + dt²` with [`bumpy_factor`].
pub fn bumpy_slab(dim: usize, nx: usize, nt: usize, t_extent: f64) -> Result<AmbientManifold> {
    let grid = slab_grid(dim, nx, nt, t_extent)?;
    let metric = MetricField::from_fn(&grid, |x, o| {
        o.fill(0.0);
        let w = bumpy_factor(x, t_extent);
        for i in 0..dim - 1 {
            o[i * dim + i] = w;
        }
        o[dim * dim - 1] = 1.0;
    })?;
    AmbientManifold::new(metric, Some(dim - 1))
}

/// `Y × [0, T]` with `Y = T^{d−1}` carrying `(1 + 0.2 cos x1)·δ`: the
/// least-area slice is `x1 = π`.
pub fn bumpy_torus(dim: usize, nx: usize, nt: usize, t_extent: f64) -> Result<AmbientManifold> {
    let grid = slab_grid(dim, nx, nt, t_extent)?;
    let metric = MetricField::from_fn(&grid, |x, o| {
        o.fill(0.0);
        let w = 1.0 + 0.2 * x[0].cos();
        for i in 0..dim - 1 {
            o[i * dim + i] = w;
        }
        o[dim * dim - 1] = 1.0;
    })?;
    AmbientManifold::new(metric, Some(dim - 1))
}

/// Upper unit hemisphere over the disc of radius 1 centred in a periodic
/// `[0, 1.4)²` base of flat `R³`, normal pointing towards the centre so both
/// principal curvatures are `+1`. Outside the disc the height is 0; only
/// nodes well inside the disc are meaningful.
pub fn sphere_cap(n: usize) -> Result<(AmbientManifold, GraphHypersurface)> {
    let g = Grid::new(&[8, n, n], &[4.0, 1.4, 1.4], &[true, true, true])?;
    let amb = AmbientManifold::new(MetricField::flat(&g), None)?;
    let graph = GraphHypersurface::from_fn(&amb, 0, |y| {
        let r2 = (y[0] - 0.7).powi(2) + (y[1] - 0.7).powi(2);
        (1.0 - r2).max(0.0).sqrt()
    })?
    .with_slope_max(1e6)
    .with_orientation(-1)?;
    Ok((amb, graph))
}

/// A 3-torus metric that is not conformally flat (so its conformal class
/// has negative Yamabe sign), with perturbation size `strength`.
pub fn perturbed_torus(k: usize, strength: f64) -> Result<MetricField> {
    let g = Grid::new(&[k, k, k], &[TAU; 3], &[true; 3])?;
    MetricField::from_fn(&g, |x, o| twisted(x, x[2], 0.0, strength, o))
}

/// `T² × [0, 2]` with the [`perturbed_torus`] twist on the slices, drifting
/// across the middle of the collar; product (and totally geodesic) at both
/// ends.
pub fn perturbed_slab(k: usize, nt: usize, strength: f64) -> Result<MetricField> {
    let g = Grid::new(&[k, k, nt], &[TAU, TAU, 2.0], &[true, true, false])?;
    MetricField::from_fn(&g, |x, o| {
        twisted(x, x[0], smoothstep(0.5, 1.5, x[2]), strength, o);
        o[8] = 1.0;
        o[2] = 0.0;
        o[6] = 0.0;
    })
}

/// `z` feeds the off-diagonal term and `s` shifts the pattern.
fn twisted(x: &[f64], z: f64, s: f64, a: f64, o: &mut [f64]) {
    o.fill(0.0);
    o[0] = (a * (x[1] + s).cos()).exp();
    o[4] = (a * x[0].sin()).exp();
    o[8] = 1.0 + a / 3.0 * x[0].cos();
    o[1] = a / 3.0 * (z + s).sin();
    o[3] = o[1];
}
