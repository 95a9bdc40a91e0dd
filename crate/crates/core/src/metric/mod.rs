//! Riemannian metrics sampled on grids: Christoffel symbols, curvature,
//! conformal changes, and the ambient manifolds built from them.

mod ambient;
pub mod expr;
mod sampler;

use std::sync::Arc;

pub use ambient::{
    boundary_geometry, reflect_index, slice_metric, AmbientManifold, BoundaryGeometry, End, SyntheticCurvature,
    PRODUCT_TOL,
};
pub use sampler::{AmbientSample, ColumnSampler};
pub(crate) use ambient::{boundary_geometry_with, product_mirror};

use crate::error::{Error, Result};
use crate::field::{derivative_at, derivative_raw, Closure, Field, Grid};
use crate::linalg::small::{cholesky, spd_inverse, MAX_DIM};
use crate::par;

/// A symmetric positive-definite rank-2 field whose tensor dimension equals
/// the grid dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    g: Field,
}

impl MetricField {
    /// Validate symmetry and pointwise positive-definiteness.
    pub fn new(g: Field) -> Result<MetricField> {
        let d = g.grid().ndim();
        if g.rank() != 2 || g.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "metric must be a rank-2 field of dimension {d}, got rank {} dimension {}",
                g.rank(),
                g.dim()
            )));
        }
        if d > MAX_DIM {
            return Err(Error::UnsupportedDimension(d));
        }
        let g = Field::symmetric(g.grid_arc(), d, g.into_values())?;
        for node in 0..g.grid().len() {
            let mut l = [0.0; MAX_DIM * MAX_DIM];
            l[..d * d].copy_from_slice(g.at(node));
            if !cholesky(&mut l[..d * d], d) {
                return Err(Error::SingularMetric { node });
            }
        }
        Ok(MetricField { g })
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<MetricField> {
        let d = grid.ndim();
        MetricField::new(Field::from_parts(grid, 2, d, values)?)
    }

    /// Sample `f(coords, out)` at every node; `out` is the row-major `d×d`
    /// matrix.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64], &mut [f64]) + Sync + Send) -> Result<MetricField> {
        let d = grid.ndim();
        let mut values = vec![0.0; grid.len() * d * d];
        par::fill_chunks(&mut values, d * d, |p, out| {
            let mut x = vec![0.0; d];
            grid.node_coords(p, &mut x);
            f(&x, out);
        });
        MetricField::from_values(Arc::new(grid.clone()), values)
    }

    /// The Euclidean metric δ.
    pub fn flat(grid: &Grid) -> MetricField {
        MetricField::from_fn(grid, |_, out| {
            let d = (out.len() as f64).sqrt() as usize;
            out.iter_mut().enumerate().for_each(|(k, v)| *v = if k / d == k % d { 1.0 } else { 0.0 });
        })
        .expect("the flat metric is valid")
    }

    /// Metric from one expression per upper-triangle component, keyed by
    /// `(i, j)` with `i ≤ j`; missing off-diagonal entries are zero and
    /// missing diagonal entries are one.
    pub fn from_expressions(
        grid: &Grid,
        components: &[((usize, usize), String)],
        collar_axis: Option<usize>,
    ) -> Result<MetricField> {
        let d = grid.ndim();
        let names = expr::coordinate_names(d, collar_axis);
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let mut table: Vec<Option<expr::Expr>> = vec![None; d * d];
        for ((i, j), src) in components {
            let (i, j) = (*i.min(j), *i.max(j));
            if j >= d {
                return Err(Error::DimensionMismatch(format!("metric component ({i},{j}) in dimension {d}")));
            }
            table[i * d + j] = Some(expr::parse(src, &refs)?);
        }
        MetricField::from_fn(grid, |x, out| {
            for i in 0..d {
                for j in i..d {
                    let v = match &table[i * d + j] {
                        Some(e) => e.eval(x),
                        None => (i == j) as u8 as f64,
                    };
                    out[i * d + j] = v;
                    out[j * d + i] = v;
                }
            }
        })
    }

    pub fn grid(&self) -> &Grid {
        self.g.grid()
    }
    pub fn grid_arc(&self) -> Arc<Grid> {
        self.g.grid_arc()
    }
    pub fn dim(&self) -> usize {
        self.g.dim()
    }
    pub fn field(&self) -> &Field {
        &self.g
    }
    pub fn values(&self) -> &[f64] {
        self.g.values()
    }
    pub fn at(&self, node: usize) -> &[f64] {
        self.g.at(node)
    }

    /// Inverse metric at a node; returns det g.
    pub fn inverse_at(&self, node: usize, inv: &mut [f64]) -> f64 {
        spd_inverse(self.at(node), self.dim(), inv).expect("validated at construction")
    }

    /// √det g as a scalar field (the Riemannian volume density).
    pub fn volume_density(&self) -> Field {
        let d = self.dim();
        let vals = par::map_indices(self.grid().len(), |p| {
            crate::linalg::small::spd_det(self.at(p), d).expect("validated at construction").sqrt()
        });
        Field::scalar_on(self.grid_arc(), vals).expect("one value per node")
    }

    /// Riemannian volume ∫ √det g.
    pub fn volume(&self) -> f64 {
        let rho = self.volume_density();
        crate::field::integrate_raw(self.grid(), &vec![1.0; self.grid().len()], rho.values())
    }

    /// Pointwise multiple `w · g` with `w > 0`.
    pub fn scaled(&self, w: &[f64]) -> Result<MetricField> {
        if w.len() != self.grid().len() {
            return Err(Error::IncompatibleGrids("conformal factor and metric grids differ".into()));
        }
        if let Some((node, &value)) = w.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::NonPositiveConformalFactor { node, value });
        }
        let nc = self.dim() * self.dim();
        let values = self.values().iter().enumerate().map(|(k, v)| v * w[k / nc]).collect();
        MetricField::from_values(self.grid_arc(), values)
    }
}

/// Christoffel symbols `Γ^k_ij`, stored per node as `[k][i][j]`.
#[derive(Clone, Debug)]
pub struct Christoffel {
    grid: Arc<Grid>,
    dim: usize,
    values: Vec<f64>,
}

impl Christoffel {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    /// All `d³` symbols at one node.
    pub fn at(&self, node: usize) -> &[f64] {
        let n = self.dim.pow(3);
        &self.values[node * n..(node + 1) * n]
    }
    pub fn get(&self, node: usize, k: usize, i: usize, j: usize) -> f64 {
        let d = self.dim;
        self.at(node)[(k * d + i) * d + j]
    }
}

/// Christoffel symbols, Ricci tensor and scalar curvature of a metric.
#[derive(Clone, Debug)]
pub struct CurvatureBundle {
    pub christoffel: Christoffel,
    pub ricci: Field,
    pub scalar: Field,
}

/// `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)` with second-order
/// differences (one-sided at bounded ends).
pub fn christoffel(metric: &MetricField) -> Result<Christoffel> {
    Ok(christoffel_with(metric, None))
}

/// Closure used for metric differences along `axis`: even reflection on
/// `mirror` (a bounded axis with product ends), one-sided otherwise.
fn axis_closure(axis: usize, mirror: Option<usize>) -> Closure {
    if mirror == Some(axis) {
        Closure::Reflect
    } else {
        Closure::OneSided
    }
}

pub(crate) fn christoffel_with(metric: &MetricField, mirror: Option<usize>) -> Christoffel {
    let grid = metric.grid();
    let d = metric.dim();
    let nc = d * d;
    let dg: Vec<Vec<f64>> =
        (0..d).map(|a| derivative_raw(grid, metric.values(), nc, a, 1, axis_closure(a, mirror))).collect();
    let mut values = vec![0.0; grid.len() * d * nc];
    par::fill_chunks(&mut values, d * nc, |p, out| {
        let mut inv = [0.0; MAX_DIM * MAX_DIM];
        metric.inverse_at(p, &mut inv);
        // lowered symbols Γ_l,ij
        let mut low = [0.0; MAX_DIM * MAX_DIM * MAX_DIM];
        let dgp = |a: usize, i: usize, j: usize| dg[a][p * nc + i * d + j];
        for l in 0..d {
            for i in 0..d {
                for j in i..d {
                    let v = 0.5 * (dgp(i, j, l) + dgp(j, i, l) - dgp(l, i, j));
                    low[(l * d + i) * d + j] = v;
                    low[(l * d + j) * d + i] = v;
                }
            }
        }
        for k in 0..d {
            for i in 0..d {
                for j in i..d {
                    let v: f64 = (0..d).map(|l| inv[k * d + l] * low[(l * d + i) * d + j]).sum();
                    out[(k * d + i) * d + j] = v;
                    out[(k * d + j) * d + i] = v;
                }
            }
        }
    });
    Christoffel { grid: metric.grid_arc(), dim: d, values }
}

/// Ricci and scalar curvature from `Γ` and its differences:
/// `R_bd = ∂_a Γ^a_db − ∂_d Γ^a_ab + Γ^a_ae Γ^e_db − Γ^a_de Γ^e_ab`.
pub fn curvature(metric: &MetricField) -> Result<CurvatureBundle> {
    Ok(curvature_from(metric, christoffel(metric)?, None))
}

/// [`curvature`] with even-reflection differences along `mirror`.
pub(crate) fn curvature_mirrored(metric: &MetricField, mirror: Option<usize>) -> CurvatureBundle {
    curvature_from(metric, christoffel_with(metric, mirror), mirror)
}

pub(crate) fn curvature_from(metric: &MetricField, gam: Christoffel, mirror: Option<usize>) -> CurvatureBundle {
    let grid = metric.grid();
    let d = metric.dim();
    let n3 = d * d * d;
    let nc = d * d;
    let dg: Vec<Vec<f64>> =
        (0..d).map(|a| derivative_raw(grid, metric.values(), nc, a, 1, axis_closure(a, mirror))).collect();
    let mut ric = vec![0.0; grid.len() * d * d];
    par::fill_chunks(&mut ric, d * d, |p, out| {
        // ∂Γ by the chain rule from first and second differences of g, so
        // every stencil (one-sided ones included) stays second order
        let mut inv = [0.0; MAX_DIM * MAX_DIM];
        metric.inverse_at(p, &mut inv);
        let mut d2 = [0.0; MAX_DIM * MAX_DIM * MAX_DIM * MAX_DIM];
        let mut tmp = [0.0; MAX_DIM * MAX_DIM];
        for a in 0..d {
            derivative_at(grid, metric.values(), nc, p, a, 2, axis_closure(a, mirror), &mut tmp[..nc]);
            d2[(a * d + a) * nc..(a * d + a + 1) * nc].copy_from_slice(&tmp[..nc]);
            for b in a + 1..d {
                derivative_at(grid, &dg[a], nc, p, b, 1, axis_closure(b, mirror), &mut tmp[..nc]);
                d2[(a * d + b) * nc..(a * d + b + 1) * nc].copy_from_slice(&tmp[..nc]);
                d2[(b * d + a) * nc..(b * d + a + 1) * nc].copy_from_slice(&tmp[..nc]);
            }
        }
        let g = gam.at(p);
        let g2 = |x: usize, y: usize, m: usize, n: usize| d2[(x * d + y) * nc + m * d + n];
        let mut dgam = [0.0; MAX_DIM * MAX_DIM * MAX_DIM * MAX_DIM];
        for x in 0..d {
            let dgx = &dg[x][p * nc..(p + 1) * nc];
            for i in 0..d {
                for j in i..d {
                    let mut low = [0.0; MAX_DIM];
                    for (l, v) in low.iter_mut().enumerate().take(d) {
                        *v = 0.5 * (g2(x, i, j, l) + g2(x, j, i, l) - g2(x, l, i, j));
                    }
                    // (∂_x g)_mn Γ^n_ij
                    let mut w = [0.0; MAX_DIM];
                    for (m, v) in w.iter_mut().enumerate().take(d) {
                        *v = (0..d).map(|n| dgx[m * d + n] * g[(n * d + i) * d + j]).sum();
                    }
                    for k in 0..d {
                        let v: f64 = (0..d).map(|l| inv[k * d + l] * (low[l] - w[l])).sum();
                        dgam[x * n3 + (k * d + i) * d + j] = v;
                        dgam[x * n3 + (k * d + j) * d + i] = v;
                    }
                }
            }
        }
        let gm = |k: usize, i: usize, j: usize| g[(k * d + i) * d + j];
        let dgm = |x: usize, k: usize, i: usize, j: usize| dgam[x * n3 + (k * d + i) * d + j];
        let mut trace = [0.0; MAX_DIM];
        for (e, t) in trace.iter_mut().enumerate().take(d) {
            *t = (0..d).map(|a| gm(a, a, e)).sum();
        }
        for b in 0..d {
            for dd in b..d {
                let mut s = 0.0;
                for a in 0..d {
                    s += dgm(a, a, dd, b) - dgm(dd, a, a, b);
                }
                for e in 0..d {
                    s += trace[e] * gm(e, dd, b);
                    for a in 0..d {
                        s -= gm(a, dd, e) * gm(e, a, b);
                    }
                }
                out[b * d + dd] = s;
            }
        }
        // the FD Ricci is symmetric only up to truncation error; average it
        for b in 0..d {
            for dd in b + 1..d {
                let lower = {
                    let mut s = 0.0;
                    for a in 0..d {
                        s += dgm(a, a, b, dd) - dgm(b, a, a, dd);
                    }
                    for e in 0..d {
                        s += trace[e] * gm(e, b, dd);
                        for a in 0..d {
                            s -= gm(a, b, e) * gm(e, a, dd);
                        }
                    }
                    s
                };
                let m = 0.5 * (out[b * d + dd] + lower);
                out[b * d + dd] = m;
                out[dd * d + b] = m;
            }
        }
    });
    let scalar = par::map_indices(grid.len(), |p| {
        let mut inv = [0.0; MAX_DIM * MAX_DIM];
        metric.inverse_at(p, &mut inv);
        let r = &ric[p * d * d..(p + 1) * d * d];
        (0..d * d).map(|k| inv[k] * r[k]).sum()
    });
    CurvatureBundle {
        christoffel: gam,
        ricci: Field::from_parts(metric.grid_arc(), 2, d, ric).expect("one tensor per node"),
        scalar: Field::scalar_on(metric.grid_arc(), scalar).expect("one value per node"),
    }
}

/// `c_n = (n − 2) / (4(n − 1))`.
pub fn conformal_constant(n: usize) -> f64 {
    (n as f64 - 2.0) / (4.0 * (n as f64 - 1.0))
}

/// `h̃ = φ^{4/(n−2)} h`.
pub fn conformal_rescale(metric: &MetricField, phi: &Field, n: usize) -> Result<MetricField> {
    if n < 3 {
        return Err(Error::UnsupportedDimension(n));
    }
    if n != metric.dim() {
        return Err(Error::DimensionMismatch(format!("n = {n} for a metric of dimension {}", metric.dim())));
    }
    if phi.rank() != 0 || !phi.grid().compatible(metric.grid()) {
        return Err(Error::IncompatibleGrids("conformal factor must be a scalar on the metric grid".into()));
    }
    if let Some((node, &value)) = phi.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveConformalFactor { node, value });
    }
    let p = 4.0 / (n as f64 - 2.0);
    let w: Vec<f64> = phi.values().iter().map(|v| v.powf(p)).collect();
    metric.scaled(&w)
}
