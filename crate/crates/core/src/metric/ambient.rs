use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::{christoffel, christoffel_with, curvature_from, Christoffel, CurvatureBundle, MetricField};
use crate::error::{Error, Result};
use crate::field::{Field, Grid};
use crate::linalg::small::{spd_inverse, MAX_DIM};

/// Tolerance for "t-independent and block-diagonal" in product collars.
pub const PRODUCT_TOL: f64 = 1e-12;

/// A boundary component: `Y0` at the lower end of the collar axis, `Y1` at
/// the upper end.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    Y0,
    Y1,
}

impl End {
    pub fn index(self) -> usize {
        match self {
            End::Y0 => 0,
            End::Y1 => 1,
        }
    }
    /// Sign of the outward normal along the collar axis.
    pub fn outward_sign(self) -> f64 {
        match self {
            End::Y0 => -1.0,
            End::Y1 => 1.0,
        }
    }
}

/// Curvature injected on top of the metric's own: `Ric + ricci_offset·ḡ`
/// and `R + scalar_offset`. Exists only to drive code paths (negative
/// stability eigenvalues, positive slack) that a flat single-chart ambient
/// cannot reach.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticCurvature {
    pub ricci_offset: f64,
    pub scalar_offset: f64,
}

impl SyntheticCurvature {
    pub fn is_zero(&self) -> bool {
        self.ricci_offset == 0.0 && self.scalar_offset == 0.0
    }
}

/// Second fundamental form and mean curvature of one boundary slice, with
/// the convention `A(X,Y) = ḡ(∇_X ν, Y)` for the outward unit normal `ν`.
#[derive(Clone, Debug)]
pub struct BoundaryGeometry {
    pub mean_curvature: Field,
    pub sff: Field,
    /// Restriction of the ambient metric to the slice.
    pub metric: MetricField,
}

#[derive(Debug)]
struct Inner {
    metric: MetricField,
    collar_axis: Option<usize>,
    product_depth: [f64; 2],
    synthetic: SyntheticCurvature,
    christoffel: Arc<OnceLock<Christoffel>>,
    curvature: Arc<OnceLock<CurvatureBundle>>,
}

/// A single-chart manifold: a torus `T^k`, or `T^k × [0, T]` with the
/// bounded axis as collar axis. Cheap to clone; derived curvature is cached
/// and shared between clones.
#[derive(Clone, Debug)]
pub struct AmbientManifold {
    inner: Arc<Inner>,
}

impl AmbientManifold {
    pub fn new(metric: MetricField, collar_axis: Option<usize>) -> Result<AmbientManifold> {
        let grid = metric.grid();
        match collar_axis {
            Some(a) => {
                grid.check_axis(a)?;
                if grid.periodic()[a] {
                    return Err(Error::DimensionMismatch(format!("collar axis {a} must be bounded")));
                }
                if grid.bounded_axes().len() != 1 {
                    return Err(Error::DimensionMismatch("only the collar axis may be bounded".into()));
                }
            }
            None => {
                if !grid.bounded_axes().is_empty() {
                    return Err(Error::DimensionMismatch("a closed chart must be periodic on every axis".into()));
                }
            }
        }
        let product_depth = match collar_axis {
            Some(a) => [measure_product_depth(&metric, a, End::Y0), measure_product_depth(&metric, a, End::Y1)],
            None => [0.0, 0.0],
        };
        Ok(AmbientManifold {
            inner: Arc::new(Inner {
                metric,
                collar_axis,
                product_depth,
                synthetic: SyntheticCurvature::default(),
                christoffel: Arc::new(OnceLock::new()),
                curvature: Arc::new(OnceLock::new()),
            }),
        })
    }

    /// Same manifold with injected curvature offsets.
    pub fn with_synthetic(&self, synthetic: SyntheticCurvature) -> AmbientManifold {
        let i = &self.inner;
        AmbientManifold {
            inner: Arc::new(Inner {
                metric: i.metric.clone(),
                collar_axis: i.collar_axis,
                product_depth: i.product_depth,
                synthetic,
                christoffel: i.christoffel.clone(),
                curvature: i.curvature.clone(),
            }),
        }
    }

    pub fn metric(&self) -> &MetricField {
        &self.inner.metric
    }
    pub fn grid(&self) -> &Grid {
        self.inner.metric.grid()
    }
    pub fn dim(&self) -> usize {
        self.inner.metric.dim()
    }
    pub fn collar_axis(&self) -> Option<usize> {
        self.inner.collar_axis
    }
    pub fn synthetic(&self) -> SyntheticCurvature {
        self.inner.synthetic
    }
    /// Number of boundary slices (0 or 2).
    pub fn boundary_components(&self) -> usize {
        if self.inner.collar_axis.is_some() {
            2
        } else {
            0
        }
    }
    /// Length near `end` on which the metric was verified to be `g + dt²`.
    pub fn product_depth(&self, end: End) -> f64 {
        self.inner.product_depth[end.index()]
    }
    /// Extent of the collar axis.
    pub fn collar_length(&self) -> Option<f64> {
        self.inner.collar_axis.map(|a| self.grid().extents()[a])
    }

    /// With product structure at both ends the metric is even across each
    /// end, so reflected differences there are exact and agree with the
    /// centred ones of the double.
    pub(crate) fn mirror_axis(&self) -> Option<usize> {
        let i = &self.inner;
        i.collar_axis.filter(|_| i.product_depth.iter().all(|&d| d > 0.0))
    }

    pub fn christoffel(&self) -> &Christoffel {
        self.inner.christoffel.get_or_init(|| christoffel_with(&self.inner.metric, self.mirror_axis()))
    }

    /// Curvature of the metric itself (synthetic offsets not included).
    pub fn curvature(&self) -> &CurvatureBundle {
        self.inner.curvature.get_or_init(|| curvature_from(&self.inner.metric, self.christoffel().clone(), self.mirror_axis()))
    }

    /// Scalar curvature with the synthetic offset applied.
    pub fn scalar_curvature(&self) -> Vec<f64> {
        let s = self.inner.synthetic.scalar_offset;
        self.curvature().scalar.values().iter().map(|r| r + s).collect()
    }

    pub fn volume(&self) -> f64 {
        self.inner.metric.volume()
    }

    fn require_collar(&self) -> Result<usize> {
        self.inner.collar_axis.ok_or(Error::NoBoundary)
    }

    /// Metric of the boundary slice at `end` (the collar axis removed).
    pub fn slice_metric(&self, end: End) -> Result<MetricField> {
        slice_metric(&self.inner.metric, self.require_collar()?, end)
    }

    /// Attach the product cylinder `Y × [0, L]` at `end`, copying the end
    /// slice metric along the new rows.
    pub fn attach_collar(&self, end: End, length: f64) -> Result<AmbientManifold> {
        let a = self.require_collar()?;
        let grid = self.grid();
        let h = grid.spacing()[a];
        let steps = length / h;
        let m = steps.round();
        if !(length >= 0.0) || (steps - m).abs() > 1e-9 * m.max(1.0) {
            return Err(Error::IncompatibleLength { length, spacing: h });
        }
        let m = m as usize;
        if m == 0 {
            return Ok(self.clone());
        }
        if !(self.product_depth(end) > 0.0) {
            return Err(Error::NonProductEnd { end: end.index() });
        }
        let n_old = grid.dims()[a];
        let new_grid = Arc::new(grid.with_axis(a, n_old + m, grid.extents()[a] + m as f64 * h, false)?);
        let d = self.dim();
        let nc = d * d;
        let old = self.inner.metric.values();
        let mut values = vec![0.0; new_grid.len() * nc];
        let mut idx = vec![0usize; d];
        for (p, out) in values.chunks_mut(nc).enumerate() {
            for (ax, v) in idx.iter_mut().enumerate() {
                *v = new_grid.coord_index(p, ax);
            }
            let j = idx[a];
            idx[a] = match end {
                End::Y0 => j.saturating_sub(m),
                End::Y1 => j.min(n_old - 1),
            };
            let q = grid.index(&idx);
            out.copy_from_slice(&old[q * nc..(q + 1) * nc]);
        }
        let mut collared = AmbientManifold::new(MetricField::from_values(new_grid, values)?, Some(a))?;
        if !self.inner.synthetic.is_zero() {
            collared = collared.with_synthetic(self.inner.synthetic);
        }
        Ok(collared)
    }

    /// The double `M ∪_∂ (−M)`: the collar axis becomes periodic with twice
    /// the extent, samples mirrored across both ends (`dt`-cross components
    /// change sign under the reflection).
    pub fn double(&self) -> Result<AmbientManifold> {
        let a = self.require_collar()?;
        for end in [End::Y0, End::Y1] {
            if !(self.product_depth(end) > 0.0) {
                return Err(Error::NonProductEnd { end: end.index() });
            }
        }
        let grid = self.grid();
        let n = grid.dims()[a];
        let new_grid = Arc::new(grid.with_axis(a, 2 * (n - 1), 2.0 * grid.extents()[a], true)?);
        let d = self.dim();
        let nc = d * d;
        let old = self.inner.metric.values();
        let mut values = vec![0.0; new_grid.len() * nc];
        let mut idx = vec![0usize; d];
        for (p, out) in values.chunks_mut(nc).enumerate() {
            for (ax, v) in idx.iter_mut().enumerate() {
                *v = new_grid.coord_index(p, ax);
            }
            let (j, mirrored) = reflect_index(n, idx[a]);
            idx[a] = j;
            let q = grid.index(&idx);
            out.copy_from_slice(&old[q * nc..(q + 1) * nc]);
            if mirrored {
                for i in (0..d).filter(|&i| i != a) {
                    out[i * d + a] = -out[i * d + a];
                    out[a * d + i] = -out[a * d + i];
                }
            }
        }
        let mut doubled = AmbientManifold::new(MetricField::from_values(new_grid, values)?, None)?;
        if !self.inner.synthetic.is_zero() {
            doubled = doubled.with_synthetic(self.inner.synthetic);
        }
        Ok(doubled)
    }

    /// Second fundamental form and mean curvature of the slice at `end`.
    pub fn boundary_geometry(&self, end: End) -> Result<BoundaryGeometry> {
        let a = self.require_collar()?;
        boundary_geometry_with(&self.inner.metric, self.christoffel(), a, end)
    }
}

/// Boundary geometry of the slice at `end` of a bounded `axis`, for any
/// metric (an ambient, or the induced metric of a hypersurface).
pub fn boundary_geometry(metric: &MetricField, axis: usize, end: End) -> Result<BoundaryGeometry> {
    metric.grid().check_axis(axis)?;
    if metric.grid().periodic()[axis] {
        return Err(Error::NoBoundary);
    }
    boundary_geometry_with(metric, &christoffel(metric)?, axis, end)
}

/// Restriction of `metric` to the slice at `end` of `axis`.
pub fn slice_metric(metric: &MetricField, axis: usize, end: End) -> Result<MetricField> {
    let grid = metric.grid();
    let row = match end {
        End::Y0 => 0,
        End::Y1 => grid.dims()[axis] - 1,
    };
    let slice = Arc::new(grid.without_axis(axis)?);
    let d = metric.dim();
    let nodes = grid.slice_nodes(axis, row);
    let mut values = Vec::with_capacity(nodes.len() * (d - 1) * (d - 1));
    for &p in &nodes {
        let g = metric.at(p);
        for i in (0..d).filter(|&i| i != axis) {
            for j in (0..d).filter(|&j| j != axis) {
                values.push(g[i * d + j]);
            }
        }
    }
    MetricField::from_values(slice, values)
}

pub(crate) fn boundary_geometry_with(metric: &MetricField, gam: &Christoffel, a: usize, end: End) -> Result<BoundaryGeometry> {
    let grid = metric.grid();
    let row = match end {
        End::Y0 => 0,
        End::Y1 => grid.dims()[a] - 1,
    };
    let slice_metric = slice_metric(metric, a, end)?;
    let d = metric.dim();
    let ds = d - 1;
    let nodes = grid.slice_nodes(a, row);
    let tang: Vec<usize> = (0..d).filter(|&i| i != a).collect();
    let mut sff = Vec::with_capacity(nodes.len() * ds * ds);
    let mut mean = Vec::with_capacity(nodes.len());
    for (k, &p) in nodes.iter().enumerate() {
        let mut inv = [0.0; MAX_DIM * MAX_DIM];
        metric.inverse_at(p, &mut inv);
        // outward unit covector ν = s dt / √(g^{tt}); A_ij = −ν_c Γ^c_ij
        let nu_t = end.outward_sign() / inv[a * d + a].sqrt();
        let mut aij = [0.0; MAX_DIM * MAX_DIM];
        for (i, &ti) in tang.iter().enumerate() {
            for (j, &tj) in tang.iter().enumerate() {
                aij[i * ds + j] = -nu_t * gam.get(p, a, ti, tj);
            }
        }
        let mut hinv = [0.0; MAX_DIM * MAX_DIM];
        spd_inverse(slice_metric.at(k), ds, &mut hinv).ok_or(Error::SingularMetric { node: p })?;
        mean.push((0..ds * ds).map(|c| hinv[c] * aij[c]).sum());
        sff.extend_from_slice(&aij[..ds * ds]);
    }
    let sg = slice_metric.grid_arc();
    Ok(BoundaryGeometry {
        mean_curvature: Field::scalar_on(sg.clone(), mean)?,
        sff: Field::from_parts(sg, 2, ds, sff)?,
        metric: slice_metric,
    })
}

/// Map index `j` on a doubled periodic axis of `2(n−1)` nodes back to the
/// original bounded axis of `n` nodes; the flag says whether the node lies
/// on the mirrored copy (strictly between the two fixed rows).
pub fn reflect_index(n: usize, j: usize) -> (usize, bool) {
    if j < n {
        (j, false)
    } else {
        (2 * (n - 1) - j, true)
    }
}

/// The single bounded axis of `metric` when it is a product at both ends
/// (the axis along which metric differences may use even reflection).
pub(crate) fn product_mirror(metric: &MetricField) -> Option<usize> {
    match metric.grid().bounded_axes()[..] {
        [a] if [End::Y0, End::Y1].iter().all(|&e| measure_product_depth(metric, a, e) > 0.0) => Some(a),
        _ => None,
    }
}

/// Length of the run of rows, starting at `end`, on which the metric is
/// block-diagonal with `g_tt = 1` and equal to the end row, times the spacing.
fn measure_product_depth(metric: &MetricField, axis: usize, end: End) -> f64 {
    let grid = metric.grid();
    let n = grid.dims()[axis];
    let d = metric.dim();
    let nc = d * d;
    let row_of = |k: usize| match end {
        End::Y0 => k,
        End::Y1 => n - 1 - k,
    };
    let end_nodes = grid.slice_nodes(axis, row_of(0));
    let stride = grid.stride(axis) as isize;
    let step = match end {
        End::Y0 => stride,
        End::Y1 => -stride,
    };
    let vals = metric.values();
    let row_ok = |k: usize| {
        end_nodes.iter().all(|&p0| {
            let p = (p0 as isize + step * k as isize) as usize;
            let g = &vals[p * nc..(p + 1) * nc];
            let g0 = &vals[p0 * nc..(p0 + 1) * nc];
            (g[axis * d + axis] - 1.0).abs() <= PRODUCT_TOL
                && (0..d).filter(|&i| i != axis).all(|i| g[i * d + axis].abs() <= PRODUCT_TOL)
                && g.iter().zip(g0).all(|(x, y)| (x - y).abs() <= PRODUCT_TOL)
        })
    };
    if !row_ok(0) {
        return 0.0;
    }
    let mut k = 0;
    while k + 1 < n && row_ok(k + 1) {
        k += 1;
    }
    k as f64 * grid.spacing()[axis]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    /// T² × [0,1] with a slice conformal factor that ramps in the middle.
    fn bumpy_slab(nt: usize) -> AmbientManifold {
        let g = Grid::new(&[8, 8, nt], &[TAU, TAU, 1.0], &[true, true, false]).unwrap();
        let m = MetricField::from_fn(&g, |x, o| {
            let s = crate::metric::expr::smoothstep(0.25, 0.75, x[2]);
            let f = 1.0 + 0.2 * (x[0] - 1.0 + s).cos();
            o.fill(0.0);
            o[0] = f * f;
            o[4] = f * f;
            o[8] = 1.0;
        })
        .unwrap();
        AmbientManifold::new(m, Some(2)).unwrap()
    }

    #[test]
    fn product_depth_is_measured() {
        let amb = bumpy_slab(17);
        assert!((amb.product_depth(End::Y0) - 0.25).abs() < 1e-12);
        assert!((amb.product_depth(End::Y1) - 0.25).abs() < 1e-12);
        let g = Grid::new(&[8, 8, 9], &[TAU, TAU, 1.0], &[true, true, false]).unwrap();
        let warped = MetricField::from_fn(&g, |x, o| {
            o.fill(0.0);
            o[0] = (2.0 * x[2]).exp();
            o[4] = o[0];
            o[8] = 1.0;
        })
        .unwrap();
        let amb = AmbientManifold::new(warped, Some(2)).unwrap();
        assert_eq!(amb.product_depth(End::Y0), 0.0);
        assert!(matches!(amb.attach_collar(End::Y0, 0.125), Err(Error::NonProductEnd { end: 0 })));
        assert!(matches!(amb.double(), Err(Error::NonProductEnd { .. })));
    }

    #[test]
    fn collar_copies_boundary_slice() {
        let amb = bumpy_slab(17);
        let h = amb.grid().spacing()[2];
        assert_eq!(amb.attach_collar(End::Y1, 0.0).unwrap().metric(), amb.metric());
        let c = amb.attach_collar(End::Y1, 8.0 * h).unwrap();
        assert_eq!(c.grid().dims(), &[8, 8, 25]);
        assert_eq!(c.grid().spacing()[2], h);
        let end_row = amb.grid().slice_nodes(2, 16);
        for k in 16..25 {
            for (i, &p) in c.grid().slice_nodes(2, k).iter().enumerate() {
                assert_eq!(c.metric().at(p), amb.metric().at(end_row[i]));
            }
        }
        // Vol(M_L) = Vol(M) + L Vol(Y)
        let vy = amb.slice_metric(End::Y1).unwrap().volume();
        assert!((c.volume() - amb.volume() - 8.0 * h * vy).abs() <= 1e-10);
        // composition is additive bit-for-bit
        let two = amb.attach_collar(End::Y1, 3.0 * h).unwrap().attach_collar(End::Y1, 5.0 * h).unwrap();
        assert_eq!(two.metric().values(), c.metric().values());
        assert!(two.grid().compatible(c.grid()));
        // the lower end too
        let c0 = amb.attach_collar(End::Y0, 4.0 * h).unwrap();
        let start = amb.grid().slice_nodes(2, 0);
        for k in 0..5 {
            for (i, &p) in c0.grid().slice_nodes(2, k).iter().enumerate() {
                assert_eq!(c0.metric().at(p), amb.metric().at(start[i]));
            }
        }
        assert!(matches!(amb.attach_collar(End::Y1, 0.3 * h), Err(Error::IncompatibleLength { .. })));
    }

    #[test]
    fn closed_charts_have_no_boundary() {
        let g = Grid::new(&[4, 4], &[1.0, 1.0], &[true, true]).unwrap();
        let amb = AmbientManifold::new(MetricField::flat(&g), None).unwrap();
        assert!(matches!(amb.attach_collar(End::Y0, 0.25), Err(Error::NoBoundary)));
        assert!(matches!(amb.boundary_geometry(End::Y1), Err(Error::NoBoundary)));
    }

    #[test]
    fn doubling_mirrors_samples() {
        let amb = bumpy_slab(17);
        let dbl = amb.double().unwrap();
        assert!(dbl.grid().bounded_axes().is_empty());
        assert_eq!(dbl.grid().dims()[2], 32);
        assert!((dbl.grid().extents()[2] - 2.0).abs() < 1e-15);
        let g = dbl.grid();
        for p in 0..g.len() {
            let j = g.coord_index(p, 2);
            let mut idx = g.multi_index(p);
            idx[2] = (32 - j) % 32;
            assert_eq!(dbl.metric().at(p), dbl.metric().at(g.index(&idx)));
        }
        // ∂_t g has no jump at the locus rows
        let dg = crate::field::derivative_raw(g, dbl.metric().values(), 9, 2, 1, crate::field::Closure::OneSided);
        for row in [0, 16] {
            for p in g.slice_nodes(2, row) {
                assert!(dg[p * 9..p * 9 + 9].iter().all(|v| v.abs() <= 1e-10));
            }
        }
        let flat = AmbientManifold::new(MetricField::flat(amb.grid()), Some(2)).unwrap().double().unwrap();
        assert!(flat.metric().values().iter().enumerate().all(|(k, v)| *v == if k % 9 % 4 == 0 { 1.0 } else { 0.0 }));
    }

    #[test]
    fn product_end_has_no_boundary_curvature() {
        let amb = bumpy_slab(17);
        for end in [End::Y0, End::Y1] {
            let bg = amb.boundary_geometry(end).unwrap();
            assert!(bg.mean_curvature.sup_norm() <= 1e-10);
            assert!(bg.sff.sup_norm() <= 1e-10);
        }
    }

    fn warped_mean_curvature_err(nt: usize) -> f64 {
        // e^{2(t−1)} g + dt² on T² × [0,1]: at t = 1 the outward normal is
        // ∂_t, A = g, H = 2
        let g = Grid::new(&[8, 8, nt], &[TAU, TAU, 1.0], &[true, true, false]).unwrap();
        let m = MetricField::from_fn(&g, |x, o| {
            let w = (2.0 * (x[2] - 1.0)).exp() * (1.0 + 0.1 * x[0].sin());
            o.fill(0.0);
            o[0] = w;
            o[4] = w;
            o[8] = 1.0;
        })
        .unwrap();
        let amb = AmbientManifold::new(m, Some(2)).unwrap();
        let bg = amb.boundary_geometry(End::Y1).unwrap();
        let mut err: f64 = bg.mean_curvature.values().iter().map(|v| (v - 2.0).abs()).fold(0.0, f64::max);
        for k in 0..bg.sff.grid().len() {
            let a = bg.sff.at(k);
            let h = bg.metric.at(k);
            err = err.max((0..4).map(|c| (a[c] - h[c]).abs()).fold(0.0, f64::max));
        }
        err
    }

    #[test]
    fn warped_end_has_mean_curvature_n() {
        let (e1, e2) = (warped_mean_curvature_err(17), warped_mean_curvature_err(33));
        assert!(e2 < 3e-3, "{e2}");
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }
}
