//! Runnable experiments built on the library: the coarea identity on graphs
//! over a collar, distances to the limit cylinder, collar-length sweeps and
//! the end-to-end bordism pipeline.

mod pipeline;
mod sweep;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use pipeline::{bordism_pipeline, BordismCertificate, PipelineArtifacts, PipelineOutcome, RestrictionRecord, Stage, StageRecord};
pub use sweep::{collar_sweep, CollarReport, LengthRecord, SweepOutcome, SweepRow, Timing, TrendSummary};

use crate::conformal::{CertificateOptions, DescentOptions};
use crate::error::{Error, Result};
use crate::field::{scalar_jet, Grid};
use crate::hypersurface::{induced_geometry, GraphHypersurface, InducedGeometry};
use crate::linalg::small::spd_det;
use crate::linalg::EigenOptions;
use crate::metric::{AmbientManifold, End, MetricField};
use crate::solver::{best_constant_slice, SolverOptions};

/// Everything an experiment needs: the ambient `M` with its collar, the
/// graph direction, the collar lengths to attach and the solver and eigen
/// settings of the later stages.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub ambient: AmbientManifold,
    pub graph_axis: usize,
    /// End of `ambient` where the collars are attached.
    pub end: End,
    pub lengths: Vec<f64>,
    /// Truncation heights `R` (measured from the junction into the collar).
    pub truncations: Vec<f64>,
    pub solver: SolverOptions,
    pub eigen: EigenOptions,
    pub descent: DescentOptions,
    pub certificate: CertificateOptions,
    /// Eigenvalues requested from the stability spectrum.
    pub stability_modes: usize,
    /// Scan size of the constant-slice search for the limit cylinder.
    pub slice_samples: usize,
}

impl Scenario {
    /// Defaults: lengths `{1, 2, 4, 8}`, one truncation at `R = 1/2`.
    pub fn new(ambient: AmbientManifold, graph_axis: usize) -> Scenario {
        Scenario {
            ambient,
            graph_axis,
            end: End::Y0,
            lengths: vec![1.0, 2.0, 4.0, 8.0],
            truncations: vec![0.5],
            solver: SolverOptions::default(),
            eigen: EigenOptions::default(),
            descent: DescentOptions::default(),
            certificate: CertificateOptions::default(),
            stability_modes: 3,
            slice_samples: 64,
        }
    }

    /// Use `seed` for the solver, the eigen iterations and the certificate.
    pub fn with_seed(mut self, seed: u64) -> Scenario {
        self.solver.seed = seed;
        self.eigen.seed = seed;
        self.certificate.seed = seed;
        self.certificate.eigen.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.ambient.collar_axis().ok_or(Error::NoBoundary)?;
        let grid = self.ambient.grid();
        grid.check_axis(self.graph_axis)?;
        if self.graph_axis == a {
            return Err(invalid("the graph axis cannot be the collar axis"));
        }
        if !grid.periodic()[self.graph_axis] {
            return Err(Error::DegenerateAxis { axis: self.graph_axis, reason: "graph axis must be periodic".into() });
        }
        let h = grid.spacing()[a];
        let on_grid = |x: f64| {
            let s = x / h;
            if (s - s.round()).abs() > 1e-9 * s.abs().max(1.0) {
                Err(Error::IncompatibleLength { length: x, spacing: h })
            } else {
                Ok(())
            }
        };
        if self.lengths.is_empty() || self.truncations.is_empty() {
            return Err(invalid("need at least one collar length and one truncation height"));
        }
        for (i, &l) in self.lengths.iter().enumerate() {
            if !(l > 0.0) {
                return Err(invalid(&format!("collar length {l} must be positive")));
            }
            if i > 0 && !(l > self.lengths[i - 1]) {
                return Err(invalid("collar lengths must be strictly increasing"));
            }
            on_grid(l)?;
        }
        for &r in &self.truncations {
            if !(r > 0.0) || !(r < self.lengths[0]) {
                return Err(invalid(&format!("truncation {r} must lie in (0, {}) (the shortest collar)", self.lengths[0])));
            }
            on_grid(r)?;
        }
        if self.stability_modes == 0 {
            return Err(invalid("stability_modes must be at least 1"));
        }
        self.solver.validate()
    }
}

fn invalid(msg: &str) -> Error {
    Error::DimensionMismatch(format!("invalid scenario: {msg}"))
}

/// Least-volume constant slice of the product cylinder over the `end`
/// slice of `ambient`: returns `(height, Vol(X))`.
pub fn least_slice(ambient: &AmbientManifold, graph_axis: usize, end: End, samples: usize) -> Result<(f64, f64)> {
    let a = ambient.collar_axis().ok_or(Error::NoBoundary)?;
    let grid = ambient.grid();
    let row = match end {
        End::Y0 => 0,
        End::Y1 => grid.dims()[a] - 1,
    };
    let cyl = Arc::new(grid.with_axis(a, 5, 1.0, false)?);
    let d = ambient.dim();
    let src = ambient.metric();
    let mut values = vec![0.0; cyl.len() * d * d];
    for (p, out) in values.chunks_mut(d * d).enumerate() {
        let mut idx = cyl.multi_index(p);
        idx[a] = row;
        out.copy_from_slice(src.at(grid.index(&idx)));
        for i in 0..d {
            out[i * d + a] = 0.0;
            out[a * d + i] = 0.0;
        }
        out[a * d + a] = 1.0;
    }
    let product = AmbientManifold::new(MetricField::from_values(cyl, values)?, Some(a))?;
    best_constant_slice(&product, graph_axis, samples)
}

/// Outcome of [`coarea_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoareaReport {
    /// `∫_Σ |∇P| dμ` with `P` the collar coordinate.
    pub lhs: f64,
    /// Level-set volumes integrated over the collar coordinate.
    pub rhs: f64,
    pub residual: f64,
    pub volume: f64,
    /// `L·Vol(X)` with `X` the least-volume slice of the lower end.
    pub cylinder_volume: f64,
    /// `Vol(Σ) − L·Vol(X)`.
    pub slack: f64,
    pub level_volumes: Vec<f64>,
}

/// Both sides of the coarea formula for the collar coordinate on a graph
/// whose base contains the collar axis.
pub fn coarea_check(graph: &GraphHypersurface, ambient: &AmbientManifold) -> Result<CoareaReport> {
    let a = ambient.collar_axis().ok_or(Error::NoBoundary)?;
    let t = graph.base_axis(a).ok_or_else(|| Error::DimensionMismatch("graph is taken along the collar axis".into()))?;
    let geo = induced_geometry(graph, ambient)?;
    let grid = geo.volume_density.grid();
    let n = grid.ndim();
    let mut lhs = 0.0;
    let mut level_volumes = vec![0.0; grid.dims()[t]];
    let mut inv = vec![0.0; n * n];
    let mut minor = Vec::with_capacity(n * n);
    for p in 0..grid.len() {
        let det = geo.induced_metric.inverse_at(p, &mut inv);
        lhs += grid.node_weight(p) * det.sqrt() * inv[t * n + t].sqrt();
        // level-set density: the metric restricted to the other base axes
        let h = geo.induced_metric.at(p);
        minor.clear();
        for i in (0..n).filter(|&i| i != t) {
            for j in (0..n).filter(|&j| j != t) {
                minor.push(h[i * n + j]);
            }
        }
        let m = if n == 1 { 1.0 } else { spd_det(&minor, n - 1).ok_or(Error::SingularMetric { node: p })? };
        level_volumes[grid.coord_index(p, t)] += grid.node_weight_except(p, &[t]) * m.sqrt();
    }
    let rhs = level_volumes.iter().enumerate().map(|(j, v)| grid.weight_1d(t, j) * v).sum::<f64>();
    let (_, vol_x) = least_slice(ambient, graph.graph_axis(), End::Y0, 64)?;
    let volume = geo.volume();
    let cylinder_volume = grid.extents()[t] * vol_x;
    Ok(CoareaReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        volume,
        cylinder_volume,
        slack: volume - cylinder_volume,
        level_volumes,
    })
}

/// Sup distance of the graph to the constant slice `limit` over the whole
/// base; see [`cylinder_distance_on`].
pub fn cylinder_distance(graph: &GraphHypersurface, limit: f64, k: u8) -> Result<f64> {
    let all: Vec<usize> = (0..graph.base_grid().len()).collect();
    cylinder_distance_on(graph, limit, k, &all)
}

/// `C^k` distance (`k ∈ {0, 1}`) of `u` to the constant `limit` over
/// `nodes`: `sup|u − limit|`, and for `k = 1` the larger of that and the
/// sup of the coordinate gradient norm `|∇u|`.
pub fn cylinder_distance_on(graph: &GraphHypersurface, limit: f64, k: u8, nodes: &[usize]) -> Result<f64> {
    let grid = graph.base_grid();
    if nodes.is_empty() || nodes.iter().any(|&p| p >= grid.len()) {
        return Err(Error::IncompatibleGrids("distance region is empty or leaves the base grid".into()));
    }
    if k > 1 {
        return Err(Error::DimensionMismatch(format!("only C0 and C1 distances are available, not C{k}")));
    }
    let u = graph.heights();
    let c0 = nodes.iter().fold(0.0f64, |m, &p| m.max((u[p] - limit).abs()));
    if k == 0 {
        return Ok(c0);
    }
    let jet = scalar_jet(grid, u, graph.closure());
    let grad = nodes.iter().fold(0.0f64, |m, &p| m.max(jet.d1.iter().map(|d| d[p] * d[p]).sum::<f64>().sqrt()));
    Ok(c0.max(grad))
}

/// `Σ_slice w ρ` for every row of the base axis `t`.
fn row_volumes(geo: &InducedGeometry, t: usize) -> Vec<f64> {
    let grid: &Grid = geo.volume_density.grid();
    let rho = geo.volume_density.values();
    let mut rows = vec![0.0; grid.dims()[t]];
    for p in 0..grid.len() {
        rows[grid.coord_index(p, t)] += grid.node_weight_except(p, &[t]) * rho[p];
    }
    rows
}
