//! Graph hypersurfaces `x^γ = u(y)` in an ambient chart and their induced
//! geometry.

mod geometry;

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use geometry::{
    first_variation, induced_geometry, mean_curvature, volume, BoundaryData, GraphKernel, InducedGeometry, NodeGeometry,
};

use crate::error::{Error, Result};
use crate::field::{derivative_at, rfld, Closure, Field, Grid, GridSpec};
use crate::metric::{reflect_index, AmbientManifold};

/// Default bound on `sup|∇u|`; beyond it the graph description is no
/// longer trusted.
pub const DEFAULT_SLOPE_MAX: f64 = 10.0;

/// Tolerance for the free-boundary condition `∂_t u = 0` at the collar ends.
pub const FREE_BOUNDARY_TOL: f64 = 1e-6;

/// For reflected graphs the discrete condition holds exactly; the one-sided
/// slope is only required to stay below this gross bound.
pub const REFLECT_GROSS_TOL: f64 = 1e-2;

/// A height function over the base grid (the ambient grid with the graph
/// axis removed).
#[derive(Clone, Debug, PartialEq)]
pub struct GraphHypersurface {
    height: Field,
    graph_axis: usize,
    orientation: f64,
    closure: Closure,
    slope_max: f64,
}

/// What the JSON sidecar of a saved graph records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSidecar {
    pub graph_axis: usize,
    pub orientation: i8,
    pub closure: Closure,
    pub slope_max: f64,
    pub base_grid: GridSpec,
}

impl GraphHypersurface {
    /// `orientation` is `+1` (normal pairs positively with `dx^γ`) or `−1`.
    pub fn new(height: Field, graph_axis: usize, orientation: i8) -> Result<GraphHypersurface> {
        if height.rank() != 0 {
            return Err(Error::DimensionMismatch("graph height must be a scalar field".into()));
        }
        if orientation != 1 && orientation != -1 {
            return Err(Error::DimensionMismatch(format!("orientation must be +1 or -1, got {orientation}")));
        }
        if let Some(p) = height.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::OutOfChart(format!("height is not finite at node {p}")));
        }
        Ok(GraphHypersurface {
            height,
            graph_axis,
            orientation: orientation as f64,
            closure: Closure::Reflect,
            slope_max: DEFAULT_SLOPE_MAX,
        })
    }

    /// Constant height over the base of `ambient` along `graph_axis`.
    pub fn constant(ambient: &AmbientManifold, graph_axis: usize, value: f64) -> Result<GraphHypersurface> {
        let base = ambient.grid().without_axis(graph_axis)?;
        let n = base.len();
        GraphHypersurface::new(Field::scalar(&base, vec![value; n])?, graph_axis, 1)
    }

    /// Height sampled from a function of the base coordinates.
    pub fn from_fn(
        ambient: &AmbientManifold,
        graph_axis: usize,
        f: impl Fn(&[f64]) -> f64 + Sync + Send,
    ) -> Result<GraphHypersurface> {
        let base = ambient.grid().without_axis(graph_axis)?;
        GraphHypersurface::new(Field::scalar_from_fn(&base, f), graph_axis, 1)
    }

    /// The same graph with new heights.
    pub fn with_heights(&self, values: Vec<f64>) -> Result<GraphHypersurface> {
        let mut g = self.clone();
        g.height = Field::scalar_on(self.height.grid_arc(), values)?;
        if let Some(p) = g.height.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::OutOfChart(format!("height is not finite at node {p}")));
        }
        Ok(g)
    }
    pub fn with_orientation(mut self, orientation: i8) -> Result<GraphHypersurface> {
        if orientation != 1 && orientation != -1 {
            return Err(Error::DimensionMismatch(format!("orientation must be +1 or -1, got {orientation}")));
        }
        self.orientation = orientation as f64;
        Ok(self)
    }
    pub fn with_closure(mut self, closure: Closure) -> GraphHypersurface {
        self.closure = closure;
        self
    }
    pub fn with_slope_max(mut self, slope_max: f64) -> GraphHypersurface {
        self.slope_max = slope_max;
        self
    }
    /// Opposite orientation.
    pub fn flipped(&self) -> GraphHypersurface {
        let mut g = self.clone();
        g.orientation = -g.orientation;
        g
    }

    pub fn height(&self) -> &Field {
        &self.height
    }
    pub fn heights(&self) -> &[f64] {
        self.height.values()
    }
    pub fn base_grid(&self) -> &Grid {
        self.height.grid()
    }
    pub fn base_grid_arc(&self) -> Arc<Grid> {
        self.height.grid_arc()
    }
    pub fn graph_axis(&self) -> usize {
        self.graph_axis
    }
    pub fn orientation(&self) -> f64 {
        self.orientation
    }
    pub fn closure(&self) -> Closure {
        self.closure
    }
    pub fn slope_max(&self) -> f64 {
        self.slope_max
    }

    /// Ambient axis of base axis `i`.
    pub fn ambient_axis(&self, i: usize) -> usize {
        if i < self.graph_axis {
            i
        } else {
            i + 1
        }
    }

    /// Base axis of a (non-graph) ambient axis.
    pub fn base_axis(&self, a: usize) -> Option<usize> {
        match a.cmp(&self.graph_axis) {
            std::cmp::Ordering::Less => Some(a),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(a - 1),
        }
    }

    /// Coordinate gradient magnitude `sup |∇u|` with this graph's closure.
    pub fn sup_gradient(&self) -> f64 {
        let grid = self.base_grid();
        let u = self.heights();
        let mut d = [0.0];
        let mut worst: f64 = 0.0;
        for p in 0..grid.len() {
            let mut s = 0.0;
            for a in 0..grid.ndim() {
                derivative_at(grid, u, 1, p, a, 1, self.closure, &mut d);
                s += d[0] * d[0];
            }
            worst = worst.max(s.sqrt());
        }
        worst
    }

    /// Largest one-sided `|∂_t u|` at the ends of the bounded base axis.
    pub fn boundary_slope(&self) -> f64 {
        let grid = self.base_grid();
        let u = self.heights();
        let mut d = [0.0];
        let mut worst: f64 = 0.0;
        for a in grid.bounded_axes() {
            for row in [0, grid.dims()[a] - 1] {
                for p in grid.slice_nodes(a, row) {
                    derivative_at(grid, u, 1, p, a, 1, Closure::OneSided, &mut d);
                    worst = worst.max(d[0].abs());
                }
            }
        }
        worst
    }

    pub fn sidecar(&self) -> GraphSidecar {
        GraphSidecar {
            graph_axis: self.graph_axis,
            orientation: self.orientation as i8,
            closure: self.closure,
            slope_max: self.slope_max,
            base_grid: self.base_grid().spec(),
        }
    }

    /// Write `<stem>.rfld` and `<stem>.json`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        rfld::write_file(&self.height, dir.join(format!("{stem}.rfld")))?;
        let json = serde_json::to_string_pretty(&self.sidecar()).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
        Ok(())
    }

    pub fn load(rfld_path: &Path, sidecar_path: &Path) -> Result<GraphHypersurface> {
        let height = rfld::read_file(rfld_path)?;
        let text = std::fs::read_to_string(sidecar_path)?;
        let side: GraphSidecar = serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
        if !height.grid().compatible(&Grid::from_spec(&side.base_grid)?) {
            return Err(Error::IncompatibleGrids("height field and sidecar disagree on the base grid".into()));
        }
        Ok(GraphHypersurface::new(height, side.graph_axis, side.orientation)?
            .with_closure(side.closure)
            .with_slope_max(side.slope_max))
    }

    /// Check that the graph fits `ambient`.
    pub fn check_chart(&self, ambient: &AmbientManifold) -> Result<()> {
        let base = ambient.grid().without_axis(self.graph_axis)?;
        if !base.compatible(self.base_grid()) {
            return Err(Error::OutOfChart("base grid does not match the ambient chart".into()));
        }
        Ok(())
    }
}

/// Mirror a free-boundary graph across both collar ends onto the base of
/// `ambient.double()`.
pub fn double_graph(graph: &GraphHypersurface, ambient: &AmbientManifold) -> Result<GraphHypersurface> {
    graph.check_chart(ambient)?;
    let collar = ambient.collar_axis().ok_or(Error::NoBoundary)?;
    let t = graph.base_axis(collar).expect("the collar axis is never the graph axis");
    let slope = graph.boundary_slope();
    match graph.closure() {
        Closure::OneSided if slope > FREE_BOUNDARY_TOL => return Err(Error::FreeBoundaryViolated(slope)),
        // reflected graphs satisfy the discrete condition by construction;
        // only a gross violation of the continuum one is reported
        Closure::Reflect if slope > REFLECT_GROSS_TOL => {
            return Err(Error::FreeBoundaryViolated(slope))
        }
        _ => {}
    }
    let grid = graph.base_grid();
    let n = grid.dims()[t];
    let dgrid = Arc::new(grid.with_axis(t, 2 * (n - 1), 2.0 * grid.extents()[t], true)?);
    let u = graph.heights();
    let values = (0..dgrid.len())
        .map(|p| {
            let mut idx = dgrid.multi_index(p);
            idx[t] = reflect_index(n, idx[t]).0;
            u[grid.index(&idx)]
        })
        .collect();
    let height = Field::scalar_on(dgrid, values)?;
    Ok(GraphHypersurface::new(height, graph.graph_axis, graph.orientation as i8)?
        .with_closure(graph.closure)
        .with_slope_max(graph.slope_max))
}
