use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{cylinder_distance_on, least_slice, row_volumes, Scenario};
use crate::conformal::{principal_eigenpair, ConformalOperator};
use crate::error::{Error, Result};
use crate::hypersurface::{induced_geometry, GraphHypersurface};
use crate::metric::{slice_metric, End};
use crate::par;
use crate::solver::{solve_minimal_graph_partial, SolveDiagnostics};

/// One `(L, R)` line of the sweep table. Observables are absent when the
/// solve for that length failed outright.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "R")]
    pub truncation: f64,
    /// `Vol(W_L^R)`: trapezoid quadrature over the rows `[−R, 0]` of the collar.
    #[serde(rename = "vol_WLR")]
    pub vol_wlr: Option<f64>,
    #[serde(rename = "vol_X_limit")]
    pub vol_x_limit: f64,
    #[serde(rename = "sup_A")]
    pub sup_a: Option<f64>,
    pub sup_grad_u: Option<f64>,
    #[serde(rename = "dist_C0")]
    pub dist_c0: Option<f64>,
    #[serde(rename = "dist_C1")]
    pub dist_c1: Option<f64>,
    pub lambda1: Option<f64>,
    pub converged: bool,
}

/// Per-length summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthRecord {
    pub length: f64,
    pub converged: bool,
    pub error: Option<String>,
    pub diagnostics: Option<SolveDiagnostics>,
    /// `Vol(W_L^L) − L·Vol(X)` over the whole attached collar.
    pub claim1_slack: Option<f64>,
    /// Principal conformal eigenvalue of the far boundary restriction, when
    /// that slice has dimension at least 3.
    pub lambda1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendSummary {
    /// `Vol(W_L^R)` never increases with `L` (slack 1e−9), for every `R`.
    pub volume_monotone: bool,
    /// Largest `(Vol(W_L^R) − R·Vol(X)) / (R·Vol(X))` at the longest
    /// converged length.
    pub final_relative_gap: Option<f64>,
    /// `sup|A|` over the sweep divided by `sup|A|` at the first length.
    pub sup_a_ratio: Option<f64>,
    /// The `C⁰` distance never increases with `L` (slack 1e−6), for every `R`.
    pub c0_monotone: bool,
    pub min_claim1_slack: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollarReport {
    pub end: End,
    pub limit_height: f64,
    pub slice_volume: f64,
    pub lengths: Vec<LengthRecord>,
    /// Ordered by `L`, then by `R`.
    pub rows: Vec<SweepRow>,
    pub trend: TrendSummary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub length: f64,
    pub seconds: f64,
}

/// The report plus what does not belong in it: wall-clock times (which
/// would break byte-identical reruns) and the solved graphs.
#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub report: CollarReport,
    pub timings: Vec<Timing>,
    pub graphs: Vec<Option<GraphHypersurface>>,
}

struct Measured {
    record: LengthRecord,
    rows: Vec<SweepRow>,
    graph: Option<GraphHypersurface>,
}

/// Attach each collar length, solve for the minimal graph starting from the
/// limit slice, and record truncated volumes, curvature and distances to
/// the limit cylinder. A failing length is recorded and the sweep goes on.
pub fn collar_sweep(scenario: &Scenario) -> Result<SweepOutcome> {
    scenario.validate()?;
    let (limit, vol_x) = least_slice(&scenario.ambient, scenario.graph_axis, scenario.end, scenario.slice_samples)?;
    let period = scenario.ambient.grid().extents()[scenario.graph_axis];
    let results = par::map_slice(&scenario.lengths, |&length| {
        let start = Instant::now();
        let m = match measure(scenario, length, limit, vol_x, period) {
            Ok(m) => m,
            Err(e) => {
                log::warn!("collar length {length}: {e}");
                failed(scenario, length, vol_x, e)
            }
        };
        (m, start.elapsed().as_secs_f64())
    });
    let mut lengths = Vec::new();
    let mut rows = Vec::new();
    let mut graphs = Vec::new();
    let mut timings = Vec::new();
    for (&length, (m, seconds)) in scenario.lengths.iter().zip(results) {
        lengths.push(m.record);
        rows.extend(m.rows);
        graphs.push(m.graph);
        timings.push(Timing { length, seconds });
    }
    let trend = trend(&lengths, &rows, &scenario.truncations);
    let report = CollarReport { end: scenario.end, limit_height: limit, slice_volume: vol_x, lengths, rows, trend };
    Ok(SweepOutcome { report, timings, graphs })
}

fn failed(scenario: &Scenario, length: f64, vol_x: f64, e: Error) -> Measured {
    let rows = scenario
        .truncations
        .iter()
        .map(|&r| SweepRow {
            length,
            truncation: r,
            vol_wlr: None,
            vol_x_limit: r * vol_x,
            sup_a: None,
            sup_grad_u: None,
            dist_c0: None,
            dist_c1: None,
            lambda1: None,
            converged: false,
        })
        .collect();
    let record =
        LengthRecord { length, converged: false, error: Some(e.to_string()), diagnostics: None, claim1_slack: None, lambda1: None };
    Measured { record, rows, graph: None }
}

fn measure(scenario: &Scenario, length: f64, limit: f64, vol_x: f64, period: f64) -> Result<Measured> {
    let amb = scenario.ambient.attach_collar(scenario.end, length)?;
    let init = GraphHypersurface::constant(&amb, scenario.graph_axis, limit)?;
    let (graph, diag) = solve_minimal_graph_partial(&amb, &init, &scenario.solver)?;
    let geo = induced_geometry(&graph, &amb)?;
    let a = amb.collar_axis().ok_or(Error::NoBoundary)?;
    let t = graph.base_axis(a).ok_or(Error::NoBoundary)?;
    let base = graph.base_grid();
    let h = base.spacing()[t];
    let rows = row_volumes(&geo, t);
    let m = (length / h).round() as usize;
    // the junction with M, and the collar rows counted away from it
    let junction = match scenario.end {
        End::Y0 => m,
        End::Y1 => rows.len() - 1 - m,
    };
    let span = |k: usize| match scenario.end {
        End::Y0 => (junction - k, junction),
        End::Y1 => (junction, junction + k),
    };
    let trapezoid = |(j0, j1): (usize, usize)| {
        let inner: f64 = rows[j0..=j1].iter().sum();
        h * (inner - 0.5 * (rows[j0] + rows[j1]))
    };
    let claim1_slack = trapezoid(span(m)) - length * vol_x;

    let lambda1 = boundary_lambda(scenario, &geo.induced_metric, t);
    let u = graph.heights();
    let mut out = Vec::with_capacity(scenario.truncations.len());
    for &r in &scenario.truncations {
        let (j0, j1) = span((r / h).round() as usize);
        let nodes: Vec<usize> = (0..base.len()).filter(|&p| (j0..=j1).contains(&base.coord_index(p, t))).collect();
        // the branch of the limit slice nearest to the graph over the region
        let mean = nodes.iter().map(|&p| u[p]).sum::<f64>() / nodes.len() as f64;
        let c = limit + period * ((mean - limit) / period).round();
        out.push(SweepRow {
            length,
            truncation: r,
            vol_wlr: Some(trapezoid((j0, j1))),
            vol_x_limit: r * vol_x,
            sup_a: Some(diag.sup_a),
            sup_grad_u: Some(diag.sup_grad_u),
            dist_c0: Some(cylinder_distance_on(&graph, c, 0, &nodes)?),
            dist_c1: Some(cylinder_distance_on(&graph, c, 1, &nodes)?),
            lambda1,
            converged: diag.converged,
        });
    }
    let record = LengthRecord {
        length,
        converged: diag.converged,
        error: None,
        diagnostics: Some(diag),
        claim1_slack: Some(claim1_slack),
        lambda1,
    };
    Ok(Measured { record, rows: out, graph: Some(graph) })
}

/// `λ₁` of the conformal Laplacian on the far end of the collar, if that
/// slice is at least three-dimensional.
fn boundary_lambda(scenario: &Scenario, induced: &crate::metric::MetricField, t: usize) -> Option<f64> {
    let slice = slice_metric(induced, t, scenario.end).ok()?;
    let n = slice.dim();
    if n < 3 {
        return None;
    }
    let res = ConformalOperator::assemble(&slice, n).and_then(|op| principal_eigenpair(&op, &scenario.eigen));
    match res {
        Ok(sol) => Some(sol.lambda1),
        Err(e) => {
            log::warn!("boundary eigenvalue unavailable: {e}");
            None
        }
    }
}

fn trend(lengths: &[LengthRecord], rows: &[SweepRow], truncations: &[f64]) -> TrendSummary {
    let good: Vec<&SweepRow> = rows.iter().filter(|r| r.converged && r.vol_wlr.is_some()).collect();
    let mut volume_monotone = true;
    let mut c0_monotone = true;
    let mut final_relative_gap: Option<f64> = None;
    for &r in truncations {
        let series: Vec<&&SweepRow> = good.iter().filter(|row| row.truncation == r).collect();
        for w in series.windows(2) {
            volume_monotone &= w[1].vol_wlr.unwrap() <= w[0].vol_wlr.unwrap() + 1e-9;
            c0_monotone &= w[1].dist_c0.unwrap() <= w[0].dist_c0.unwrap() + 1e-6;
        }
        if let Some(last) = series.last() {
            let gap = (last.vol_wlr.unwrap() - last.vol_x_limit) / last.vol_x_limit;
            final_relative_gap = Some(final_relative_gap.map_or(gap, |g| g.max(gap)));
        }
    }
    let converged: Vec<&LengthRecord> = lengths.iter().filter(|l| l.converged).collect();
    let sup_a: Vec<f64> = converged.iter().filter_map(|l| l.diagnostics.as_ref().map(|d| d.sup_a)).collect();
    let sup_a_ratio = sup_a.first().and_then(|&first| {
        let max = sup_a.iter().cloned().fold(0.0, f64::max);
        if first > 0.0 {
            Some(max / first)
        } else if max == 0.0 {
            Some(1.0)
        } else {
            None
        }
    });
    let min_claim1_slack = converged.iter().filter_map(|l| l.claim1_slack).reduce(f64::min);
    TrendSummary { volume_monotone, final_relative_gap, sup_a_ratio, c0_monotone, min_claim1_slack }
}
