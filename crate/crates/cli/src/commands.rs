//! The subcommands. Each one fills `report` as it goes so that a numerical
//! failure halfway still leaves the finished stages on disk.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use psclab::conformal::{conformal_descent, positivity_certificate, principal_eigenpair, ConformalOperator};
use psclab::experiments::{bordism_pipeline, coarea_check, collar_sweep, least_slice, SweepRow};
use psclab::field::Field;
use psclab::hypersurface::{induced_geometry, mean_curvature, GraphHypersurface};
use psclab::metric::{AmbientManifold, End};
use psclab::solver::{default_height, solve_minimal_graph_partial, SolveDiagnostics};
use psclab::stability::{gauss_codazzi_residual, second_variation_form, stability_spectrum, Doubling};
use psclab::Error;

use crate::config::Loaded;
use crate::output::OutDir;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    MinSurface,
    Stability,
    ConformalDescent,
    CollarSweep,
    Pipeline,
    Double,
    Coarea,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::MinSurface => "min-surface",
            Command::Stability => "stability",
            Command::ConformalDescent => "conformal-descent",
            Command::CollarSweep => "collar-sweep",
            Command::Pipeline => "pipeline",
            Command::Double => "double",
            Command::Coarea => "coarea",
        }
    }
}

/// How a run ended, short of an error.
pub enum Status {
    Done,
    /// Finished, but something did not converge or verify.
    Incomplete(String),
}

pub enum Failure {
    Numerical(Error),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(m) | Error::Format(m) => Failure::Internal(m),
            e => Failure::Numerical(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

pub type Outcome = Result<Status, Failure>;

pub fn run(cmd: Command, ld: &Loaded, out: &mut OutDir) -> Outcome {
    let mut report = Map::new();
    report.insert("command".into(), cmd.name().into());
    let res = match cmd {
        Command::MinSurface => min_surface(ld, out, &mut report),
        Command::Stability => stability(ld, out, &mut report),
        Command::ConformalDescent => descent(ld, out, &mut report),
        Command::CollarSweep => return sweep(ld, out),
        Command::Pipeline => return pipeline(ld, out),
        Command::Double => double(ld, out, &mut report),
        Command::Coarea => coarea(ld, out, &mut report),
    };
    if let Err(Failure::Numerical(e)) = &res {
        report.insert("error".into(), e.to_string().into());
    }
    out.json("report.json", &report)?;
    res
}

fn put<T: Serialize>(report: &mut Map<String, Value>, key: &str, v: &T) -> Result<(), Failure> {
    let v = serde_json::to_value(v).map_err(|e| Failure::Internal(e.to_string()))?;
    report.insert(key.into(), v);
    Ok(())
}

fn initial_height(ld: &Loaded) -> psclab::Result<f64> {
    let (amb, sc) = (&ld.ambient, &ld.scenario);
    Ok(match (ld.config.graph.init, amb.collar_axis()) {
        (Some(h), _) => h,
        (None, Some(_)) => least_slice(amb, sc.graph_axis, End::Y0, sc.slice_samples)?.0,
        (None, None) => default_height(amb, sc.graph_axis),
    })
}

/// Solve on the configured ambient and record the diagnostics.
fn solve(
    ld: &Loaded,
    out: &mut OutDir,
    report: &mut Map<String, Value>,
) -> Result<(GraphHypersurface, SolveDiagnostics), Failure> {
    let amb: &AmbientManifold = &ld.ambient;
    let h0 = initial_height(ld)?;
    put(report, "initial_height", &h0)?;
    let init = GraphHypersurface::constant(amb, ld.scenario.graph_axis, h0)?;
    let (g, diag) = solve_minimal_graph_partial(amb, &init, &ld.scenario.solver)?;
    put(report, "solver", &diag)?;
    put(report, "sup_mean_curvature", &mean_curvature(&g, amb)?.sup_norm())?;
    if ld.config.output.fields {
        out.graph("graph", &g)?;
    }
    if ld.config.output.plotdata {
        #[derive(Serialize)]
        struct Damping {
            step: usize,
            damping: f64,
        }
        let rows: Vec<Damping> =
            diag.damping_history.iter().enumerate().map(|(step, &damping)| Damping { step, damping }).collect();
        out.csv("plotdata/damping.csv", &rows)?;
    }
    Ok((g, diag))
}

fn not_converged(diag: &SolveDiagnostics) -> Status {
    Status::Incomplete(format!(
        "minimal-graph solver stopped at residual {:e} after {} Newton steps",
        diag.final_residual, diag.newton_iterations
    ))
}

fn min_surface(ld: &Loaded, out: &mut OutDir, report: &mut Map<String, Value>) -> Outcome {
    let (_, diag) = solve(ld, out, report)?;
    Ok(if diag.converged { Status::Done } else { not_converged(&diag) })
}

fn stability(ld: &Loaded, out: &mut OutDir, report: &mut Map<String, Value>) -> Outcome {
    let (g, diag) = solve(ld, out, report)?;
    if !diag.converged {
        return Ok(not_converged(&diag));
    }
    let form = second_variation_form(&g, &ld.ambient)?;
    let spec = stability_spectrum(&form, ld.scenario.stability_modes, &ld.scenario.eigen)?;
    put(report, "stability", &spec)?;
    put(report, "gauss_codazzi_residual", &gauss_codazzi_residual(&g, &ld.ambient)?)?;
    if ld.config.output.fields {
        if let Some(f) = spec.eigenfields.first() {
            out.field("stability_mode0.rfld", f)?;
        }
    }
    if ld.config.output.plotdata {
        #[derive(Serialize)]
        struct Mode {
            k: usize,
            eigenvalue: f64,
            residual: f64,
        }
        let rows: Vec<Mode> = spec
            .eigenvalues
            .iter()
            .zip(&spec.residuals)
            .enumerate()
            .map(|(k, (&eigenvalue, &residual))| Mode { k, eigenvalue, residual })
            .collect();
        out.csv("plotdata/spectrum.csv", &rows)?;
    }
    Ok(Status::Done)
}

fn descent(ld: &Loaded, out: &mut OutDir, report: &mut Map<String, Value>) -> Outcome {
    let amb = &ld.ambient;
    let sc = &ld.scenario;
    let mut op = ConformalOperator::assemble(amb.metric(), amb.dim())?;
    if !amb.synthetic().is_zero() {
        let r = Field::scalar(amb.grid(), amb.scalar_curvature())?;
        op = op.with_scalar_curvature(&r)?;
    }
    let sol = principal_eigenpair(&op, &sc.eigen)?;
    put(report, "eigenpair", &sol)?;
    if ld.config.output.fields {
        out.field("phi.rfld", sol.phi())?;
    }
    let (descended, rep) = conformal_descent(&op, &sol, &sc.descent)?;
    put(report, "descent", &rep)?;
    if ld.config.output.fields {
        out.field("descended_metric.rfld", descended.field())?;
    }
    let cert = positivity_certificate(&op, &sc.certificate)?;
    out.json("certificate.json", &cert)?;
    if ld.config.output.plotdata {
        #[derive(Serialize)]
        struct Trial {
            trial: usize,
            lambda1: f64,
            error: f64,
        }
        let rows: Vec<Trial> =
            cert.trials.iter().enumerate().map(|(trial, t)| Trial { trial, lambda1: t.lambda1, error: t.error }).collect();
        out.csv("plotdata/certificate_trials.csv", &rows)?;
    }
    Ok(Status::Done)
}

fn sweep(ld: &Loaded, out: &mut OutDir) -> Outcome {
    let res = collar_sweep(&ld.scenario)?;
    let rep = &res.report;
    out.json("report.json", rep)?;
    out.csv("sweep.csv", &rep.rows)?;
    out.volatile_json("timings.json", &res.timings)?;
    if ld.config.output.plotdata {
        plot_sweep(out, &rep.rows)?;
    }
    if ld.config.output.fields {
        for (l, g) in rep.lengths.iter().zip(&res.graphs) {
            if let Some(g) = g {
                out.graph(&format!("graph_L{}", l.length), g)?;
            }
        }
    }
    let failed: Vec<String> = rep.lengths.iter().filter(|l| !l.converged).map(|l| l.length.to_string()).collect();
    Ok(if failed.is_empty() {
        Status::Done
    } else {
        Status::Incomplete(format!("no converged minimizer for L = {}", failed.join(", ")))
    })
}

fn plot_sweep(out: &mut OutDir, rows: &[SweepRow]) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Volume {
        #[serde(rename = "L")]
        l: f64,
        #[serde(rename = "R")]
        r: f64,
        relative_gap: Option<f64>,
    }
    #[derive(Serialize)]
    struct Distance {
        #[serde(rename = "L")]
        l: f64,
        #[serde(rename = "R")]
        r: f64,
        dist_c0: Option<f64>,
        dist_c1: Option<f64>,
    }
    let v: Vec<Volume> = rows
        .iter()
        .map(|r| Volume {
            l: r.length,
            r: r.truncation,
            relative_gap: r.vol_wlr.map(|v| (v - r.vol_x_limit) / r.vol_x_limit),
        })
        .collect();
    let d: Vec<Distance> = rows
        .iter()
        .map(|r| Distance { l: r.length, r: r.truncation, dist_c0: r.dist_c0, dist_c1: r.dist_c1 })
        .collect();
    out.csv("plotdata/volume_gap.csv", &v)?;
    out.csv("plotdata/cylinder_distance.csv", &d)
}

fn pipeline(ld: &Loaded, out: &mut OutDir) -> Outcome {
    let res = bordism_pipeline(&ld.scenario)?;
    let cert = &res.certificate;
    out.json("certificate.json", cert)?;
    let art = &res.artifacts;
    if ld.config.output.fields {
        if let Some(g) = &art.graph {
            out.graph("graph", g)?;
        }
        for (m, end) in art.restrictions.iter().zip(["y0", "y1"]) {
            out.field(&format!("restriction_{end}.rfld"), m.field())?;
        }
        if let Some(m) = &art.descended {
            out.field("descended_metric.rfld", m.field())?;
        }
    }
    Ok(match cert.failure() {
        None => Status::Done,
        Some(e) => Status::Incomplete(e.to_string()),
    })
}

fn double(ld: &Loaded, out: &mut OutDir, report: &mut Map<String, Value>) -> Outcome {
    let (g, diag) = solve(ld, out, report)?;
    if !diag.converged {
        return Ok(not_converged(&diag));
    }
    let dbl = Doubling::new(&g, &ld.ambient)?;
    let residual = induced_geometry(&dbl.graph, &dbl.ambient)?.mean_curvature.sup_norm();
    let mut rng = ChaCha8Rng::seed_from_u64(ld.scenario.solver.seed);
    let n = dbl.form.grid().len();
    let splits: Vec<Value> = (0..10)
        .map(|_| {
            let phi: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let s = dbl.split(&phi);
            json!({"doubled": s.doubled, "even": s.even, "odd": s.odd, "defect": s.defect()})
        })
        .collect();
    put(report, "doubled_residual", &residual)?;
    put(report, "splits", &splits)?;
    if ld.config.output.fields {
        out.graph("doubled_graph", &dbl.graph)?;
    }
    Ok(Status::Done)
}

fn coarea(ld: &Loaded, out: &mut OutDir, report: &mut Map<String, Value>) -> Outcome {
    let (g, diag) = solve(ld, out, report)?;
    let r = coarea_check(&g, &ld.ambient)?;
    put(report, "coarea", &r)?;
    if ld.config.output.plotdata {
        #[derive(Serialize)]
        struct Level {
            row: usize,
            level_volume: f64,
        }
        let rows: Vec<Level> =
            r.level_volumes.iter().enumerate().map(|(row, &level_volume)| Level { row, level_volume }).collect();
        out.csv("plotdata/level_volumes.csv", &rows)?;
    }
    Ok(if diag.converged { Status::Done } else { not_converged(&diag) })
}
