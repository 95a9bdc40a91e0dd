//! Free-boundary minimal graphs: damped Newton on `H(u) = 0` with a
//! mean-curvature-flow fallback.
//!
//! The free-boundary condition is carried by the graph's closure: with
//! `Closure::Reflect` every derivative of `u` sees an even ghost node across
//! the collar ends, so `∂_t u = 0` holds discretely at every iterate.

mod jacobian;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use jacobian::{dependency_radius, mean_curvature_jacobian};

use crate::error::{Error, Result};
use crate::field::Grid;
use crate::hypersurface::{GraphHypersurface, GraphKernel};
use crate::linalg::lu_solve;
use crate::metric::{AmbientManifold, End};
use crate::par;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Target for `sup|H|`.
    pub residual_tol: f64,
    pub max_newton: usize,
    /// Smallest Newton damping before the flow fallback kicks in.
    pub damping_floor: f64,
    /// Pseudo-time step of the fallback flow; `None` picks
    /// `min(0.2·h²_min, 0.9·bound)` at every step.
    pub flow_dt: Option<f64>,
    pub max_flow: usize,
    /// Flow steps per fallback episode before Newton is retried.
    pub flow_chunk: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            residual_tol: 1e-8,
            max_newton: 50,
            damping_floor: 1.0 / 64.0,
            flow_dt: None,
            max_flow: 10_000,
            flow_chunk: 500,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::DimensionMismatch(format!("solver options: {m}")));
        if !(self.residual_tol >= 1e-12) {
            return bad("residual_tol must be at least 1e-12");
        }
        if self.max_newton == 0 || self.flow_chunk == 0 {
            return bad("iteration budgets must be positive");
        }
        if !(self.damping_floor > 0.0 && self.damping_floor <= 1.0) {
            return bad("damping_floor must lie in (0, 1]");
        }
        if let Some(dt) = self.flow_dt {
            if !(dt > 0.0) {
                return bad("flow_dt must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub newton_iterations: usize,
    pub flow_steps: usize,
    pub final_residual: f64,
    /// Accepted damping of every Newton step, in order.
    pub damping_history: Vec<f64>,
    pub sup_grad_u: f64,
    pub sup_a: f64,
    pub converged: bool,
    pub volume: f64,
    pub initial_volume: f64,
}

/// Largest explicit flow step: `h²_min / (2 n · max h^{ii})`.
pub fn flow_step_bound(kernel: &GraphKernel, u: &[f64]) -> Result<f64> {
    let grid = kernel.base_grid();
    let n = grid.ndim();
    let jet = kernel.jet(u);
    kernel.check_slope(&jet)?;
    let worst: Vec<Result<f64>> = par::map_indices(u.len(), |b| {
        let mut smp = kernel.sampler().empty_sample();
        let ng = kernel.node(b, u[b], &jet, &mut smp)?;
        Ok((0..n).map(|i| ng.h_inv[i * n + i]).fold(0.0, f64::max))
    });
    let mut hmax: f64 = 0.0;
    for w in worst {
        hmax = hmax.max(w?);
    }
    let hmin = grid.min_spacing();
    Ok(hmin * hmin / (2.0 * n as f64 * hmax))
}

fn flow_update(kernel: &GraphKernel, u: &[f64], dt: f64) -> Result<Vec<f64>> {
    let (h, speed) = kernel.mean_curvature_and_speed(u)?;
    let s = kernel.orientation();
    // a normal displacement φν moves the height by s·|n|·φ
    Ok(u.iter().zip(h.iter().zip(&speed)).map(|(ub, (hb, nb))| ub + dt * s * nb * hb).collect())
}

/// One explicit step of volume-decreasing mean-curvature flow.
pub fn mc_flow_step(graph: &GraphHypersurface, ambient: &AmbientManifold, dt: f64) -> Result<GraphHypersurface> {
    let kernel = GraphKernel::new(graph, ambient)?;
    let bound = flow_step_bound(&kernel, graph.heights())?;
    if !(dt > 0.0) || dt > bound {
        return Err(Error::StepTooLarge { dt, bound });
    }
    graph.with_heights(flow_update(&kernel, graph.heights(), dt)?)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn rms(grid: &Grid, v: &[f64]) -> f64 {
    let s: f64 = v.iter().enumerate().map(|(p, x)| grid.node_weight(p) * x * x).sum();
    s.sqrt()
}

/// Refuse ambients whose collar ends are not products: the reflected ghost
/// nodes encode orthogonality only there.
fn check_ends(ambient: &AmbientManifold) -> Result<()> {
    if ambient.collar_axis().is_some() {
        for end in [End::Y0, End::Y1] {
            if ambient.product_depth(end) <= 0.0 {
                return Err(Error::NonProductEnd { end: end.index() });
            }
        }
    }
    Ok(())
}

struct Session<'a> {
    kernel: GraphKernel,
    opts: &'a SolverOptions,
    newton: usize,
    flow: usize,
    damping: Vec<f64>,
}

impl Session<'_> {
    /// Newton until converged, stalled, or out of budget. Returns the last
    /// iterate and its residual and whether it converged.
    fn newton(&mut self, mut u: Vec<f64>) -> Result<(Vec<f64>, Vec<f64>, bool)> {
        let grid = self.kernel.base_grid().clone();
        let s = self.kernel.orientation();
        let mut h = self.kernel.mean_curvature(&u)?;
        while self.newton < self.opts.max_newton {
            if sup(&h) <= self.opts.residual_tol {
                return Ok((u, h, true));
            }
            self.newton += 1;
            let mut jac = mean_curvature_jacobian(&self.kernel, &u, &h)?;
            // Levenberg-style shift along the definite direction of the
            // Jacobi operator; it vanishes with the residual and keeps the
            // translation mode of symmetric ambients solvable. Proportional
            // to sup|H| alone (not to the 1/h² diagonal) so it stays small
            // against the low modes on fine grids and convergence stays
            // quadratic.
            let diag = jac.iter().filter(|e| e.0 == e.1).fold(0.0, |m: f64, e| m.max(e.2.abs()));
            let mu = sup(&h).min(1e-3 * diag);
            for p in 0..u.len() {
                jac.push((p, p, -s * mu));
            }
            let rhs: Vec<f64> = h.iter().map(|x| -x).collect();
            let delta = lu_solve(u.len(), &jac, &rhs)?;
            let r0 = rms(&grid, &h);
            let mut alpha = 1.0;
            let mut last_err = None;
            let accepted = loop {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
                match self.kernel.mean_curvature(&trial) {
                    Ok(ht) if rms(&grid, &ht) < r0 => break Some((trial, ht)),
                    Ok(_) => {}
                    Err(e @ Error::GraphRegimeExceeded { .. }) => last_err = Some(e),
                    Err(e) => return Err(e),
                }
                if alpha <= self.opts.damping_floor {
                    break None;
                }
                alpha *= 0.5;
            };
            match accepted {
                Some((nu, nh)) => {
                    self.damping.push(alpha);
                    u = nu;
                    h = nh;
                }
                None => {
                    if let Some(e) = last_err {
                        return Err(e);
                    }
                    log::debug!("Newton stalled at residual {:e}; falling back to flow", sup(&h));
                    return Ok((u, h, false));
                }
            }
        }
        let done = sup(&h) <= self.opts.residual_tol;
        Ok((u, h, done))
    }

    fn flow(&mut self, mut u: Vec<f64>, steps: usize) -> Result<Vec<f64>> {
        let hmin = self.kernel.base_grid().min_spacing();
        for _ in 0..steps {
            if self.flow >= self.opts.max_flow {
                break;
            }
            let bound = flow_step_bound(&self.kernel, &u)?;
            let dt = match self.opts.flow_dt {
                Some(dt) => dt.min(bound),
                None => (0.2 * hmin * hmin).min(0.9 * bound),
            };
            u = flow_update(&self.kernel, &u, dt)?;
            self.flow += 1;
        }
        Ok(u)
    }

    /// Newton, alternating with flow episodes whenever Newton stalls.
    fn run(&mut self, u0: Vec<f64>) -> Result<(Vec<f64>, Vec<f64>, bool)> {
        let mut u = u0;
        loop {
            let (un, h, ok) = self.newton(u)?;
            if ok {
                return Ok((un, h, true));
            }
            let budget_left = self.newton < self.opts.max_newton && self.flow < self.opts.max_flow;
            if !budget_left {
                return Ok((un, h, false));
            }
            u = self.flow(un, self.opts.flow_chunk)?;
        }
    }
}

/// Solve for a free-boundary minimal graph starting from `init`.
///
/// Unlike [`solve_minimal_graph`], running out of budget is not an error
/// here: the last iterate comes back with `converged == false`.
pub fn solve_minimal_graph_partial(
    ambient: &AmbientManifold,
    init: &GraphHypersurface,
    opts: &SolverOptions,
) -> Result<(GraphHypersurface, SolveDiagnostics)> {
    opts.validate()?;
    check_ends(ambient)?;
    let kernel = GraphKernel::new(init, ambient)?;
    let initial_volume = kernel.volume(init.heights())?;
    let mut session = Session { kernel, opts, newton: 0, flow: 0, damping: Vec::new() };
    let (mut u, mut h, mut ok) = session.run(init.heights().to_vec())?;
    if ok && session.kernel.volume(&u)? > initial_volume + 1e-10 {
        // Newton found a critical point above the start; descend first
        log::info!("Newton reached a higher-volume critical point; retrying from a flowed start");
        let flowed = session.flow(init.heights().to_vec(), opts.flow_chunk.max(2000))?;
        let (u2, h2, ok2) = session.run(flowed)?;
        if session.kernel.volume(&u2)? <= session.kernel.volume(&u)? {
            (u, h, ok) = (u2, h2, ok2);
        }
    }
    let graph = init.with_heights(u)?;
    let geo = session.kernel.geometry(graph.heights())?;
    let diag = SolveDiagnostics {
        newton_iterations: session.newton,
        flow_steps: session.flow,
        final_residual: sup(&h),
        damping_history: session.damping,
        sup_grad_u: geo.sup_gradient,
        sup_a: geo.sff_norm2.values().iter().fold(0.0, |m: f64, v| m.max(v.sqrt())),
        converged: ok,
        volume: geo.volume(),
        initial_volume,
    };
    Ok((graph, diag))
}

/// [`solve_minimal_graph_partial`] with budget exhaustion reported as
/// `NonConvergence`.
pub fn solve_minimal_graph(
    ambient: &AmbientManifold,
    init: &GraphHypersurface,
    opts: &SolverOptions,
) -> Result<(GraphHypersurface, SolveDiagnostics)> {
    let (g, d) = solve_minimal_graph_partial(ambient, init, opts)?;
    if !d.converged {
        return Err(Error::NonConvergence { iterations: d.newton_iterations + d.flow_steps, residual: d.final_residual });
    }
    Ok((g, d))
}

/// A smooth random height: `centre` plus a few low modes compatible with
/// the reflected free-boundary closure, scaled to sup-amplitude `amplitude`.
pub fn random_init(
    ambient: &AmbientManifold,
    graph_axis: usize,
    centre: f64,
    amplitude: f64,
    seed: u64,
) -> Result<GraphHypersurface> {
    let base = ambient.grid().without_axis(graph_axis)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nd = base.ndim();
    let modes: Vec<(Vec<usize>, f64, Vec<f64>)> = (0..6)
        .map(|_| {
            let k: Vec<usize> = (0..nd).map(|_| rng.random_range(0..3usize)).collect();
            let phase: Vec<f64> = (0..nd).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
            (k, rng.random::<f64>() * 2.0 - 1.0, phase)
        })
        .collect();
    let ext = base.extents().to_vec();
    let per = base.periodic().to_vec();
    let wave = move |y: &[f64]| -> f64 {
        modes
            .iter()
            .map(|(k, c, ph)| {
                let mut v = *c;
                for a in 0..y.len() {
                    let x = y[a] / ext[a];
                    v *= if per[a] {
                        (std::f64::consts::TAU * k[a] as f64 * x + ph[a]).cos()
                    } else {
                        // cosines in t have ∂_t = 0 at both ends
                        (std::f64::consts::PI * k[a] as f64 * x).cos()
                    };
                }
                v
            })
            .sum()
    };
    let raw = crate::field::Field::scalar_from_fn(&base, &wave);
    let peak = sup(raw.values()).max(1e-300);
    let vals = raw.values().iter().map(|v| centre + amplitude * v / peak).collect();
    GraphHypersurface::new(crate::field::Field::scalar(&base, vals)?, graph_axis, 1)
}

/// Midpoint of the graph-axis extent: the default initial height.
pub fn default_height(ambient: &AmbientManifold, graph_axis: usize) -> f64 {
    0.5 * ambient.grid().extents()[graph_axis]
}

#[derive(Clone, Debug)]
pub struct MultistartResult {
    pub graph: GraphHypersurface,
    pub diagnostics: SolveDiagnostics,
    pub seed: u64,
    /// `(seed, volume, converged)` of every start, in seed order.
    pub runs: Vec<(u64, f64, bool)>,
    /// Whether converged starts disagreed by more than `10·residual_tol`.
    pub multiple_minimizers: bool,
}

/// Solve from several random starts in parallel and keep the least-volume
/// converged solution (ties go to the lowest seed).
pub fn multistart(
    ambient: &AmbientManifold,
    template: &GraphHypersurface,
    amplitude: f64,
    seeds: &[u64],
    opts: &SolverOptions,
) -> Result<MultistartResult> {
    let centre = default_height(ambient, template.graph_axis());
    let runs = par::map_slice(seeds, |&seed| -> Result<(GraphHypersurface, SolveDiagnostics)> {
        let init = random_init(ambient, template.graph_axis(), centre, amplitude, seed)?;
        let init = template.with_heights(init.heights().to_vec())?;
        let mut o = opts.clone();
        o.seed = seed;
        solve_minimal_graph_partial(ambient, &init, &o)
    });
    let mut best: Option<(usize, f64)> = None;
    let mut table = Vec::with_capacity(seeds.len());
    let mut solved = Vec::with_capacity(seeds.len());
    for (i, r) in runs.into_iter().enumerate() {
        let (g, d) = r?;
        table.push((seeds[i], d.volume, d.converged));
        if d.converged {
            let better = match best {
                None => true,
                Some((j, v)) => d.volume < v - 1e-12 || (d.volume <= v + 1e-12 && seeds[i] < seeds[j]),
            };
            if better {
                best = Some((i, d.volume));
            }
        }
        solved.push((g, d));
    }
    let (bi, _) = best.ok_or(Error::NonConvergence {
        iterations: opts.max_newton,
        residual: solved.iter().map(|s| s.1.final_residual).fold(f64::INFINITY, f64::min),
    })?;
    let spread = solved
        .iter()
        .filter(|s| s.1.converged)
        .map(|s| s.0.heights().iter().zip(solved[bi].0.heights()).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs())))
        .fold(0.0, f64::max);
    let (graph, diagnostics) = solved.swap_remove(bi);
    Ok(MultistartResult {
        graph,
        diagnostics,
        seed: seeds[bi],
        runs: table,
        multiple_minimizers: spread > 10.0 * opts.residual_tol,
    })
}

/// Least-volume constant slice `x^γ = c`, by a scan over `samples` heights
/// then golden-section refinement. Returns `(c, volume)`.
pub fn best_constant_slice(ambient: &AmbientManifold, graph_axis: usize, samples: usize) -> Result<(f64, f64)> {
    let template = GraphHypersurface::constant(ambient, graph_axis, 0.0)?;
    let kernel = GraphKernel::new(&template, ambient)?;
    let n = template.base_grid().len();
    let vol = |c: f64| kernel.volume(&vec![c; n]);
    let period = ambient.grid().extents()[graph_axis];
    let samples = samples.max(8);
    let step = period / samples as f64;
    let scan: Vec<Result<f64>> = par::map_indices(samples, |k| vol(k as f64 * step));
    let scan: Vec<f64> = scan.into_iter().collect::<Result<_>>()?;
    let k0 = (0..samples).min_by(|&a, &b| scan[a].partial_cmp(&scan[b]).unwrap()).unwrap();
    let (mut a, mut b) = ((k0 as f64 - 1.0) * step, (k0 as f64 + 1.0) * step);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - r * (b - a), a + r * (b - a));
    let (mut f1, mut f2) = (vol(x1)?, vol(x2)?);
    while b - a > 1e-10 * period.max(1.0) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = vol(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = vol(x2)?;
        }
    }
    let c = (0.5 * (a + b)).rem_euclid(period);
    Ok((c, vol(c)?))
}
