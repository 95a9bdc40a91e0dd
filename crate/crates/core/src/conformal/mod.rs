//! The conformal Laplacian `L = −Δ + c_n R` with the minimal-boundary
//! condition `B = ∂_ν + 2c_n H`, its principal eigenpair, conformal descent
//! to `h̃ = φ^{4/(n−2)} h`, and a sign certificate sampled over the
//! conformal class.
//!
//! The operator is assembled from the same edge/face Dirichlet stiffness and
//! lumped mass as the stability form. The Robin condition is the natural
//! boundary condition of the weak form: boundary rows pick up `2c_n H σ`
//! and nothing else, which is what eliminating the reflected ghost node of
//! a second-order flux stencil produces.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Grid};
use crate::linalg::{
    dense_eigenvalues, dirichlet_stiffness, lowest_eigenpairs, lumped_mass, nested_dissection, CscMatrix, EigenOptions,
};
use crate::metric::{
    boundary_geometry_with, christoffel_with, conformal_constant, conformal_rescale, curvature_mirrored, product_mirror,
    End, MetricField,
};
use crate::stability::{gradient_coefficients, BoundaryTerm};

#[cfg(test)]
mod tests;

/// Discrete `(L, B)` on a chart: a closed torus or a slab.
#[derive(Clone, Debug)]
pub struct ConformalOperator {
    grid: Arc<Grid>,
    metric: MetricField,
    n: usize,
    c_n: f64,
    mirror: Option<usize>,
    synthetic: bool,
    pub stiffness: CscMatrix,
    /// `R` per node (metric curvature, or the injected field in synthetic mode).
    pub scalar_curvature: Vec<f64>,
    /// Boundary nodes with measure `σ` and weight `H` (outward mean curvature).
    pub boundary: Vec<BoundaryTerm>,
    /// `√det h` per node.
    pub mass_density: Vec<f64>,
    pub mass: Vec<f64>,
}

/// [`ConformalOperator::assemble`].
pub fn assemble_operator(metric: &MetricField, n: usize) -> Result<ConformalOperator> {
    ConformalOperator::assemble(metric, n)
}

impl ConformalOperator {
    /// Assemble for an `n`-dimensional metric. A slab metric that is a
    /// product at both ends is differenced with even reflection there.
    pub fn assemble(metric: &MetricField, n: usize) -> Result<ConformalOperator> {
        Self::assemble_mirrored(metric, n, product_mirror(metric))
    }

    /// Assemble with an explicit reflection axis (for metrics known to be
    /// even across both ends of that axis, such as the induced metric of a
    /// Neumann graph over a product collar).
    pub fn assemble_mirrored(metric: &MetricField, n: usize, mirror: Option<usize>) -> Result<ConformalOperator> {
        if n < 3 {
            return Err(Error::UnsupportedDimension(n));
        }
        if n != metric.dim() {
            return Err(Error::DimensionMismatch(format!("n = {n} for a metric of dimension {}", metric.dim())));
        }
        let grid = metric.grid_arc();
        if let Some(a) = mirror {
            grid.check_axis(a)?;
            if grid.periodic()[a] {
                return Err(Error::DimensionMismatch(format!("reflection axis {a} is periodic")));
            }
        }
        let rho = metric.volume_density().into_values();
        if let Some((node, _)) = rho.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
            return Err(Error::SingularMetric { node });
        }
        let coef = gradient_coefficients(metric.values(), &rho, n)?;
        let stiffness = dirichlet_stiffness(&grid, &coef);
        let gam = christoffel_with(metric, mirror);
        let mut boundary = Vec::new();
        for a in grid.bounded_axes() {
            let slice_grid = grid.without_axis(a)?;
            for end in [End::Y0, End::Y1] {
                let row = if end == End::Y0 { 0 } else { grid.dims()[a] - 1 };
                let bg = boundary_geometry_with(metric, &gam, a, end)?;
                let sigma = bg.metric.volume_density();
                for (k, node) in grid.slice_nodes(a, row).into_iter().enumerate() {
                    boundary.push(BoundaryTerm {
                        node,
                        measure: slice_grid.node_weight(k) * sigma.values()[k],
                        weight: bg.mean_curvature.values()[k],
                    });
                }
            }
        }
        let scalar_curvature = curvature_mirrored(metric, mirror).scalar.into_values();
        Ok(ConformalOperator {
            mass: lumped_mass(&grid, &rho),
            mass_density: rho,
            grid,
            metric: metric.clone(),
            n,
            c_n: conformal_constant(n),
            mirror,
            synthetic: false,
            stiffness,
            scalar_curvature,
            boundary,
        })
    }

    /// Synthetic mode: replace `R` by a user-supplied field, decoupled from
    /// the metric. Only meant to exercise positive-eigenvalue code paths,
    /// since a single-chart torus carries no positive scalar curvature.
    pub fn with_scalar_curvature(mut self, r: &Field) -> Result<ConformalOperator> {
        if r.rank() != 0 || !r.grid().compatible(&self.grid) {
            return Err(Error::IncompatibleGrids("scalar curvature must be a scalar on the metric grid".into()));
        }
        self.scalar_curvature = r.values().to_vec();
        self.synthetic = true;
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn grid_arc(&self) -> Arc<Grid> {
        self.grid.clone()
    }
    pub fn metric(&self) -> &MetricField {
        &self.metric
    }
    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn c_n(&self) -> f64 {
        self.c_n
    }
    pub fn mirror(&self) -> Option<usize> {
        self.mirror
    }
    pub fn is_synthetic(&self) -> bool {
        self.synthetic
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d: Vec<f64> =
            self.mass.iter().zip(&self.scalar_curvature).map(|(m, r)| self.c_n * r * m).collect();
        for b in &self.boundary {
            d[b.node] += 2.0 * self.c_n * b.weight * b.measure;
        }
        d
    }

    /// The assembled symmetric matrix of `∫|∇φ|² + c_n Rφ² + 2c_n ∮Hφ²`.
    pub fn matrix(&self) -> CscMatrix {
        self.stiffness.add_diagonal(&self.diagonal())
    }

    /// The energy evaluated term by term (gradient, potential, boundary).
    pub fn energy(&self, phi: &[f64]) -> f64 {
        let mut e = self.stiffness.bilinear(phi, phi);
        for p in 0..phi.len() {
            e += self.c_n * self.scalar_curvature[p] * self.mass[p] * phi[p] * phi[p];
        }
        for b in &self.boundary {
            e += 2.0 * self.c_n * b.weight * b.measure * phi[b.node] * phi[b.node];
        }
        e
    }

    pub fn mass_norm2(&self, phi: &[f64]) -> f64 {
        phi.iter().zip(&self.mass).map(|(v, m)| m * v * v).sum()
    }

    /// `(Aφ − λMφ)` split into the sup of its interior rows per unit mass and
    /// the sup of its boundary rows per unit boundary measure.
    fn residuals(&self, phi: &[f64], lambda: f64) -> (f64, f64) {
        let r = self.matrix().matvec(phi);
        let mut on_boundary = vec![0.0; phi.len()];
        for b in &self.boundary {
            on_boundary[b.node] += b.measure;
        }
        let (mut interior, mut boundary) = (0.0f64, 0.0f64);
        for p in 0..phi.len() {
            let rp = r[p] - lambda * self.mass[p] * phi[p];
            if on_boundary[p] > 0.0 {
                boundary = boundary.max(rp.abs() / on_boundary[p]);
            } else {
                interior = interior.max(rp.abs() / self.mass[p]);
            }
        }
        (interior, boundary)
    }
}

/// `(∫|∇φ|² + c_n Rφ² + 2c_n ∮Hφ²) / ∫φ²`.
pub fn rayleigh_quotient(op: &ConformalOperator, phi: &[f64]) -> Result<f64> {
    if phi.len() != op.grid.len() {
        return Err(Error::IncompatibleGrids(format!("{} values for {} nodes", phi.len(), op.grid.len())));
    }
    let den = op.mass_norm2(phi);
    if !(den > 0.0) {
        return Err(Error::ZeroFunction);
    }
    Ok(op.energy(phi) / den)
}

/// Principal eigenpair of `(L, B)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenSolution {
    pub lambda1: f64,
    /// Positive ground state with `sup φ = 1`.
    #[serde(skip)]
    pub phi: Option<Field>,
    pub min_phi: f64,
    /// `sup|Lφ − λ₁φ|` over interior nodes.
    pub residual: f64,
    /// `sup|Bφ|` over boundary nodes (flux defect per unit boundary measure).
    pub boundary_residual: f64,
    pub iterations: usize,
}

impl EigenSolution {
    pub fn phi(&self) -> &Field {
        self.phi.as_ref().expect("eigenfield is only absent after deserialization")
    }
}

/// Lowest eigenpair by shifted inverse iteration. The converged iterate is
/// replaced by its modulus, pushed through one more inverse iteration at the
/// final shift (below `λ₁`, so it amplifies the ground state), checked for
/// strict positivity, and sup-normalized.
pub fn principal_eigenpair(op: &ConformalOperator, opts: &EigenOptions) -> Result<EigenSolution> {
    let a = op.matrix();
    let order = nested_dissection(&op.grid);
    let pairs = lowest_eigenpairs(&a, &op.mass, 1, Some(&order), opts)?;
    let theta = pairs.values[0];

    let factor = &pairs.factor;
    let mut y: Vec<f64> = pairs.vectors[0].iter().zip(&op.mass).map(|(v, m)| m * v.abs()).collect();
    factor.solve_block(&mut y, 1);

    let (min, max) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(min > 0.0) {
        return Err(Error::SignIndefiniteEigenfunction { min, max });
    }
    y.iter_mut().for_each(|v| *v /= max);
    let lambda1 = rayleigh_quotient(op, &y)?;
    let tol = opts.tol.max(1e-12) * lambda1.abs().max(1.0);
    if (lambda1 - theta).abs() > tol.max(1e-10) {
        return Err(Error::EigenNonConvergence(format!(
            "Rayleigh quotient {lambda1} of the ground state disagrees with the Ritz value {theta}"
        )));
    }
    let (residual, boundary_residual) = op.residuals(&y, lambda1);
    Ok(EigenSolution {
        lambda1,
        min_phi: min / max,
        phi: Some(Field::scalar_on(op.grid_arc(), y)?),
        residual,
        boundary_residual,
        iterations: pairs.iterations,
    })
}

/// Every eigenvalue of `(L, B)` by a dense solve (small grids only).
pub fn dense_conformal_spectrum(op: &ConformalOperator) -> Result<Vec<f64>> {
    dense_eigenvalues(&op.matrix(), &op.mass)
}

/// Tolerances for [`conformal_descent`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DescentOptions {
    /// On `sup|R_h̃ φ^{4/(n−2)} − λ₁/c_n|`.
    pub identity_tol: f64,
    /// On `sup|H_h̃|` over the boundary.
    pub boundary_tol: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions { identity_tol: 1e-3, boundary_tol: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentReport {
    pub lambda1: f64,
    /// `λ₁ / c_n`, the value `R_h̃ φ^{4/(n−2)}` must take.
    pub target: f64,
    /// Transformation-law residual, computed from the discrete `Lφ`.
    pub identity_residual: f64,
    /// `sup|H_h̃|` from the transformation law and the discrete `Bφ`.
    pub boundary_identity: f64,
    /// Same quantity recomputed from the curvature of `h̃` itself (absent in
    /// synthetic mode, where `R` belongs to no metric).
    pub curvature_residual: Option<f64>,
    /// `sup|H_h̃|` from the boundary geometry of `h̃` itself.
    pub boundary_mean_curvature: Option<f64>,
    /// `sign R_h̃ = sign λ₁` at every node of the recomputed curvature.
    pub sign_agrees: Option<bool>,
    pub verified: bool,
}

/// `h̃ = φ^{4/(n−2)} h` for the ground state `φ`. The report checks
/// `R_h̃ = c_n⁻¹ λ₁ φ^{−4/(n−2)}` and `H_h̃ = 0` through the transformation
/// law (`R_h̃ = c_n⁻¹ φ^{−(n+2)/(n−2)} Lφ`, `H_h̃ = (2c_n)⁻¹ φ^{−n/(n−2)} Bφ`)
/// and again directly from the curvature of `h̃`.
pub fn conformal_descent(
    op: &ConformalOperator,
    sol: &EigenSolution,
    opts: &DescentOptions,
) -> Result<(MetricField, DescentReport)> {
    let phi = sol.phi().values();
    if phi.len() != op.grid.len() {
        return Err(Error::IncompatibleGrids("eigenfield does not live on the operator grid".into()));
    }
    let n = op.n as f64;
    let c = op.c_n;
    let lambda = sol.lambda1;
    let target = lambda / c;
    let descended = conformal_rescale(&op.metric, sol.phi(), op.n)?;

    // transformation law with the discrete operator
    let lphi = op.matrix().matvec(phi);
    let mut sigma = vec![0.0; phi.len()];
    for b in &op.boundary {
        sigma[b.node] += b.measure;
    }
    let mut identity_residual = 0.0f64;
    let mut boundary_identity = 0.0f64;
    for p in 0..phi.len() {
        let r = lphi[p] - lambda * op.mass[p] * phi[p];
        if sigma[p] > 0.0 {
            let bphi = r / sigma[p];
            boundary_identity = boundary_identity.max((bphi * phi[p].powf(-n / (n - 2.0)) / (2.0 * c)).abs());
        } else {
            identity_residual = identity_residual.max((lphi[p] / (op.mass[p] * phi[p] * c) - target).abs());
        }
    }

    let (mut curvature_residual, mut sign_agrees, mut boundary_mean_curvature) = (None, None, None);
    let expo = 4.0 / (n - 2.0);
    if !op.synthetic {
        let rt = curvature_mirrored(&descended, op.mirror).scalar;
        let mut worst = 0.0f64;
        let mut agrees = true;
        for (p, r) in rt.values().iter().enumerate() {
            worst = worst.max((r * phi[p].powf(expo) - target).abs());
            if lambda != 0.0 && r.signum() != lambda.signum() {
                agrees = false;
            }
        }
        curvature_residual = Some(worst);
        sign_agrees = Some(agrees);
    }
    if !op.boundary.is_empty() {
        let gam = christoffel_with(&descended, op.mirror);
        let mut worst = 0.0f64;
        for a in op.grid.bounded_axes() {
            for end in [End::Y0, End::Y1] {
                worst = worst.max(boundary_geometry_with(&descended, &gam, a, end)?.mean_curvature.sup_norm());
            }
        }
        boundary_mean_curvature = Some(worst);
    }
    let verified = identity_residual <= opts.identity_tol && boundary_identity <= opts.boundary_tol;
    let report = DescentReport {
        lambda1: lambda,
        target,
        identity_residual,
        boundary_identity,
        curvature_residual,
        boundary_mean_curvature,
        sign_agrees,
        verified,
    };
    if !verified {
        return Err(Error::VerificationFailed(format!(
            "descent identity residual {identity_residual:e} (tol {:e}), boundary mean curvature {boundary_identity:e} (tol {:e})",
            opts.identity_tol, opts.boundary_tol
        )));
    }
    Ok((descended, report))
}

/// Sign class of a principal eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Zero,
    Negative,
}

impl Sign {
    /// Zero when `|λ| ≤ zero_tol + 3·error`, where `error` estimates the
    /// discretization error of `λ`.
    pub fn classify(lambda: f64, error: f64, zero_tol: f64) -> Sign {
        if lambda.abs() <= zero_tol + 3.0 * error {
            Sign::Zero
        } else if lambda > 0.0 {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }
}

/// Options for [`positivity_certificate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertificateOptions {
    pub trials: usize,
    pub seed: u64,
    /// Amplitude of `log w` for the random conformal factors.
    pub amplitude: f64,
    /// `|λ₁|` below this (plus three times the error estimate) is zero.
    pub zero_tol: f64,
    /// Estimate each eigenvalue's discretization error from a second solve
    /// on the grid of every other node.
    pub error_estimate: bool,
    pub eigen: EigenOptions,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        CertificateOptions {
            trials: 20,
            seed: 0,
            amplitude: 0.3,
            zero_tol: 1e-6,
            error_estimate: true,
            eigen: EigenOptions::default(),
        }
    }
}

/// One principal eigenvalue with its estimated discretization error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedEigenvalue {
    pub lambda1: f64,
    /// `|λ_h − λ_{2h}| / 3` (0 when no coarse grid exists or estimates are off).
    pub error: f64,
    pub sign: Sign,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub base: SignedEigenvalue,
    pub trials: Vec<SignedEigenvalue>,
    pub certificate: Sign,
}

/// Smooth positive factor `w = exp(a·f)` with `f` a sum of a few random
/// low modes, in `[−1, 1]`. Bounded axes use `cos(πk t/T)` so `w` is even
/// across both ends.
pub fn random_conformal_factor(grid: &Grid, amplitude: f64, rng: &mut ChaCha8Rng) -> Field {
    let nd = grid.ndim();
    let modes: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..4)
        .map(|_| {
            let k: Vec<f64> = (0..nd).map(|_| rng.random_range(0..3) as f64).collect();
            let ph: Vec<f64> = (0..nd).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
            (k, ph, rng.random::<f64>() - 0.5)
        })
        .collect();
    let total: f64 = modes.iter().map(|m| m.2.abs()).sum::<f64>().max(1e-300);
    let (ext, per) = (grid.extents().to_vec(), grid.periodic().to_vec());
    Field::scalar_from_fn(grid, move |x| {
        let f: f64 = modes
            .iter()
            .map(|(k, ph, c)| {
                let mut v = *c;
                for a in 0..nd {
                    let s = x[a] / ext[a];
                    v *= if per[a] {
                        (std::f64::consts::TAU * k[a] * s + ph[a]).cos()
                    } else {
                        (std::f64::consts::PI * k[a] * s).cos()
                    };
                }
                v
            })
            .sum();
        (amplitude * f / total).exp()
    })
}

/// The operator of `w^{4/(n−2)} h`. In synthetic mode the injected `R`
/// follows the transformation law `R_w = w^{−(n+2)/(n−2)} c_n⁻¹ L w`
/// (with the interior operator of `h`).
fn rescaled_operator(op: &ConformalOperator, w: &Field) -> Result<ConformalOperator> {
    let metric = conformal_rescale(&op.metric, w, op.n)?;
    let rescaled = ConformalOperator::assemble_mirrored(&metric, op.n, op.mirror)?;
    if !op.synthetic {
        return Ok(rescaled);
    }
    let wv = w.values();
    let kw = op.stiffness.matvec(wv);
    let e = (op.n as f64 + 2.0) / (op.n as f64 - 2.0);
    let r: Vec<f64> = (0..wv.len())
        .map(|p| {
            let lw = kw[p] / op.mass[p] + op.c_n * op.scalar_curvature[p] * wv[p];
            wv[p].powf(-e) * lw / op.c_n
        })
        .collect();
    rescaled.with_scalar_curvature(&Field::scalar_on(op.grid_arc(), r)?)
}

/// Every other node of `grid`, when the result is again a grid with the
/// same extents: even counts on periodic axes, odd counts on bounded ones.
fn coarse_nodes(grid: &Grid) -> Option<(Grid, Vec<usize>)> {
    let mut dims = Vec::with_capacity(grid.ndim());
    for a in 0..grid.ndim() {
        let n = grid.dims()[a];
        let m = if grid.periodic()[a] {
            (n % 2 == 0 && n >= 8).then_some(n / 2)?
        } else {
            (n % 2 == 1 && n >= 5).then_some(n.div_ceil(2))?
        };
        dims.push(m);
    }
    let coarse = Grid::new(&dims, grid.extents(), grid.periodic()).ok()?;
    let nodes = (0..coarse.len())
        .map(|q| grid.index(&coarse.multi_index(q).iter().map(|i| 2 * i).collect::<Vec<_>>()))
        .collect();
    Some((coarse, nodes))
}

impl ConformalOperator {
    /// The same problem sampled on every other node, if that grid exists.
    pub fn coarsened(&self) -> Option<Result<ConformalOperator>> {
        let (coarse, nodes) = coarse_nodes(&self.grid)?;
        let nc = self.n * self.n;
        let vals: Vec<f64> =
            nodes.iter().flat_map(|&p| self.metric.values()[p * nc..(p + 1) * nc].iter().copied()).collect();
        Some((|| {
            let metric = MetricField::from_values(Arc::new(coarse), vals)?;
            let op = ConformalOperator::assemble_mirrored(&metric, self.n, self.mirror)?;
            if !self.synthetic {
                return Ok(op);
            }
            let r: Vec<f64> = nodes.iter().map(|&p| self.scalar_curvature[p]).collect();
            let r = Field::scalar_on(op.grid_arc(), r)?;
            op.with_scalar_curvature(&r)
        })())
    }
}

/// `λ₁` of `op` with its sign class and (optionally) its error estimate.
pub fn signed_eigenvalue(op: &ConformalOperator, opts: &CertificateOptions) -> Result<SignedEigenvalue> {
    let lambda1 = principal_eigenpair(op, &opts.eigen)?.lambda1;
    let error = match op.coarsened().filter(|_| opts.error_estimate) {
        Some(coarse) => (lambda1 - principal_eigenpair(&coarse?, &opts.eigen)?.lambda1).abs() / 3.0,
        None => 0.0,
    };
    Ok(SignedEigenvalue { lambda1, error, sign: Sign::classify(lambda1, error, opts.zero_tol) })
}

/// Sign of `λ₁` for the operator and for `trials` random conformal
/// rescalings of its metric. The class-level sign is reported only when all
/// trials agree; disagreement means the grid is too coarse to tell.
pub fn positivity_certificate(op: &ConformalOperator, opts: &CertificateOptions) -> Result<CertificateReport> {
    let base = signed_eigenvalue(op, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let factors: Vec<Field> =
        (0..opts.trials).map(|_| random_conformal_factor(&op.grid, opts.amplitude, &mut rng)).collect();
    let trials = crate::par::map_slice(&factors, |w| rescaled_operator(op, w).and_then(|o| signed_eigenvalue(&o, opts)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    if let Some((i, t)) = trials.iter().enumerate().find(|(_, t)| t.sign != base.sign) {
        return Err(Error::SignDisagreement(format!(
            "base lambda_1 = {:e} (error {:e}) is {:?} but trial {i} gives {:e} (error {:e}, {:?})",
            base.lambda1, base.error, base.sign, t.lambda1, t.error, t.sign
        )));
    }
    Ok(CertificateReport { certificate: base.sign, base, trials })
}
