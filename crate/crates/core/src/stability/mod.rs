//! Second variation of volume for free-boundary minimal graphs, its
//! spectrum, the Gauss–Codazzi rewrite, and the doubling decomposition.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Closure, Field, Grid};
use crate::hypersurface::{double_graph, induced_geometry, GraphHypersurface, InducedGeometry};
use crate::linalg::small::{spd_inverse, MAX_DIM};
use crate::linalg::{
    dense_eigenvalues, dirichlet_stiffness, lowest_eigenpairs, lumped_mass, nested_dissection, CscMatrix, EigenOptions,
};
use crate::metric::{
    boundary_geometry, boundary_geometry_with, christoffel_with, conformal_constant, curvature_mirrored, AmbientManifold, End,
};

/// Minimality required before a second-variation form is assembled.
pub const MINIMALITY_TOL: f64 = 1e-6;

/// Threshold below which the lowest eigenvalue counts as unstable.
pub const STABILITY_TOL: f64 = -1e-8;

/// One boundary node of `∂W` with its quadrature measure.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTerm {
    pub node: usize,
    pub measure: f64,
    /// `−A^∂M(ν, ν)`.
    pub weight: f64,
}

/// `q(φ,ψ) = ∫⟨∇φ,∇ψ⟩ − ∫φψ(Ric(ν,ν)+|A|²) − ∫_∂W φψ A^∂M(ν,ν)`.
#[derive(Clone, Debug)]
pub struct QuadraticForm {
    grid: Arc<Grid>,
    pub stiffness: CscMatrix,
    /// `Ric(ν,ν) + |A|²` per node.
    pub potential: Vec<f64>,
    pub boundary: Vec<BoundaryTerm>,
    /// `√det h` per node.
    pub mass_density: Vec<f64>,
    /// Lumped mass (quadrature weight × density).
    pub mass: Vec<f64>,
}

/// Per-node `ρ h^{ab}` blocks from an induced metric and its density.
pub(crate) fn gradient_coefficients(metric: &[f64], density: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; metric.len()];
    let mut inv = [0.0; MAX_DIM * MAX_DIM];
    for (p, rho) in density.iter().enumerate() {
        spd_inverse(&metric[p * n * n..(p + 1) * n * n], n, &mut inv).ok_or(Error::SingularMetric { node: p })?;
        for k in 0..n * n {
            out[p * n * n + k] = rho * inv[k];
        }
    }
    Ok(out)
}

impl QuadraticForm {
    /// Assemble from already computed geometry (no minimality check).
    pub fn from_geometry(geo: &InducedGeometry) -> Result<QuadraticForm> {
        let grid = geo.volume_density.grid_arc();
        let n = grid.ndim();
        let rho = geo.volume_density.values();
        let coef = gradient_coefficients(geo.induced_metric.values(), rho, n)?;
        let stiffness = dirichlet_stiffness(&grid, &coef);
        let potential = geo.normal_ricci.values().iter().zip(geo.sff_norm2.values()).map(|(r, a)| r + a).collect();
        let mut boundary = Vec::new();
        for bd in &geo.boundary {
            for (k, &node) in bd.nodes.iter().enumerate() {
                boundary.push(BoundaryTerm { node, measure: bd.measure[k], weight: -bd.ambient_sff_nn[k] });
            }
        }
        Ok(QuadraticForm {
            mass: lumped_mass(&grid, rho),
            mass_density: rho.to_vec(),
            grid,
            stiffness,
            potential,
            boundary,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn grid_arc(&self) -> Arc<Grid> {
        self.grid.clone()
    }

    /// The Jacobi operator as a symmetric matrix: `K − M·V + B`.
    pub fn operator(&self) -> CscMatrix {
        let mut d: Vec<f64> = self.mass.iter().zip(&self.potential).map(|(m, v)| -m * v).collect();
        for b in &self.boundary {
            d[b.node] += b.measure * b.weight;
        }
        self.stiffness.add_diagonal(&d)
    }

    pub fn dirichlet(&self, phi: &[f64]) -> f64 {
        self.stiffness.bilinear(phi, phi)
    }

    /// `q(φ, ψ)`.
    pub fn bilinear(&self, phi: &[f64], psi: &[f64]) -> f64 {
        let mut v = self.stiffness.bilinear(phi, psi);
        for p in 0..phi.len() {
            v -= self.mass[p] * self.potential[p] * phi[p] * psi[p];
        }
        for b in &self.boundary {
            v += b.measure * b.weight * phi[b.node] * psi[b.node];
        }
        v
    }

    pub fn eval(&self, phi: &[f64]) -> f64 {
        self.bilinear(phi, phi)
    }

    /// `∫ φ² dμ`.
    pub fn mass_norm2(&self, phi: &[f64]) -> f64 {
        phi.iter().zip(&self.mass).map(|(f, m)| m * f * f).sum()
    }
}

/// The second-variation form of a free-boundary minimal graph.
pub fn second_variation_form(graph: &GraphHypersurface, ambient: &AmbientManifold) -> Result<QuadraticForm> {
    let geo = induced_geometry(graph, ambient)?;
    let h = geo.mean_curvature.sup_norm();
    if h > MINIMALITY_TOL {
        return Err(Error::NotMinimal(h));
    }
    QuadraticForm::from_geometry(&geo)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilitySpectrum {
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenfields: Vec<Field>,
    pub residuals: Vec<f64>,
    pub is_stable: bool,
    pub iterations: usize,
}

/// The `k` lowest eigenvalues of the Jacobi operator against the lumped mass.
pub fn stability_spectrum(form: &QuadraticForm, k: usize, opts: &EigenOptions) -> Result<StabilitySpectrum> {
    let op = form.operator();
    let order = nested_dissection(form.grid());
    let pairs = lowest_eigenpairs(&op, &form.mass, k, Some(&order), opts)?;
    let eigenfields =
        pairs.vectors.into_iter().map(|v| Field::scalar_on(form.grid_arc(), v)).collect::<Result<Vec<_>>>()?;
    Ok(StabilitySpectrum {
        is_stable: pairs.values[0] >= STABILITY_TOL,
        eigenvalues: pairs.values,
        eigenfields,
        residuals: pairs.residuals,
        iterations: pairs.iterations,
    })
}

/// Every eigenvalue of the form by a dense solve (small grids only).
pub fn dense_stability_spectrum(form: &QuadraticForm) -> Result<Vec<f64>> {
    dense_eigenvalues(&form.operator(), &form.mass)
}

/// Nodes away from the ends of bounded axes, where one-sided stencils are
/// not used.
fn interior_nodes(grid: &Grid) -> Vec<usize> {
    let bounded = grid.bounded_axes();
    (0..grid.len())
        .filter(|&p| {
            bounded.iter().all(|&a| {
                let i = grid.coord_index(p, a);
                i > 0 && i + 1 < grid.dims()[a]
            })
        })
        .collect()
}

/// Pointwise traced Gauss defect `R^M − R^W − 2Ric(ν,ν) − |A|² + H²`
/// (synthetic curvature offsets excluded: they belong to no metric).
pub fn gauss_codazzi_defect(graph: &GraphHypersurface, ambient: &AmbientManifold) -> Result<Field> {
    let geo = induced_geometry(graph, ambient)?;
    let rw = curvature_mirrored(&geo.induced_metric, intrinsic_mirror(graph, ambient)).scalar;
    let syn = ambient.synthetic();
    let vals = (0..rw.values().len())
        .map(|p| {
            let h = geo.mean_curvature.values()[p];
            (geo.ambient_scalar.values()[p] - syn.scalar_offset)
                - rw.values()[p]
                - 2.0 * (geo.normal_ricci.values()[p] - syn.ricci_offset)
                - geo.sff_norm2.values()[p]
                + h * h
        })
        .collect();
    Field::scalar_on(geo.volume_density.grid_arc(), vals)
}

/// Sup of the Gauss defect over interior nodes.
pub fn gauss_codazzi_residual(graph: &GraphHypersurface, ambient: &AmbientManifold) -> Result<f64> {
    let d = gauss_codazzi_defect(graph, ambient)?;
    Ok(interior_nodes(d.grid()).into_iter().map(|p| d.values()[p].abs()).fold(0.0, f64::max))
}

/// The two sides of the rewritten stability inequality for one `φ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityGap {
    /// Numerator of the conformal Rayleigh quotient,
    /// `∫(|∇φ|² + c_n R^W φ²) + 2c_n∫_∂W H^∂W φ²`.
    pub rayleigh_numerator: f64,
    /// `(1 − 2c_n)∫|∇φ|²`.
    pub gradient_term: f64,
    pub slack: f64,
}

fn gap_from(form: &QuadraticForm, phi: &[f64], rw: &[f64], hdw: &[f64]) -> Result<StabilityGap> {
    let n = form.grid().ndim();
    if n < 3 {
        return Err(Error::UnsupportedDimension(n));
    }
    if phi.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroVariation);
    }
    let c = conformal_constant(n);
    let grad = form.dirichlet(phi);
    let mut num = grad;
    for p in 0..phi.len() {
        num += c * form.mass[p] * rw[p] * phi[p] * phi[p];
    }
    for (b, h) in form.boundary.iter().zip(hdw) {
        num += 2.0 * c * b.measure * h * phi[b.node] * phi[b.node];
    }
    let gradient_term = (1.0 - 2.0 * c) * grad;
    Ok(StabilityGap { rayleigh_numerator: num, gradient_term, slack: num - gradient_term })
}

/// Slack in the rewritten stability inequality, with `R^W` and `H^∂W`
/// replaced through the Gauss equations by ambient quantities:
/// `R^W = R^M − 2Ric(ν,ν) − |A|² + H²` and `H^∂W = −A^∂M(ν,ν)`.
pub fn rewritten_stability_gap(graph: &GraphHypersurface, ambient: &AmbientManifold, phi: &Field) -> Result<StabilityGap> {
    let geo = induced_geometry(graph, ambient)?;
    let h = geo.mean_curvature.sup_norm();
    if h > MINIMALITY_TOL {
        return Err(Error::NotMinimal(h));
    }
    check_variation(&geo, phi)?;
    let form = QuadraticForm::from_geometry(&geo)?;
    let rw: Vec<f64> = (0..phi.values().len())
        .map(|p| {
            let hh = geo.mean_curvature.values()[p];
            geo.ambient_scalar.values()[p] - 2.0 * geo.normal_ricci.values()[p] - geo.sff_norm2.values()[p] + hh * hh
        })
        .collect();
    let hdw: Vec<f64> = form.boundary.iter().map(|b| b.weight).collect();
    gap_from(&form, phi.values(), &rw, &hdw)
}

/// The same slack from intrinsic data of `(W, h̄)`: `R^W` from the induced
/// metric's curvature and `H^∂W` from its boundary geometry.
pub fn intrinsic_stability_gap(graph: &GraphHypersurface, ambient: &AmbientManifold, phi: &Field) -> Result<StabilityGap> {
    let geo = induced_geometry(graph, ambient)?;
    check_variation(&geo, phi)?;
    let form = QuadraticForm::from_geometry(&geo)?;
    let t = ambient.collar_axis().and_then(|a| graph.base_axis(a));
    let mirror = intrinsic_mirror(graph, ambient);
    let rw = curvature_mirrored(&geo.induced_metric, mirror).scalar;
    let mut hdw = Vec::new();
    if let Some(t) = t {
        for end in [End::Y0, End::Y1] {
            let bg = match mirror {
                Some(_) => boundary_geometry_with(&geo.induced_metric, &christoffel_with(&geo.induced_metric, mirror), t, end)?,
                None => boundary_geometry(&geo.induced_metric, t, end)?,
            };
            hdw.extend_from_slice(bg.mean_curvature.values());
        }
    }
    gap_from(&form, phi.values(), rw.values(), &hdw)
}

/// A Neumann graph over product ends inherits the even reflection, so its
/// induced metric is differenced the same way as the ambient one.
pub(crate) fn intrinsic_mirror(graph: &GraphHypersurface, ambient: &AmbientManifold) -> Option<usize> {
    let t = ambient.collar_axis().and_then(|a| graph.base_axis(a))?;
    (ambient.mirror_axis().is_some() && graph.closure() == Closure::Reflect).then_some(t)
}

fn check_variation(geo: &InducedGeometry, phi: &Field) -> Result<()> {
    if phi.rank() != 0 || !phi.grid().compatible(geo.volume_density.grid()) {
        return Err(Error::IncompatibleGrids("variation must be a scalar on the base grid".into()));
    }
    Ok(())
}

/// `q_D(φ)` on the doubled graph next to `q(φ₀|_W)` and `q(φ₁|_W)` for the
/// reflection-even and -odd parts of `φ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingSplit {
    pub doubled: f64,
    pub even: f64,
    pub odd: f64,
}

impl DoublingSplit {
    /// `|q_D − 2q(φ₀) − 2q(φ₁)|`.
    pub fn defect(&self) -> f64 {
        (self.doubled - 2.0 * self.even - 2.0 * self.odd).abs()
    }
}

/// Doubled ambient, doubled graph and both second-variation forms.
pub struct Doubling {
    pub ambient: AmbientManifold,
    pub graph: GraphHypersurface,
    pub form: QuadraticForm,
    pub half_form: QuadraticForm,
    /// Base axis of the collar.
    pub axis: usize,
}

impl Doubling {
    pub fn new(graph: &GraphHypersurface, ambient: &AmbientManifold) -> Result<Doubling> {
        let collar = ambient.collar_axis().ok_or(Error::NoBoundary)?;
        let axis = graph.base_axis(collar).expect("collar is never the graph axis");
        let half_form = second_variation_form(graph, ambient)?;
        let dambient = ambient.double()?;
        let dgraph = double_graph(graph, ambient)?;
        let form = QuadraticForm::from_geometry(&induced_geometry(&dgraph, &dambient)?)?;
        Ok(Doubling { ambient: dambient, graph: dgraph, form, half_form, axis })
    }

    /// Split a doubled-base function and evaluate all three forms.
    pub fn split(&self, phi: &[f64]) -> DoublingSplit {
        let dg = self.form.grid();
        let hg = self.half_form.grid();
        let n = hg.dims()[self.axis];
        let m = dg.dims()[self.axis];
        let mirror = |p: usize| {
            let mut idx = dg.multi_index(p);
            idx[self.axis] = (m - idx[self.axis]) % m;
            dg.index(&idx)
        };
        let mut even = vec![0.0; hg.len()];
        let mut odd = vec![0.0; hg.len()];
        for (q, (e, o)) in even.iter_mut().zip(odd.iter_mut()).enumerate() {
            let idx = hg.multi_index(q);
            debug_assert!(idx[self.axis] < n);
            let p = dg.index(&idx);
            let r = phi[mirror(p)];
            *e = 0.5 * (phi[p] + r);
            *o = 0.5 * (phi[p] - r);
        }
        DoublingSplit { doubled: self.form.eval(phi), even: self.half_form.eval(&even), odd: self.half_form.eval(&odd) }
    }
}

#[cfg(test)]
mod tests;
