//! Induced metric, normal, second fundamental form and mean curvature of a
//! graph, evaluated node by node.
//!
//! With tangent frame `E_i = ∂_i + u_i ∂_γ` and normal covector
//! `n = dx^γ − u_i dx^i`, the unit normal is `ν = s·n^♯/|n|` and
//!
//! ```text
//! A_ij = s/|n| · ( u_ij + n_c Γ^c_ab E_i^a E_j^b ),     H = h^{ij} A_ij.
//! ```

use std::sync::Arc;

use super::GraphHypersurface;
use crate::error::{Error, Result};
use crate::field::{integrate_raw, scalar_jet, Closure, Field, Grid, ScalarJet};
use crate::linalg::small::{spd_inverse, MAX_DIM};
use crate::metric::{AmbientManifold, AmbientSample, ColumnSampler, End, MetricField};
use crate::par;

const M2: usize = MAX_DIM * MAX_DIM;

/// Geometry of the graph at one base node.
#[derive(Clone, Debug)]
pub struct NodeGeometry {
    /// Ambient dimension `d`; the hypersurface has dimension `d − 1`.
    pub d: usize,
    pub h: [f64; M2],
    pub h_inv: [f64; M2],
    pub det_h: f64,
    pub g_inv: [f64; M2],
    /// `ν^c`.
    pub normal: [f64; MAX_DIM],
    /// `|n|` for the unnormalized covector `n = dx^γ − u_i dx^i`.
    pub normal_norm: f64,
    pub sff: [f64; M2],
    pub mean: f64,
}

impl NodeGeometry {
    pub fn sff_norm2(&self) -> f64 {
        let n = self.d - 1;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        s += self.h_inv[i * n + k] * self.h_inv[j * n + l] * self.sff[i * n + j] * self.sff[k * n + l];
                    }
                }
            }
        }
        s
    }
}

/// Boundary observables of the graph at one collar end.
#[derive(Clone, Debug)]
pub struct BoundaryData {
    pub end: End,
    /// Base nodes on the end row, in row-major order.
    pub nodes: Vec<usize>,
    /// The induced metric restricted to `∂W`.
    pub metric: MetricField,
    /// Quadrature measure `dσ` per boundary node (weights included).
    pub measure: Vec<f64>,
    /// `ḡ(ν^W, ν^∂M)`; zero when the graph meets the boundary orthogonally.
    pub normal_pairing: Vec<f64>,
    /// `A^∂M(ν^W, ν^W)`.
    pub ambient_sff_nn: Vec<f64>,
}

/// Everything `induced_geometry` computes, as fields on the base grid.
#[derive(Clone, Debug)]
pub struct InducedGeometry {
    pub induced_metric: MetricField,
    /// Unit normal `ν^c` (rank 1, ambient dimension).
    pub normal: Field,
    pub sff: Field,
    pub mean_curvature: Field,
    pub normal_ricci: Field,
    pub sff_norm2: Field,
    /// Ambient scalar curvature along the graph (synthetic offset included).
    pub ambient_scalar: Field,
    /// `√det h`.
    pub volume_density: Field,
    pub sup_gradient: f64,
    pub boundary: Vec<BoundaryData>,
}

impl InducedGeometry {
    pub fn volume(&self) -> f64 {
        let g = self.volume_density.grid();
        integrate_raw(g, &vec![1.0; g.len()], self.volume_density.values())
    }
}

/// A graph's fixed data (ambient sampler, axis, closure, orientation) with
/// the height left free, so solvers can evaluate many heights cheaply.
#[derive(Debug)]
pub struct GraphKernel {
    sampler: ColumnSampler,
    graph_axis: usize,
    orientation: f64,
    closure: Closure,
    slope_max: f64,
    /// Base axis along the ambient collar, if any.
    collar: Option<usize>,
}

impl GraphKernel {
    pub fn new(graph: &GraphHypersurface, ambient: &AmbientManifold) -> Result<GraphKernel> {
        graph.check_chart(ambient)?;
        let sampler = ColumnSampler::new(ambient, graph.graph_axis())?;
        let collar = ambient.collar_axis().and_then(|a| graph.base_axis(a));
        Ok(GraphKernel {
            sampler,
            graph_axis: graph.graph_axis(),
            orientation: graph.orientation(),
            closure: graph.closure(),
            slope_max: graph.slope_max(),
            collar,
        })
    }

    pub fn base_grid(&self) -> &Grid {
        self.sampler.base_grid()
    }
    pub fn sampler(&self) -> &ColumnSampler {
        &self.sampler
    }
    pub fn ambient(&self) -> &AmbientManifold {
        self.sampler.ambient()
    }
    pub fn closure(&self) -> Closure {
        self.closure
    }
    pub fn orientation(&self) -> f64 {
        self.orientation
    }
    pub fn collar_axis(&self) -> Option<usize> {
        self.collar
    }
    pub fn slope_max(&self) -> f64 {
        self.slope_max
    }

    fn ambient_axis(&self, i: usize) -> usize {
        if i < self.graph_axis {
            i
        } else {
            i + 1
        }
    }

    pub fn jet(&self, u: &[f64]) -> ScalarJet {
        scalar_jet(self.base_grid(), u, self.closure)
    }

    /// `sup|∇u|`, or `GraphRegimeExceeded` past the slope bound.
    pub fn check_slope(&self, jet: &ScalarJet) -> Result<f64> {
        let n = self.base_grid().ndim();
        let len = self.base_grid().len();
        let mut worst: f64 = 0.0;
        for p in 0..len {
            let s: f64 = (0..n).map(|a| jet.d1[a][p] * jet.d1[a][p]).sum();
            worst = worst.max(s.sqrt());
        }
        if !(worst <= self.slope_max) {
            return Err(Error::GraphRegimeExceeded { slope: worst, limit: self.slope_max });
        }
        Ok(worst)
    }

    /// Geometry at base node `b` from the height `ub` and its jet.
    pub fn node(&self, b: usize, ub: f64, jet: &ScalarJet, sample: &mut AmbientSample) -> Result<NodeGeometry> {
        self.sampler.sample(b, ub, sample);
        let d = self.sampler.dim();
        let n = d - 1;
        let gam = self.graph_axis;
        let mut du = [0.0; MAX_DIM];
        for (i, v) in du.iter_mut().enumerate().take(n) {
            *v = jet.d1[i][b];
        }
        // tangent frame E_i^c
        let mut e = [0.0; M2];
        for i in 0..n {
            e[i * d + self.ambient_axis(i)] = 1.0;
            e[i * d + gam] = du[i];
        }
        let g = &sample.g;
        let mut h = [0.0; M2];
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for a in 0..d {
                    for c in 0..d {
                        s += g[a * d + c] * e[i * d + a] * e[j * d + c];
                    }
                }
                h[i * n + j] = s;
                h[j * n + i] = s;
            }
        }
        let mut h_inv = [0.0; M2];
        let det_h = spd_inverse(&h, n, &mut h_inv).ok_or(Error::SingularMetric { node: b })?;
        let mut g_inv = [0.0; M2];
        spd_inverse(g, d, &mut g_inv).ok_or(Error::SingularMetric { node: b })?;
        let mut ncov = [0.0; MAX_DIM];
        ncov[gam] = 1.0;
        for i in 0..n {
            ncov[self.ambient_axis(i)] = -du[i];
        }
        let mut nup = [0.0; MAX_DIM];
        for c in 0..d {
            nup[c] = (0..d).map(|k| g_inv[c * d + k] * ncov[k]).sum();
        }
        let norm = (0..d).map(|c| nup[c] * ncov[c]).sum::<f64>().sqrt();
        let s = self.orientation;
        let mut normal = [0.0; MAX_DIM];
        for c in 0..d {
            normal[c] = s * nup[c] / norm;
        }
        // n_c Γ^c_ab contracted once over c
        let mut ng = [0.0; M2];
        for c in 0..d {
            if ncov[c] == 0.0 {
                continue;
            }
            for ab in 0..d * d {
                ng[ab] += ncov[c] * sample.gamma[c * d * d + ab];
            }
        }
        let mut sff = [0.0; M2];
        let mut mean = 0.0;
        for i in 0..n {
            for j in i..n {
                let mut q = 0.0;
                for a in 0..d {
                    let ea = e[i * d + a];
                    if ea == 0.0 {
                        continue;
                    }
                    for c in 0..d {
                        q += ng[a * d + c] * ea * e[j * d + c];
                    }
                }
                let v = s * (jet.d2[i][j][b] + q) / norm;
                sff[i * n + j] = v;
                sff[j * n + i] = v;
            }
        }
        for k in 0..n * n {
            mean += h_inv[k] * sff[k];
        }
        Ok(NodeGeometry { d, h, h_inv, det_h, g_inv, normal, normal_norm: norm, sff, mean })
    }

    /// Mean curvature at every base node.
    pub fn mean_curvature(&self, u: &[f64]) -> Result<Vec<f64>> {
        let jet = self.jet(u);
        self.check_slope(&jet)?;
        let out: Vec<Result<f64>> = par::map_indices(u.len(), |b| {
            let mut smp = self.sampler.empty_sample();
            self.node(b, u[b], &jet, &mut smp).map(|ng| ng.mean)
        });
        out.into_iter().collect()
    }

    /// Mean curvature and `|n|` at every base node (what the flow needs).
    pub fn mean_curvature_and_speed(&self, u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let jet = self.jet(u);
        self.check_slope(&jet)?;
        let out: Vec<Result<(f64, f64)>> = par::map_indices(u.len(), |b| {
            let mut smp = self.sampler.empty_sample();
            self.node(b, u[b], &jet, &mut smp).map(|ng| (ng.mean, ng.normal_norm))
        });
        let v: Vec<(f64, f64)> = out.into_iter().collect::<Result<_>>()?;
        Ok(v.into_iter().unzip())
    }

    /// `√det h` at every base node.
    pub fn volume_density(&self, u: &[f64]) -> Result<Vec<f64>> {
        let jet = self.jet(u);
        self.check_slope(&jet)?;
        let out: Vec<Result<f64>> = par::map_indices(u.len(), |b| {
            let mut smp = self.sampler.empty_sample();
            self.node(b, u[b], &jet, &mut smp).map(|ng| ng.det_h.sqrt())
        });
        out.into_iter().collect()
    }

    pub fn volume(&self, u: &[f64]) -> Result<f64> {
        let rho = self.volume_density(u)?;
        let g = self.base_grid();
        Ok(integrate_raw(g, &vec![1.0; g.len()], &rho))
    }

    /// Full induced geometry at heights `u`.
    pub fn geometry(&self, u: &[f64]) -> Result<InducedGeometry> {
        let jet = self.jet(u);
        let sup_gradient = self.check_slope(&jet)?;
        let grid = Arc::new(self.base_grid().clone());
        let d = self.sampler.dim();
        let n = d - 1;
        let nodes: Vec<Result<(NodeGeometry, f64, f64)>> = par::map_indices(u.len(), |b| {
            let mut smp = self.sampler.empty_sample();
            let ng = self.node(b, u[b], &jet, &mut smp)?;
            let mut ric = [0.0; M2];
            let r = self.sampler.sample_curvature(b, u[b], &smp.g, &mut ric[..d * d]);
            let mut rnn = 0.0;
            for a in 0..d {
                for c in 0..d {
                    rnn += ric[a * d + c] * ng.normal[a] * ng.normal[c];
                }
            }
            Ok((ng, rnn, r))
        });
        let nodes: Vec<(NodeGeometry, f64, f64)> = nodes.into_iter().collect::<Result<_>>()?;
        let mut hv = Vec::with_capacity(u.len() * n * n);
        let mut nv = Vec::with_capacity(u.len() * d);
        let mut av = Vec::with_capacity(u.len() * n * n);
        for (ng, _, _) in &nodes {
            hv.extend_from_slice(&ng.h[..n * n]);
            nv.extend_from_slice(&ng.normal[..d]);
            av.extend_from_slice(&ng.sff[..n * n]);
        }
        let scalar = |f: &dyn Fn(&(NodeGeometry, f64, f64)) -> f64| {
            Field::scalar_on(grid.clone(), nodes.iter().map(f).collect()).expect("one value per node")
        };
        let induced_metric = MetricField::from_values(grid.clone(), hv)?;
        let mut boundary = Vec::new();
        if let Some(t) = self.collar {
            for end in [End::Y0, End::Y1] {
                boundary.push(self.boundary_data(u, &nodes, &induced_metric, t, end)?);
            }
        }
        Ok(InducedGeometry {
            normal: Field::from_parts(grid.clone(), 1, d, nv)?,
            sff: Field::from_parts(grid.clone(), 2, n, av)?,
            mean_curvature: scalar(&|x| x.0.mean),
            normal_ricci: scalar(&|x| x.1),
            sff_norm2: scalar(&|x| x.0.sff_norm2()),
            ambient_scalar: scalar(&|x| x.2),
            volume_density: scalar(&|x| x.0.det_h.sqrt()),
            induced_metric,
            sup_gradient,
            boundary,
        })
    }

    fn boundary_data(
        &self,
        u: &[f64],
        nodes: &[(NodeGeometry, f64, f64)],
        induced: &MetricField,
        t: usize,
        end: End,
    ) -> Result<BoundaryData> {
        let grid = self.base_grid();
        let row = match end {
            End::Y0 => 0,
            End::Y1 => grid.dims()[t] - 1,
        };
        let ids = grid.slice_nodes(t, row);
        let metric = crate::metric::slice_metric(induced, t, end)?;
        let d = self.sampler.dim();
        let ta = self.ambient_axis(t);
        let mut smp = self.sampler.empty_sample();
        let mut measure = Vec::with_capacity(ids.len());
        let mut pairing = Vec::with_capacity(ids.len());
        let mut ann = Vec::with_capacity(ids.len());
        for (k, &b) in ids.iter().enumerate() {
            let ng = &nodes[b].0;
            let rho = if metric.dim() == 0 {
                1.0
            } else {
                crate::linalg::small::spd_det(metric.at(k), metric.dim()).ok_or(Error::SingularMetric { node: b })?.sqrt()
            };
            measure.push(grid.node_weight_except(b, &[t]) * rho);
            // outward unit conormal of ∂M: ν^∂_c = s δ_c^t / √(g^{tt})
            let scale = end.outward_sign() / ng.g_inv[ta * d + ta].sqrt();
            pairing.push(scale * ng.normal[ta]);
            self.sampler.sample(b, u[b], &mut smp);
            let mut q = 0.0;
            for a in 0..d {
                for c in 0..d {
                    q += smp.gamma[(ta * d + a) * d + c] * ng.normal[a] * ng.normal[c];
                }
            }
            ann.push(-scale * q);
        }
        Ok(BoundaryData { end, nodes: ids, metric, measure, normal_pairing: pairing, ambient_sff_nn: ann })
    }
}

pub fn induced_geometry(graph: &GraphHypersurface, ambient: &AmbientManifold) -> Result<InducedGeometry> {
    GraphKernel::new(graph, ambient)?.geometry(graph.heights())
}

pub fn mean_curvature(graph: &GraphHypersurface, ambient: &AmbientManifold) -> Result<Field> {
    let h = GraphKernel::new(graph, ambient)?.mean_curvature(graph.heights())?;
    Field::scalar_on(graph.base_grid_arc(), h)
}

pub fn volume(graph: &GraphHypersurface, ambient: &AmbientManifold) -> Result<f64> {
    GraphKernel::new(graph, ambient)?.volume(graph.heights())
}

/// `−∫_W H φ dμ + ∫_∂W φ ḡ(ν^W, ν^∂M) dσ` for the normal variation `φν`.
pub fn first_variation(graph: &GraphHypersurface, ambient: &AmbientManifold, phi: &Field) -> Result<f64> {
    if phi.rank() != 0 || !phi.grid().compatible(graph.base_grid()) {
        return Err(Error::IncompatibleGrids("variation must be a scalar on the base grid".into()));
    }
    let geo = induced_geometry(graph, ambient)?;
    Ok(first_variation_from(&geo, phi.values()))
}

pub(crate) fn first_variation_from(geo: &InducedGeometry, phi: &[f64]) -> f64 {
    let grid = geo.volume_density.grid();
    let hphi: Vec<f64> = geo.mean_curvature.values().iter().zip(phi).map(|(h, f)| h * f).collect();
    let mut v = -integrate_raw(grid, &hphi, geo.volume_density.values());
    for bd in &geo.boundary {
        for (k, &b) in bd.nodes.iter().enumerate() {
            v += bd.measure[k] * phi[b] * bd.normal_pairing[k];
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use std::f64::consts::TAU;

    fn flat_slab(nx: usize, nt: usize) -> AmbientManifold {
        let g = Grid::new(&[nx, nx, nt], &[TAU, TAU, 1.0], &[true, true, false]).unwrap();
        AmbientManifold::new(MetricField::flat(&g), Some(2)).unwrap()
    }

    #[test]
    fn horizontal_slice_is_totally_geodesic() {
        let amb = flat_slab(8, 9);
        let g = GraphHypersurface::constant(&amb, 0, 1.0).unwrap();
        let geo = induced_geometry(&g, &amb).unwrap();
        assert!(geo.mean_curvature.sup_norm() == 0.0);
        assert!(geo.sff.sup_norm() == 0.0);
        for p in 0..geo.induced_metric.grid().len() {
            assert_eq!(geo.induced_metric.at(p), &[1.0, 0.0, 0.0, 1.0]);
            assert_eq!(geo.normal.at(p), &[1.0, 0.0, 0.0]);
        }
        assert!((geo.volume() - TAU).abs() < 1e-12);
        for bd in &geo.boundary {
            assert!(bd.normal_pairing.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn normal_is_unit_and_orthogonal() {
        let g = Grid::new(&[16, 16, 9], &[TAU, TAU, 1.0], &[true, true, false]).unwrap();
        let m = MetricField::from_fn(&g, |x, o| {
            o.fill(0.0);
            o[0] = 1.0 + 0.2 * x[1].cos();
            o[1] = 0.1 * x[0].sin();
            o[3] = o[1];
            o[4] = 1.3;
            o[8] = 1.0;
        })
        .unwrap();
        let amb = AmbientManifold::new(m, Some(2)).unwrap();
        let graph = GraphHypersurface::from_fn(&amb, 0, |y| 2.0 + 0.3 * y[0].sin() * (3.0 * y[1]).cos()).unwrap();
        let k = GraphKernel::new(&graph, &amb).unwrap();
        let jet = k.jet(graph.heights());
        let mut smp = k.sampler().empty_sample();
        for b in 0..graph.base_grid().len() {
            let ng = k.node(b, graph.heights()[b], &jet, &mut smp).unwrap();
            let gm = &smp.g;
            let nn: f64 = (0..3).flat_map(|a| (0..3).map(move |c| (a, c))).map(|(a, c)| gm[a * 3 + c] * ng.normal[a] * ng.normal[c]).sum();
            assert!((nn - 1.0).abs() < 1e-10);
            for i in 0..2 {
                let mut e = [0.0; 3];
                e[i + 1] = 1.0;
                e[0] = jet.d1[i][b];
                let dot: f64 = (0..3).flat_map(|a| (0..3).map(move |c| (a, c))).map(|(a, c)| gm[a * 3 + c] * ng.normal[a] * e[c]).sum();
                assert!(dot.abs() < 1e-10);
            }
            let tr: f64 = (0..4).map(|c| ng.h_inv[c] * ng.sff[c]).sum();
            assert!((tr - ng.mean).abs() < 1e-10);
        }
    }

    #[test]
    fn orientation_flip_negates_extrinsic_quantities() {
        let amb = flat_slab(16, 9);
        let graph = GraphHypersurface::from_fn(&amb, 0, |y| 1.0 + 0.2 * y[0].sin()).unwrap();
        let a = induced_geometry(&graph, &amb).unwrap();
        let b = induced_geometry(&graph.flipped(), &amb).unwrap();
        assert_eq!(a.mean_curvature.values(), b.mean_curvature.map(|v| -v).values());
        assert_eq!(a.sff.values(), b.sff.map(|v| -v).values());
        assert_eq!(a.normal.values(), b.normal.map(|v| -v).values());
        assert_eq!(a.induced_metric, b.induced_metric);
        assert_eq!(a.sff_norm2.values(), b.sff_norm2.values());
    }

    #[test]
    fn flat_volume_is_area_integral_and_translation_invariant() {
        let amb = flat_slab(16, 9);
        let graph = GraphHypersurface::from_fn(&amb, 0, |y| 1.0 + 0.2 * y[0].sin() * (y[1] * 3.0).cos())
            .unwrap()
            .with_closure(Closure::OneSided);
        let jet = scalar_jet(graph.base_grid(), graph.heights(), Closure::OneSided);
        let dens: Vec<f64> = (0..graph.base_grid().len())
            .map(|p| (1.0 + jet.d1[0][p].powi(2) + jet.d1[1][p].powi(2)).sqrt())
            .collect();
        let oracle = integrate_raw(graph.base_grid(), &vec![1.0; dens.len()], &dens);
        let v = volume(&graph, &amb).unwrap();
        assert!((v - oracle).abs() <= 1e-12);
        let shifted = graph.with_heights(graph.heights().iter().map(|x| x + 0.7).collect()).unwrap();
        assert!((volume(&shifted, &amb).unwrap() - v).abs() <= 1e-12);
    }

    #[test]
    fn steep_graph_is_rejected() {
        let amb = flat_slab(16, 9);
        let graph = GraphHypersurface::from_fn(&amb, 0, |y| 20.0 * y[0].sin()).unwrap();
        assert!(matches!(volume(&graph, &amb), Err(Error::GraphRegimeExceeded { .. })));
    }

    #[test]
    fn flat_mean_curvature_matches_closed_form() {
        let amb = flat_slab(32, 17);
        let graph = GraphHypersurface::from_fn(&amb, 0, |y| 1.0 + 0.3 * y[0].sin() * (2.0 * y[1]).cos() + 0.2 * y[1] * y[1])
            .unwrap()
            .with_closure(Closure::OneSided);
        let h = mean_curvature(&graph, &amb).unwrap();
        let jet = scalar_jet(graph.base_grid(), graph.heights(), Closure::OneSided);
        for p in 0..graph.base_grid().len() {
            let (ux, ut) = (jet.d1[0][p], jet.d1[1][p]);
            let w2 = 1.0 + ux * ux + ut * ut;
            let lap = jet.d2[0][0][p] + jet.d2[1][1][p];
            let hess = ux * ux * jet.d2[0][0][p] + 2.0 * ux * ut * jet.d2[0][1][p] + ut * ut * jet.d2[1][1][p];
            let oracle = (lap - hess / w2) / w2.sqrt();
            assert!((h.values()[p] - oracle).abs() <= 1e-10, "node {p}: {} vs {oracle}", h.values()[p]);
        }
    }

    #[test]
    fn sphere_cap_has_mean_curvature_two() {
        let (amb, graph) = crate::scenarios::sphere_cap(128).unwrap();
        let h = mean_curvature(&graph, &amb).unwrap();
        let grid = graph.base_grid();
        let mut y = [0.0; 2];
        let mut worst: f64 = 0.0;
        for p in 0..grid.len() {
            grid.node_coords(p, &mut y);
            if (y[0] - 0.7).hypot(y[1] - 0.7) <= 0.6 {
                worst = worst.max((h.values()[p] - 2.0).abs());
            }
        }
        assert!(worst <= 5e-2, "sup |H - 2| = {worst}");
    }

    #[test]
    fn boundary_sff_of_ambient_is_minus_boundary_mean_curvature() {
        // ḡ = e^{2βt} dx1² + e^{-2βt} dx2² + dt²; the slice x2 = c is totally
        // geodesic and meets both ends orthogonally.
        let beta = 0.3;
        for (n, tol) in [(17usize, 2e-3), (33, 5e-4)] {
            let g = Grid::new(&[16, 8, n], &[TAU, TAU, 1.0], &[true, true, false]).unwrap();
            let m = MetricField::from_fn(&g, |x, o| {
                o.fill(0.0);
                o[0] = (2.0 * beta * x[2]).exp();
                o[4] = (-2.0 * beta * x[2]).exp();
                o[8] = 1.0;
            })
            .unwrap();
            let amb = AmbientManifold::new(m, Some(2)).unwrap();
            let graph = GraphHypersurface::constant(&amb, 1, 1.0).unwrap();
            let geo = induced_geometry(&graph, &amb).unwrap();
            assert!(geo.mean_curvature.sup_norm() < 1e-10);
            for bd in &geo.boundary {
                let hw = crate::metric::boundary_geometry(&geo.induced_metric, 1, bd.end).unwrap();
                for (k, a) in bd.ambient_sff_nn.iter().enumerate() {
                    let sum = a + hw.mean_curvature.values()[k];
                    assert!(sum.abs() <= tol, "n={n} {:?}: A(nu,nu) = {a}, H = {}", bd.end, hw.mean_curvature.values()[k]);
                    // closed form: A(ν,ν) = −s·β
                    assert!((a + bd.end.outward_sign() * beta).abs() <= tol);
                }
            }
        }
    }
}
