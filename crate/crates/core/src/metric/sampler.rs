//! Ambient data evaluated at a graph height.
//!
//! A graph `x^γ = u(y)` meets the ambient grid between nodes along the graph
//! axis `γ`, which is periodic. Every column of samples along `γ` is replaced
//! by its trigonometric interpolant, so metric, Christoffel symbols and
//! curvature can be read at any height to spectral accuracy. Columns that are
//! exactly constant are flagged and returned bit-for-bit, which keeps flat
//! and product ambients exact.

use std::f64::consts::TAU;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::AmbientManifold;
use crate::error::{Error, Result};
use crate::field::Grid;
use crate::par;

/// Trigonometric coefficients of every (base node, component) column.
#[derive(Debug)]
struct Coeffs {
    ncomp: usize,
    n: usize,
    /// `[base][comp][coef]`: `a0, a1, b1, a2, b2, …` and, for even `n`, the
    /// Nyquist cosine last.
    coef: Vec<f64>,
    constant: Vec<bool>,
}

impl Coeffs {
    /// `data` holds `ncomp` values per ambient node.
    fn build(amb: &Grid, axis: usize, base: &Grid, data: &[f64], ncomp: usize) -> Coeffs {
        let n = amb.dims()[axis];
        let stride = amb.stride(axis);
        let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
        let constant = par::map_indices(base.len() * ncomp, |k| {
            let (b, c) = (k / ncomp, k % ncomp);
            let first = ambient_node(amb, base, axis, b);
            let v0 = data[first * ncomp + c];
            (1..n).all(|j| data[(first + j * stride) * ncomp + c] == v0)
        });
        let mut coef = vec![0.0; base.len() * ncomp * n];
        par::fill_chunks(&mut coef, ncomp * n, |b, out| {
            let first = ambient_node(amb, base, axis, b);
            let mut buf = vec![Complex::new(0.0, 0.0); n];
            for c in 0..ncomp {
                let col = |j: usize| data[(first + j * stride) * ncomp + c];
                let o = &mut out[c * n..(c + 1) * n];
                if constant[b * ncomp + c] {
                    o[0] = col(0);
                    continue;
                }
                for (j, z) in buf.iter_mut().enumerate() {
                    *z = Complex::new(col(j), 0.0);
                }
                fft.process(&mut buf);
                let inv = 1.0 / n as f64;
                o[0] = buf[0].re * inv;
                let half = n / 2;
                let top = if n % 2 == 0 { half } else { half + 1 };
                for k in 1..top {
                    o[2 * k - 1] = 2.0 * buf[k].re * inv;
                    o[2 * k] = -2.0 * buf[k].im * inv;
                }
                if n % 2 == 0 {
                    o[n - 1] = buf[half].re * inv;
                }
            }
        });
        Coeffs { ncomp, n, coef, constant }
    }

    /// Evaluate components `comps` of base column `b` at angle table `trig`.
    #[inline]
    fn eval(&self, b: usize, trig: &Trig, out: &mut [f64]) {
        let n = self.n;
        for (c, o) in out.iter_mut().enumerate().take(self.ncomp) {
            let k0 = (b * self.ncomp + c) * n;
            let co = &self.coef[k0..k0 + n];
            if self.constant[b * self.ncomp + c] {
                *o = co[0];
                continue;
            }
            let mut s = co[0];
            for k in 1..trig.top {
                s += co[2 * k - 1] * trig.cos[k] + co[2 * k] * trig.sin[k];
            }
            if n % 2 == 0 {
                s += co[n - 1] * trig.cos[n / 2];
            }
            *o = s;
        }
    }
}

/// `cos kθ`, `sin kθ` for the harmonics in use.
struct Trig {
    cos: Vec<f64>,
    sin: Vec<f64>,
    top: usize,
}

impl Trig {
    fn new(n: usize, theta: f64) -> Trig {
        let half = n / 2;
        let top = if n % 2 == 0 { half } else { half + 1 };
        let (sin, cos) = (0..=half).map(|k| (k as f64 * theta).sin_cos()).unzip();
        Trig { cos, sin, top }
    }
}

/// Ambient node of base node `b` at graph-axis index 0.
fn ambient_node(amb: &Grid, base: &Grid, axis: usize, b: usize) -> usize {
    let mut idx = Vec::with_capacity(amb.ndim());
    for a in 0..amb.ndim() {
        if a == axis {
            idx.push(0);
        } else {
            let ba = if a < axis { a } else { a - 1 };
            idx.push(base.coord_index(b, ba));
        }
    }
    amb.index(&idx)
}

/// Ambient metric and Christoffel symbols at one point of the graph.
#[derive(Clone, Debug)]
pub struct AmbientSample {
    /// Row-major `d×d` metric.
    pub g: Vec<f64>,
    /// `Γ^k_ij` as `[k][i][j]`.
    pub gamma: Vec<f64>,
}

/// Column interpolants of an ambient along its periodic graph axis.
#[derive(Debug)]
pub struct ColumnSampler {
    ambient: AmbientManifold,
    axis: usize,
    base: Arc<Grid>,
    first: Coeffs,
    curvature: OnceLock<Coeffs>,
}

impl ColumnSampler {
    pub fn new(ambient: &AmbientManifold, axis: usize) -> Result<ColumnSampler> {
        let grid = ambient.grid();
        grid.check_axis(axis)?;
        if !grid.periodic()[axis] {
            return Err(Error::OutOfChart(format!("graph axis {axis} must be periodic in the ambient chart")));
        }
        if Some(axis) == ambient.collar_axis() {
            return Err(Error::OutOfChart("the graph axis cannot be the collar axis".into()));
        }
        let d = ambient.dim();
        let base = Arc::new(grid.without_axis(axis)?);
        let gam = ambient.christoffel().values();
        let g = ambient.metric().values();
        let nc = d * d + d * d * d;
        let mut packed = vec![0.0; grid.len() * nc];
        par::fill_chunks(&mut packed, nc, |p, out| {
            out[..d * d].copy_from_slice(&g[p * d * d..(p + 1) * d * d]);
            out[d * d..].copy_from_slice(&gam[p * d * d * d..(p + 1) * d * d * d]);
        });
        let first = Coeffs::build(grid, axis, &base, &packed, nc);
        Ok(ColumnSampler { ambient: ambient.clone(), axis, base, first, curvature: OnceLock::new() })
    }

    pub fn ambient(&self) -> &AmbientManifold {
        &self.ambient
    }
    pub fn axis(&self) -> usize {
        self.axis
    }
    pub fn base_grid(&self) -> &Grid {
        &self.base
    }
    pub fn base_grid_arc(&self) -> Arc<Grid> {
        self.base.clone()
    }
    pub fn dim(&self) -> usize {
        self.ambient.dim()
    }

    fn trig(&self, height: f64) -> Trig {
        let grid = self.ambient.grid();
        let n = grid.dims()[self.axis];
        Trig::new(n, TAU * height / grid.extents()[self.axis])
    }

    /// Metric and Christoffel symbols at base node `b`, height `u`.
    pub fn sample(&self, b: usize, u: f64, out: &mut AmbientSample) {
        let d = self.dim();
        let mut buf = vec![0.0; d * d + d * d * d];
        self.first.eval(b, &self.trig(u), &mut buf);
        out.g.clear();
        out.g.extend_from_slice(&buf[..d * d]);
        out.gamma.clear();
        out.gamma.extend_from_slice(&buf[d * d..]);
    }

    pub fn empty_sample(&self) -> AmbientSample {
        let d = self.dim();
        AmbientSample { g: vec![0.0; d * d], gamma: vec![0.0; d * d * d] }
    }

    fn curvature_coeffs(&self) -> &Coeffs {
        self.curvature.get_or_init(|| {
            let cb = self.ambient.curvature();
            let d = self.dim();
            let nc = d * d + 1;
            let ric = cb.ricci.values();
            let r = cb.scalar.values();
            let grid = self.ambient.grid();
            let mut packed = vec![0.0; grid.len() * nc];
            par::fill_chunks(&mut packed, nc, |p, out| {
                out[..d * d].copy_from_slice(&ric[p * d * d..(p + 1) * d * d]);
                out[d * d] = r[p];
            });
            Coeffs::build(grid, self.axis, &self.base, &packed, nc)
        })
    }

    /// Ricci tensor (row-major `d×d`) and scalar curvature at base node `b`,
    /// height `u`, synthetic offsets included; `g` is the metric there.
    pub fn sample_curvature(&self, b: usize, u: f64, g: &[f64], ricci: &mut [f64]) -> f64 {
        let d = self.dim();
        let mut buf = vec![0.0; d * d + 1];
        self.curvature_coeffs().eval(b, &self.trig(u), &mut buf);
        let syn = self.ambient.synthetic();
        for k in 0..d * d {
            ricci[k] = buf[k] + syn.ricci_offset * g[k];
        }
        buf[d * d] + syn.scalar_offset
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricField;

    #[test]
    fn interpolant_reproduces_nodes_and_smooth_data() {
        let n = 16;
        let g = Grid::new(&[n, 5], &[TAU, 1.0], &[true, false]).unwrap();
        let m = MetricField::from_fn(&g, |x, o| {
            let w = 1.0 + 0.3 * (2.0 * x[0]).sin() + 0.1 * x[0].cos() * x[1];
            o.copy_from_slice(&[w, 0.0, 0.0, 1.0]);
        })
        .unwrap();
        let amb = AmbientManifold::new(m, Some(1)).unwrap();
        let s = ColumnSampler::new(&amb, 0).unwrap();
        let mut out = s.empty_sample();
        for b in 0..5 {
            let t = b as f64 * 0.25;
            for u in [0.0, 0.3, 1.7, 4.0, -2.0, 7.5] {
                s.sample(b, u, &mut out);
                let exact = 1.0 + 0.3 * (2.0 * u).sin() + 0.1 * u.cos() * t;
                assert!((out.g[0] - exact).abs() < 1e-13, "{} vs {exact}", out.g[0]);
                assert_eq!(out.g[3], 1.0);
            }
        }
    }

    #[test]
    fn constant_columns_are_exact() {
        let g = Grid::new(&[6, 6, 5], &[1.0, 1.0, 1.0], &[true, true, false]).unwrap();
        let m = MetricField::from_fn(&g, |x, o| {
            o.fill(0.0);
            o[0] = 1.0 + 0.1 * (TAU * x[1]).sin();
            o[4] = 1.0;
            o[8] = 1.0;
        })
        .unwrap();
        let amb = AmbientManifold::new(m.clone(), Some(2)).unwrap();
        let s = ColumnSampler::new(&amb, 0).unwrap();
        let mut out = s.empty_sample();
        for b in 0..s.base_grid().len() {
            s.sample(b, 0.37, &mut out);
            let node = ambient_node(amb.grid(), s.base_grid(), 0, b);
            assert_eq!(&out.g[..], m.at(node));
        }
        assert!(matches!(ColumnSampler::new(&amb, 2), Err(Error::OutOfChart(_))));
    }
}
