//! Scenario configuration files: schema, validation with JSON-pointer
//! diagnostics, and construction of the library objects.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};

use psclab::conformal::{CertificateOptions, DescentOptions};
use psclab::experiments::Scenario;
use psclab::field::{rfld, Grid, MIN_POINTS};
use psclab::linalg::small::MAX_DIM;
use psclab::linalg::EigenOptions;
use psclab::metric::{AmbientManifold, End, MetricField, SyntheticCurvature};
use psclab::scenarios;
use psclab::solver::SolverOptions;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub ambient: AmbientSection,
    #[serde(default)]
    pub graph: GraphSection,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub eigen: EigenSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    FlatSlab,
    BumpySlab,
    BumpyTorus,
    PerturbedSlab,
}

/// The ambient chart. Either a `preset`, a set of closed-form components
/// `gIJ` (1-based, upper triangle), or a `metric_file` in RFLD1 format.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AmbientSection {
    #[serde(default)]
    pub preset: Option<Preset>,
    pub grid: GridSection,
    #[serde(default)]
    pub metric: BTreeMap<String, String>,
    #[serde(default)]
    pub metric_file: Option<PathBuf>,
    /// Defaults to the only bounded axis, if there is exactly one.
    #[serde(default)]
    pub collar_axis: Option<usize>,
    /// Perturbation size for `perturbed_slab`.
    #[serde(default)]
    pub strength: Option<f64>,
    #[serde(default)]
    pub synthetic: Option<SyntheticCurvature>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dims: Vec<usize>,
    #[serde(default)]
    pub extents: Option<Vec<f64>>,
    #[serde(default)]
    pub periodic: Option<Vec<bool>>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphSection {
    pub axis: usize,
    /// Initial constant height; the least-volume slice when absent.
    pub init: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenSection {
    pub tol: f64,
    pub max_iter: usize,
    pub guard: usize,
    pub seed: u64,
    pub stability_modes: usize,
    pub descent: DescentOptions,
    pub certificate: CertificateOptions,
}

impl Default for EigenSection {
    fn default() -> Self {
        let e = EigenOptions::default();
        EigenSection {
            tol: e.tol,
            max_iter: e.max_iter,
            guard: e.guard,
            seed: e.seed,
            stability_modes: 3,
            descent: DescentOptions::default(),
            certificate: CertificateOptions::default(),
        }
    }
}

impl EigenSection {
    pub fn options(&self) -> EigenOptions {
        EigenOptions { tol: self.tol, max_iter: self.max_iter, guard: self.guard, seed: self.seed }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub lengths: Vec<f64>,
    pub truncations: Vec<f64>,
    pub end: End,
    pub slice_samples: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { lengths: vec![1.0, 2.0, 4.0, 8.0], truncations: vec![0.5], end: End::Y0, slice_samples: 64 }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Write RFLD1 fields (graphs, metrics, eigenfunctions).
    pub fields: bool,
    /// Write plot-ready CSVs under `plotdata/`.
    pub plotdata: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { fields: true, plotdata: true }
    }
}

/// One problem found in a config, located by JSON pointer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub pointer: String,
    pub message: String,
}

impl Diagnostic {
    fn new(pointer: &str, message: impl Into<String>) -> Diagnostic {
        Diagnostic { pointer: pointer.into(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = if self.pointer.is_empty() { "(root)" } else { &self.pointer };
        write!(f, "{at}: {}", self.message)
    }
}

#[derive(Debug)]
pub enum LoadError {
    UnreadableFile(String),
    MalformedJson(String),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::UnreadableFile(m) => write!(f, "cannot read config: {m}"),
            LoadError::MalformedJson(m) => write!(f, "config is not valid JSON: {m}"),
        }
    }
}

/// A config that passed validation, with the objects built from it.
pub struct Loaded {
    pub config: Config,
    pub bytes: Vec<u8>,
    pub ambient: AmbientManifold,
    pub scenario: Scenario,
}

/// Diagnostics for the config at `path`; empty iff it is runnable.
pub fn validate(path: &Path) -> Result<Vec<Diagnostic>, LoadError> {
    Ok(match load(path)? {
        Ok(_) => Vec::new(),
        Err(d) => d,
    })
}

/// Parse, check and build. The outer error is for unreadable or non-JSON
/// files, the inner one for a config that is JSON but not runnable.
pub fn load(path: &Path) -> Result<Result<Loaded, Vec<Diagnostic>>, LoadError> {
    let bytes = std::fs::read(path).map_err(|e| LoadError::UnreadableFile(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| LoadError::MalformedJson(e.to_string()))?;
    let config: Config = match serde_path_to_error::deserialize(value) {
        Ok(c) => c,
        Err(e) => return Ok(Err(vec![Diagnostic::new(&pointer(e.path()), e.inner().to_string())])),
    };
    let base_dir = path.parent().unwrap_or(Path::new("."));
    let diags = check(&config, base_dir);
    if !diags.is_empty() {
        return Ok(Err(diags));
    }
    let ambient = match build_ambient(&config.ambient, base_dir) {
        Ok(a) => a,
        Err(e) => return Ok(Err(vec![Diagnostic::new("/ambient", e.to_string())])),
    };
    let scenario = scenario(&config, ambient.clone());
    if ambient.collar_axis().is_some() {
        if let Err(e) = scenario.validate() {
            return Ok(Err(vec![Diagnostic::new("", e.to_string())]));
        }
    }
    Ok(Ok(Loaded { config, bytes, ambient, scenario }))
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

/// Resolved grid axes: dims, extents, periodicity and the collar axis.
struct Axes {
    dims: Vec<usize>,
    extents: Vec<f64>,
    periodic: Vec<bool>,
    collar: Option<usize>,
}

fn axes(a: &AmbientSection) -> Result<Axes, Diagnostic> {
    let dims = a.grid.dims.clone();
    let d = dims.len();
    if !(2..=MAX_DIM).contains(&d) {
        return Err(Diagnostic::new("/ambient/grid/dims", format!("need between 2 and {MAX_DIM} axes, got {d}")));
    }
    if let Some(bad) = dims.iter().position(|&n| n < MIN_POINTS) {
        return Err(Diagnostic::new(
            "/ambient/grid/dims",
            format!("axis {bad} has {} points, need at least {MIN_POINTS}", dims[bad]),
        ));
    }
    let (extents, periodic, collar) = match a.preset {
        Some(preset) => {
            let t_extent = match preset {
                Preset::PerturbedSlab => 2.0,
                _ => a.grid.extents.as_ref().and_then(|e| e.last().copied()).unwrap_or(1.0),
            };
            let mut ext = vec![TAU; d];
            ext[d - 1] = t_extent;
            if let Some(given) = &a.grid.extents {
                if given.len() != d || given.iter().zip(&ext).any(|(g, e)| (g - e).abs() > 1e-12 * e) {
                    return Err(Diagnostic::new(
                        "/ambient/grid/extents",
                        format!("preset {preset:?} fixes the extents to {ext:?}; omit them or match them"),
                    ));
                }
            }
            let mut per = vec![true; d];
            per[d - 1] = false;
            if a.grid.periodic.as_ref().is_some_and(|p| *p != per) {
                return Err(Diagnostic::new("/ambient/grid/periodic", "presets are periodic except on the last axis"));
            }
            if a.collar_axis.is_some_and(|c| c != d - 1) {
                return Err(Diagnostic::new("/ambient/collar_axis", "presets use the last axis as the collar"));
            }
            (ext, per, Some(d - 1))
        }
        None => {
            let ext = a
                .grid
                .extents
                .clone()
                .ok_or_else(|| Diagnostic::new("/ambient/grid/extents", "required without a preset"))?;
            let per = a
                .grid
                .periodic
                .clone()
                .ok_or_else(|| Diagnostic::new("/ambient/grid/periodic", "required without a preset"))?;
            if ext.len() != d {
                return Err(Diagnostic::new("/ambient/grid/extents", format!("expected {d} entries, got {}", ext.len())));
            }
            if per.len() != d {
                return Err(Diagnostic::new("/ambient/grid/periodic", format!("expected {d} entries, got {}", per.len())));
            }
            let bounded: Vec<usize> = (0..d).filter(|&i| !per[i]).collect();
            let collar = match a.collar_axis {
                Some(c) if c >= d || per[c] => {
                    return Err(Diagnostic::new("/ambient/collar_axis", format!("axis {c} is not a bounded axis")));
                }
                Some(c) => Some(c),
                None if bounded.len() == 1 => Some(bounded[0]),
                None if bounded.is_empty() => None,
                None => {
                    return Err(Diagnostic::new("/ambient/collar_axis", "several bounded axes; say which is the collar"));
                }
            };
            (ext, per, collar)
        }
    };
    if let Some(bad) = extents.iter().position(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Diagnostic::new(&format!("/ambient/grid/extents/{bad}"), "extent must be positive and finite"));
    }
    Ok(Axes { dims, extents, periodic, collar })
}

fn check(c: &Config, base_dir: &Path) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let a = &c.ambient;
    let ax = match axes(a) {
        Ok(ax) => Some(ax),
        Err(d) => {
            out.push(d);
            None
        }
    };
    let sources = a.preset.is_some() as usize + (!a.metric.is_empty()) as usize + a.metric_file.is_some() as usize;
    if sources > 1 {
        out.push(Diagnostic::new("/ambient", "give only one of preset, metric and metric_file"));
    }
    if let Some(file) = &a.metric_file {
        if !base_dir.join(file).is_file() {
            out.push(Diagnostic::new("/ambient/metric_file", format!("{} does not exist", file.display())));
        }
    }
    if a.strength.is_some() && a.preset != Some(Preset::PerturbedSlab) {
        out.push(Diagnostic::new("/ambient/strength", "only the perturbed_slab preset takes a strength"));
    }
    if let Some(ax) = &ax {
        let d = ax.dims.len();
        match a.preset {
            Some(Preset::PerturbedSlab) if d != 3 => {
                out.push(Diagnostic::new("/ambient/grid/dims", "perturbed_slab is three-dimensional"));
            }
            Some(p) if d < 3 => {
                out.push(Diagnostic::new("/ambient/grid/dims", format!("preset {p:?} needs at least 3 axes")));
            }
            Some(Preset::PerturbedSlab) if ax.dims[0] != ax.dims[1] => {
                out.push(Diagnostic::new("/ambient/grid/dims", "perturbed_slab needs equal periodic point counts"));
            }
            Some(_) if ax.dims[..d - 1].iter().any(|&n| n != ax.dims[0]) => {
                out.push(Diagnostic::new("/ambient/grid/dims", "presets need the same point count on every periodic axis"));
            }
            _ => {}
        }
        for key in a.metric.keys() {
            if parse_component(key).map_or(true, |(i, j)| i >= d || j >= d) {
                out.push(Diagnostic::new(
                    &format!("/ambient/metric/{key}"),
                    format!("component names are gIJ with 1 <= I <= J <= {d}"),
                ));
            }
        }
        let gaxis = c.graph.axis;
        if gaxis >= d || !ax.periodic[gaxis] || Some(gaxis) == ax.collar {
            out.push(Diagnostic::new("/graph/axis", format!("axis {gaxis} is not a periodic non-collar axis")));
        }
        if let Some(t) = ax.collar {
            let h = ax.extents[t] / (ax.dims[t] - 1) as f64;
            let off_grid = |x: f64| ((x / h) - (x / h).round()).abs() > 1e-9 * (x / h).abs().max(1.0);
            let s = &c.sweep;
            if s.lengths.is_empty() {
                out.push(Diagnostic::new("/sweep/lengths", "need at least one collar length"));
            }
            for (i, &l) in s.lengths.iter().enumerate() {
                if !(l > 0.0) || (i > 0 && !(l > s.lengths[i - 1])) {
                    out.push(Diagnostic::new("/sweep/lengths", "lengths must be positive and strictly increasing"));
                    break;
                }
                if off_grid(l) {
                    out.push(Diagnostic::new("/sweep/lengths", format!("length {l} is not a multiple of the spacing {h}")));
                    break;
                }
            }
            let shortest = s.lengths.first().copied().unwrap_or(0.0);
            if s.truncations.is_empty() {
                out.push(Diagnostic::new("/sweep/truncations", "need at least one truncation height"));
            }
            for &r in &s.truncations {
                if !(r > 0.0 && r < shortest) || off_grid(r) {
                    out.push(Diagnostic::new(
                        "/sweep/truncations",
                        format!("truncation {r} must be a grid multiple in (0, {shortest})"),
                    ));
                    break;
                }
            }
        }
    }
    if let Err(e) = c.solver.validate() {
        out.push(Diagnostic::new("/solver", e.to_string()));
    }
    let e = &c.eigen;
    if !(e.tol > 0.0) || e.max_iter == 0 {
        out.push(Diagnostic::new("/eigen", "tol must be positive and max_iter at least 1"));
    }
    if e.stability_modes == 0 {
        out.push(Diagnostic::new("/eigen/stability_modes", "must be at least 1"));
    }
    if !(e.certificate.amplitude > 0.0) {
        out.push(Diagnostic::new("/eigen/certificate/amplitude", "must be positive"));
    }
    out
}

/// `gIJ` (1-based) to a 0-based pair with `i ≤ j`.
fn parse_component(key: &str) -> Option<(usize, usize)> {
    let digits = key.strip_prefix('g')?.as_bytes();
    if digits.len() != 2 || !digits.iter().all(u8::is_ascii_digit) {
        return None;
    }
    let (i, j) = ((digits[0] - b'0') as usize, (digits[1] - b'0') as usize);
    (i >= 1 && j >= 1 && i <= j).then(|| (i - 1, j - 1))
}

fn build_ambient(a: &AmbientSection, base_dir: &Path) -> psclab::Result<AmbientManifold> {
    let ax = axes(a).map_err(|d| psclab::Error::DimensionMismatch(d.to_string()))?;
    let d = ax.dims.len();
    let (nx, nt) = (ax.dims[0], ax.dims[d - 1]);
    let t_extent = ax.extents[d - 1];
    let amb = match a.preset {
        Some(Preset::FlatSlab) => scenarios::flat_slab(d, nx, nt, t_extent)?,
        Some(Preset::BumpySlab) => scenarios::bumpy_slab(d, nx, nt, t_extent)?,
        Some(Preset::BumpyTorus) => scenarios::bumpy_torus(d, nx, nt, t_extent)?,
        Some(Preset::PerturbedSlab) => {
            AmbientManifold::new(scenarios::perturbed_slab(nx, nt, a.strength.unwrap_or(1.0))?, Some(2))?
        }
        None => {
            let grid = Grid::new(&ax.dims, &ax.extents, &ax.periodic)?;
            let metric = match &a.metric_file {
                Some(file) => {
                    let m = MetricField::new(rfld::read_file(base_dir.join(file))?)?;
                    if !m.grid().compatible(&grid) {
                        return Err(psclab::Error::IncompatibleGrids("metric_file grid differs from ambient.grid".into()));
                    }
                    m
                }
                None => {
                    let comps: Vec<((usize, usize), String)> =
                        a.metric.iter().filter_map(|(k, v)| parse_component(k).map(|ij| (ij, v.clone()))).collect();
                    MetricField::from_expressions(&grid, &comps, ax.collar)?
                }
            };
            AmbientManifold::new(metric, ax.collar)?
        }
    };
    Ok(match a.synthetic {
        Some(s) if !s.is_zero() => amb.with_synthetic(s),
        _ => amb,
    })
}

fn scenario(c: &Config, ambient: AmbientManifold) -> Scenario {
    let mut s = Scenario::new(ambient, c.graph.axis);
    s.end = c.sweep.end;
    s.lengths = c.sweep.lengths.clone();
    s.truncations = c.sweep.truncations.clone();
    s.solver = c.solver.clone();
    s.eigen = c.eigen.options();
    s.descent = c.eigen.descent;
    s.certificate = c.eigen.certificate.clone();
    s.stability_modes = c.eigen.stability_modes;
    s.slice_samples = c.sweep.slice_samples;
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn component_names() {
        assert_eq!(parse_component("g11"), Some((0, 0)));
        assert_eq!(parse_component("g23"), Some((1, 2)));
        assert_eq!(parse_component("g21"), None);
        assert_eq!(parse_component("g1"), None);
        assert_eq!(parse_component("h11"), None);
    }

    #[test]
    fn pointers_escape_keys() {
        let v: serde_json::Value = serde_json::json!({"ambient": {"grid": {"dims": ["x"]}}});
        let err = serde_path_to_error::deserialize::<_, Config>(v).unwrap_err();
        assert_eq!(pointer(err.path()), "/ambient/grid/dims/0");
    }
}
