use serde::{Deserialize, Serialize};

use super::{least_slice, Scenario};
use crate::conformal::{
    conformal_descent, positivity_certificate, principal_eigenpair, CertificateReport, ConformalOperator, DescentReport,
    EigenSolution,
};
use crate::error::{Error, Result};
use crate::hypersurface::{induced_geometry, GraphHypersurface};
use crate::metric::{slice_metric, AmbientManifold, End, MetricField};
use crate::solver::{solve_minimal_graph, SolveDiagnostics};
use crate::stability::{intrinsic_mirror, second_variation_form, stability_spectrum, StabilitySpectrum};

/// Pipeline stages, in the order they run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Collar,
    Minimize,
    Restrict,
    Stability,
    Eigenpair,
    Descent,
    Certificate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Collar => "collar",
            Stage::Minimize => "minimize",
            Stage::Restrict => "restrict",
            Stage::Stability => "stability",
            Stage::Eigenpair => "eigenpair",
            Stage::Descent => "descent",
            Stage::Certificate => "certificate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub passed: bool,
    pub error: Option<String>,
}

/// The boundary metric `h_i` on one end of the minimal hypersurface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestrictionRecord {
    pub end: End,
    pub dim: usize,
    pub volume: f64,
}

/// Results of every stage that ran; a failed stage is the last entry.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BordismCertificate {
    pub length: f64,
    pub limit_height: f64,
    pub stages: Vec<StageRecord>,
    pub minimizer: Option<SolveDiagnostics>,
    pub restrictions: Vec<RestrictionRecord>,
    pub stability: Option<StabilitySpectrum>,
    pub eigenpair: Option<EigenSolution>,
    pub descent: Option<DescentReport>,
    pub certificate: Option<CertificateReport>,
    pub complete: bool,
}

impl BordismCertificate {
    /// The first failed stage as an error.
    pub fn failure(&self) -> Option<Error> {
        self.stages.iter().find(|s| !s.passed).map(|s| Error::StageFailed {
            stage: s.stage.name().into(),
            cause: s.error.clone().unwrap_or_default(),
        })
    }
}

/// Geometric objects produced along the way.
#[derive(Clone, Debug, Default)]
pub struct PipelineArtifacts {
    pub ambient: Option<AmbientManifold>,
    pub graph: Option<GraphHypersurface>,
    pub restrictions: Vec<MetricField>,
    pub descended: Option<MetricField>,
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub certificate: BordismCertificate,
    pub artifacts: PipelineArtifacts,
}

/// Collar, minimize, restrict to the boundary, check stability, solve the
/// conformal eigenproblem on the hypersurface, descend and certify the sign.
///
/// Uses the longest collar of the scenario. Only an invalid scenario is an
/// error; a failing stage stops the run and is recorded in the certificate.
pub fn bordism_pipeline(scenario: &Scenario) -> Result<PipelineOutcome> {
    scenario.validate()?;
    let length = *scenario.lengths.last().expect("validated");
    let (limit, _) = least_slice(&scenario.ambient, scenario.graph_axis, scenario.end, scenario.slice_samples)?;
    let mut run = Run {
        cert: BordismCertificate {
            length,
            limit_height: limit,
            stages: Vec::new(),
            minimizer: None,
            restrictions: Vec::new(),
            stability: None,
            eigenpair: None,
            descent: None,
            certificate: None,
            complete: false,
        },
        artifacts: PipelineArtifacts::default(),
    };
    run.cert.complete = run.stages(scenario, length, limit).is_some();
    Ok(PipelineOutcome { certificate: run.cert, artifacts: run.artifacts })
}

struct Run {
    cert: BordismCertificate,
    artifacts: PipelineArtifacts,
}

impl Run {
    fn record<T>(&mut self, stage: Stage, r: Result<T>) -> Option<T> {
        let error = r.as_ref().err().map(|e| e.to_string());
        if let Some(e) = &error {
            log::warn!("stage {} failed: {e}", stage.name());
        }
        self.cert.stages.push(StageRecord { stage, passed: error.is_none(), error });
        r.ok()
    }

    fn stages(&mut self, sc: &Scenario, length: f64, limit: f64) -> Option<()> {
        let amb = self.record(Stage::Collar, sc.ambient.attach_collar(sc.end, length))?;
        self.artifacts.ambient = Some(amb.clone());

        let solved = GraphHypersurface::constant(&amb, sc.graph_axis, limit)
            .and_then(|init| solve_minimal_graph(&amb, &init, &sc.solver));
        let (graph, diag) = self.record(Stage::Minimize, solved)?;
        self.cert.minimizer = Some(diag);
        self.artifacts.graph = Some(graph.clone());

        let restricted = induced_geometry(&graph, &amb).and_then(|geo| {
            let t = amb.collar_axis().and_then(|a| graph.base_axis(a)).ok_or(Error::NoBoundary)?;
            let slices = [End::Y0, End::Y1].map(|end| slice_metric(&geo.induced_metric, t, end));
            let [s0, s1] = slices;
            Ok((geo, vec![s0?, s1?]))
        });
        let (geo, slices) = self.record(Stage::Restrict, restricted)?;
        for (end, s) in [End::Y0, End::Y1].into_iter().zip(&slices) {
            self.cert.restrictions.push(RestrictionRecord { end, dim: s.dim(), volume: s.volume() });
        }
        self.artifacts.restrictions = slices;

        let spectrum = second_variation_form(&graph, &amb)
            .and_then(|form| stability_spectrum(&form, sc.stability_modes, &sc.eigen))
            .and_then(|spec| {
                if spec.is_stable {
                    Ok(spec)
                } else {
                    Err(Error::VerificationFailed(format!("unstable: lowest Jacobi eigenvalue {:e}", spec.eigenvalues[0])))
                }
            });
        self.cert.stability = Some(self.record(Stage::Stability, spectrum)?);

        let n = geo.induced_metric.dim();
        let pair = ConformalOperator::assemble_mirrored(&geo.induced_metric, n, intrinsic_mirror(&graph, &amb))
            .and_then(|op| principal_eigenpair(&op, &sc.eigen).map(|sol| (op, sol)));
        let (op, sol) = self.record(Stage::Eigenpair, pair)?;
        self.cert.eigenpair = Some(sol.clone());

        let (descended, report) = self.record(Stage::Descent, conformal_descent(&op, &sol, &sc.descent))?;
        self.cert.descent = Some(report);
        self.artifacts.descended = Some(descended);

        self.cert.certificate = Some(self.record(Stage::Certificate, positivity_certificate(&op, &sc.certificate))?);
        Some(())
    }
}
