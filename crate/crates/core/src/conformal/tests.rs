use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::scenarios::flat_slab;

fn torus(k: usize, ext: f64) -> Grid {
    Grid::new(&[k, k, k], &[ext; 3], &[true; 3]).unwrap()
}

pub(super) fn perturbed_torus(k: usize) -> MetricField {
    crate::scenarios::perturbed_torus(k, 0.3).unwrap()
}

fn smooth(grid: &Grid, rng: &mut ChaCha8Rng) -> Vec<f64> {
    random_conformal_factor(grid, 1.0, rng).into_values()
}

#[test]
fn flat_operator_is_minus_laplacian() {
    let errs: Vec<f64> = [16usize, 32]
        .iter()
        .map(|&k| {
            let g = torus(k, 1.0);
            let op = assemble_operator(&MetricField::flat(&g), 3).unwrap();
            let f = Field::scalar_from_fn(&g, |x| (TAU * x[0]).sin());
            let af = op.matrix().matvec(f.values());
            (0..g.len())
                .map(|p| (af[p] / op.mass[p] - TAU * TAU * f.values()[p]).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let order = (errs[0] / errs[1]).log2();
    assert!(errs[1] < 0.2 && order > 1.8 && order < 2.2, "{errs:?}");
}

#[test]
fn assembly_is_symmetric_and_robin_vanishes_on_flat_slabs() {
    let op = assemble_operator(&perturbed_torus(8), 3).unwrap();
    let a = op.matrix();
    let scale = (0..a.n()).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
    assert!(a.asymmetry() <= 1e-12 * scale);

    let flat = flat_slab(3, 8, 9, 1.0).unwrap();
    let op = assemble_operator(flat.metric(), 3).unwrap();
    assert_eq!(op.boundary.len(), 2 * 64);
    assert!(op.boundary.iter().all(|b| b.weight == 0.0));
    let (a, k) = (op.matrix(), &op.stiffness);
    for p in 0..a.n() {
        for (r, v) in a.column(p) {
            assert_eq!(v, k.get(r, p));
        }
    }
    assert!(matches!(assemble_operator(&MetricField::flat(&Grid::new(&[8, 8], &[1.0, 1.0], &[true; 2]).unwrap()), 2), Err(Error::UnsupportedDimension(2))));
}

#[test]
fn rayleigh_quotient_paths_agree() {
    let g = torus(8, TAU);
    let flat = assemble_operator(&MetricField::flat(&g), 3).unwrap();
    assert!(rayleigh_quotient(&flat, &vec![2.0; g.len()]).unwrap().abs() <= 1e-14);
    assert_eq!(rayleigh_quotient(&flat, &vec![0.0; g.len()]), Err(Error::ZeroFunction));

    let r = Field::scalar(&g, vec![6.0; g.len()]).unwrap();
    let syn = flat.clone().with_scalar_curvature(&r).unwrap();
    assert!((rayleigh_quotient(&syn, &vec![0.7; g.len()]).unwrap() - 6.0 * syn.c_n()).abs() <= 1e-12);

    let op = assemble_operator(&perturbed_torus(8), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let phi: Vec<f64> = (0..g.len()).map(|_| rng.random::<f64>() - 0.3).collect();
        let q = rayleigh_quotient(&op, &phi).unwrap();
        let other = op.matrix().bilinear(&phi, &phi) / op.mass_norm2(&phi);
        assert!((q - other).abs() <= 1e-12 * q.abs().max(1.0), "{q} vs {other}");
    }
}

#[test]
fn trivial_eigenpairs() {
    let g = torus(8, TAU);
    let flat = assemble_operator(&MetricField::flat(&g), 3).unwrap();
    let s = principal_eigenpair(&flat, &EigenOptions::default()).unwrap();
    assert!(s.lambda1.abs() <= 1e-8);
    assert!(s.phi().values().iter().all(|v| (v - 1.0).abs() <= 1e-8));

    let r = Field::scalar(&g, vec![2.5; g.len()]).unwrap();
    let syn = flat.with_scalar_curvature(&r).unwrap();
    let s = principal_eigenpair(&syn, &EigenOptions::default()).unwrap();
    assert!((s.lambda1 - 2.5 * syn.c_n()).abs() <= 1e-8);
    assert!(s.phi().values().iter().all(|v| (v - 1.0).abs() <= 1e-8));
}

#[test]
fn perturbed_torus_matches_dense_oracle_and_minimizes_rayleigh() {
    let op = assemble_operator(&perturbed_torus(10), 3).unwrap();
    let s = principal_eigenpair(&op, &EigenOptions::default()).unwrap();
    let dense = dense_conformal_spectrum(&op).unwrap();
    assert!((s.lambda1 - dense[0]).abs() <= 1e-8 * dense[0].abs().max(1.0), "{} vs {}", s.lambda1, dense[0]);
    assert!(s.lambda1 < 0.0 && s.min_phi > 0.0);
    let phi = s.phi().values();
    assert!((phi.iter().cloned().fold(f64::MIN, f64::max) - 1.0).abs() <= 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut best = f64::INFINITY;
    for _ in 0..100 {
        let psi = smooth(op.grid(), &mut rng);
        let trial: Vec<f64> = phi.iter().zip(&psi).map(|(a, b)| a + 1e-3 * b).collect();
        let q = rayleigh_quotient(&op, &trial).unwrap();
        assert!(q >= s.lambda1 - 1e-12);
        best = best.min(q);
    }
    assert!(best - s.lambda1 <= 1e-6, "{best} vs {}", s.lambda1);
}

#[test]
fn descent_identities() {
    // constant R: φ ≡ 1 and the metric comes back unchanged
    let g = torus(8, TAU);
    let flat = MetricField::flat(&g);
    let r = Field::scalar(&g, vec![1.0; g.len()]).unwrap();
    let syn = assemble_operator(&flat, 3).unwrap().with_scalar_curvature(&r).unwrap();
    let s = principal_eigenpair(&syn, &EigenOptions::default()).unwrap();
    let (h, rep) = conformal_descent(&syn, &s, &DescentOptions::default()).unwrap();
    assert!(h.values().iter().zip(flat.values()).all(|(a, b)| (a - b).abs() <= 1e-12));
    assert!(rep.curvature_residual.is_none() && (rep.target - 1.0).abs() <= 1e-8);

    // flat: λ₁ = 0 and R_h̃ ≡ 0
    let op = assemble_operator(&flat, 3).unwrap();
    let s = principal_eigenpair(&op, &EigenOptions::default()).unwrap();
    let (_, rep) = conformal_descent(&op, &s, &DescentOptions::default()).unwrap();
    assert!(rep.curvature_residual.unwrap() <= 1e-10);

    // perturbed slab with totally geodesic product ends
    let op = assemble_operator(&crate::scenarios::perturbed_slab(16, 17, 0.3).unwrap(), 3).unwrap();
    assert_eq!(op.mirror(), Some(2));
    let s = principal_eigenpair(&op, &EigenOptions::default()).unwrap();
    let (_, rep) = conformal_descent(&op, &s, &DescentOptions::default()).unwrap();
    assert!(rep.boundary_mean_curvature.unwrap() <= 1e-6, "{rep:?}");
    assert!(rep.identity_residual <= 1e-6 && rep.boundary_identity <= 1e-6, "{rep:?}");
    assert!(s.lambda1 < 0.0 && rep.sign_agrees == Some(true), "{rep:?}");
}

#[test]
fn direct_curvature_of_descended_metric_converges() {
    let errs: Vec<f64> = [12usize, 24]
        .iter()
        .map(|&k| {
            let op = assemble_operator(&perturbed_torus(k), 3).unwrap();
            let s = principal_eigenpair(&op, &EigenOptions::default()).unwrap();
            let (_, rep) = conformal_descent(&op, &s, &DescentOptions::default()).unwrap();
            rep.curvature_residual.unwrap()
        })
        .collect();
    assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
}

#[test]
fn certificates() {
    let g = torus(8, TAU);
    let flat = assemble_operator(&MetricField::flat(&g), 3).unwrap();
    let opts = CertificateOptions { trials: 4, ..Default::default() };

    // without an error estimate a 1e−6 band cannot absorb the O(h²) drift of
    // rescaled flat tori, and the disagreement is reported
    let bare = CertificateOptions { error_estimate: false, ..opts.clone() };
    assert!(matches!(positivity_certificate(&flat, &bare), Err(Error::SignDisagreement(_))));
    let worst: Vec<f64> = [12usize, 24]
        .iter()
        .map(|&k| {
            let f = assemble_operator(&MetricField::flat(&torus(k, TAU)), 3).unwrap();
            let rep = positivity_certificate(&f, &opts).unwrap();
            assert_eq!(rep.certificate, Sign::Zero);
            assert!(rep.base.lambda1.abs() <= 1e-8);
            rep.trials.iter().map(|t| t.lambda1.abs()).fold(0.0, f64::max)
        })
        .collect();
    assert!(worst[0] / worst[1] > 3.0, "{worst:?}");

    let r = Field::scalar(&g, vec![1.0; g.len()]).unwrap();
    let syn = flat.with_scalar_curvature(&r).unwrap();
    let rep = positivity_certificate(&syn, &opts).unwrap();
    assert_eq!(rep.certificate, Sign::Positive);

    let op = assemble_operator(&crate::scenarios::perturbed_torus(12, 1.0).unwrap(), 3).unwrap();
    let rep = positivity_certificate(&op, &opts).unwrap();
    assert_eq!(rep.certificate, Sign::Negative, "{rep:?}");
}
