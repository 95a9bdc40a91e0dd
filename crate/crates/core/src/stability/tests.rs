use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::metric::SyntheticCurvature;
use crate::scenarios::{bumpy_slab, flat_slab};
use crate::solver::{default_height, solve_minimal_graph, SolverOptions};

fn solved(amb: &AmbientManifold) -> GraphHypersurface {
    let init = GraphHypersurface::constant(amb, 0, default_height(amb, 0)).unwrap();
    let opts = SolverOptions { residual_tol: 1e-11, ..Default::default() };
    solve_minimal_graph(amb, &init, &opts).unwrap().0
}

/// Smooth random function with even reflection at the collar ends.
fn smooth_random(grid: &Grid, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let nd = grid.ndim();
    let terms: Vec<(Vec<f64>, f64)> =
        (0..4).map(|_| ((0..nd).map(|_| rng.random_range(0..3) as f64).collect(), rng.random::<f64>() - 0.5)).collect();
    let mut y = vec![0.0; nd];
    (0..grid.len())
        .map(|p| {
            grid.node_coords(p, &mut y);
            terms
                .iter()
                .map(|(k, c)| {
                    let mut v = *c;
                    for a in 0..nd {
                        let x = y[a] / grid.extents()[a];
                        v *= if grid.periodic()[a] {
                            (std::f64::consts::TAU * k[a] * x + 0.3 * a as f64).cos()
                        } else {
                            (std::f64::consts::PI * k[a] * x).cos()
                        };
                    }
                    v
                })
                .sum::<f64>()
                + 0.1
        })
        .collect()
}

#[test]
fn flat_cylinder_form_is_the_dirichlet_energy() {
    let amb = flat_slab(3, 12, 9, 1.0).unwrap();
    let g = GraphHypersurface::constant(&amb, 0, 1.0).unwrap();
    let form = second_variation_form(&g, &amb).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let phi = smooth_random(form.grid(), &mut rng);
    let psi = smooth_random(form.grid(), &mut rng);
    assert_eq!(form.eval(&phi), form.dirichlet(&phi));
    assert!((form.bilinear(&phi, &psi) - form.bilinear(&psi, &phi)).abs() <= 1e-12);
    let spec = stability_spectrum(&form, 3, &EigenOptions::default()).unwrap();
    assert!(spec.eigenvalues[0].abs() <= 1e-8 && spec.is_stable);
    let v = spec.eigenfields[0].values();
    assert!(v.iter().all(|x| (x - v[0]).abs() <= 1e-8 * v[0].abs()));
    assert!(spec.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn bumpy_minimizer_is_stable_and_matches_dense_oracle() {
    let amb = bumpy_slab(3, 16, 9, 1.0).unwrap();
    let g = solved(&amb);
    let form = second_variation_form(&g, &amb).unwrap();
    let spec = stability_spectrum(&form, 4, &EigenOptions::default()).unwrap();
    let dense = dense_stability_spectrum(&form).unwrap();
    for (a, b) in spec.eigenvalues.iter().zip(&dense) {
        assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{a} vs {b}");
    }
    assert!(spec.eigenvalues[0] >= -1e-6, "{:?}", spec.eigenvalues);
    assert!(form.operator().asymmetry() <= 1e-12);
}

#[test]
fn injected_ricci_destabilizes() {
    let base = flat_slab(3, 8, 9, 1.0).unwrap();
    let amb = base.with_synthetic(SyntheticCurvature { ricci_offset: 5.0, scalar_offset: 15.0 });
    let g = GraphHypersurface::constant(&amb, 0, 1.0).unwrap();
    let form = second_variation_form(&g, &amb).unwrap();
    let dense = dense_stability_spectrum(&form).unwrap();
    let spec = stability_spectrum(&form, 1, &EigenOptions::default()).unwrap();
    assert!(dense[0] < 0.0 && !spec.is_stable);
    assert!((spec.eigenvalues[0] - dense[0]).abs() <= 1e-8 * dense[0].abs());
}

#[test]
fn gauss_codazzi_flat_and_sphere() {
    let amb = flat_slab(3, 12, 9, 1.0).unwrap();
    let c = GraphHypersurface::constant(&amb, 0, 2.0).unwrap();
    assert!(gauss_codazzi_residual(&c, &amb).unwrap() <= 1e-10);

    let (amb, cap) = crate::scenarios::sphere_cap(128).unwrap();
    let d = gauss_codazzi_defect(&cap, &amb).unwrap();
    let grid = d.grid();
    let mut y = [0.0; 2];
    let mut worst: f64 = 0.0;
    for p in 0..grid.len() {
        grid.node_coords(p, &mut y);
        if (y[0] - 0.7).hypot(y[1] - 0.7) <= 0.6 {
            worst = worst.max(d.values()[p].abs());
        }
    }
    assert!(worst <= 5e-2, "{worst}");
}

#[test]
fn boundary_weight_is_boundary_mean_curvature() {
    // totally geodesic slice of e^{2βt}dx1² + e^{−2βt}dx2² + dt² (boundary H^∂M = 0)
    let beta = 0.3;
    let g = Grid::new(&[16, 8, 33], &[std::f64::consts::TAU, std::f64::consts::TAU, 1.0], &[true, true, false]).unwrap();
    let m = crate::metric::MetricField::from_fn(&g, |x, o| {
        o.fill(0.0);
        o[0] = (2.0 * beta * x[2]).exp();
        o[4] = (-2.0 * beta * x[2]).exp();
        o[8] = 1.0;
    })
    .unwrap();
    let amb = AmbientManifold::new(m, Some(2)).unwrap();
    let graph = GraphHypersurface::constant(&amb, 1, 1.0).unwrap();
    let geo = induced_geometry(&graph, &amb).unwrap();
    let form = QuadraticForm::from_geometry(&geo).unwrap();
    let mut hw = Vec::new();
    for end in [End::Y0, End::Y1] {
        hw.extend_from_slice(boundary_geometry(&geo.induced_metric, 1, end).unwrap().mean_curvature.values());
    }
    for (b, h) in form.boundary.iter().zip(&hw) {
        assert!((b.weight - h).abs() <= 5e-4, "{} vs {h}", b.weight);
    }
}

#[test]
fn gap_paths_agree_and_positive_scalar_curvature_gives_slack() {
    let amb = bumpy_slab(4, 10, 9, 1.0).unwrap();
    let g = solved(&amb);
    let grid = g.base_grid().clone();
    let form = second_variation_form(&g, &amb).unwrap();
    let geo = induced_geometry(&g, &amb).unwrap();
    let c = conformal_constant(3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let phi = smooth_random(&grid, &mut rng);
        let f = Field::scalar(&grid, phi.clone()).unwrap();
        let gap = rewritten_stability_gap(&g, &amb, &f).unwrap();
        let mut extra = 0.0;
        for p in 0..phi.len() {
            let h = geo.mean_curvature.values()[p];
            extra += 0.5
                * form.mass[p]
                * phi[p]
                * phi[p]
                * (geo.ambient_scalar.values()[p] + geo.sff_norm2.values()[p] + h * h);
        }
        let other = 2.0 * c * (form.eval(&phi) + extra);
        assert!((gap.slack - other).abs() <= 1e-8 * other.abs().max(1.0), "{} vs {other}", gap.slack);
        let intrinsic = intrinsic_stability_gap(&g, &amb, &f).unwrap();
        assert!((intrinsic.slack - gap.slack).abs() <= 0.05 * gap.slack.abs().max(1.0));
    }

    // flat cylinder, constant φ: both sides vanish
    let flat = flat_slab(4, 8, 9, 1.0).unwrap();
    let cyl = GraphHypersurface::constant(&flat, 0, 1.0).unwrap();
    let one = Field::scalar(cyl.base_grid(), vec![1.0; cyl.base_grid().len()]).unwrap();
    let gap = rewritten_stability_gap(&cyl, &flat, &one).unwrap();
    assert!(gap.slack.abs() <= 1e-12 && gap.rayleigh_numerator.abs() <= 1e-12);
    assert!(matches!(
        rewritten_stability_gap(&cyl, &flat, &one.map(|_| 0.0)),
        Err(Error::ZeroVariation)
    ));

    // injected R > 0 on a stable graph: strictly positive slack
    let psc = flat.with_synthetic(SyntheticCurvature { ricci_offset: 0.0, scalar_offset: 1.0 });
    for _ in 0..20 {
        let phi = Field::scalar(cyl.base_grid(), smooth_random(cyl.base_grid(), &mut rng)).unwrap();
        assert!(rewritten_stability_gap(&cyl, &psc, &phi).unwrap().slack > 0.0);
    }
}

#[test]
fn doubling_splits_the_form() {
    let amb = bumpy_slab(3, 12, 9, 1.0).unwrap();
    let g = solved(&amb);
    let dbl = Doubling::new(&g, &amb).unwrap();
    let h = induced_geometry(&dbl.graph, &dbl.ambient).unwrap().mean_curvature.sup_norm();
    assert!(h <= 1e-6, "doubled residual {h}");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let phi: Vec<f64> = (0..dbl.form.grid().len()).map(|_| rng.random::<f64>() - 0.5).collect();
        let s = dbl.split(&phi);
        assert!(s.defect() <= 1e-8 * s.doubled.abs().max(1.0), "{s:?}");
    }
}
