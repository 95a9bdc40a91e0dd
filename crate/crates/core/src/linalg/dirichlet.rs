//! Discrete Dirichlet energy `∫ ρ g^{ab} ∂_aφ ∂_bφ` on a tensor grid.
//!
//! Diagonal terms live on grid edges (difference quotient times the edge
//! average of `ρ g^{aa}`), off-diagonal terms on the faces spanned by two
//! axes (face-centred gradients times the corner average of `ρ g^{ab}`).
//! Every edge and face carries the product of the trapezoid/rectangle
//! weights of the axes it does not span, so the form is symmetric, kills
//! constants, and a grid mirrored across a bounded end reproduces twice the
//! original energy of even data exactly.

use super::sparse::CscMatrix;
use crate::field::Grid;

/// Stiffness matrix for per-node coefficients `coef` (`n×n` row-major
/// blocks of `ρ g^{ab}`, `n = grid.ndim()`).
pub fn dirichlet_stiffness(grid: &Grid, coef: &[f64]) -> CscMatrix {
    let n = grid.ndim();
    let nn = n * n;
    assert_eq!(coef.len(), grid.len() * nn);
    let h = grid.spacing();
    let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(grid.len() * (1 + 4 * n + 8 * n * n));
    for p in 0..grid.len() {
        // the diagonal is always structurally present
        trip.push((p, p, 0.0));
        for a in 0..n {
            let Some(q) = grid.shift(p, a, 1) else { continue };
            let kappa = 0.5 * (coef[p * nn + a * n + a] + coef[q * nn + a * n + a]);
            let w = grid.node_weight_except(p, &[a]) * kappa / h[a];
            trip.extend_from_slice(&[(p, p, w), (q, q, w), (p, q, -w), (q, p, -w)]);
        }
        for a in 0..n {
            for b in a + 1..n {
                let (Some(pa), Some(pb)) = (grid.shift(p, a, 1), grid.shift(p, b, 1)) else { continue };
                let pab = grid.shift(pa, b, 1).expect("face corner");
                let corners = [p, pa, pb, pab];
                let g = 0.25 * corners.iter().map(|&c| coef[c * nn + a * n + b]).sum::<f64>();
                // face-centred derivative coefficients on (p, pa, pb, pab)
                let da = [-0.5 / h[a], 0.5 / h[a], -0.5 / h[a], 0.5 / h[a]];
                let db = [-0.5 / h[b], -0.5 / h[b], 0.5 / h[b], 0.5 / h[b]];
                let w = grid.node_weight_except(p, &[a, b]) * h[a] * h[b] * g;
                for i in 0..4 {
                    for j in 0..4 {
                        let v = w * (da[i] * db[j] + db[i] * da[j]);
                        if v != 0.0 {
                            trip.push((corners[i], corners[j], v));
                        }
                    }
                }
            }
        }
    }
    CscMatrix::from_triplets(grid.len(), &trip)
}

/// Lumped mass `w_p ρ_p` (quadrature weight times density).
pub fn lumped_mass(grid: &Grid, density: &[f64]) -> Vec<f64> {
    density.iter().enumerate().map(|(p, r)| grid.node_weight(p) * r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn flat_energy_converges_and_kills_constants() {
        // φ = cos x cos πt on T¹×[0,1]: ∫|∇φ|² = π/2 + π³/2
        let exact = PI / 2.0 + PI.powi(3) / 2.0;
        let mut errs = Vec::new();
        for k in [16usize, 32, 64] {
            let g = Grid::new(&[k, k + 1], &[TAU, 1.0], &[true, false]).unwrap();
            let coef: Vec<f64> = (0..g.len()).flat_map(|_| [1.0, 0.0, 0.0, 1.0]).collect();
            let kmat = dirichlet_stiffness(&g, &coef);
            assert!(kmat.asymmetry() == 0.0);
            let one = vec![1.0; g.len()];
            assert!(kmat.matvec(&one).iter().all(|v| v.abs() < 1e-12));
            let mut y = [0.0; 2];
            let phi: Vec<f64> = (0..g.len())
                .map(|p| {
                    g.node_coords(p, &mut y);
                    y[0].cos() * (PI * y[1]).cos()
                })
                .collect();
            errs.push((kmat.bilinear(&phi, &phi) - exact).abs());
        }
        let order = (errs[1] / errs[2]).log2();
        assert!(order > 1.8 && order < 2.2, "{errs:?}");
    }

    #[test]
    fn cross_terms_converge_at_second_order() {
        // constant g^{ab} with an off-diagonal entry; φ = sin(x + y)
        // ∫ (1 + 0.6 + 1.2) cos²(x + y) = 2.8 · 2π²
        let exact = 2.8 * 2.0 * PI * PI;
        let errs: Vec<f64> = [24usize, 48]
            .iter()
            .map(|&k| {
                let g = Grid::new(&[k, k], &[TAU, TAU], &[true, true]).unwrap();
                let coef: Vec<f64> = (0..g.len()).flat_map(|_| [1.0, 0.3, 0.3, 1.2]).collect();
                let kmat = dirichlet_stiffness(&g, &coef);
                let mut y = [0.0; 2];
                let phi: Vec<f64> = (0..g.len())
                    .map(|p| {
                        g.node_coords(p, &mut y);
                        (y[0] + y[1]).sin()
                    })
                    .collect();
                (kmat.bilinear(&phi, &phi) - exact).abs() / exact
            })
            .collect();
        let ratio = errs[0] / errs[1];
        assert!(errs[1] < 5e-3 && ratio > 3.5 && ratio < 4.5, "{errs:?}");
    }
}
