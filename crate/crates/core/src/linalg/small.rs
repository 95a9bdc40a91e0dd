//! Tiny dense symmetric matrices (ambient dimension ≤ 8) evaluated per node.

pub const MAX_DIM: usize = 8;

/// In-place Cholesky factor of the row-major `d×d` SPD matrix `a`
/// (lower triangle overwritten). Returns `false` if a pivot is not positive.
pub fn cholesky(a: &mut [f64], d: usize) -> bool {
    for j in 0..d {
        let mut s = a[j * d + j];
        for k in 0..j {
            s -= a[j * d + k] * a[j * d + k];
        }
        if !(s > 0.0) || !s.is_finite() {
            return false;
        }
        let l = s.sqrt();
        a[j * d + j] = l;
        for i in j + 1..d {
            let mut t = a[i * d + j];
            for k in 0..j {
                t -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = t / l;
        }
    }
    true
}

/// Inverse and determinant of a small SPD matrix. `None` if not positive
/// definite.
pub fn spd_inverse(a: &[f64], d: usize, inv: &mut [f64]) -> Option<f64> {
    debug_assert!(d <= MAX_DIM);
    let mut l = [0.0; MAX_DIM * MAX_DIM];
    l[..d * d].copy_from_slice(&a[..d * d]);
    if !cholesky(&mut l[..d * d], d) {
        return None;
    }
    let mut det = 1.0;
    for i in 0..d {
        det *= l[i * d + i] * l[i * d + i];
    }
    // invert column by column: solve L L^T x = e_c
    for c in 0..d {
        let mut y = [0.0; MAX_DIM];
        for i in 0..d {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i * d + k] * y[k];
            }
            y[i] = s / l[i * d + i];
        }
        for i in (0..d).rev() {
            let mut s = y[i];
            for k in i + 1..d {
                s -= l[k * d + i] * inv[k * d + c];
            }
            inv[i * d + c] = s / l[i * d + i];
        }
    }
    // exact symmetry
    for i in 0..d {
        for j in i + 1..d {
            let m = 0.5 * (inv[i * d + j] + inv[j * d + i]);
            inv[i * d + j] = m;
            inv[j * d + i] = m;
        }
    }
    Some(det)
}

/// Determinant of a small SPD matrix through its Cholesky factor.
pub fn spd_det(a: &[f64], d: usize) -> Option<f64> {
    let mut l = [0.0; MAX_DIM * MAX_DIM];
    l[..d * d].copy_from_slice(&a[..d * d]);
    if !cholesky(&mut l[..d * d], d) {
        return None;
    }
    Some((0..d).map(|i| l[i * d + i] * l[i * d + i]).product())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_spd_matrix() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let mut inv = [0.0; 9];
        let det = spd_inverse(&a, 3, &mut inv).unwrap();
        let expected_det = 4.0 * (6.0 - 0.04) - 1.0 * (2.0 - 0.1) + 0.5 * (0.2 - 1.5);
        assert!((det - expected_det).abs() < 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = [1.0, 2.0, 2.0, 1.0];
        let mut inv = [0.0; 4];
        assert!(spd_inverse(&a, 2, &mut inv).is_none());
    }
}
