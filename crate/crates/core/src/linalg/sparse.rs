use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::solvers::Solve;
use faer::perm::Perm;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::{SparseColMat, SparseColMatRef, SymbolicSparseColMatRef, Triplet};
use faer::{Conj, Mat, Par, Side};

use crate::error::{Error, Result};
use crate::field::Grid;

/// Compressed-sparse-column square matrix with sorted, duplicate-free rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CscMatrix {
    /// Build from `(row, col, value)` entries; duplicates are summed in the
    /// order given, so identical inputs give identical matrices.
    pub fn from_triplets(n: usize, entries: &[(usize, usize, f64)]) -> CscMatrix {
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_by_key(|&e| (entries[e].1, entries[e].0, e));
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &e in &order {
            let (r, c, v) = entries[e];
            assert!(r < n && c < n, "entry ({r},{c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                row_idx.push(r);
                vals.push(v);
                col_ptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        CscMatrix { n, col_ptr, row_idx, vals }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Stored `(row, value)` entries of column `c`.
    pub fn column(&self, c: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.col_ptr[c]..self.col_ptr[c + 1];
        self.row_idx[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let rows = &self.row_idx[self.col_ptr[c]..self.col_ptr[c + 1]];
        match rows.binary_search(&r) {
            Ok(k) => self.vals[self.col_ptr[c] + k],
            Err(_) => 0.0,
        }
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for c in 0..self.n {
            let xc = x[c];
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[k]] += self.vals[k] * xc;
            }
        }
        y
    }

    /// xᵀ A y
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    /// Largest |A - Aᵀ| entry.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[k];
                worst = worst.max((self.vals[k] - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// A + diag(d)
    pub fn add_diagonal(&self, d: &[f64]) -> CscMatrix {
        let mut out = self.clone();
        for c in 0..self.n {
            let rows = &self.row_idx[self.col_ptr[c]..self.col_ptr[c + 1]];
            let k = rows.binary_search(&c).expect("diagonal entry must be structurally present");
            out.vals[self.col_ptr[c] + k] += d[c];
        }
        out
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.n * self.n];
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                a[self.row_idx[k] * self.n + c] = self.vals[k];
            }
        }
        a
    }

    fn as_faer(&self) -> SparseColMatRef<'_, usize, f64> {
        let sym = SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.col_ptr, None, &self.row_idx);
        SparseColMatRef::new(sym, &self.vals)
    }
}

/// Nested-dissection ordering of a tensor grid whose matrix couples nodes at
/// Chebyshev distance one. Plane 0 of each periodic axis goes last (it cuts
/// the wrap-around), then boxes are bisected along their longest side.
pub fn nested_dissection(grid: &Grid) -> Vec<usize> {
    let d = grid.ndim();
    let mut lo = vec![0usize; d];
    let hi: Vec<usize> = grid.dims().to_vec();
    for a in 0..d {
        if grid.periodic()[a] {
            lo[a] = 1;
        }
    }
    let mut order = Vec::with_capacity(grid.len());
    dissect(grid, &lo, &hi, &mut order);
    for p in 0..grid.len() {
        if (0..d).any(|a| grid.periodic()[a] && grid.coord_index(p, a) == 0) {
            order.push(p);
        }
    }
    debug_assert_eq!(order.len(), grid.len());
    order
}

fn push_box(grid: &Grid, lo: &[usize], hi: &[usize], out: &mut Vec<usize>) {
    let d = lo.len();
    if (0..d).any(|a| hi[a] <= lo[a]) {
        return;
    }
    let mut idx = lo.to_vec();
    loop {
        out.push(grid.index(&idx));
        let mut a = d;
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < hi[a] {
                break;
            }
            idx[a] = lo[a];
        }
    }
}

fn dissect(grid: &Grid, lo: &[usize], hi: &[usize], out: &mut Vec<usize>) {
    let d = lo.len();
    let ext: Vec<usize> = (0..d).map(|a| hi[a].saturating_sub(lo[a])).collect();
    let total: usize = ext.iter().product();
    if total == 0 {
        return;
    }
    let ax = (0..d).max_by_key(|&a| (ext[a], d - a)).unwrap();
    if ext[ax] <= 2 || total <= 16 {
        push_box(grid, lo, hi, out);
        return;
    }
    let mid = lo[ax] + ext[ax] / 2;
    let mut h1 = hi.to_vec();
    h1[ax] = mid;
    let mut l2 = lo.to_vec();
    l2[ax] = mid + 1;
    dissect(grid, lo, &h1, out);
    dissect(grid, &l2, hi, out);
    let mut sl = lo.to_vec();
    sl[ax] = mid;
    let mut sh = hi.to_vec();
    sh[ax] = mid + 1;
    push_box(grid, &sl, &sh, out);
}

/// Fill-reducing symbolic analysis shared by every matrix with one pattern.
pub struct SpdSymbolic {
    symbolic: Arc<SymbolicCholesky<usize>>,
}

impl SpdSymbolic {
    pub fn analyze(a: &CscMatrix, ordering: Option<&[usize]>) -> Result<SpdSymbolic> {
        let fa = a.as_faer();
        let symbolic = match ordering {
            Some(ord) => {
                let mut inv = vec![0usize; ord.len()];
                for (k, &p) in ord.iter().enumerate() {
                    inv[p] = k;
                }
                let perm = Perm::new_checked(ord.to_vec().into_boxed_slice(), inv.into_boxed_slice(), ord.len());
                factorize_symbolic_cholesky(
                    fa.symbolic(),
                    Side::Lower,
                    SymmetricOrdering::Custom(perm.as_ref()),
                    Default::default(),
                )
            }
            None => factorize_symbolic_cholesky(fa.symbolic(), Side::Lower, SymmetricOrdering::Amd, Default::default()),
        }
        .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        Ok(SpdSymbolic { symbolic: Arc::new(symbolic) })
    }

    /// Numeric Cholesky factor. Fails (without panicking) if the matrix is
    /// not positive definite, which the eigen solver uses to detect a shift
    /// above the lowest eigenvalue.
    pub fn factor(&self, a: &CscMatrix) -> Result<SpdFactor> {
        let mut values = vec![0.0f64; self.symbolic.len_val()];
        let par = Par::Seq;
        let mut buf = MemBuffer::new(self.symbolic.factorize_numeric_llt_scratch::<f64>(par, Default::default()));
        self.symbolic
            .factorize_numeric_llt::<f64>(
                &mut values,
                a.as_faer(),
                Side::Lower,
                Default::default(),
                par,
                MemStack::new(&mut buf),
                Default::default(),
            )
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        Ok(SpdFactor { symbolic: self.symbolic.clone(), values: Arc::new(values) })
    }
}

/// Numeric Cholesky factor; cheap to clone.
#[derive(Clone)]
pub struct SpdFactor {
    symbolic: Arc<SymbolicCholesky<usize>>,
    values: Arc<Vec<f64>>,
}

impl std::fmt::Debug for SpdFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SpdFactor {{ n: {}, nnz: {} }}", self.symbolic.nrows(), self.values.len())
    }
}

impl SpdFactor {
    /// Solve for every column of the column-major `n × k` block `rhs`.
    pub fn solve_block(&self, rhs: &mut [f64], k: usize) {
        let n = self.symbolic.nrows();
        let mut m = Mat::<f64>::from_fn(n, k, |i, j| rhs[j * n + i]);
        let par = Par::Seq;
        let mut buf = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(k, par));
        LltRef::new(&self.symbolic, &self.values).solve_in_place_with_conj(
            Conj::No,
            m.as_mut(),
            par,
            MemStack::new(&mut buf),
        );
        for j in 0..k {
            for i in 0..n {
                rhs[j * n + i] = m[(i, j)];
            }
        }
    }
}

/// Solve a general sparse system once with faer's sparse LU.
pub fn lu_solve(n: usize, entries: &[(usize, usize, f64)], rhs: &[f64]) -> Result<Vec<f64>> {
    let trip: Vec<Triplet<usize, usize, f64>> = entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
    let lu = a.sp_lu().map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
    let b = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
    let x = lu.solve(&b);
    let out: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolve("LU solve produced non-finite values".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize, shift: f64) -> CscMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            t.push((i, (i + 1) % n, -1.0));
            t.push(((i + 1) % n, i, -1.0));
        }
        CscMatrix::from_triplets(n, &t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CscMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (1, 1, 1.0)]);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(1, 0), 2.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn cholesky_solves_and_detects_indefinite() {
        let a = laplacian_1d(10, 0.5);
        let sym = SpdSymbolic::analyze(&a, None).unwrap();
        let f = sym.factor(&a).unwrap();
        let x: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let mut b = a.matvec(&x);
        f.solve_block(&mut b, 1);
        for i in 0..10 {
            assert!((b[i] - x[i]).abs() < 1e-12);
        }
        let bad = a.add_diagonal(&[-1.0; 10]);
        assert!(sym.factor(&bad).is_err());
    }

    #[test]
    fn nested_dissection_is_a_permutation() {
        for (dims, per) in [(vec![7usize, 9], vec![true, false]), (vec![6, 6, 5], vec![true, true, false])] {
            let ext = vec![1.0; dims.len()];
            let g = Grid::new(&dims, &ext, &per).unwrap();
            let mut ord = nested_dissection(&g);
            ord.sort_unstable();
            assert_eq!(ord, (0..g.len()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn lu_solves_nonsymmetric() {
        let e = vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, -1.0), (1, 1, 3.0)];
        let x = lu_solve(2, &e, &[3.0, 2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }
}
