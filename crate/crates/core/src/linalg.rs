//! Dense and sparse linear algebra helpers shared by the solver modules.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CscMatrix, CsrMatrix};

use crate::{Error, Result};

/// Eigenpairs of a symmetric-definite pencil `A v = lambda S v`.
#[derive(Clone, Debug)]
pub struct GeneralizedEigen {
    /// Eigenvalues in ascending order.
    pub values: DVector<f64>,
    /// `S`-orthonormal eigenvectors stored column-wise, matching `values`.
    pub vectors: DMatrix<f64>,
}

/// Solves the dense generalized symmetric eigenproblem `A v = lambda S v`
/// with `S` symmetric positive definite.
///
/// Eigenvalues come back ascending; each eigenvector is normalized so that
/// `v^T S v = 1` and its first significant entry is positive.
pub fn generalized_symmetric_eigen(a: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<GeneralizedEigen> {
    let n = a.nrows();
    if a.ncols() != n || s.nrows() != n || s.ncols() != n {
        return Err(Error::Config(format!(
            "pencil shape mismatch: A is {}x{}, S is {}x{}",
            a.nrows(),
            a.ncols(),
            s.nrows(),
            s.ncols()
        )));
    }
    let chol = s
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("mass matrix of the pencil is not positive definite".into()))?;
    let l = chol.l();
    // C = L^{-1} A L^{-T}
    let mut c = a.clone();
    l.solve_lower_triangular_mut(&mut c);
    let mut ct = c.transpose();
    l.solve_lower_triangular_mut(&mut ct);
    let c = (&ct + ct.transpose()) * 0.5;

    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let mut values = DVector::zeros(n);
    let mut y = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        y.set_column(dst, &eig.eigenvectors.column(src));
    }
    // v = L^{-T} y
    let lt = l.transpose();
    lt.solve_upper_triangular_mut(&mut y);
    for mut col in y.column_iter_mut() {
        fix_sign(col.as_mut_slice());
    }
    Ok(GeneralizedEigen { values, vectors: y })
}

/// Flips `v` so that its first entry of significant magnitude is positive.
pub fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * max) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// `y = A x` for a CSR matrix.
pub fn csr_mul(a: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(a.nrows());
    csr_mul_into(a, x.as_slice(), y.as_mut_slice());
    y
}

pub fn csr_mul_into(a: &CsrMatrix<f64>, x: &[f64], y: &mut [f64]) {
    let offsets = a.row_offsets();
    let cols = a.col_indices();
    let vals = a.values();
    for (i, yi) in y.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in offsets[i]..offsets[i + 1] {
            acc += vals[k] * x[cols[k]];
        }
        *yi = acc;
    }
}

/// `y = P c` for a column-sparse matrix.
pub fn csc_mul(p: &CscMatrix<f64>, c: &[f64]) -> DVector<f64> {
    let mut y = DVector::zeros(p.nrows());
    for (j, &cj) in c.iter().enumerate() {
        if cj == 0.0 {
            continue;
        }
        let col = p.col(j);
        for (&r, &v) in col.row_indices().iter().zip(col.values()) {
            y[r] += v * cj;
        }
    }
    y
}

/// `y = P c` restricted to the listed columns (`c[k]` multiplies column `cols[k]`).
pub fn csc_mul_subset(p: &CscMatrix<f64>, cols: &[usize], c: &[f64]) -> DVector<f64> {
    let mut y = DVector::zeros(p.nrows());
    for (&j, &cj) in cols.iter().zip(c) {
        let col = p.col(j);
        for (&r, &v) in col.row_indices().iter().zip(col.values()) {
            y[r] += v * cj;
        }
    }
    y
}

/// `y = P^T x` for a column-sparse matrix.
pub fn csc_mul_transpose(p: &CscMatrix<f64>, x: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        p.ncols(),
        (0..p.ncols()).map(|j| {
            let col = p.col(j);
            col.row_indices().iter().zip(col.values()).map(|(&r, &v)| v * x[r]).sum::<f64>()
        }),
    )
}

/// Dense `P^T Q` for two column-sparse matrices with the same row space.
///
/// Accumulates row-wise outer products, so the cost is proportional to the
/// number of overlapping nonzero pairs rather than to the dense size.
pub fn transpose_product(p: &CscMatrix<f64>, q: &CscMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(p.nrows(), q.nrows());
    let p_rows = CsrMatrix::from(p);
    let mut out = DMatrix::zeros(p.ncols(), q.ncols());
    for j in 0..q.ncols() {
        let col = q.col(j);
        let mut out_col = out.column_mut(j);
        for (&r, &qv) in col.row_indices().iter().zip(col.values()) {
            let row = p_rows.row(r);
            for (&i, &pv) in row.col_indices().iter().zip(row.values()) {
                out_col[i] += pv * qv;
            }
        }
    }
    out
}

/// Sparse product `A P` where `A` is CSR and `P` is column-sparse.
pub fn csr_times_csc(a: &CsrMatrix<f64>, p: &CscMatrix<f64>) -> CscMatrix<f64> {
    let n = a.nrows();
    let a_csc = CscMatrix::from(a);
    let mut work = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut mark = vec![false; n];
    let mut offsets = Vec::with_capacity(p.ncols() + 1);
    let mut rows = Vec::new();
    let mut vals = Vec::new();
    offsets.push(0);
    for j in 0..p.ncols() {
        let col = p.col(j);
        for (&k, &pv) in col.row_indices().iter().zip(col.values()) {
            let acol = a_csc.col(k);
            for (&r, &av) in acol.row_indices().iter().zip(acol.values()) {
                if !mark[r] {
                    mark[r] = true;
                    touched.push(r);
                }
                work[r] += av * pv;
            }
        }
        touched.sort_unstable();
        for &r in &touched {
            rows.push(r);
            vals.push(work[r]);
            work[r] = 0.0;
            mark[r] = false;
        }
        touched.clear();
        offsets.push(rows.len());
    }
    CscMatrix::try_from_csc_data(n, p.ncols(), offsets, rows, vals).expect("valid CSC construction")
}

/// Sparse Cholesky factor of a symmetric positive definite CSR matrix.
pub struct SparseSpd {
    factor: CscCholesky<f64>,
}

impl SparseSpd {
    pub fn factor(a: &CsrMatrix<f64>) -> Result<Self> {
        // Symmetric: the CSR arrays are also valid CSC arrays.
        let csc = CscMatrix::try_from_csc_data(
            a.nrows(),
            a.ncols(),
            a.row_offsets().to_vec(),
            a.col_indices().to_vec(),
            a.values().to_vec(),
        )
        .map_err(|e| Error::Numerical(format!("invalid sparse matrix: {e}")))?;
        let factor = CscCholesky::factor(&csc)
            .map_err(|e| Error::Numerical(format!("sparse Cholesky failed: {e:?}")))?;
        Ok(Self { factor })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let x = self.factor.solve(b);
        DVector::from_column_slice(x.as_slice())
    }
}

/// Cholesky factor of a dense SPD matrix that supports appending a trailing
/// row/column and deleting an arbitrary one, both in `O(k^2)`.
///
/// The factor lives in the leading `k x k` block of a preallocated buffer.
#[derive(Clone, Debug)]
pub struct UpdatableCholesky {
    l: DMatrix<f64>,
    k: usize,
}

impl UpdatableCholesky {
    pub fn with_capacity(cap: usize) -> Self {
        Self { l: DMatrix::zeros(cap.max(1), cap.max(1)), k: 0 }
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    fn grow(&mut self) {
        let cap = self.l.nrows();
        if self.k < cap {
            return;
        }
        let new_cap = 2 * cap;
        let mut l = DMatrix::zeros(new_cap, new_cap);
        l.view_mut((0, 0), (cap, cap)).copy_from(&self.l);
        self.l = l;
    }

    /// Solves `L w = u` over the current factor.
    pub fn forward(&self, u: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut w = u[..k].to_vec();
        for i in 0..k {
            let mut acc = w[i];
            for j in 0..i {
                acc -= self.l[(i, j)] * w[j];
            }
            w[i] = acc / self.l[(i, i)];
        }
        w
    }

    /// Solves `L^T x = y` over the current factor.
    pub fn backward(&self, y: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut x = y[..k].to_vec();
        for i in (0..k).rev() {
            let mut acc = x[i];
            for j in i + 1..k {
                acc -= self.l[(j, i)] * x[j];
            }
            x[i] = acc / self.l[(i, i)];
        }
        x
    }

    /// Solves `L L^T x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }

    /// Appends a trailing row/column given `w = L^{-1} u` and the Schur
    /// complement `s = d - w^T w` (which must be positive).
    pub fn push(&mut self, w: &[f64], s: f64) -> Result<()> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Numerical(format!("nonpositive Schur complement {s:e}")));
        }
        self.grow();
        let k = self.k;
        for (j, &wj) in w.iter().enumerate().take(k) {
            self.l[(k, j)] = wj;
        }
        self.l[(k, k)] = s.sqrt();
        self.k += 1;
        Ok(())
    }

    /// Appends the column `u` (off-diagonal entries against the current
    /// rows) with diagonal `d`.
    pub fn push_column(&mut self, u: &[f64], d: f64) -> Result<()> {
        let w = self.forward(u);
        let s = d - w.iter().map(|x| x * x).sum::<f64>();
        self.push(&w, s)
    }

    /// Removes row/column `p`, restoring triangularity by a rank-one update
    /// of the trailing block.
    pub fn remove(&mut self, p: usize) {
        let k = self.k;
        assert!(p < k);
        let m = k - p - 1;
        let mut x: Vec<f64> = (0..m).map(|i| self.l[(p + 1 + i, p)]).collect();
        for j in 0..m {
            let jj = p + 1 + j;
            let ljj = self.l[(jj, jj)];
            let r = ljj.hypot(x[j]);
            let c = r / ljj;
            let s = x[j] / ljj;
            self.l[(jj, jj)] = r;
            for i in j + 1..m {
                let ii = p + 1 + i;
                let lij = (self.l[(ii, jj)] + s * x[i]) / c;
                x[i] = c * x[i] - s * lij;
                self.l[(ii, jj)] = lij;
            }
        }
        // Shift rows below p up and columns right of p left.
        for i in p..k - 1 {
            for j in 0..=i {
                let src_j = if j < p { j } else { j + 1 };
                self.l[(i, j)] = self.l[(i + 1, src_j)];
            }
        }
        for j in 0..k {
            self.l[(k - 1, j)] = 0.0;
        }
        self.k -= 1;
    }

    /// Dense copy of the current lower factor.
    pub fn lower(&self) -> DMatrix<f64> {
        self.l.view((0, 0), (self.k, self.k)).into_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn generalized_eigen_satisfies_pencil() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(12, &mut rng);
        let s = random_spd(12, &mut rng);
        let eig = generalized_symmetric_eigen(&a, &s).unwrap();
        for j in 0..12 {
            let v = eig.vectors.column(j);
            let r = &a * v - (&s * v) * eig.values[j];
            assert!(r.norm() < 1e-9 * eig.values[j].abs().max(1.0));
            assert!(((v.transpose() * &s * v)[0] - 1.0).abs() < 1e-10);
            if j > 0 {
                assert!(eig.values[j] >= eig.values[j - 1]);
            }
        }
    }

    #[test]
    fn updatable_cholesky_matches_fresh_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_spd(10, &mut rng);
        let mut order: Vec<usize> = Vec::new();
        let mut f = UpdatableCholesky::with_capacity(2);
        for c in [3, 7, 1, 0, 9, 4, 5] {
            let u: Vec<f64> = order.iter().map(|&r| h[(r, c)]).collect();
            f.push_column(&u, h[(c, c)]).unwrap();
            order.push(c);
        }
        f.remove(2);
        order.remove(2);
        f.remove(0);
        order.remove(0);
        let sub = DMatrix::from_fn(order.len(), order.len(), |i, j| h[(order[i], order[j])]);
        let fresh = sub.clone().cholesky().unwrap().l();
        assert!((f.lower() - fresh).abs().max() < 1e-12);

        let b: Vec<f64> = (0..order.len()).map(|i| i as f64 - 1.5).collect();
        let x = f.solve(&b);
        let r = &sub * DVector::from_vec(x) - DVector::from_vec(b);
        assert!(r.norm() < 1e-10);
    }

    #[test]
    fn transpose_product_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dense_p = DMatrix::from_fn(20, 5, |_, _| if rng.random_bool(0.3) { rng.random_range(-1.0..1.0) } else { 0.0 });
        let dense_q = DMatrix::from_fn(20, 4, |_, _| if rng.random_bool(0.3) { rng.random_range(-1.0..1.0) } else { 0.0 });
        let p = CscMatrix::from(&dense_p);
        let q = CscMatrix::from(&dense_q);
        let got = transpose_product(&p, &q);
        assert!((got - dense_p.transpose() * &dense_q).abs().max() < 1e-14);

        let dense_a = DMatrix::from_fn(20, 20, |i, j| if (i as i64 - j as i64).abs() <= 2 { (i + 2 * j) as f64 } else { 0.0 });
        let a = CsrMatrix::from(&dense_a);
        let ap = csr_times_csc(&a, &p);
        assert!((DMatrix::from(&ap) - &dense_a * &dense_p).abs().max() < 1e-12);
    }
}
