//! Independent reference computations for the acceptance criteria.

use msbayes::bayes_select::SamplerConfig;
use msbayes::field_io::PermeabilityField;
use msbayes::grid_fem::{FineGrid, NodeBox};
use msbayes::linalg::{csr_mul, SparseSpd};
use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

/// Unit-square Q1 stiffness and mass / h^2, corners (0,0), (1,0), (1,1), (0,1).
pub const K_REF: [[f64; 4]; 4] = [
    [4.0 / 6.0, -1.0 / 6.0, -2.0 / 6.0, -1.0 / 6.0],
    [-1.0 / 6.0, 4.0 / 6.0, -1.0 / 6.0, -2.0 / 6.0],
    [-2.0 / 6.0, -1.0 / 6.0, 4.0 / 6.0, -1.0 / 6.0],
    [-1.0 / 6.0, -2.0 / 6.0, -1.0 / 6.0, 4.0 / 6.0],
];
pub const M_REF: [[f64; 4]; 4] = [
    [4.0 / 36.0, 2.0 / 36.0, 1.0 / 36.0, 2.0 / 36.0],
    [2.0 / 36.0, 4.0 / 36.0, 2.0 / 36.0, 1.0 / 36.0],
    [1.0 / 36.0, 2.0 / 36.0, 4.0 / 36.0, 2.0 / 36.0],
    [2.0 / 36.0, 1.0 / 36.0, 2.0 / 36.0, 4.0 / 36.0],
];

fn corners(bx: &NodeBox, cx: usize, cy: usize) -> [usize; 4] {
    [bx.local(cx, cy), bx.local(cx + 1, cy), bx.local(cx + 1, cy + 1), bx.local(cx, cy + 1)]
}

/// Double sine series of `-Lap u = 1` on the unit square, at the centre.
pub fn series_centre_max() -> f64 {
    let pi = std::f64::consts::PI;
    let mut s = 0.0;
    for m in (1..2000).step_by(2) {
        for n in (1..2000).step_by(2) {
            let (mf, nf) = (m as f64, n as f64);
            let sign = (mf * pi / 2.0).sin() * (nf * pi / 2.0).sin();
            s += 16.0 / (pi.powi(4) * mf * nf * (mf * mf + nf * nf)) * sign;
        }
    }
    s
}

/// Smallest eigenvalue of `A x = lambda M x` by inverse iteration.
pub fn smallest_eigenvalue(a: &CsrMatrix<f64>, m: &CsrMatrix<f64>) -> f64 {
    let f = SparseSpd::factor(a).unwrap();
    let mut x = DVector::from_element(a.nrows(), 1.0);
    let mut lambda = 0.0;
    for _ in 0..200 {
        let y = f.solve(&csr_mul(m, &x));
        let my = csr_mul(m, &y);
        let next = y.dot(&csr_mul(a, &y)) / y.dot(&my);
        x = &y / my.dot(&y).sqrt();
        if (next - lambda).abs() < 1e-12 * next {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Posterior mode through the SVD pseudo-inverse of the stacked design.
pub fn pinv_mode(k: &DMatrix<f64>, b: &DVector<f64>, s: &DMatrix<f64>, g: &DVector<f64>, cfg: &SamplerConfig) -> DVector<f64> {
    let n = k.ncols();
    let rows = k.nrows() + s.nrows() + n;
    let mut a = DMatrix::zeros(rows, n);
    let mut y = DVector::zeros(rows);
    a.view_mut((0, 0), (k.nrows(), n)).copy_from(&(k / cfg.sigma_l));
    y.rows_mut(0, k.nrows()).copy_from(&(b / cfg.sigma_l));
    a.view_mut((k.nrows(), 0), (s.nrows(), n)).copy_from(&(s / cfg.sigma_d));
    y.rows_mut(k.nrows(), s.nrows()).copy_from(&(g / cfg.sigma_d));
    for i in 0..n {
        a[(k.nrows() + s.nrows() + i, i)] = 1.0 / cfg.prior_var.sqrt();
    }
    a.pseudo_inverse(1e-14).unwrap() * y
}

/// Switch-on probability of column 1 given column 0 on a 2-column, 1-observation
/// system, with both modes written out in closed form.
pub fn two_column_gibbs(k: &DMatrix<f64>, b: &DVector<f64>, s: &DMatrix<f64>, g: &DVector<f64>, alpha: f64, cfg: &SamplerConfig) -> f64 {
    let (sl2, sd2, t) = (cfg.sigma_l.powi(2), cfg.sigma_d.powi(2), 1.0 / cfg.prior_var);
    let (k0, k1) = (k.column(0), k.column(1));
    let (s0, s1, g0) = (s[(0, 0)], s[(0, 1)], g[0]);
    let h00 = k0.dot(&k0) / sl2 + s0 * s0 / sd2 + t;
    let r0 = k0.dot(b) / sl2 + s0 * g0 / sd2;
    let beta_m = r0 / h00;
    let h11 = k1.dot(&k1) / sl2 + s1 * s1 / sd2 + t;
    let h01 = k0.dot(&k1) / sl2 + s0 * s1 / sd2;
    let r1 = k1.dot(b) / sl2 + s1 * g0 / sd2;
    let det = h00 * h11 - h01 * h01;
    let (p0, p1) = ((r0 * h11 - h01 * r1) / det, (h00 * r1 - h01 * r0) / det);
    let rm: f64 = (0..k.nrows()).map(|i| (k0[i] * beta_m - b[i]).powi(2)).sum();
    let rp: f64 = (0..k.nrows()).map(|i| (k0[i] * p0 + k1[i] * p1 - b[i]).powi(2)).sum();
    let em = (s0 * beta_m - g0).powi(2);
    let ep = (s0 * p0 + s1 * p1 - g0).powi(2);
    let odds = alpha / (1.0 - alpha) * (-(rp - rm) / (2.0 * sl2) - (ep - em) / (2.0 * sd2)).exp();
    odds / (1.0 + odds)
}

/// Dense offline pencil on all box nodes, restricted to `keep`.
pub fn offline_pencil(fine: &FineGrid, bx: &NodeBox, kappa: &[f64], kt: &[f64], keep: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = bx.len();
    let (mut a, mut s) = (DMatrix::zeros(n, n), DMatrix::zeros(n, n));
    let h2 = fine.h() * fine.h();
    for cy in bx.y0..bx.y1 {
        for cx in bx.x0..bx.x1 {
            let c = fine.cell(cx, cy);
            let idx = corners(bx, cx, cy);
            for p in 0..4 {
                for q in 0..4 {
                    a[(idx[p], idx[q])] += kappa[c] * K_REF[p][q];
                    s[(idx[p], idx[q])] += kt[c] * h2 * M_REF[p][q];
                }
            }
        }
    }
    (a.select_rows(keep).select_columns(keep), s.select_rows(keep).select_columns(keep))
}

/// Ascending eigenpairs of `A v = lambda S v` by Cholesky reduction.
pub fn pencil_eigen(a: &DMatrix<f64>, s: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let l = s.clone().cholesky().expect("S is positive definite").l();
    let li = l.try_inverse().unwrap();
    let c = &li * a * li.transpose();
    let e = ((&c + c.transpose()) * 0.5).symmetric_eigen();
    let mut order: Vec<usize> = (0..c.nrows()).collect();
    order.sort_by(|&i, &j| e.eigenvalues[i].total_cmp(&e.eigenvalues[j]));
    let vals = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = DMatrix::from_columns(&order.iter().map(|&i| li.transpose() * e.eigenvectors.column(i)).collect::<Vec<_>>());
    (vals, vecs)
}

/// Time-integrated pencil on a snapshot span, trapezoidal in time.
#[allow(clippy::too_many_arguments)]
pub fn spacetime_pencil(
    fine: &FineGrid,
    bx: &NodeBox,
    snaps: &[Vec<f64>],
    f: &PermeabilityField,
    grad_sq: &[f64],
    times: &[f64],
    dt: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = bx.len();
    let k = snaps.len();
    let psi = DMatrix::from_fn(n, k, |i, j| snaps[j][i]);
    let (mut a_n, mut s_n) = (DMatrix::zeros(k, k), DMatrix::zeros(k, k));
    let h2 = fine.h() * fine.h();
    for (q, &t) in times.iter().enumerate() {
        let w = if q == 0 || q == times.len() - 1 { 0.5 * dt } else { dt };
        let kappa = f.modulate(t);
        let (mut a, mut s) = (DMatrix::zeros(n, n), DMatrix::zeros(n, n));
        for cy in bx.y0..bx.y1 {
            for cx in bx.x0..bx.x1 {
                let c = fine.cell(cx, cy);
                let idx = corners(bx, cx, cy);
                for p in 0..4 {
                    for r in 0..4 {
                        a[(idx[p], idx[r])] += kappa[c] * K_REF[p][r];
                        s[(idx[p], idx[r])] += kappa[c] * grad_sq[c] * h2 * M_REF[p][r];
                    }
                }
            }
        }
        a_n += psi.transpose() * a * &psi * w;
        s_n += psi.transpose() * s * &psi * w;
    }
    (a_n, s_n)
}

/// `P(|X - n a| > z sqrt(n a (1 - a)))` for `X ~ Binomial(n, a)`.
pub fn binomial_tail(n: usize, a: f64, z: f64) -> f64 {
    if a <= 0.0 || a >= 1.0 {
        return 0.0;
    }
    let nf = n as f64;
    let half = z * (nf * a * (1.0 - a)).sqrt();
    let mut log_pmf = nf * (1.0 - a).ln();
    let ratio = (a / (1.0 - a)).ln();
    let mut tail = 0.0;
    for k in 0..=n {
        if (k as f64 - nf * a).abs() > half {
            tail += log_pmf.exp();
        }
        if k < n {
            log_pmf += ((n - k) as f64).ln() - ((k + 1) as f64).ln() + ratio;
        }
    }
    tail
}
