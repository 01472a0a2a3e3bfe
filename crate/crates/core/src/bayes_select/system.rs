use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CscMatrix;

use crate::field_io::TimeFactor;
use crate::grid_fem::{AffineOperators, TimeGrid};
use crate::linalg::{csc_mul_transpose, csr_mul, csr_times_csc, transpose_product};
use crate::obs::ObservationMatrix;
use crate::{Error, Result};

/// Affine residual and observation maps of one interval, kept in Gram form:
/// `|K beta - b|^2 = beta^T G beta - 2 beta^T K^T b + b^T b`.
#[derive(Clone, Debug)]
pub struct ResidualSystem {
    pub interval: usize,
    /// `K^T K` over all additional columns.
    pub gram: Arc<DMatrix<f64>>,
    /// `K^T b`.
    pub ktb: DVector<f64>,
    /// `b^T b`.
    pub btb: f64,
    /// `S = D P_add` at the interval end.
    pub s: Arc<DMatrix<f64>>,
    /// `Y - D u_fix(T_n)`.
    pub g: DVector<f64>,
    /// Residual functional of the fixed solution tested with each column.
    pub corr: DVector<f64>,
    /// Region owning each column.
    pub col_region: Arc<Vec<usize>>,
    pub n_regions: usize,
    /// `|P_perm^T b|` (zero up to round-off for a Galerkin fixed solve).
    pub perm_projection: f64,
}

impl ResidualSystem {
    /// Builds a system from explicit dense `K, b, S, g`; `corr = K^T b`.
    pub fn from_dense(
        k: &DMatrix<f64>,
        b: &DVector<f64>,
        s: &DMatrix<f64>,
        g: &DVector<f64>,
        col_region: Vec<usize>,
        n_regions: usize,
    ) -> Self {
        let ktb = k.tr_mul(b);
        Self {
            interval: 0,
            gram: Arc::new(k.tr_mul(k)),
            corr: ktb.clone(),
            ktb,
            btb: b.norm_squared(),
            s: Arc::new(s.clone()),
            g: g.clone(),
            col_region: Arc::new(col_region),
            n_regions,
            perm_projection: 0.0,
        }
    }

    pub fn n_cols(&self) -> usize {
        self.ktb.len()
    }

    pub fn b_norm(&self) -> f64 {
        self.btb.sqrt()
    }

    pub fn g_norm(&self) -> f64 {
        self.g.norm()
    }

    /// `|K_a beta - b|^2`.
    pub fn residual_sq(&self, cols: &[usize], beta: &[f64]) -> f64 {
        let mut quad = 0.0;
        let mut lin = 0.0;
        for (p, (&i, &bi)) in cols.iter().zip(beta).enumerate() {
            let mut row = 0.0;
            for (&j, &bj) in cols.iter().zip(beta).take(p) {
                row += self.gram[(i, j)] * bj;
            }
            quad += bi * (2.0 * row + self.gram[(i, i)] * bi);
            lin += bi * self.ktb[i];
        }
        (quad - 2.0 * lin + self.btb).max(0.0)
    }

    /// `S_a beta - g`.
    pub fn mismatch(&self, cols: &[usize], beta: &[f64]) -> DVector<f64> {
        let mut e = -self.g.clone();
        for (&c, &b) in cols.iter().zip(beta) {
            e += self.s.column(c) * b;
        }
        e
    }

    pub fn mismatch_sq(&self, cols: &[usize], beta: &[f64]) -> f64 {
        self.mismatch(cols, beta).norm_squared()
    }
}

/// Interval-independent blocks `(T_p Phi)^T (T_q Phi)` with `T` ranging over
/// the affine stiffness terms followed by the mass matrix.
#[derive(Clone, Debug)]
pub struct GramPieces {
    factors: Vec<TimeFactor>,
    blocks: Vec<Vec<DMatrix<f64>>>,
}

impl GramPieces {
    pub fn new(ops: &AffineOperators, phi: &CscMatrix<f64>) -> Self {
        let mut images: Vec<CscMatrix<f64>> = ops.terms.iter().map(|(_, a)| csr_times_csc(a, phi)).collect();
        images.push(csr_times_csc(&ops.mass, phi));
        let blocks = (0..images.len())
            .map(|p| (p..images.len()).map(|q| transpose_product(&images[p], &images[q])).collect())
            .collect();
        Self { factors: ops.terms.iter().map(|(f, _)| *f).collect(), blocks }
    }

    fn block(&self, p: usize, q: usize) -> &DMatrix<f64> {
        &self.blocks[p][q - p]
    }

    /// `K^T K` for interval `n`.
    pub fn gram(&self, time: &TimeGrid, n: usize) -> DMatrix<f64> {
        let nt = self.factors.len();
        let mass = nt;
        let dt = time.dt;
        let dim = self.blocks[0][0].nrows();
        let mut coef = DMatrix::<f64>::zeros(nt, nt);
        for m in time.interval_steps(n) {
            let c: Vec<f64> = self.factors.iter().map(|f| f.eval(time.time(m))).collect();
            for p in 0..nt {
                for q in 0..nt {
                    coef[(p, q)] += dt * c[p] * c[q];
                }
            }
        }
        let first = time.time(*time.interval_steps(n).start());
        let mut g = DMatrix::zeros(dim, dim);
        for p in 0..nt {
            g += self.block(p, p) * coef[(p, p)];
            for q in p + 1..nt {
                let w = self.block(p, q) * (coef[(p, q)]);
                g += &w + w.transpose();
            }
            let w = self.block(p, mass) * self.factors[p].eval(first);
            g += &w + w.transpose();
        }
        g += self.block(mass, mass) / dt;
        (&g + g.transpose()) * 0.5
    }
}

/// Shared inputs for assembling the residual systems of one interval.
pub struct IntervalInputs<'a> {
    pub ops: &'a AffineOperators,
    pub time: &'a TimeGrid,
    pub interval: usize,
    pub p_perm: &'a CscMatrix<f64>,
    pub p_add: &'a CscMatrix<f64>,
    pub gram: Arc<DMatrix<f64>>,
    pub s: Arc<DMatrix<f64>>,
    pub col_region: Arc<Vec<usize>>,
    pub n_regions: usize,
    pub obs: &'a ObservationMatrix,
    pub data: &'a DVector<f64>,
}

/// Residual system of a fixed trajectory. `fixed[0]` is the state carried in
/// from the previous interval, `fixed[k]` the fixed solution after step `k`.
///
/// Step blocks are `b_m = sqrt(dt) [F - M (u_m - u_{m-1}) / dt - A_m u_m]` and
/// `K_m = sqrt(dt) [A_m + [m first] M / dt] P_add`.
pub fn build_residual_system(inp: &IntervalInputs<'_>, fixed: &[DVector<f64>]) -> Result<ResidualSystem> {
    let steps: Vec<usize> = inp.time.interval_steps(inp.interval).collect();
    if fixed.len() != steps.len() + 1 {
        return Err(Error::Sequencing(format!(
            "interval {} needs the carried state plus {} fixed states, got {} vectors",
            inp.interval,
            steps.len(),
            fixed.len()
        )));
    }
    let dt = inp.time.dt;
    let n = inp.ops.load.len();
    let mut btb = 0.0;
    let mut k_side = DVector::zeros(n);
    let mut r_sum = DVector::zeros(n);
    let mut perm_sq = 0.0;
    for (k, &m) in steps.iter().enumerate() {
        let t = inp.time.time(m);
        let du = &fixed[k + 1] - &fixed[k];
        let au = inp.ops.apply_stiffness(t, &fixed[k + 1]);
        let r = &inp.ops.load - inp.ops.apply_mass(&du) / dt - au;
        btb += dt * r.norm_squared();
        perm_sq += dt * csc_mul_transpose(inp.p_perm, r.as_slice()).norm_squared();
        k_side += inp.ops.apply_stiffness(t, &r) * dt;
        if k == 0 {
            k_side += csr_mul(&inp.ops.mass, &r);
        }
        r_sum.axpy(dt, &r, 1.0);
    }
    let ktb = csc_mul_transpose(inp.p_add, k_side.as_slice());
    let corr = csc_mul_transpose(inp.p_add, r_sum.as_slice());
    let g = inp.data - inp.obs.apply_dofs(fixed.last().unwrap().as_slice());
    Ok(ResidualSystem {
        interval: inp.interval,
        gram: inp.gram.clone(),
        ktb,
        btb,
        s: inp.s.clone(),
        g,
        corr,
        col_region: inp.col_region.clone(),
        n_regions: inp.n_regions,
        perm_projection: perm_sq.sqrt(),
    })
}
