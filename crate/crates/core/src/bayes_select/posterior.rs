use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use super::sampler::{gibbs_log_odds, logistic};
use super::{ResidualSystem, SamplerConfig};
use crate::{Error, Result};

const RIDGE_CAP: f64 = 1e-6;

/// Entries of the posterior precision
/// `G / sigma_L^2 + S^T S / sigma_d^2 + shift I` and its right-hand side.
#[derive(Clone, Debug)]
pub struct Precision<'a> {
    pub sys: &'a ResidualSystem,
    pub inv_l2: f64,
    pub inv_d2: f64,
    /// Largest diagonal entry of the data terms; the ridge is relative to it.
    pub scale: f64,
    pub inv_prior: f64,
    pub ridge: f64,
}

impl<'a> Precision<'a> {
    pub fn new(sys: &'a ResidualSystem, cfg: &SamplerConfig) -> Self {
        let inv_l2 = 1.0 / (cfg.sigma_l * cfg.sigma_l);
        let inv_d2 = if cfg.sigma_d.is_finite() { 1.0 / (cfg.sigma_d * cfg.sigma_d) } else { 0.0 };
        let scale = (0..sys.n_cols())
            .map(|j| sys.gram[(j, j)] * inv_l2 + sys.s.column(j).norm_squared() * inv_d2)
            .fold(0.0, f64::max);
        Self { sys, inv_l2, inv_d2, scale: if scale > 0.0 { scale } else { 1.0 }, inv_prior: 1.0 / cfg.prior_var, ridge: cfg.ridge }
    }

    pub fn shift(&self) -> f64 {
        self.inv_prior + self.ridge * self.scale
    }

    fn data_entry(&self, i: usize, j: usize) -> f64 {
        let s = &self.sys.s;
        let sts = if self.inv_d2 > 0.0 { s.column(i).dot(&s.column(j)) * self.inv_d2 } else { 0.0 };
        self.sys.gram[(i, j)] * self.inv_l2 + sts
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data_entry(i, j) + if i == j { self.shift() } else { 0.0 }
    }

    pub fn rhs(&self, i: usize) -> f64 {
        let sg = if self.inv_d2 > 0.0 { self.sys.s.column(i).dot(&self.sys.g) * self.inv_d2 } else { 0.0 };
        self.sys.ktb[i] * self.inv_l2 + sg
    }

    pub fn matrix(&self, cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(cols.len(), cols.len(), |a, b| self.entry(cols[a], cols[b]))
    }

    pub fn rhs_vec(&self, cols: &[usize]) -> DVector<f64> {
        DVector::from_iterator(cols.len(), cols.iter().map(|&c| self.rhs(c)))
    }

    /// Cholesky factor of the precision on `cols`. On failure the ridge grows
    /// tenfold up to a relative cap, after which the failure is reported.
    pub fn factor(&mut self, cols: &[usize]) -> Result<Cholesky<f64, Dyn>> {
        loop {
            if let Some(c) = self.matrix(cols).cholesky() {
                return Ok(c);
            }
            if self.ridge >= RIDGE_CAP {
                return Err(Error::Numerical(format!(
                    "posterior precision on {} columns is not positive definite (ridge {:e})",
                    cols.len(),
                    self.ridge
                )));
            }
            self.ridge = (self.ridge * 10.0).min(RIDGE_CAP).max(1e-16);
            log::warn!("posterior precision not SPD; raising ridge to {:e}", self.ridge);
        }
    }
}

/// Posterior mode on the active columns `cols`.
pub fn posterior_mode(sys: &ResidualSystem, cols: &[usize], cfg: &SamplerConfig) -> Result<DVector<f64>> {
    if cols.is_empty() {
        return Ok(DVector::zeros(0));
    }
    let mut prec = Precision::new(sys, cfg);
    let chol = prec.factor(cols)?;
    Ok(chol.solve(&prec.rhs_vec(cols)))
}

/// Draw from the Gaussian posterior `N(mode, P^{-1})` on `cols`.
pub fn sample_beta<R: Rng + ?Sized>(
    sys: &ResidualSystem,
    cols: &[usize],
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if cols.is_empty() {
        return Ok(DVector::zeros(0));
    }
    let mut prec = Precision::new(sys, cfg);
    let chol = prec.factor(cols)?;
    let mode = chol.solve(&prec.rhs_vec(cols));
    let z = DVector::from_iterator(cols.len(), (0..cols.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let lt = chol.l().transpose();
    let noise = lt.solve_upper_triangular(&z).expect("Cholesky factor has a positive diagonal");
    Ok(mode + noise)
}

/// `|R|^2 / (2 sigma_L^2) + |E|^2 / (2 sigma_d^2) + |beta|^2 / (2 tau^2)`.
pub fn objective(sys: &ResidualSystem, cols: &[usize], beta: &[f64], cfg: &SamplerConfig) -> f64 {
    let r2 = sys.residual_sq(cols, beta);
    let e = if cfg.sigma_d.is_finite() { sys.mismatch_sq(cols, beta) / (2.0 * cfg.sigma_d * cfg.sigma_d) } else { 0.0 };
    r2 / (2.0 * cfg.sigma_l * cfg.sigma_l) + e + beta.iter().map(|b| b * b).sum::<f64>() / (2.0 * cfg.prior_var)
}

/// Probability of switching `col` on given the other active columns, from
/// two independent posterior-mode solves.
pub fn gibbs_probability(
    sys: &ResidualSystem,
    others: &[usize],
    col: usize,
    alpha_hat: f64,
    cfg: &SamplerConfig,
) -> Result<f64> {
    let minus: Vec<usize> = others.iter().copied().filter(|&c| c != col).collect();
    let mut plus = minus.clone();
    plus.push(col);
    let b_minus = posterior_mode(sys, &minus, cfg)?;
    let b_plus = posterior_mode(sys, &plus, cfg)?;
    let dr = sys.residual_sq(&plus, b_plus.as_slice()) - sys.residual_sq(&minus, b_minus.as_slice());
    let de = sys.mismatch_sq(&plus, b_plus.as_slice()) - sys.mismatch_sq(&minus, b_minus.as_slice());
    Ok(logistic(gibbs_log_odds(alpha_hat, dr, de, cfg)))
}
