use rand::Rng;
use rand_distr::StandardNormal;

use super::posterior::{sample_beta, Precision};
use super::priors::Priors;
use super::{IndicatorState, ResidualSystem, SamplerConfig};
use crate::linalg::UpdatableCholesky;
use crate::Result;

const ALPHA_CLIP: f64 = 1e-12;

/// Log-odds of switching a column on: prior odds times the mode-residual
/// likelihood ratio.
pub fn gibbs_log_odds(alpha_hat: f64, delta_r2: f64, delta_e2: f64, cfg: &SamplerConfig) -> f64 {
    let a = alpha_hat.clamp(ALPHA_CLIP, 1.0 - ALPHA_CLIP);
    let data = if cfg.sigma_d.is_finite() { delta_e2 / (2.0 * cfg.sigma_d * cfg.sigma_d) } else { 0.0 };
    (a / (1.0 - a)).ln() - delta_r2 / (2.0 * cfg.sigma_l * cfg.sigma_l) - data
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn draw_indicators<R: Rng + ?Sized>(sys: &ResidualSystem, priors: &Priors, rng: &mut R) -> (Vec<bool>, Vec<bool>) {
    let regions: Vec<bool> = priors.region.iter().map(|&p| rng.random::<f64>() < p).collect();
    let columns = (0..sys.n_cols())
        .map(|c| {
            let u = rng.random::<f64>();
            regions[sys.col_region[c]] && u < priors.column[c]
        })
        .collect();
    (regions, columns)
}

fn finish<R: Rng + ?Sized>(
    sys: &ResidualSystem,
    cfg: &SamplerConfig,
    regions: Vec<bool>,
    columns: Vec<bool>,
    rng: &mut R,
) -> Result<IndicatorState> {
    let cols: Vec<usize> = columns.iter().enumerate().filter_map(|(c, &on)| on.then_some(c)).collect();
    let beta = sample_beta(sys, &cols, cfg, rng)?;
    Ok(IndicatorState { regions, columns, beta: beta.as_slice().to_vec() })
}

/// Prior draw of regions and columns followed by a coefficient draw.
pub fn sequential_sample<R: Rng + ?Sized>(
    sys: &ResidualSystem,
    priors: &Priors,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<IndicatorState> {
    let (regions, columns) = draw_indicators(sys, priors, rng);
    finish(sys, cfg, regions, columns, rng)
}

/// Active set with an incrementally maintained precision factor and mode.
struct ActiveSet<'a> {
    prec: Precision<'a>,
    cols: Vec<usize>,
    chol: UpdatableCholesky,
    rhs: Vec<f64>,
    mode: Vec<f64>,
    r2: f64,
    e2: f64,
}

impl<'a> ActiveSet<'a> {
    fn new(prec: Precision<'a>, cols: Vec<usize>) -> Result<Self> {
        let mut s = Self {
            prec,
            cols: Vec::new(),
            chol: UpdatableCholesky::with_capacity(64),
            rhs: Vec::new(),
            mode: Vec::new(),
            r2: 0.0,
            e2: 0.0,
        };
        s.rebuild(cols)?;
        Ok(s)
    }

    /// Fresh factorization, raising the ridge if needed.
    fn rebuild(&mut self, cols: Vec<usize>) -> Result<()> {
        let fresh = self.prec.factor(&cols)?;
        let l = fresh.l();
        self.chol = UpdatableCholesky::with_capacity(cols.len().max(64));
        for i in 0..cols.len() {
            let w: Vec<f64> = (0..i).map(|j| l[(i, j)]).collect();
            self.chol.push(&w, l[(i, i)] * l[(i, i)])?;
        }
        self.rhs = cols.iter().map(|&c| self.prec.rhs(c)).collect();
        self.cols = cols;
        self.mode = self.chol.solve(&self.rhs);
        self.refresh_norms();
        Ok(())
    }

    fn refresh_norms(&mut self) {
        let (r2, e2) = self.norms(&self.cols, &self.mode);
        self.r2 = r2;
        self.e2 = e2;
    }

    fn norms(&self, cols: &[usize], beta: &[f64]) -> (f64, f64) {
        let sys = self.prec.sys;
        (sys.residual_sq(cols, beta), sys.mismatch_sq(cols, beta))
    }

    fn position(&self, c: usize) -> Option<usize> {
        self.cols.iter().position(|&x| x == c)
    }

    /// One Gibbs update of column `c`.
    fn update<R: Rng + ?Sized>(&mut self, c: usize, alpha_hat: f64, cfg: &SamplerConfig, rng: &mut R) -> Result<bool> {
        match self.position(c) {
            None => {
                let u: Vec<f64> = self.cols.iter().map(|&a| self.prec.entry(a, c)).collect();
                let d = self.prec.entry(c, c);
                let mut plus_cols = self.cols.clone();
                plus_cols.push(c);
                if self.chol.push_column(&u, d).is_err() {
                    let minus = self.cols.clone();
                    self.rebuild(plus_cols.clone())?;
                    // Factor now covers plus_cols; fall through with fresh state.
                    let p_mode = self.mode.clone();
                    let (r_plus, e_plus) = (self.r2, self.e2);
                    self.rebuild(minus)?;
                    return self.decide_add(c, plus_cols, p_mode, r_plus, e_plus, alpha_hat, cfg, rng, true);
                }
                let mut rhs = self.rhs.clone();
                rhs.push(self.prec.rhs(c));
                let p_mode = self.chol.solve(&rhs);
                let (r_plus, e_plus) = self.norms(&plus_cols, &p_mode);
                self.decide_add(c, plus_cols, p_mode, r_plus, e_plus, alpha_hat, cfg, rng, false)
            }
            Some(p) => {
                let mut e = vec![0.0; self.cols.len()];
                e[p] = 1.0;
                let z = self.chol.solve(&e);
                let scale = self.mode[p] / z[p];
                let mut minus_mode: Vec<f64> = self.mode.iter().zip(&z).map(|(b, zi)| b - zi * scale).collect();
                minus_mode.remove(p);
                let mut minus_cols = self.cols.clone();
                minus_cols.remove(p);
                let (r_minus, e_minus) = self.norms(&minus_cols, &minus_mode);
                let lo = gibbs_log_odds(alpha_hat, self.r2 - r_minus, self.e2 - e_minus, cfg);
                if rng.random::<f64>() < logistic(lo) {
                    return Ok(true);
                }
                self.chol.remove(p);
                self.cols = minus_cols;
                self.rhs.remove(p);
                self.mode = minus_mode;
                self.r2 = r_minus;
                self.e2 = e_minus;
                Ok(false)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn decide_add<R: Rng + ?Sized>(
        &mut self,
        c: usize,
        plus_cols: Vec<usize>,
        p_mode: Vec<f64>,
        r_plus: f64,
        e_plus: f64,
        alpha_hat: f64,
        cfg: &SamplerConfig,
        rng: &mut R,
        factor_is_minus: bool,
    ) -> Result<bool> {
        let lo = gibbs_log_odds(alpha_hat, r_plus - self.r2, e_plus - self.e2, cfg);
        if rng.random::<f64>() < logistic(lo) {
            if factor_is_minus {
                self.rebuild(plus_cols)?;
            } else {
                self.rhs.push(self.prec.rhs(c));
                self.cols = plus_cols;
                self.mode = p_mode;
                self.r2 = r_plus;
                self.e2 = e_plus;
            }
            Ok(true)
        } else {
            if !factor_is_minus {
                let last = self.chol.dim() - 1;
                self.chol.remove(last);
            }
            Ok(false)
        }
    }

    /// Posterior draw on the current set, in ascending column order.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.cols.len();
        let z: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let noise = self.chol.backward(&z);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&i| self.cols[i]);
        order.iter().map(|&i| self.mode[i] + noise[i]).collect()
    }
}

/// Prior initialization, Gibbs sweeps over the columns of selected regions in
/// ascending column order, then a coefficient draw on the final mask.
pub fn mcmc_sample<R: Rng + ?Sized>(
    sys: &ResidualSystem,
    priors: &Priors,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<IndicatorState> {
    let (regions, mut columns) = draw_indicators(sys, priors, rng);
    let init: Vec<usize> = columns.iter().enumerate().filter_map(|(c, &on)| on.then_some(c)).collect();
    let mut set = ActiveSet::new(Precision::new(sys, cfg), init)?;
    for _ in 0..cfg.sweeps {
        for c in 0..sys.n_cols() {
            if !regions[sys.col_region[c]] {
                continue;
            }
            columns[c] = set.update(c, priors.column[c], cfg, rng)?;
        }
    }
    let beta = set.draw(rng);
    Ok(IndicatorState { regions, columns, beta })
}
