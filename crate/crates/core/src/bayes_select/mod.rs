//! Residual systems, Bernoulli priors, posterior modes and the two samplers.

mod posterior;
mod priors;
mod sampler;
mod system;

pub use posterior::{gibbs_probability, objective, posterior_mode, sample_beta, Precision};
pub use priors::{basis_prior, observation_anchors, region_prior, Priors};
pub use sampler::{gibbs_log_odds, logistic, mcmc_sample, sequential_sample};
pub use system::{build_residual_system, GramPieces, IntervalInputs, ResidualSystem};

/// Scales and prior parameters of the selection posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    /// Residual scale; absolute.
    pub sigma_l: f64,
    /// Data scale; absolute, `f64::INFINITY` drops the data term.
    pub sigma_d: f64,
    pub n_omega: f64,
    pub n_basis: f64,
    /// Variance of the normal prior on the coefficients.
    pub prior_var: f64,
    /// Diagonal regularization relative to the largest data-term diagonal.
    pub ridge: f64,
    /// Gibbs sweeps per sample.
    pub sweeps: usize,
    /// With a finite data scale, the region most sensitive to each
    /// observation is always selected.
    pub anchor_observations: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { sigma_l: 5e-4, sigma_d: 1.0, n_omega: 27.0, n_basis: 2.0, prior_var: 1e6, ridge: 1e-12, sweeps: 1, anchor_observations: true }
    }
}

/// Region indicators, column indicators and coefficients of the active columns.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorState {
    pub regions: Vec<bool>,
    pub columns: Vec<bool>,
    /// Coefficients of the active columns in ascending column order.
    pub beta: Vec<f64>,
}

impl IndicatorState {
    pub fn active_columns(&self) -> Vec<usize> {
        self.columns.iter().enumerate().filter_map(|(c, &on)| on.then_some(c)).collect()
    }

    /// Coefficient vector over all additional columns.
    pub fn full_beta(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.columns.len()];
        for (c, b) in self.active_columns().into_iter().zip(&self.beta) {
            out[c] = *b;
        }
        out
    }

    /// Every active column lies in an active region.
    pub fn is_consistent(&self, col_region: &[usize]) -> bool {
        self.columns.iter().zip(col_region).all(|(&on, &r)| !on || self.regions[r])
            && self.beta.len() == self.columns.iter().filter(|&&c| c).count()
    }
}
