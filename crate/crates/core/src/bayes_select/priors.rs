use super::{ResidualSystem, SamplerConfig};

/// Bernoulli prior probabilities for regions and for columns within a region.
#[derive(Clone, Debug, PartialEq)]
pub struct Priors {
    pub region: Vec<f64>,
    pub column: Vec<f64>,
}

impl Priors {
    pub fn from_system(sys: &ResidualSystem, cfg: &SamplerConfig) -> Self {
        let mut region = region_prior(sys.corr.as_slice(), &sys.col_region, sys.n_regions, cfg.n_omega);
        if cfg.anchor_observations && cfg.sigma_d.is_finite() {
            for r in observation_anchors(sys) {
                region[r] = 1.0;
            }
        }
        let mut column = vec![0.0; sys.n_cols()];
        for r in 0..sys.n_regions {
            let cols: Vec<usize> = (0..sys.n_cols()).filter(|&c| sys.col_region[c] == r).collect();
            let local: Vec<f64> = cols.iter().map(|&c| sys.corr[c]).collect();
            for (c, p) in cols.into_iter().zip(basis_prior(&local, cfg.n_basis)) {
                column[c] = p;
            }
        }
        Self { region, column }
    }

    /// Every region and column certain.
    pub fn certain(n_regions: usize, n_cols: usize) -> Self {
        Self { region: vec![1.0; n_regions], column: vec![1.0; n_cols] }
    }
}

/// For each observation row, the region whose additional columns carry the
/// largest total sensitivity `sum_j |S_rj|`. Rows no column reaches are skipped.
pub fn observation_anchors(sys: &ResidualSystem) -> Vec<usize> {
    let mut out = Vec::new();
    for row in 0..sys.s.nrows() {
        let mut weight = vec![0.0; sys.n_regions];
        for (c, &r) in sys.col_region.iter().enumerate() {
            weight[r] += sys.s[(row, c)].abs();
        }
        let best = (0..sys.n_regions).fold(None, |acc: Option<usize>, r| match acc {
            Some(b) if weight[b] >= weight[r] => Some(b),
            _ if weight[r] > 0.0 => Some(r),
            _ => acc,
        });
        if let Some(b) = best {
            if !out.contains(&b) {
                out.push(b);
            }
        }
    }
    out
}

fn rescale(alpha: &[f64], target: f64, what: &str) -> Vec<f64> {
    let total: f64 = alpha.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        log::warn!("all {what} correlations vanish; using a uniform prior");
        let p = (target / alpha.len().max(1) as f64).min(1.0);
        return vec![p; alpha.len()];
    }
    alpha.iter().map(|a| (target * a / total).min(1.0)).collect()
}

/// `p_i = min(N_omega alpha_i / sum_k alpha_k, 1)` with
/// `alpha_i = sum_{j in omega_i} |corr_j|`.
pub fn region_prior(corr: &[f64], col_region: &[usize], n_regions: usize, n_omega: f64) -> Vec<f64> {
    let mut alpha = vec![0.0; n_regions];
    for (c, &r) in corr.iter().zip(col_region) {
        alpha[r] += c.abs();
    }
    rescale(&alpha, n_omega, "region")
}

/// `p_j = min(N_basis |corr_j| / sum_k |corr_k|, 1)` within one region.
pub fn basis_prior(corr: &[f64], n_basis: f64) -> Vec<f64> {
    let alpha: Vec<f64> = corr.iter().map(|c| c.abs()).collect();
    rescale(&alpha, n_basis, "basis")
}
