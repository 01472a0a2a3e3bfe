use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::chain::{run_chain, ChainResult, Method};
use super::problem::Problem;
use crate::bayes_select::SamplerConfig;
use crate::grid_fem::AffineOperators;
use crate::obs::max_obs_error;
use crate::{Error, Result};

/// `100 |u - u_ref|_M / |u_ref|_M`.
pub fn relative_l2_error(u: &DVector<f64>, reference: &DVector<f64>, ops: &AffineOperators) -> Result<f64> {
    let r2 = reference.dot(&ops.apply_mass(reference));
    if !(r2 > 0.0) {
        return Err(Error::Numerical("relative L2 error is undefined for a zero reference".into()));
    }
    let d = u - reference;
    Ok(100.0 * (d.dot(&ops.apply_mass(&d)) / r2).sqrt())
}

/// Aggregates of an ensemble of chains.
///
/// The corrected solution is the Galerkin re-solve on the selected span; the
/// posterior reconstruction is `u_fix + P_add beta`. Accuracy is reported on
/// the former and data fit on the latter; the cross metrics are kept too.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub method: Method,
    /// Chains in sample order; failed samples are `None`.
    pub samples: Vec<Option<ChainResult>>,
    pub failures: Vec<(usize, String)>,
    /// Pointwise mean and standard deviation of the corrected solution.
    pub mean: DVector<f64>,
    pub std: DVector<f64>,
    /// Pointwise mean and standard deviation of the posterior reconstruction.
    pub posterior_mean: DVector<f64>,
    pub posterior_std: DVector<f64>,
    /// Relative L2 error of `mean` in percent.
    pub l2_error: f64,
    pub posterior_l2_error: f64,
    /// Maximum observational error of `posterior_mean`.
    pub obs_error: f64,
    pub galerkin_obs_error: f64,
    /// Active columns over columns of selected regions, in percent.
    pub selection_pct: f64,
    /// Mean number of selected regions per interval.
    pub mean_regions: f64,
    /// Relative L2 error of each corrected sample.
    pub sample_l2_errors: Vec<f64>,
    /// Median over samples of `|K beta - b|` per interval.
    pub residual_trace: Vec<f64>,
    /// Median over samples of the fixed-solution `|b|` per interval.
    pub fixed_residual_trace: Vec<f64>,
}

impl EnsembleResult {
    pub fn completed(&self) -> impl Iterator<Item = &ChainResult> {
        self.samples.iter().flatten()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Random stream of sample `i`: one ChaCha stream per sample index.
pub(crate) fn sample_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

/// Runs `n_samples` independent chains in parallel and aggregates them.
/// `on_sample` is called as each chain completes.
pub fn run_ensemble(
    problem: &Problem,
    method: Method,
    cfg: &SamplerConfig,
    n_samples: usize,
    seed: u64,
    on_sample: Option<&(dyn Fn(usize, &ChainResult) + Sync)>,
) -> Result<EnsembleResult> {
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be at least 1".into()));
    }
    let outcomes: Vec<Result<ChainResult>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let out = run_chain(problem, method, cfg, &mut sample_rng(seed, i));
            if let (Ok(r), Some(cb)) = (&out, on_sample) {
                cb(i, r);
            }
            out
        })
        .collect();
    let mut failures = Vec::new();
    let mut samples = Vec::with_capacity(n_samples);
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => samples.push(Some(r)),
            Err(e) => {
                log::warn!("sample {i} failed: {e}");
                failures.push((i, e.to_string()));
                samples.push(None);
            }
        }
    }
    if failures.len() * 10 > n_samples || failures.len() == n_samples {
        return Err(Error::Numerical(format!(
            "{} of {n_samples} samples failed; first failure: {}",
            failures.len(),
            failures[0].1
        )));
    }
    aggregate(problem, method, samples, failures)
}

fn mean_std<'a>(fields: impl Iterator<Item = &'a DVector<f64>> + Clone, dim: usize) -> (DVector<f64>, DVector<f64>) {
    let mut mean = DVector::zeros(dim);
    let mut k = 0.0;
    for f in fields.clone() {
        mean += f;
        k += 1.0;
    }
    mean /= k;
    let mut std = DVector::zeros(dim);
    if k > 1.0 {
        for f in fields {
            let d = f - &mean;
            std += d.component_mul(&d);
        }
        std = (std / (k - 1.0)).map(f64::sqrt);
    }
    (mean, std)
}

fn aggregate(
    problem: &Problem,
    method: Method,
    samples: Vec<Option<ChainResult>>,
    failures: Vec<(usize, String)>,
) -> Result<EnsembleResult> {
    let done: Vec<&ChainResult> = samples.iter().flatten().collect();
    let dim = problem.fine.n_dofs();
    let (mean, std) = mean_std(done.iter().map(|c| &c.galerkin_final), dim);
    let (posterior_mean, posterior_std) = mean_std(done.iter().map(|c| &c.posterior_final), dim);
    let reference = problem.reference_final();
    let l2_error = relative_l2_error(&mean, reference, &problem.ops)?;
    let posterior_l2_error = relative_l2_error(&posterior_mean, reference, &problem.ops)?;
    let obs_error = max_obs_error(posterior_mean.as_slice(), reference.as_slice(), &problem.obs);
    let galerkin_obs_error = max_obs_error(mean.as_slice(), reference.as_slice(), &problem.obs);
    let records = || done.iter().flat_map(|c| &c.intervals);
    let (active, available) = records().fold((0usize, 0usize), |(a, b), r| (a + r.active, b + r.available));
    let selection_pct = if available > 0 { 100.0 * active as f64 / available as f64 } else { 0.0 };
    let n_records = records().count().max(1) as f64;
    let mean_regions = records().map(|r| r.state.regions.iter().filter(|&&x| x).count() as f64).sum::<f64>() / n_records;
    let sample_l2_errors = done
        .iter()
        .map(|c| relative_l2_error(&c.galerkin_final, reference, &problem.ops))
        .collect::<Result<Vec<_>>>()?;
    let n_int = problem.time.n_intervals;
    let residual_trace = (0..n_int).map(|n| median(done.iter().map(|c| c.intervals[n].posterior_residual).collect())).collect();
    let fixed_residual_trace = (0..n_int).map(|n| median(done.iter().map(|c| c.intervals[n].fixed_residual).collect())).collect();
    Ok(EnsembleResult {
        method,
        samples,
        failures,
        mean,
        std,
        posterior_mean,
        posterior_std,
        l2_error,
        posterior_l2_error,
        obs_error,
        galerkin_obs_error,
        selection_pct,
        mean_regions,
        sample_l2_errors,
        residual_trace,
        fixed_residual_trace,
    })
}
