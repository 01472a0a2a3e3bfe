use nalgebra::DVector;
use rand::Rng;

use super::problem::{step_factors, IntervalData, Problem};
use crate::bayes_select::{
    build_residual_system, mcmc_sample, sample_beta, sequential_sample, IndicatorState, IntervalInputs, Priors,
    ResidualSystem, SamplerConfig,
};
use crate::linalg::{csc_mul, csc_mul_subset, csc_mul_transpose};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Sequential,
    Mcmc,
    FixedOnly,
    FullOffline,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Sequential => "seq",
            Method::Mcmc => "mcmc",
            Method::FixedOnly => "fixed",
            Method::FullOffline => "full",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seq" | "sequential" => Ok(Method::Sequential),
            "mcmc" => Ok(Method::Mcmc),
            "fixed" => Ok(Method::FixedOnly),
            "full" => Ok(Method::FullOffline),
            _ => Err(Error::Config(format!("unknown method '{s}' (expected seq, mcmc, fixed or full)"))),
        }
    }
}

/// Diagnostics and selection of one interval.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalRecord {
    pub state: IndicatorState,
    /// `|b|` of the fixed solution.
    pub fixed_residual: f64,
    /// `|K beta - b|` at the sampled coefficients.
    pub posterior_residual: f64,
    /// `|g|`.
    pub fixed_mismatch: f64,
    /// `|S beta - g|`.
    pub posterior_mismatch: f64,
    /// `|P_perm^T b|`.
    pub perm_projection: f64,
    pub active: usize,
    /// Columns belonging to selected regions.
    pub available: usize,
}

/// One chain over all intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainResult {
    /// `u_fix(T) + P_add beta` on the last interval.
    pub posterior_final: DVector<f64>,
    /// Galerkin re-solve on the selected span at `T`.
    pub galerkin_final: DVector<f64>,
    pub intervals: Vec<IntervalRecord>,
}

impl Problem {
    pub fn interval_inputs(&self, n: usize) -> IntervalInputs<'_> {
        let iv = &self.intervals[n];
        IntervalInputs {
            ops: &self.ops,
            time: &self.time,
            interval: n,
            p_perm: &iv.space.basis.p_perm,
            p_add: &iv.space.basis.p_add,
            gram: iv.gram.clone(),
            s: iv.space.s_add.clone(),
            col_region: iv.space.col_region.clone(),
            n_regions: iv.space.basis.n_regions(),
            obs: &self.obs,
            data: &self.data[n],
        }
    }

    /// Galerkin steps in the permanent space from the carried fine state.
    /// Returns the carried state followed by the fine state after each step.
    pub fn fixed_solve(&self, n: usize, carry: &DVector<f64>) -> Vec<DVector<f64>> {
        let iv = &self.intervals[n];
        let p = &iv.space.basis.p_perm;
        let load = csc_mul_transpose(p, self.ops.load.as_slice());
        let mut states = vec![carry.clone()];
        for chol in &iv.fixed_factors {
            let prev = states.last().unwrap();
            let rhs = &load + csc_mul_transpose(p, self.ops.apply_mass(prev).as_slice()) / self.time.dt;
            let c = chol.solve(&rhs);
            states.push(csc_mul(p, c.as_slice()));
        }
        states
    }

    /// Galerkin steps on the listed columns of `P_all` from the carried state.
    pub fn galerkin_solve(&self, n: usize, carry: &DVector<f64>, cols: &[usize]) -> Result<Vec<DVector<f64>>> {
        let iv = &self.intervals[n];
        let full = cols.len() == iv.space.p_all.ncols();
        let owned;
        let factors = if full {
            match iv.full_factors.get_or_init(|| step_factors(&iv.space, &self.ops, &self.time, n, cols)) {
                Ok(f) => f,
                Err(e) => return Err(Error::Numerical(e.to_string())),
            }
        } else {
            owned = step_factors(&iv.space, &self.ops, &self.time, n, cols)?;
            &owned
        };
        galerkin_steps(self, iv, carry, cols, factors)
    }

    pub fn residual_system(&self, n: usize, fixed: &[DVector<f64>]) -> Result<ResidualSystem> {
        build_residual_system(&self.interval_inputs(n), fixed)
    }
}

fn galerkin_steps(
    problem: &Problem,
    iv: &IntervalData,
    carry: &DVector<f64>,
    cols: &[usize],
    factors: &[nalgebra::Cholesky<f64, nalgebra::Dyn>],
) -> Result<Vec<DVector<f64>>> {
    let dt = problem.time.dt;
    let sp = &iv.space;
    let load = DVector::from_iterator(cols.len(), cols.iter().map(|&c| sp.proj_load[c]));
    let m_carry = csc_mul_transpose(&sp.p_all, problem.ops.apply_mass(carry).as_slice());
    let mut prev_mass = DVector::from_iterator(cols.len(), cols.iter().map(|&c| m_carry[c]));
    let mut states = vec![carry.clone()];
    for chol in factors {
        let c = chol.solve(&(&load + &prev_mass / dt));
        prev_mass = DVector::from_fn(cols.len(), |a, _| cols.iter().zip(c.iter()).map(|(&j, cj)| sp.proj_mass[(cols[a], j)] * cj).sum());
        states.push(csc_mul_subset(&sp.p_all, cols, c.as_slice()));
    }
    Ok(states)
}

fn select<R: Rng + ?Sized>(
    method: Method,
    sys: &ResidualSystem,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<IndicatorState> {
    match method {
        Method::FixedOnly => Ok(IndicatorState {
            regions: vec![false; sys.n_regions],
            columns: vec![false; sys.n_cols()],
            beta: Vec::new(),
        }),
        Method::FullOffline => {
            let cols: Vec<usize> = (0..sys.n_cols()).collect();
            let beta = sample_beta(sys, &cols, cfg, rng)?;
            Ok(IndicatorState { regions: vec![true; sys.n_regions], columns: vec![true; sys.n_cols()], beta: beta.as_slice().to_vec() })
        }
        Method::Sequential => sequential_sample(sys, &Priors::from_system(sys, cfg), cfg, rng),
        Method::Mcmc => mcmc_sample(sys, &Priors::from_system(sys, cfg), cfg, rng),
    }
}

/// Runs all intervals of one chain: fixed solve, residual system, selection,
/// Galerkin re-solve on the selected span, and carry of its end state.
pub fn run_chain<R: Rng + ?Sized>(
    problem: &Problem,
    method: Method,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<ChainResult> {
    let mut carry = DVector::zeros(problem.fine.n_dofs());
    let mut records = Vec::with_capacity(problem.time.n_intervals);
    let mut posterior_final = carry.clone();
    for n in 0..problem.time.n_intervals {
        let fixed = problem.fixed_solve(n, &carry);
        let sys = problem.residual_system(n, &fixed)?;
        let state = select(method, &sys, cfg, rng)?;
        let active = state.active_columns();
        let sp = &problem.intervals[n].space;

        posterior_final = fixed.last().unwrap() + csc_mul_subset(&sp.basis.p_add, &active, &state.beta);
        let end = match method {
            Method::FixedOnly => fixed.last().unwrap().clone(),
            _ => {
                let n_perm = sp.n_perm();
                let cols: Vec<usize> = (0..n_perm).chain(active.iter().map(|c| n_perm + c)).collect();
                problem.galerkin_solve(n, &carry, &cols)?.pop().unwrap()
            }
        };
        let available = (0..sys.n_cols()).filter(|&c| state.regions[sys.col_region[c]]).count();
        records.push(IntervalRecord {
            fixed_residual: sys.b_norm(),
            posterior_residual: sys.residual_sq(&active, &state.beta).sqrt(),
            fixed_mismatch: sys.g_norm(),
            posterior_mismatch: sys.mismatch_sq(&active, &state.beta).sqrt(),
            perm_projection: sys.perm_projection,
            active: active.len(),
            available,
            state,
        });
        carry = end;
    }
    Ok(ChainResult { posterior_final, galerkin_final: carry, intervals: records })
}
