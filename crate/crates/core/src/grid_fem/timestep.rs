use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;

use super::assembly::AffineOperators;
use super::mesh::TimeGrid;
use crate::linalg::{csr_mul, SparseSpd};
use crate::{Error, Result};

const MAX_REFINEMENT: usize = 4;

/// Fine states on free dofs at every step; `states[0]` is the initial value.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Implicit Euler from `u(0) = 0`:
/// `(M/dt + A(t_{m+1})) u^{m+1} = F + (M/dt) u^m`.
pub fn solve_reference(ops: &AffineOperators, time: &TimeGrid) -> Result<Trajectory> {
    solve_from(ops, time, DVector::zeros(ops.load.len()))
}

/// Implicit Euler from the given initial state on free dofs.
pub fn solve_from(ops: &AffineOperators, time: &TimeGrid, initial: DVector<f64>) -> Result<Trajectory> {
    if initial.len() != ops.load.len() {
        return Err(Error::Config(format!("initial state has {} entries, expected {}", initial.len(), ops.load.len())));
    }
    let mut states = Vec::with_capacity(time.n_steps() + 1);
    states.push(initial);
    let shift = 1.0 / time.dt;
    let mut cached: Option<SparseSpd> = None;
    for m in 1..=time.n_steps() {
        let t = time.time(m);
        let system = ops.combined(t, shift);
        if cached.is_none() || !ops.is_static() {
            cached = Some(
                SparseSpd::factor(&system)
                    .map_err(|e| Error::Numerical(format!("fine step {m}: {e}")))?,
            );
        }
        let prev = &states[m - 1];
        let rhs = &ops.load + ops.apply_mass(prev) * shift;
        let factor = cached.as_ref().unwrap();
        let mut u = factor.solve(&rhs);
        let tol = tolerance(&system, &u, &rhs, ops.load.norm());
        let mut res = &rhs - csr_mul(&system, &u);
        // Iterative refinement removes the roundoff left by the direct solve.
        for _ in 0..MAX_REFINEMENT {
            if res.norm() <= tol {
                break;
            }
            u += factor.solve(&res);
            res = &rhs - csr_mul(&system, &u);
        }
        let tol = tolerance(&system, &u, &rhs, ops.load.norm());
        let r = res.norm();
        if !r.is_finite() || r > tol {
            return Err(Error::Numerical(format!("fine step {m}: residual {r:e} exceeds {tol:e}")));
        }
        states.push(u);
    }
    Ok(Trajectory { states })
}

/// Relative target `1e-10 max(|rhs|, |F|)`, floored at the rounding level
/// `64 eps | |A| |u| + |rhs| |` that a residual evaluation can resolve.
fn tolerance(a: &CsrMatrix<f64>, u: &DVector<f64>, rhs: &DVector<f64>, load_norm: f64) -> f64 {
    let mut floor = 0.0;
    for (i, row) in a.row_iter().enumerate() {
        let s: f64 = row.col_indices().iter().zip(row.values()).map(|(&j, v)| (v * u[j]).abs()).sum::<f64>() + rhs[i].abs();
        floor += s * s;
    }
    (1e-10 * rhs.norm().max(load_norm)).max(64.0 * f64::EPSILON * floor.sqrt())
}
