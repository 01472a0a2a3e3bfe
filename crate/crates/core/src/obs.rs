//! Observation functionals `u -> int_K u` over coarse elements, twin data and mismatch.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CscMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::grid_fem::{CoarseGrid, FineGrid, TimeGrid, Trajectory};
use crate::{Error, Result};

/// Linear map from fine nodal values to per-element integrals.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationMatrix {
    /// Coarse elements as `(row, col)`.
    pub regions: Vec<(usize, usize)>,
    /// Per row: `(node, weight)` pairs.
    rows: Vec<Vec<(usize, f64)>>,
    /// Per row: `(free dof, weight)` pairs.
    dof_rows: Vec<Vec<(usize, f64)>>,
}

/// Builds `D` for the given coarse elements. Each fine cell contributes
/// `h^2 / 4` per corner, the exact integral of the bilinear interpolant.
pub fn build_observation_matrix(
    fine: &FineGrid,
    coarse: &CoarseGrid,
    regions: &[(usize, usize)],
) -> Result<ObservationMatrix> {
    let q = 0.25 * fine.h() * fine.h();
    let mut rows = Vec::with_capacity(regions.len());
    for &(row, col) in regions {
        if row >= coarse.n() || col >= coarse.n() {
            return Err(Error::Config(format!(
                "observation element (row {row}, col {col}) is outside the {0}x{0} coarse grid",
                coarse.n()
            )));
        }
        let mut w = std::collections::BTreeMap::new();
        for (cx, cy) in coarse.element_cells(coarse.element(col, row)) {
            for p in fine.cell_nodes(cx, cy) {
                *w.entry(p).or_insert(0.0) += q;
            }
        }
        rows.push(w.into_iter().collect::<Vec<_>>());
    }
    let dof_rows = rows
        .iter()
        .map(|r: &Vec<(usize, f64)>| r.iter().filter_map(|&(p, w)| fine.dof(p).map(|d| (d, w))).collect())
        .collect();
    Ok(ObservationMatrix { regions: regions.to_vec(), rows, dof_rows })
}

impl ObservationMatrix {
    pub fn n_obs(&self) -> usize {
        self.rows.len()
    }

    /// `D u` for a nodal vector.
    pub fn apply_nodal(&self, u: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.iter().map(|&(p, w)| w * u[p]).sum()))
    }

    /// `D u` for a free-dof vector (zero Dirichlet values).
    pub fn apply_dofs(&self, u: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.dof_rows.len(),
            self.dof_rows.iter().map(|r| r.iter().map(|&(d, w)| w * u[d]).sum()),
        )
    }

    /// `D P` for a prolongation with free-dof rows.
    pub fn sensitivity(&self, p: &CscMatrix<f64>) -> DMatrix<f64> {
        let mut dense_rows = vec![std::collections::HashMap::new(); self.n_obs()];
        for (r, row) in self.dof_rows.iter().enumerate() {
            dense_rows[r].extend(row.iter().copied());
        }
        let mut s = DMatrix::zeros(self.n_obs(), p.ncols());
        for c in 0..p.ncols() {
            let col = p.col(c);
            for (r, weights) in dense_rows.iter().enumerate() {
                s[(r, c)] = col
                    .row_indices()
                    .iter()
                    .zip(col.values())
                    .filter_map(|(d, v)| weights.get(d).map(|w| w * v))
                    .sum();
            }
        }
        s
    }
}

/// Twin-experiment data `Y^n = D u_ref(T_n) + noise * xi` for every interval.
pub fn synthesize_data<R: Rng + ?Sized>(
    reference: &Trajectory,
    d: &ObservationMatrix,
    time: &TimeGrid,
    noise: f64,
    rng: &mut R,
) -> Vec<DVector<f64>> {
    (0..time.n_intervals)
        .map(|n| {
            let mut y = d.apply_dofs(reference.states[time.interval_end_step(n)].as_slice());
            if noise > 0.0 {
                for v in y.iter_mut() {
                    let xi: f64 = rng.sample(StandardNormal);
                    *v += noise * xi;
                }
            }
            y
        })
        .collect()
}

/// `max_i |D_i(u_ref) - D_i(u)|` on free-dof vectors.
pub fn max_obs_error(u: &[f64], reference: &[f64], d: &ObservationMatrix) -> f64 {
    (d.apply_dofs(reference) - d.apply_dofs(u)).amax()
}
