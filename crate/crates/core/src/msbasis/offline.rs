use nalgebra_sparse::{CooMatrix, CscMatrix};
use rayon::prelude::*;

use super::pou::{build_pou, kappa_tilde};
use super::spectral::build_spectral_basis;
use crate::field_io::PermeabilityField;
use crate::grid_fem::{CoarseGrid, FineGrid, NodeBox};
use crate::Result;

/// Modes of one region as box-local nodal vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionModes {
    pub bx: NodeBox,
    pub eigenvalues: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
}

/// Offline space split into permanent and additional columns.
///
/// Column order is node-major, eigen-index minor: permanent column
/// `i * l_perm + j`, additional column `i * l_add + j` holds mode
/// `l_perm + j` of region `i`.
#[derive(Clone, Debug)]
pub struct OfflineBasis {
    pub l_perm: usize,
    pub l_add: usize,
    pub regions: Vec<RegionModes>,
    pub p_perm: CscMatrix<f64>,
    pub p_add: CscMatrix<f64>,
}

impl OfflineBasis {
    pub fn from_regions(fine: &FineGrid, regions: Vec<RegionModes>, l_perm: usize, l_add: usize) -> Self {
        let p_perm = prolongation(fine, &regions, 0, l_perm);
        let p_add = prolongation(fine, &regions, l_perm, l_add);
        Self { l_perm, l_add, regions, p_perm, p_add }
    }

    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn n_perm(&self) -> usize {
        self.p_perm.ncols()
    }

    pub fn n_add(&self) -> usize {
        self.p_add.ncols()
    }

    /// Region and eigen-index of additional column `c`.
    pub fn add_owner(&self, c: usize) -> (usize, usize) {
        (c / self.l_add, c % self.l_add)
    }

    pub fn add_columns(&self, region: usize) -> std::ops::Range<usize> {
        region * self.l_add..(region + 1) * self.l_add
    }

    /// Permanent columns followed by additional columns.
    pub fn all_columns(&self) -> CscMatrix<f64> {
        let n = self.p_perm.nrows();
        let mut coo = CooMatrix::new(n, self.n_perm() + self.n_add());
        for (off, p) in [(0, &self.p_perm), (self.n_perm(), &self.p_add)] {
            for (c, col) in (0..p.ncols()).map(|c| (c, p.col(c))) {
                for (&r, &v) in col.row_indices().iter().zip(col.values()) {
                    coo.push(r, off + c, v);
                }
            }
        }
        CscMatrix::from(&coo)
    }
}

fn prolongation(fine: &FineGrid, regions: &[RegionModes], first: usize, count: usize) -> CscMatrix<f64> {
    let mut coo = CooMatrix::new(fine.n_dofs(), regions.len() * count);
    for (i, r) in regions.iter().enumerate() {
        for j in 0..count {
            let col = i * count + j;
            for (k, (ix, iy)) in r.bx.nodes().enumerate() {
                let v = r.modes[first + j][k];
                if v != 0.0 {
                    if let Some(d) = fine.dof(fine.node(ix, iy)) {
                        coo.push(d, col, v);
                    }
                }
            }
        }
    }
    CscMatrix::from(&coo)
}

/// Builds the time-independent offline space from `kappa0`.
pub fn build_offline_basis(
    fine: &FineGrid,
    coarse: &CoarseGrid,
    field: &PermeabilityField,
    l_perm: usize,
    l_add: usize,
) -> Result<OfflineBasis> {
    let kappa = field.kappa0();
    let pou = build_pou(fine, coarse, kappa)?;
    let kt = kappa_tilde(fine, &pou, kappa);
    let regions = (0..coarse.n_nodes())
        .into_par_iter()
        .map(|i| {
            let nb = build_spectral_basis(fine, &pou, kappa, &kt, i, l_perm + l_add)?;
            Ok(RegionModes { bx: nb.bx, eigenvalues: nb.eigenvalues, modes: nb.modes })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OfflineBasis::from_regions(fine, regions, l_perm, l_add))
}
