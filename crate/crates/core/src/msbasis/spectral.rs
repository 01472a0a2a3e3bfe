use nalgebra::DMatrix;

use super::pou::PartitionOfUnity;
use crate::grid_fem::{assemble_on_box, FineGrid, FormKind, NodeBox};
use crate::linalg::generalized_symmetric_eigen;
use crate::{Error, Result};

/// Dominant local modes of one neighborhood.
#[derive(Clone, Debug)]
pub struct NeighborhoodBasis {
    pub region: usize,
    /// Fine-node box of the closed neighborhood.
    pub bx: NodeBox,
    /// Retained eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Retained eigenvectors on the local snapshot dofs (box nodes off the
    /// Dirichlet boundary), one per column.
    pub eigenvectors: DMatrix<f64>,
    /// Box-local node index of each snapshot dof.
    pub snapshot_nodes: Vec<usize>,
    /// Conforming modes `chi_i * v_j` as box-local nodal vectors.
    pub modes: Vec<Vec<f64>>,
}

/// Box-local indices of the nodes that are not on the domain boundary.
fn free_box_nodes(fine: &FineGrid, bx: &NodeBox) -> (Vec<usize>, Vec<Option<usize>>) {
    let mut nodes = Vec::new();
    let mut map = vec![None; bx.len()];
    for (k, (ix, iy)) in bx.nodes().enumerate() {
        if !fine.is_dirichlet(fine.node(ix, iy)) {
            map[k] = Some(nodes.len());
            nodes.push(k);
        }
    }
    (nodes, map)
}

/// Dense local pencil `(a_i, s_i)` on the snapshot space of neighborhood `i`.
pub fn local_pencil(
    fine: &FineGrid,
    bx: &NodeBox,
    kappa: &[f64],
    kappa_tilde: &[f64],
) -> (DMatrix<f64>, DMatrix<f64>, Vec<usize>) {
    let (nodes, map) = free_box_nodes(fine, bx);
    let a = assemble_on_box(fine, bx, |cx, cy| kappa[fine.cell(cx, cy)], FormKind::Stiffness, |k| map[k], nodes.len());
    let s = assemble_on_box(fine, bx, |cx, cy| kappa_tilde[fine.cell(cx, cy)], FormKind::Mass, |k| map[k], nodes.len());
    (DMatrix::from(&a), DMatrix::from(&s), nodes)
}

/// Solves the local spectral problem of neighborhood `i` and keeps the
/// `n_modes` smallest eigenpairs.
pub fn build_spectral_basis(
    fine: &FineGrid,
    pou: &PartitionOfUnity,
    kappa: &[f64],
    kappa_tilde: &[f64],
    region: usize,
    n_modes: usize,
) -> Result<NeighborhoodBasis> {
    let bx = pou.boxes[region];
    let (a, s, snapshot_nodes) = local_pencil(fine, &bx, kappa, kappa_tilde);
    if n_modes > snapshot_nodes.len() {
        return Err(Error::Config(format!(
            "region {region} has {} snapshot functions, {n_modes} modes requested",
            snapshot_nodes.len()
        )));
    }
    let eig = generalized_symmetric_eigen(&a, &s)
        .map_err(|e| Error::Numerical(format!("degenerate region {region}: {e}")))?;
    let eigenvectors = eig.vectors.columns(0, n_modes).into_owned();
    let eigenvalues = eig.values.as_slice()[..n_modes].to_vec();
    let modes = conforming_modes(&bx, &pou.values[region], &snapshot_nodes, &eigenvectors);
    Ok(NeighborhoodBasis { region, bx, eigenvalues, eigenvectors, snapshot_nodes, modes })
}

/// Multiplies each snapshot-space vector by `chi` and expands to box nodes.
fn conforming_modes(bx: &NodeBox, chi: &[f64], nodes: &[usize], vectors: &DMatrix<f64>) -> Vec<Vec<f64>> {
    vectors
        .column_iter()
        .map(|v| {
            let mut m = vec![0.0; bx.len()];
            for (d, &k) in nodes.iter().enumerate() {
                m[k] = chi[k] * v[d];
            }
            m
        })
        .collect()
}
