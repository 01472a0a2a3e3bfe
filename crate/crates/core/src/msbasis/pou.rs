use nalgebra::{DMatrix, DVector};

use crate::grid_fem::{assemble_on_box, CoarseGrid, FineGrid, FormKind, NodeBox};
use crate::{Error, Result};

/// Multiscale partition of unity: one function per coarse node, stored on
/// the fine-node box of its neighborhood.
#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    pub boxes: Vec<NodeBox>,
    pub values: Vec<Vec<f64>>,
}

impl PartitionOfUnity {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value of `chi_i` at fine node `(ix, iy)`; zero outside its support.
    pub fn value(&self, i: usize, ix: usize, iy: usize) -> f64 {
        let b = &self.boxes[i];
        if b.contains(ix, iy) {
            self.values[i][b.local(ix, iy)]
        } else {
            0.0
        }
    }

    /// `chi_i` on all fine nodes.
    pub fn nodal(&self, fine: &FineGrid, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; fine.n_nodes()];
        for (k, (ix, iy)) in self.boxes[i].nodes().enumerate() {
            out[fine.node(ix, iy)] = self.values[i][k];
        }
        out
    }
}

/// Bilinear hat of corner `c` (counter-clockwise from bottom-left) at local
/// fractional position `(s, t)` in the element.
fn hat(c: usize, s: f64, t: f64) -> f64 {
    match c {
        0 => (1.0 - s) * (1.0 - t),
        1 => s * (1.0 - t),
        2 => s * t,
        _ => (1.0 - s) * t,
    }
}

/// Solves `-div(kappa grad chi) = 0` in each coarse element with boundary
/// data linear along every edge, and stitches the pieces per coarse node.
pub fn build_pou(fine: &FineGrid, coarse: &CoarseGrid, kappa: &[f64]) -> Result<PartitionOfUnity> {
    let boxes: Vec<NodeBox> = (0..coarse.n_nodes()).map(|i| coarse.neighborhood_box(i, 0)).collect();
    let mut values: Vec<Vec<f64>> = boxes.iter().map(|b| vec![0.0; b.len()]).collect();
    let r = coarse.ratio();
    for e in 0..coarse.n_elements() {
        let eb = coarse.element_box(e);
        let local = element_harmonic(fine, &eb, kappa, r).map_err(|err| {
            let (ex, ey) = coarse.element_coords(e);
            Error::Numerical(format!("partition of unity on coarse element ({ex}, {ey}): {err}"))
        })?;
        for (c, &node) in coarse.element_nodes(e).iter().enumerate() {
            let nb = &boxes[node];
            for (k, (ix, iy)) in eb.nodes().enumerate() {
                // Shared edge nodes get identical values from both sides.
                values[node][nb.local(ix, iy)] = local[c][k];
            }
        }
    }
    Ok(PartitionOfUnity { boxes, values })
}

/// The four corner functions of one element, as box-local nodal vectors.
fn element_harmonic(fine: &FineGrid, eb: &NodeBox, kappa: &[f64], r: usize) -> Result<[Vec<f64>; 4]> {
    let n_loc = eb.len();
    let interior: Vec<Option<usize>> = {
        let mut next = 0;
        eb.nodes()
            .map(|(ix, iy)| {
                if eb.on_boundary(ix, iy) {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    };
    let n_int = interior.iter().flatten().count();
    let full = assemble_on_box(fine, eb, |cx, cy| kappa[fine.cell(cx, cy)], FormKind::Stiffness, Some, n_loc);
    let full = DMatrix::from(&full);

    let mut out: [Vec<f64>; 4] = Default::default();
    let chol = if n_int > 0 {
        let idx: Vec<usize> = (0..n_loc).filter(|&k| interior[k].is_some()).collect();
        let a_ii = full.select_rows(&idx).select_columns(&idx);
        Some((idx, a_ii.cholesky().ok_or_else(|| Error::Numerical("interior stiffness is not SPD".into()))?))
    } else {
        None
    };
    for (c, slot) in out.iter_mut().enumerate() {
        let mut g = vec![0.0; n_loc];
        for (k, (ix, iy)) in eb.nodes().enumerate() {
            if eb.on_boundary(ix, iy) {
                let s = (ix - eb.x0) as f64 / r as f64;
                let t = (iy - eb.y0) as f64 / r as f64;
                g[k] = hat(c, s, t);
            }
        }
        if let Some((idx, chol)) = &chol {
            let gv = DVector::from_vec(g.clone());
            let rhs = -(&full * &gv);
            let rhs_i = DVector::from_iterator(idx.len(), idx.iter().map(|&k| rhs[k]));
            let u = chol.solve(&rhs_i);
            for (j, &k) in idx.iter().enumerate() {
                g[k] = u[j];
            }
        }
        *slot = g;
    }
    Ok(out)
}

/// Cellwise `kappa * sum_i |grad chi_i|^2`, gradients taken at cell centers.
pub fn kappa_tilde(fine: &FineGrid, pou: &PartitionOfUnity, kappa: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; fine.n_cells()];
    let h = fine.h();
    for (b, vals) in pou.boxes.iter().zip(&pou.values) {
        for (cx, cy) in b.cells() {
            let u0 = vals[b.local(cx, cy)];
            let u1 = vals[b.local(cx + 1, cy)];
            let u2 = vals[b.local(cx + 1, cy + 1)];
            let u3 = vals[b.local(cx, cy + 1)];
            let gx = ((u1 - u0) + (u2 - u3)) / (2.0 * h);
            let gy = ((u3 - u0) + (u2 - u1)) / (2.0 * h);
            out[fine.cell(cx, cy)] += gx * gx + gy * gy;
        }
    }
    for (o, k) in out.iter_mut().zip(kappa) {
        *o *= k;
    }
    out
}
