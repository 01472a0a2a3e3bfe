//! Oversampled randomized snapshots and the interval-local space-time spectral problem.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::field_io::PermeabilityField;
use crate::grid_fem::{assemble_on_box, CoarseGrid, FineGrid, FormKind, NodeBox, TimeGrid};
use crate::linalg::{csr_mul, fix_sign, SparseSpd};
use crate::msbasis::{build_pou, kappa_tilde, OfflineBasis, PartitionOfUnity, RegionModes};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SpacetimeParams {
    /// Coarse rings added around each neighborhood.
    pub layers: usize,
    /// Extra snapshots beyond the requested mode count.
    pub buffer: usize,
    /// Fine steps before the interval start included in the time integrals;
    /// `None` means one interval's worth.
    pub extension_steps: Option<usize>,
}

impl Default for SpacetimeParams {
    fn default() -> Self {
        Self { layers: 1, buffer: 4, extension_steps: None }
    }
}

/// Neighborhood `omega`, its oversampled box and the extended time window.
#[derive(Clone, Debug, PartialEq)]
pub struct OversampledRegion {
    pub region: usize,
    pub omega: NodeBox,
    pub plus: NodeBox,
    pub layers: usize,
    /// `T*_{n-1}`, `T_{n-1}` and `T_n`.
    pub t_ext: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Fine time points of the trapezoid rule on `[T*, T_n]`.
    pub quad_times: Vec<f64>,
    pub quad_weights: Vec<f64>,
}

pub fn build_oversampled(
    coarse: &CoarseGrid,
    region: usize,
    layers: usize,
    time: &TimeGrid,
    interval: usize,
    extension_steps: usize,
) -> OversampledRegion {
    let start = time.interval_start_step(interval);
    let end = time.interval_end_step(interval);
    let ext = start.saturating_sub(extension_steps);
    let quad_times: Vec<f64> = (ext..=end).map(|m| time.time(m)).collect();
    let q = quad_times.len();
    let quad_weights = (0..q).map(|k| if k == 0 || k == q - 1 { 0.5 * time.dt } else { time.dt }).collect();
    OversampledRegion {
        region,
        omega: coarse.neighborhood_box(region, 0),
        plus: coarse.neighborhood_box(region, layers),
        layers,
        t_ext: time.time(ext),
        t_start: time.time(start),
        t_end: time.time(end),
        quad_times,
        quad_weights,
    }
}

/// Snapshots as box-local nodal vectors on the oversampled box.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet {
    pub plus: NodeBox,
    pub t_star: f64,
    pub seed: u64,
    pub snapshots: Vec<Vec<f64>>,
}

/// Box nodes on the box boundary that are not on the domain boundary.
fn free_boundary_nodes(fine: &FineGrid, bx: &NodeBox) -> usize {
    bx.nodes()
        .filter(|&(ix, iy)| bx.on_boundary(ix, iy) && !fine.is_dirichlet(fine.node(ix, iy)))
        .count()
}

/// Solves `-div(kappa grad psi) = 0` inside `bx` for each boundary data set.
/// `boundary(j, k)` gives the value of snapshot `j` at box-local boundary
/// node `k`; nodes on the domain boundary are held at zero.
pub fn harmonic_snapshots(
    fine: &FineGrid,
    bx: &NodeBox,
    kappa: &[f64],
    count: usize,
    mut boundary: impl FnMut(usize, usize) -> f64,
) -> Result<Vec<Vec<f64>>> {
    let mut interior = vec![None; bx.len()];
    let mut n_int = 0;
    for (k, (ix, iy)) in bx.nodes().enumerate() {
        if !bx.on_boundary(ix, iy) {
            interior[k] = Some(n_int);
            n_int += 1;
        }
    }
    let full = assemble_on_box(fine, bx, |cx, cy| kappa[fine.cell(cx, cy)], FormKind::Stiffness, Some, bx.len());
    let a_ii = assemble_on_box(fine, bx, |cx, cy| kappa[fine.cell(cx, cy)], FormKind::Stiffness, |k| interior[k], n_int);
    let chol = if n_int > 0 { Some(SparseSpd::factor(&a_ii)?) } else { None };
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        let mut psi = vec![0.0; bx.len()];
        for (k, (ix, iy)) in bx.nodes().enumerate() {
            if bx.on_boundary(ix, iy) {
                let v = boundary(j, k);
                psi[k] = if fine.is_dirichlet(fine.node(ix, iy)) { 0.0 } else { v };
            }
        }
        if let Some(chol) = &chol {
            let ax = csr_mul(&full, &DVector::from_column_slice(&psi));
            let rhs = DVector::from_iterator(n_int, (0..bx.len()).filter(|&k| interior[k].is_some()).map(|k| -ax[k]));
            let u = chol.solve(&rhs);
            for k in 0..bx.len() {
                if let Some(d) = interior[k] {
                    psi[k] = u[d];
                }
            }
        }
        out.push(psi);
    }
    Ok(out)
}

/// Randomized-boundary snapshots at the frozen time `t_star`.
pub fn generate_snapshots(
    fine: &FineGrid,
    region: &OversampledRegion,
    field: &PermeabilityField,
    t_star: f64,
    count: usize,
    seed: u64,
) -> Result<SnapshotSet> {
    if free_boundary_nodes(fine, &region.plus) < count {
        return Err(Error::Config(format!(
            "oversampled region {} has fewer free boundary nodes than the {count} requested snapshots",
            region.region
        )));
    }
    let kappa = field.modulate(t_star);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let snapshots = harmonic_snapshots(fine, &region.plus, &kappa, count, |_, _| StandardNormal.sample(&mut rng))
        .map_err(|e| Error::Numerical(format!("snapshots of region {}: {e}", region.region)))?;
    Ok(SnapshotSet { plus: region.plus, t_star, seed, snapshots })
}

/// Largest interior residual of `-div(kappa grad psi)` relative to the
/// largest row contribution.
pub fn harmonic_residual(fine: &FineGrid, set: &SnapshotSet, kappa: &[f64]) -> f64 {
    let bx = &set.plus;
    let a = assemble_on_box(fine, bx, |cx, cy| kappa[fine.cell(cx, cy)], FormKind::Stiffness, Some, bx.len());
    let abs = DMatrix::from(&a).abs();
    let mut worst: f64 = 0.0;
    for psi in &set.snapshots {
        let v = DVector::from_column_slice(psi);
        let r = csr_mul(&a, &v);
        let scale = &abs * v.abs();
        for (k, (ix, iy)) in bx.nodes().enumerate() {
            if !bx.on_boundary(ix, iy) && scale[k] > 0.0 {
                worst = worst.max(r[k].abs() / scale[k]);
            }
        }
    }
    worst
}

/// Shepard-normalized hats of half-width `(1 + layers) H`, each supported on
/// its oversampled neighborhood.
pub fn oversampled_pou(fine: &FineGrid, coarse: &CoarseGrid, layers: usize) -> PartitionOfUnity {
    let reach = (layers + 1) as f64 * coarse.h();
    let h = fine.h();
    let hat = |i: usize, ix: usize, iy: usize| {
        let (nx, ny) = coarse.node_coords(i);
        let dx = (ix as f64 * h - nx as f64 * coarse.h()).abs();
        let dy = (iy as f64 * h - ny as f64 * coarse.h()).abs();
        (1.0 - dx / reach).max(0.0) * (1.0 - dy / reach).max(0.0)
    };
    let mut total = vec![0.0; fine.n_nodes()];
    let boxes: Vec<NodeBox> = (0..coarse.n_nodes()).map(|i| coarse.neighborhood_box(i, layers)).collect();
    for (i, b) in boxes.iter().enumerate() {
        for (ix, iy) in b.nodes() {
            total[fine.node(ix, iy)] += hat(i, ix, iy);
        }
    }
    let values = boxes
        .iter()
        .enumerate()
        .map(|(i, b)| b.nodes().map(|(ix, iy)| hat(i, ix, iy) / total[fine.node(ix, iy)]).collect())
        .collect();
    PartitionOfUnity { boxes, values }
}

/// Modes of the space-time pencil, ascending.
#[derive(Clone, Debug)]
pub struct SpacetimeModes {
    pub eigenvalues: Vec<f64>,
    /// Coefficients of each mode in the snapshot basis (columns).
    pub coefficients: DMatrix<f64>,
    pub rank: usize,
}

/// Time-integrated pencil `(A_n, S_n)` projected onto the snapshots.
pub fn spacetime_pencil(
    fine: &FineGrid,
    region: &OversampledRegion,
    set: &SnapshotSet,
    field: &PermeabilityField,
    grad_sq_plus: &[f64],
) -> (DMatrix<f64>, DMatrix<f64>) {
    let bx = &set.plus;
    let m = set.snapshots.len();
    let psi = DMatrix::from_fn(bx.len(), m, |k, j| set.snapshots[j][k]);
    let mut a_n = DMatrix::zeros(m, m);
    let mut s_n = DMatrix::zeros(m, m);
    for (factor, kappa) in field.affine_terms() {
        let w: f64 = region.quad_times.iter().zip(&region.quad_weights).map(|(&t, &w)| w * factor.eval(t)).sum();
        let a = assemble_on_box(fine, bx, |cx, cy| kappa[fine.cell(cx, cy)], FormKind::Stiffness, Some, bx.len());
        let s = assemble_on_box(
            fine,
            bx,
            |cx, cy| kappa[fine.cell(cx, cy)] * grad_sq_plus[fine.cell(cx, cy)],
            FormKind::Mass,
            Some,
            bx.len(),
        );
        let a = DMatrix::from(&a);
        let s = DMatrix::from(&s);
        a_n += psi.tr_mul(&(&a * &psi)) * w;
        s_n += psi.tr_mul(&(&s * &psi)) * w;
    }
    ((&a_n + a_n.transpose()) * 0.5, (&s_n + s_n.transpose()) * 0.5)
}

/// Eigenpairs of `A_n v = lambda S_n v` after reducing `S_n` to its
/// numerical rank (eigenvalues above `1e-10` of the largest).
pub fn spacetime_spectral(a_n: &DMatrix<f64>, s_n: &DMatrix<f64>) -> Result<SpacetimeModes> {
    let es = s_n.clone().symmetric_eigen();
    let smax = es.eigenvalues.iter().copied().fold(0.0, f64::max);
    if !(smax > 0.0) {
        return Err(Error::Numerical("snapshot mass matrix vanishes".into()));
    }
    let keep: Vec<usize> = (0..s_n.nrows()).filter(|&i| es.eigenvalues[i] > 1e-10 * smax).collect();
    if keep.len() < s_n.nrows() {
        log::warn!("snapshot space reduced from {} to numerical rank {}", s_n.nrows(), keep.len());
    }
    let r = keep.len();
    let b = DMatrix::from_fn(s_n.nrows(), r, |i, j| es.eigenvectors[(i, keep[j])] / es.eigenvalues[keep[j]].sqrt());
    let c = b.tr_mul(&(a_n * &b));
    let ec = ((&c + c.transpose()) * 0.5).symmetric_eigen();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| ec.eigenvalues[i].total_cmp(&ec.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| ec.eigenvalues[i]).collect();
    let mut coefficients = DMatrix::zeros(s_n.nrows(), r);
    for (dst, &src) in order.iter().enumerate() {
        let mut v = &b * ec.eigenvectors.column(src);
        fix_sign(v.as_mut_slice());
        coefficients.set_column(dst, &v);
    }
    Ok(SpacetimeModes { eigenvalues, coefficients, rank: r })
}

/// Restricts the first `l` modes to `omega` and multiplies them by `chi`.
pub fn restrict_modes(
    region: &OversampledRegion,
    set: &SnapshotSet,
    modes: &SpacetimeModes,
    chi: &[f64],
    l: usize,
) -> Vec<Vec<f64>> {
    let (om, plus) = (&region.omega, &set.plus);
    (0..l.min(modes.rank))
        .map(|j| {
            let a = modes.coefficients.column(j);
            om.nodes()
                .enumerate()
                .map(|(k, (ix, iy))| {
                    let p = plus.local(ix, iy);
                    chi[k] * set.snapshots.iter().zip(a.iter()).map(|(s, c)| s[p] * c).sum::<f64>()
                })
                .collect()
        })
        .collect()
}

fn cell_grad_norms(fine: &FineGrid, pou: &PartitionOfUnity, i: usize) -> Vec<(usize, f64)> {
    let b = &pou.boxes[i];
    let v = &pou.values[i];
    let h = fine.h();
    b.cells()
        .map(|(cx, cy)| {
            let u0 = v[b.local(cx, cy)];
            let u1 = v[b.local(cx + 1, cy)];
            let u2 = v[b.local(cx + 1, cy + 1)];
            let u3 = v[b.local(cx, cy + 1)];
            let gx = ((u1 - u0) + (u2 - u3)) / (2.0 * h);
            let gy = ((u3 - u0) + (u2 - u1)) / (2.0 * h);
            (fine.cell(cx, cy), gx.hypot(gy))
        })
        .collect()
}

/// Fraction of cells in `omega_i` where `|grad chi_i^+| >= |grad chi_i|`.
pub fn pou_dominance(fine: &FineGrid, pou: &PartitionOfUnity, pou_plus: &PartitionOfUnity, i: usize) -> f64 {
    let plus: std::collections::HashMap<usize, f64> = cell_grad_norms(fine, pou_plus, i).into_iter().collect();
    let base = cell_grad_norms(fine, pou, i);
    let hits = base.iter().filter(|(c, g)| plus.get(c).copied().unwrap_or(0.0) >= *g).count();
    hits as f64 / base.len().max(1) as f64
}

fn snapshot_seed(seed: u64, region: usize, interval: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((interval as u64) << 32) | region as u64);
    rand::Rng::random(&mut rng)
}

/// One offline space per interval from the space-time construction.
#[allow(clippy::too_many_arguments)]
pub fn build_interval_bases(
    fine: &FineGrid,
    coarse: &CoarseGrid,
    field: &PermeabilityField,
    time: &TimeGrid,
    l_perm: usize,
    l_add: usize,
    params: &SpacetimeParams,
    seed: u64,
) -> Result<Vec<OfflineBasis>> {
    let l = l_perm + l_add;
    let count = l + params.buffer;
    let ext = params.extension_steps.unwrap_or(time.steps_per_interval);
    let pou_plus = oversampled_pou(fine, coarse, params.layers);
    let ones = vec![1.0; fine.n_cells()];
    let grad_sq_plus = kappa_tilde(fine, &pou_plus, &ones);
    (0..time.n_intervals)
        .map(|n| {
            let t0 = time.time(time.interval_start_step(n));
            let pou = build_pou(fine, coarse, &field.modulate(t0))?;
            let regions = (0..coarse.n_nodes())
                .into_par_iter()
                .map(|i| {
                    let region = build_oversampled(coarse, i, params.layers, time, n, ext);
                    let set = generate_snapshots(fine, &region, field, t0, count, snapshot_seed(seed, i, n))?;
                    let (a_n, s_n) = spacetime_pencil(fine, &region, &set, field, &grad_sq_plus);
                    let modes = spacetime_spectral(&a_n, &s_n)?;
                    if modes.rank < l {
                        return Err(Error::Numerical(format!(
                            "region {i}, interval {n}: snapshot rank {} is below the {l} requested modes",
                            modes.rank
                        )));
                    }
                    let chi = &pou.values[i];
                    let restricted = restrict_modes(&region, &set, &modes, chi, l);
                    Ok(RegionModes { bx: region.omega, eigenvalues: modes.eigenvalues[..l].to_vec(), modes: restricted })
                })
                .collect::<Result<Vec<_>>>()?;
            let dom: f64 = (0..coarse.n_nodes()).map(|i| pou_dominance(fine, &pou, &pou_plus, i)).sum::<f64>()
                / coarse.n_nodes() as f64;
            log::info!("interval {n}: mean gradient dominance of the oversampled partition {dom:.3}");
            Ok(OfflineBasis::from_regions(fine, regions, l_perm, l_add))
        })
        .collect()
}
