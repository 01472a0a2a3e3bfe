use msbayes::field_io::{Modulation, PermeabilityField};
use msbayes::grid_fem::{build_grids, CoarseGrid, FineGrid, NodeBox};
use msbayes::msbasis::{
    build_offline_basis, build_pou, build_spectral_basis, cache_key, kappa_tilde, load_or_build, read_cache,
    write_cache, OfflineBasis,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Unit-square Q1 stiffness (independent of h in 2D) and mass / h^2,
/// corners ordered (0,0), (1,0), (1,1), (0,1).
const K_REF: [[f64; 4]; 4] = [
    [4.0 / 6.0, -1.0 / 6.0, -2.0 / 6.0, -1.0 / 6.0],
    [-1.0 / 6.0, 4.0 / 6.0, -1.0 / 6.0, -2.0 / 6.0],
    [-2.0 / 6.0, -1.0 / 6.0, 4.0 / 6.0, -1.0 / 6.0],
    [-1.0 / 6.0, -2.0 / 6.0, -1.0 / 6.0, 4.0 / 6.0],
];
const M_REF: [[f64; 4]; 4] = [
    [4.0 / 36.0, 2.0 / 36.0, 1.0 / 36.0, 2.0 / 36.0],
    [2.0 / 36.0, 4.0 / 36.0, 2.0 / 36.0, 1.0 / 36.0],
    [1.0 / 36.0, 2.0 / 36.0, 4.0 / 36.0, 2.0 / 36.0],
    [2.0 / 36.0, 1.0 / 36.0, 2.0 / 36.0, 4.0 / 36.0],
];

fn corners(bx: &NodeBox, cx: usize, cy: usize) -> [usize; 4] {
    [bx.local(cx, cy), bx.local(cx + 1, cy), bx.local(cx + 1, cy + 1), bx.local(cx, cy + 1)]
}

/// Dense pencil on all box nodes, then restricted to `keep`.
fn oracle_pencil(fine: &FineGrid, bx: &NodeBox, kappa: &[f64], kt: &[f64], keep: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = bx.len();
    let (mut a, mut s) = (DMatrix::zeros(n, n), DMatrix::zeros(n, n));
    let h2 = fine.h() * fine.h();
    for cy in bx.y0..bx.y1 {
        for cx in bx.x0..bx.x1 {
            let c = fine.cell(cx, cy);
            let idx = corners(bx, cx, cy);
            for p in 0..4 {
                for q in 0..4 {
                    a[(idx[p], idx[q])] += kappa[c] * K_REF[p][q];
                    s[(idx[p], idx[q])] += kt[c] * h2 * M_REF[p][q];
                }
            }
        }
    }
    (a.select_rows(keep).select_columns(keep), s.select_rows(keep).select_columns(keep))
}

/// `A v = lambda S v` through the eigendecomposition of `S`.
fn oracle_eigen(a: &DMatrix<f64>, s: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let se = s.clone().symmetric_eigen();
    let w = DMatrix::from_diagonal(&se.eigenvalues.map(|d| 1.0 / d.sqrt()));
    let t = &se.eigenvectors * w;
    let c = t.transpose() * a * &t;
    let ce = ((&c + c.transpose()) * 0.5).symmetric_eigen();
    let mut order: Vec<usize> = (0..c.nrows()).collect();
    order.sort_by(|&i, &j| ce.eigenvalues[i].total_cmp(&ce.eigenvalues[j]));
    let vals = order.iter().map(|&i| ce.eigenvalues[i]).collect();
    let vecs = DMatrix::from_columns(&order.iter().map(|&i| &t * ce.eigenvectors.column(i)).collect::<Vec<_>>());
    (vals, vecs)
}

fn channel_field(n: usize) -> PermeabilityField {
    let k = (0..n * n)
        .map(|c| {
            let (cx, cy) = (c % n, c / n);
            if cy == n / 2 - 1 || (cx == 3 * n / 4 && cy > n / 4) { 1e4 } else { 1.0 }
        })
        .collect();
    PermeabilityField::new(n, k, Modulation::default()).unwrap()
}

#[test]
fn toy_pencil_matches_dense_oracle() {
    let (fine, coarse) = build_grids(20, 2).unwrap();
    let field = channel_field(20);
    let kappa = field.kappa0();
    let pou = build_pou(&fine, &coarse, kappa).unwrap();
    let kt = kappa_tilde(&fine, &pou, kappa);
    for region in 0..coarse.n_nodes() {
        let nb = build_spectral_basis(&fine, &pou, kappa, &kt, region, 20).unwrap();
        let keep: Vec<usize> = (0..nb.bx.len())
            .filter(|&k| {
                let (ix, iy) = nb.bx.node_at(k);
                !fine.is_dirichlet(fine.node(ix, iy))
            })
            .collect();
        assert_eq!(keep, nb.snapshot_nodes);
        let (a, s) = oracle_pencil(&fine, &nb.bx, kappa, &kt, &keep);
        let (vals, vecs) = oracle_eigen(&a, &s);
        for (j, &l) in nb.eigenvalues.iter().enumerate() {
            assert!((l - vals[j]).abs() <= 1e-8 * l.abs().max(1.0), "region {region} mode {j}: {l} vs {}", vals[j]);
            let isolated = (j == 0 || vals[j] - vals[j - 1] > 1e-4 * vals[j].abs().max(1.0))
                && vals[j + 1] - vals[j] > 1e-4 * vals[j].abs().max(1.0);
            if isolated {
                let v = nb.eigenvectors.column(j);
                let o = vecs.column(j);
                let sign = if v.dot(&(&s * o)) < 0.0 { -1.0 } else { 1.0 };
                let diff = (v - o * sign).amax();
                assert!(diff <= 1e-8 * o.amax(), "region {region} mode {j}: vector diff {diff:e}");
            }
        }
    }
}

#[test]
fn eigenvalues_ascending_nonnegative_and_interior_constant_mode() {
    let (fine, coarse) = build_grids(20, 4).unwrap();
    let field = channel_field(20);
    let kappa = field.kappa0();
    let pou = build_pou(&fine, &coarse, kappa).unwrap();
    let kt = kappa_tilde(&fine, &pou, kappa);
    for region in 0..coarse.n_nodes() {
        let nb = build_spectral_basis(&fine, &pou, kappa, &kt, region, 20).unwrap();
        assert!(nb.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        assert!(nb.eigenvalues.iter().all(|&l| l >= -1e-10));
        let g = nb.eigenvectors.transpose() * {
            let (_, s) = oracle_pencil(&fine, &nb.bx, kappa, &kt, &nb.snapshot_nodes);
            s * &nb.eigenvectors
        };
        assert!((g - DMatrix::identity(20, 20)).amax() < 1e-8);
        for v in nb.eigenvectors.column_iter() {
            let first = v.iter().find(|x| x.abs() > 1e-8 * v.amax()).unwrap();
            assert!(*first > 0.0, "region {region}: sign convention");
        }
        let (ix, iy) = coarse.node_coords(region);
        if ix > 1 && iy > 1 && ix + 1 < coarse.n() && iy + 1 < coarse.n() {
            assert!(nb.eigenvalues[0].abs() < 1e-8, "region {region}: {}", nb.eigenvalues[0]);
        }
    }
}

#[test]
fn partition_of_unity_matches_local_dense_solve_in_channel() {
    let (fine, coarse) = build_grids(20, 2).unwrap();
    let field = channel_field(20);
    let pou = build_pou(&fine, &coarse, field.kappa0()).unwrap();
    let r = coarse.ratio();
    for e in 0..coarse.n_elements() {
        let eb = coarse.element_box(e);
        let n = eb.len();
        let mut a = DMatrix::zeros(n, n);
        for cy in eb.y0..eb.y1 {
            for cx in eb.x0..eb.x1 {
                let idx = corners(&eb, cx, cy);
                for p in 0..4 {
                    for q in 0..4 {
                        a[(idx[p], idx[q])] += field.kappa0()[fine.cell(cx, cy)] * K_REF[p][q];
                    }
                }
            }
        }
        for &node in &coarse.element_nodes(e) {
            let (nx, ny) = coarse.node_coords(node);
            let (px, py) = (nx * r, ny * r);
            let mut lhs = a.clone();
            let mut rhs = DVector::zeros(n);
            for (k, (ix, iy)) in eb.nodes().enumerate() {
                if eb.on_boundary(ix, iy) {
                    lhs.row_mut(k).fill(0.0);
                    lhs[(k, k)] = 1.0;
                    let dx = (ix as f64 - px as f64).abs() / r as f64;
                    let dy = (iy as f64 - py as f64).abs() / r as f64;
                    rhs[k] = (1.0 - dx).max(0.0) * (1.0 - dy).max(0.0);
                }
            }
            let u = lhs.lu().solve(&rhs).unwrap();
            for (k, (ix, iy)) in eb.nodes().enumerate() {
                let v = pou.value(node, ix, iy);
                assert!((v - u[k]).abs() < 1e-10, "element {e} node {node}: {v} vs {}", u[k]);
            }
        }
    }
}

#[test]
fn constant_kappa_pou_is_bilinear_hat() {
    let (fine, coarse) = build_grids(30, 3).unwrap();
    let pou = build_pou(&fine, &coarse, &vec![1.0; 900]).unwrap();
    let hc = coarse.h();
    for i in 0..coarse.n_nodes() {
        let (nx, ny) = coarse.node_coords(i);
        for (ix, iy) in pou.boxes[i].nodes() {
            let (x, y) = (ix as f64 * fine.h(), iy as f64 * fine.h());
            let hat = (1.0 - (x - nx as f64 * hc).abs() / hc).max(0.0) * (1.0 - (y - ny as f64 * hc).abs() / hc).max(0.0);
            assert!((pou.value(i, ix, iy) - hat).abs() <= 1e-10);
        }
    }
}

fn first_eigenvalues(n_f: usize, n_c: usize, node: (usize, usize)) -> Vec<f64> {
    let (fine, coarse) = build_grids(n_f, n_c).unwrap();
    let kappa = vec![1.0; n_f * n_f];
    let pou = build_pou(&fine, &coarse, &kappa).unwrap();
    let kt = kappa_tilde(&fine, &pou, &kappa);
    build_spectral_basis(&fine, &pou, &kappa, &kt, coarse.node(node.0, node.1), 5).unwrap().eigenvalues
}

#[test]
fn spectral_accuracy_under_fourfold_refinement() {
    // Twelve fine cells per coarse element against forty-eight.
    let coarse = first_eigenvalues(36, 3, (0, 0));
    let fine = first_eigenvalues(144, 3, (0, 0));
    compare(&coarse, &fine);
}

fn compare(coarse: &[f64], fine: &[f64]) {
    for (c, f) in coarse.iter().zip(fine) {
        if f.abs() < 1e-8 {
            assert!(c.abs() < 1e-8);
        } else {
            assert!(((c - f) / f).abs() < 0.05, "{coarse:?} vs {fine:?}");
        }
    }
}

fn box_of(coarse: &CoarseGrid, i: usize) -> NodeBox {
    coarse.neighborhood_box(i, 0)
}

#[test]
fn offline_columns_conform_to_neighborhoods() {
    let (fine, coarse) = build_grids(20, 4).unwrap();
    let basis = build_offline_basis(&fine, &coarse, &channel_field(20), 2, 6).unwrap();
    assert_eq!((basis.n_perm(), basis.n_add()), (2 * 25, 6 * 25));
    let check = |p: &nalgebra_sparse::CscMatrix<f64>, per: usize| {
        for c in 0..p.ncols() {
            let col = p.col(c);
            assert!(col.nnz() > 0 && col.values().iter().any(|v| *v != 0.0), "column {c} is zero");
            let bx = box_of(&coarse, c / per);
            for &d in col.row_indices() {
                let (ix, iy) = {
                    let node = fine.node_of_dof(d);
                    (node % (fine.n() + 1), node / (fine.n() + 1))
                };
                assert!(bx.contains(ix, iy), "column {c} leaves its neighborhood");
            }
        }
    };
    check(&basis.p_perm, 2);
    check(&basis.p_add, 6);
}

#[test]
fn zero_permanent_modes_give_empty_prolongation() {
    let (fine, coarse) = build_grids(20, 2).unwrap();
    let basis = build_offline_basis(&fine, &coarse, &channel_field(20), 0, 4).unwrap();
    assert_eq!(basis.n_perm(), 0);
    assert_eq!(basis.n_add(), 4 * 9);
}

#[test]
fn single_neighborhood_column_count() {
    let (fine, coarse) = build_grids(4, 1).unwrap();
    let basis = build_offline_basis(&fine, &coarse, &PermeabilityField::uniform(4, 1.0, Modulation::default()), 1, 2).unwrap();
    // Every neighborhood of a one-element grid is the whole square.
    for r in &basis.regions {
        assert_eq!(r.modes.len(), 3);
    }
    assert_eq!(basis.n_perm() + basis.n_add(), 4 * 3);
}

fn same_basis(a: &OfflineBasis, b: &OfflineBasis) {
    assert_eq!(a.regions, b.regions);
    assert_eq!(a.p_perm, b.p_perm);
    assert_eq!(a.p_add, b.p_add);
}

#[test]
fn cache_round_trip_and_key_mismatch() {
    let (fine, coarse) = build_grids(20, 2).unwrap();
    let field = channel_field(20);
    let basis = build_offline_basis(&fine, &coarse, &field, 2, 4).unwrap();
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("msbasis-cache-test");
    let _ = std::fs::remove_dir_all(&dir);
    let key = cache_key(&field, 20, 2, 2, 4);
    let path = dir.join("basis.msbc");
    write_cache(&path, &key, &basis).unwrap();
    same_basis(&read_cache(&path, &key, &fine).unwrap().unwrap(), &basis);
    let other = cache_key(&field, 20, 2, 2, 5);
    assert!(read_cache(&path, &other, &fine).unwrap().is_none());
    let first = load_or_build(Some(&dir), &fine, &coarse, &field, 2, 4).unwrap();
    let second = load_or_build(Some(&dir), &fine, &coarse, &field, 2, 4).unwrap();
    same_basis(&first, &basis);
    same_basis(&second, &basis);
    std::fs::write(&path, b"MSBC garbage").unwrap();
    assert!(read_cache(&path, &key, &fine).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pou_sums_to_one_and_stays_in_unit_interval(
        logs in proptest::collection::vec(-2.0f64..4.0, 144),
    ) {
        let (fine, coarse) = build_grids(12, 3).unwrap();
        let kappa: Vec<f64> = logs.iter().map(|l| 10f64.powf(*l)).collect();
        let pou = build_pou(&fine, &coarse, &kappa).unwrap();
        let mut sum = vec![0.0; fine.n_nodes()];
        for i in 0..pou.len() {
            for (s, v) in sum.iter_mut().zip(pou.nodal(&fine, i)) {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
                *s += v;
            }
        }
        prop_assert!(sum.iter().all(|s| (s - 1.0).abs() < 1e-12));
    }
}
