use nalgebra::DVector;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use super::mesh::{CoarseGrid, FineGrid, NodeBox};
use crate::field_io::{PermeabilityField, TimeFactor};
use crate::{Error, Result};

/// 2x2 Gauss points on the unit reference square; each carries weight 1/4.
pub const GAUSS_2X2: [(f64, f64); 4] = {
    const A: f64 = 0.211_324_865_405_187_1; // (1 - 1/sqrt 3) / 2
    const B: f64 = 0.788_675_134_594_812_9;
    [(A, A), (B, A), (B, B), (A, B)]
};

fn shape(xi: f64, eta: f64) -> [f64; 4] {
    [(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), xi * eta, (1.0 - xi) * eta]
}

fn shape_grad(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [[-(1.0 - eta), -(1.0 - xi)], [1.0 - eta, -xi], [eta, xi], [-eta, 1.0 - xi]]
}

/// Element stiffness (scale-free in 2D) and unit-area mass matrices of the
/// bilinear square element, integrated with 2x2 Gauss quadrature.
fn reference_matrices() -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
    let mut k = [[0.0; 4]; 4];
    let mut m = [[0.0; 4]; 4];
    for &(xi, eta) in &GAUSS_2X2 {
        let n = shape(xi, eta);
        let g = shape_grad(xi, eta);
        for i in 0..4 {
            for j in 0..4 {
                k[i][j] += 0.25 * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                m[i][j] += 0.25 * n[i] * n[j];
            }
        }
    }
    (k, m)
}

/// Which bilinear form to assemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormKind {
    /// `int w grad u . grad v`
    Stiffness,
    /// `int w u v`
    Mass,
}

/// Assembles a weighted bilinear form over the cells of `bx`.
///
/// `unknown` maps a box-local node index to its row in the output (or `None`
/// if that node is eliminated). Every element entry between retained nodes is
/// stored even when its weight is zero, so all forms assembled over the same
/// box and unknown map share one sparsity pattern.
pub fn assemble_on_box(
    fine: &FineGrid,
    bx: &NodeBox,
    weight: impl Fn(usize, usize) -> f64,
    kind: FormKind,
    unknown: impl Fn(usize) -> Option<usize>,
    n_unknowns: usize,
) -> CsrMatrix<f64> {
    let (k_ref, m_ref) = reference_matrices();
    let h2 = fine.h() * fine.h();
    let mut coo = CooMatrix::new(n_unknowns, n_unknowns);
    for (cx, cy) in bx.cells() {
        let w = weight(cx, cy);
        let corners = [(cx, cy), (cx + 1, cy), (cx + 1, cy + 1), (cx, cy + 1)];
        let ids: [Option<usize>; 4] = corners.map(|(ix, iy)| unknown(bx.local(ix, iy)));
        for i in 0..4 {
            let Some(r) = ids[i] else { continue };
            for j in 0..4 {
                let Some(c) = ids[j] else { continue };
                let v = match kind {
                    FormKind::Stiffness => w * k_ref[i][j],
                    FormKind::Mass => w * h2 * m_ref[i][j],
                };
                coo.push(r, c, v);
            }
        }
    }
    CsrMatrix::from(&coo)
}

fn assemble_global(fine: &FineGrid, weight: impl Fn(usize, usize) -> f64, kind: FormKind) -> CsrMatrix<f64> {
    let bx = fine.full_box();
    assemble_on_box(fine, &bx, weight, kind, |k| fine.dof(k), fine.n_dofs())
}

/// Source term `f(x)`, piecewise constant on fine cells.
#[derive(Clone, Debug, PartialEq)]
pub enum SourceSpec {
    Constant(f64),
    /// One value per fine cell, row-major from the bottom.
    Cellwise(Vec<f64>),
    /// Weighted indicators of coarse elements `((col, row), weight)`.
    CoarseElements(Vec<((usize, usize), f64)>),
}

impl SourceSpec {
    pub fn cellwise(&self, fine: &FineGrid, coarse: &CoarseGrid) -> Result<Vec<f64>> {
        match self {
            SourceSpec::Constant(c) => Ok(vec![*c; fine.n_cells()]),
            SourceSpec::Cellwise(v) => {
                if v.len() != fine.n_cells() {
                    return Err(Error::Config(format!(
                        "cellwise source has {} values, grid has {} cells",
                        v.len(),
                        fine.n_cells()
                    )));
                }
                Ok(v.clone())
            }
            SourceSpec::CoarseElements(list) => {
                let mut out = vec![0.0; fine.n_cells()];
                for &((ex, ey), w) in list {
                    if ex >= coarse.n() || ey >= coarse.n() {
                        return Err(Error::Config(format!("source element ({ex}, {ey}) is outside the coarse grid")));
                    }
                    for (cx, cy) in coarse.element_cells(coarse.element(ex, ey)) {
                        out[fine.cell(cx, cy)] += w;
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SourceSpec::Constant(c) => *c == 0.0,
            SourceSpec::Cellwise(v) => v.iter().all(|&x| x == 0.0),
            SourceSpec::CoarseElements(l) => l.iter().all(|&(_, w)| w == 0.0),
        }
    }
}

fn load_vector(fine: &FineGrid, f_cells: &[f64]) -> DVector<f64> {
    let quarter = 0.25 * fine.h() * fine.h();
    let mut load = DVector::zeros(fine.n_dofs());
    for cy in 0..fine.n() {
        for cx in 0..fine.n() {
            let fc = f_cells[fine.cell(cx, cy)];
            if fc == 0.0 {
                continue;
            }
            for p in fine.cell_nodes(cx, cy) {
                if let Some(d) = fine.dof(p) {
                    load[d] += fc * quarter;
                }
            }
        }
    }
    load
}

/// Fine-scale operators at one time instant, Dirichlet dofs eliminated.
#[derive(Clone, Debug)]
pub struct FineOperators {
    pub stiffness: CsrMatrix<f64>,
    pub mass: CsrMatrix<f64>,
    pub load: DVector<f64>,
}

/// Assembles stiffness, consistent mass and load for `kappa(., t)`.
pub fn assemble(
    fine: &FineGrid,
    coarse: &CoarseGrid,
    field: &PermeabilityField,
    t: f64,
    source: &SourceSpec,
) -> Result<FineOperators> {
    check_field(fine, field)?;
    let kappa = field.modulate(t);
    let stiffness = assemble_global(fine, |cx, cy| kappa[fine.cell(cx, cy)], FormKind::Stiffness);
    let mass = assemble_global(fine, |_, _| 1.0, FormKind::Mass);
    let load = load_vector(fine, &source.cellwise(fine, coarse)?);
    Ok(FineOperators { stiffness, mass, load })
}

fn check_field(fine: &FineGrid, field: &PermeabilityField) -> Result<()> {
    if field.n() != fine.n() {
        return Err(Error::Config(format!(
            "permeability field is {0}x{0}, fine grid is {1}x{1}",
            field.n(),
            fine.n()
        )));
    }
    if let Some(bad) = field.kappa0().iter().position(|&k| !(k > 0.0) || !k.is_finite()) {
        return Err(Error::Data(format!("nonpositive permeability {} at cell {bad}", field.kappa0()[bad])));
    }
    Ok(())
}

/// Time-affine fine operators: `A(t) = sum_k c_k(t) A_k`.
///
/// All stiffness terms and the mass matrix share one sparsity pattern, so
/// combinations are formed directly on the value arrays.
#[derive(Clone, Debug)]
pub struct AffineOperators {
    pub mass: CsrMatrix<f64>,
    pub terms: Vec<(TimeFactor, CsrMatrix<f64>)>,
    pub load: DVector<f64>,
}

impl AffineOperators {
    pub fn new(fine: &FineGrid, coarse: &CoarseGrid, field: &PermeabilityField, source: &SourceSpec) -> Result<Self> {
        check_field(fine, field)?;
        let terms = field
            .affine_terms()
            .into_iter()
            .map(|(factor, kappa)| {
                (factor, assemble_global(fine, |cx, cy| kappa[fine.cell(cx, cy)], FormKind::Stiffness))
            })
            .collect();
        let mass = assemble_global(fine, |_, _| 1.0, FormKind::Mass);
        let load = load_vector(fine, &source.cellwise(fine, coarse)?);
        Ok(Self { mass, terms, load })
    }

    pub fn coefficients(&self, t: f64) -> Vec<f64> {
        self.terms.iter().map(|(f, _)| f.eval(t)).collect()
    }

    /// `shift * M + A(t)`.
    pub fn combined(&self, t: f64, shift: f64) -> CsrMatrix<f64> {
        let mut out = self.mass.clone();
        out.values_mut().iter_mut().for_each(|v| *v *= shift);
        for (c, (_, a)) in self.coefficients(t).into_iter().zip(&self.terms) {
            debug_assert_eq!(a.col_indices(), out.col_indices());
            for (o, v) in out.values_mut().iter_mut().zip(a.values()) {
                *o += c * v;
            }
        }
        out
    }

    pub fn stiffness_at(&self, t: f64) -> CsrMatrix<f64> {
        self.combined(t, 0.0)
    }

    pub fn apply_stiffness(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(x.len());
        let mut tmp = vec![0.0; x.len()];
        for (c, (_, a)) in self.coefficients(t).into_iter().zip(&self.terms) {
            crate::linalg::csr_mul_into(a, x.as_slice(), &mut tmp);
            y.iter_mut().zip(&tmp).for_each(|(yi, ti)| *yi += c * ti);
        }
        y
    }

    pub fn apply_mass(&self, x: &DVector<f64>) -> DVector<f64> {
        crate::linalg::csr_mul(&self.mass, x)
    }

    /// True when no stiffness term varies in time.
    pub fn is_static(&self) -> bool {
        self.terms.iter().all(|(f, _)| matches!(f, TimeFactor::Constant))
    }
}
