use crate::{Error, Result};

/// Inclusive rectangle of fine-grid node indices `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeBox {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl NodeBox {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn len(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, ix: usize, iy: usize) -> bool {
        (self.x0..=self.x1).contains(&ix) && (self.y0..=self.y1).contains(&iy)
    }

    pub fn contains_box(&self, other: &NodeBox) -> bool {
        self.x0 <= other.x0 && other.x1 <= self.x1 && self.y0 <= other.y0 && other.y1 <= self.y1
    }

    /// Row-major index of node `(ix, iy)` within the box.
    pub fn local(&self, ix: usize, iy: usize) -> usize {
        (iy - self.y0) * self.width() + (ix - self.x0)
    }

    /// Inverse of [`NodeBox::local`].
    pub fn node_at(&self, k: usize) -> (usize, usize) {
        (self.x0 + k % self.width(), self.y0 + k / self.width())
    }

    /// Whether `(ix, iy)` lies on the boundary of the box.
    pub fn on_boundary(&self, ix: usize, iy: usize) -> bool {
        ix == self.x0 || ix == self.x1 || iy == self.y0 || iy == self.y1
    }

    /// Fine cells `(cx, cy)` covered by the box.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y0..self.y1).flat_map(move |cy| (self.x0..self.x1).map(move |cx| (cx, cy)))
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y0..=self.y1).flat_map(move |iy| (self.x0..=self.x1).map(move |ix| (ix, iy)))
    }
}

/// Uniform fine grid of `n x n` square cells on the unit square.
///
/// Nodes are numbered row-major from the bottom-left corner; homogeneous
/// Dirichlet nodes on the boundary are eliminated from the degree-of-freedom
/// numbering.
#[derive(Clone, Debug)]
pub struct FineGrid {
    n: usize,
    dirichlet: Vec<bool>,
    dof_of_node: Vec<Option<usize>>,
    node_of_dof: Vec<usize>,
}

impl FineGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("fine grid needs at least 2 cells per side, got {n}")));
        }
        let side = n + 1;
        let mut dirichlet = vec![false; side * side];
        let mut dof_of_node = vec![None; side * side];
        let mut node_of_dof = Vec::with_capacity((n - 1) * (n - 1));
        for iy in 0..side {
            for ix in 0..side {
                let p = iy * side + ix;
                if ix == 0 || iy == 0 || ix == n || iy == n {
                    dirichlet[p] = true;
                } else {
                    dof_of_node[p] = Some(node_of_dof.len());
                    node_of_dof.push(p);
                }
            }
        }
        Ok(Self { n, dirichlet, dof_of_node, node_of_dof })
    }

    /// Cells per side.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn n_nodes(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    pub fn n_cells(&self) -> usize {
        self.n * self.n
    }

    pub fn n_dofs(&self) -> usize {
        self.node_of_dof.len()
    }

    pub fn node(&self, ix: usize, iy: usize) -> usize {
        iy * (self.n + 1) + ix
    }

    pub fn node_coords(&self, p: usize) -> (f64, f64) {
        let side = self.n + 1;
        ((p % side) as f64 * self.h(), (p / side) as f64 * self.h())
    }

    pub fn cell(&self, cx: usize, cy: usize) -> usize {
        cy * self.n + cx
    }

    /// Corner nodes of cell `(cx, cy)` counter-clockwise from bottom-left.
    pub fn cell_nodes(&self, cx: usize, cy: usize) -> [usize; 4] {
        [
            self.node(cx, cy),
            self.node(cx + 1, cy),
            self.node(cx + 1, cy + 1),
            self.node(cx, cy + 1),
        ]
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn is_dirichlet(&self, p: usize) -> bool {
        self.dirichlet[p]
    }

    pub fn dof(&self, p: usize) -> Option<usize> {
        self.dof_of_node[p]
    }

    pub fn node_of_dof(&self, d: usize) -> usize {
        self.node_of_dof[d]
    }

    /// Box covering the whole grid.
    pub fn full_box(&self) -> NodeBox {
        NodeBox { x0: 0, x1: self.n, y0: 0, y1: self.n }
    }

    /// Expands a free-dof vector to all nodes (zero on the boundary).
    pub fn expand(&self, dofs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes()];
        for (d, &v) in dofs.iter().enumerate() {
            out[self.node_of_dof[d]] = v;
        }
        out
    }

    /// Restricts a nodal vector to the free dofs.
    pub fn restrict(&self, nodal: &[f64]) -> Vec<f64> {
        self.node_of_dof.iter().map(|&p| nodal[p]).collect()
    }
}

/// Uniform coarse grid of `n x n` elements whose edges align with the fine grid.
#[derive(Clone, Debug)]
pub struct CoarseGrid {
    n: usize,
    ratio: usize,
}

impl CoarseGrid {
    /// Elements per side.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Fine cells per coarse element side.
    pub fn ratio(&self) -> usize {
        self.ratio
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn n_elements(&self) -> usize {
        self.n * self.n
    }

    /// Number of coarse nodes, which is also the number of neighborhoods.
    pub fn n_nodes(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    pub fn element(&self, ex: usize, ey: usize) -> usize {
        ey * self.n + ex
    }

    pub fn element_coords(&self, e: usize) -> (usize, usize) {
        (e % self.n, e / self.n)
    }

    pub fn node(&self, ix: usize, iy: usize) -> usize {
        iy * (self.n + 1) + ix
    }

    pub fn node_coords(&self, i: usize) -> (usize, usize) {
        (i % (self.n + 1), i / (self.n + 1))
    }

    /// Corner coarse nodes of element `e`, counter-clockwise from bottom-left.
    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let (ex, ey) = self.element_coords(e);
        [self.node(ex, ey), self.node(ex + 1, ey), self.node(ex + 1, ey + 1), self.node(ex, ey + 1)]
    }

    /// Fine-node box of element `e` (closure).
    pub fn element_box(&self, e: usize) -> NodeBox {
        let (ex, ey) = self.element_coords(e);
        let r = self.ratio;
        NodeBox { x0: ex * r, x1: (ex + 1) * r, y0: ey * r, y1: (ey + 1) * r }
    }

    /// Coarse elements adjacent to coarse node `i` (the neighborhood omega_i).
    pub fn neighborhood(&self, i: usize) -> Vec<usize> {
        let (ix, iy) = self.node_coords(i);
        let mut out = Vec::with_capacity(4);
        for ey in iy.saturating_sub(1)..(iy + 1).min(self.n) {
            for ex in ix.saturating_sub(1)..(ix + 1).min(self.n) {
                out.push(self.element(ex, ey));
            }
        }
        out
    }

    /// Fine-node box of the closure of neighborhood `i` grown by `layers`
    /// rings of coarse elements, clipped to the domain.
    pub fn neighborhood_box(&self, i: usize, layers: usize) -> NodeBox {
        let (ix, iy) = self.node_coords(i);
        let reach = layers + 1;
        let r = self.ratio;
        NodeBox {
            x0: ix.saturating_sub(reach) * r,
            x1: (ix + reach).min(self.n) * r,
            y0: iy.saturating_sub(reach) * r,
            y1: (iy + reach).min(self.n) * r,
        }
    }

    /// Coarse element containing fine cell `(cx, cy)`.
    pub fn element_of_cell(&self, cx: usize, cy: usize) -> usize {
        self.element(cx / self.ratio, cy / self.ratio)
    }

    /// Fine cells `(cx, cy)` inside element `e`.
    pub fn element_cells(&self, e: usize) -> impl Iterator<Item = (usize, usize)> {
        let (ex, ey) = self.element_coords(e);
        let r = self.ratio;
        (ey * r..(ey + 1) * r).flat_map(move |cy| (ex * r..(ex + 1) * r).map(move |cx| (cx, cy)))
    }
}

/// Builds the fine and coarse grids; `n_fine` must be a positive multiple of `n_coarse`.
pub fn build_grids(n_fine: usize, n_coarse: usize) -> Result<(FineGrid, CoarseGrid)> {
    if n_coarse == 0 || n_fine == 0 || n_fine % n_coarse != 0 {
        return Err(Error::Config(format!(
            "fine resolution {n_fine} is not a positive multiple of coarse resolution {n_coarse}"
        )));
    }
    let fine = FineGrid::new(n_fine)?;
    Ok((fine, CoarseGrid { n: n_coarse, ratio: n_fine / n_coarse }))
}

/// Uniform time grid on `[0, T]` split into equal intervals of fine steps.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub steps_per_interval: usize,
    pub n_intervals: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, t_final: f64, n_intervals: usize) -> Result<Self> {
        if !(dt > 0.0) || !(t_final > 0.0) || n_intervals == 0 {
            return Err(Error::Config(format!(
                "invalid time grid: dt={dt}, T={t_final}, intervals={n_intervals}"
            )));
        }
        let steps = (t_final / dt).round() as usize;
        if steps == 0 || ((steps as f64) * dt - t_final).abs() > 1e-9 * t_final {
            return Err(Error::Config(format!("T={t_final} is not a multiple of dt={dt}")));
        }
        if steps % n_intervals != 0 {
            return Err(Error::Config(format!(
                "{steps} fine steps cannot be split into {n_intervals} equal intervals"
            )));
        }
        Ok(Self { dt, steps_per_interval: steps / n_intervals, n_intervals })
    }

    pub fn n_steps(&self) -> usize {
        self.steps_per_interval * self.n_intervals
    }

    pub fn t_final(&self) -> f64 {
        self.time(self.n_steps())
    }

    /// Time of fine step `m` (step 0 is the initial state).
    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt
    }

    /// Global step indices `m` (1-based end-of-step states) belonging to interval `n`.
    pub fn interval_steps(&self, n: usize) -> std::ops::RangeInclusive<usize> {
        n * self.steps_per_interval + 1..=(n + 1) * self.steps_per_interval
    }

    /// Step index of the interval start `T_{n-1}`.
    pub fn interval_start_step(&self, n: usize) -> usize {
        n * self.steps_per_interval
    }

    /// Step index of the interval end `T_n`.
    pub fn interval_end_step(&self, n: usize) -> usize {
        (n + 1) * self.steps_per_interval
    }
}
