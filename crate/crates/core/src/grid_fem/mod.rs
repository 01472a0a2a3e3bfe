//! Structured fine/coarse grids on the unit square, bilinear finite element
//! assembly and the implicit Euler fine-scale reference solver.

mod assembly;
mod mesh;
mod timestep;

pub use assembly::{
    assemble, assemble_on_box, AffineOperators, FineOperators, FormKind, SourceSpec, GAUSS_2X2,
};
pub use mesh::{build_grids, CoarseGrid, FineGrid, NodeBox, TimeGrid};
pub use timestep::{solve_from, solve_reference, Trajectory};
