//! Bayesian selection of multiscale basis functions for parabolic problems in
//! high-contrast media.
//!
//! The crate solves `u_t - div(kappa(x, t) grad u) = f` on the unit square with
//! a generalized multiscale finite element (GMsFEM) coarse space. A few
//! dominant modes per coarse neighborhood are always used ("permanent" basis);
//! the remaining offline modes are switched on per time interval by sampling
//! Bernoulli indicators whose priors come from the residual of the cheap
//! permanent-only solution and whose likelihood penalizes both the fine-scale
//! residual and the mismatch against observed data.
//!
//! Modules follow the pipeline:
//!
//! * [`grid_fem`]: fine/coarse grids, bilinear assembly, implicit Euler.
//! * [`field_io`]: permeability fields and their time modulation.
//! * [`msbasis`]: partition of unity, local spectral problems, offline space.
//! * [`spacetime_basis`]: oversampled randomized snapshots (alternative basis).
//! * [`obs`]: observation functionals and twin-experiment data.
//! * [`bayes_select`]: residual systems, priors, posterior modes, samplers.
//! * [`driver`]: per-interval pipeline, ensembles and metrics.

pub mod bayes_select;
pub mod driver;
mod error;
pub mod field_io;
pub mod grid_fem;
pub mod linalg;
pub mod msbasis;
pub mod obs;
pub mod spacetime_basis;

pub use error::{Error, Result};

// Book chapters are compiled as doc-tests so their snippets stay in sync.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/grids.md")]
    pub struct Grids;
    #[doc = include_str!("../../../book/src/multiscale_basis.md")]
    pub struct MultiscaleBasis;
    #[doc = include_str!("../../../book/src/bayesian_selection.md")]
    pub struct BayesianSelection;
    #[doc = include_str!("../../../book/src/observations.md")]
    pub struct Observations;
    #[doc = include_str!("../../../book/src/spacetime.md")]
    pub struct Spacetime;
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub struct Experiments;
}
