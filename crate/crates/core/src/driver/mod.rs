//! Per-interval pipeline, ensembles and metrics.

mod calibrate;
mod chain;
mod ensemble;
mod problem;

pub use calibrate::{Calibration, SigmaMode};
pub use chain::{run_chain, ChainResult, IntervalRecord, Method};
pub use ensemble::{relative_l2_error, run_ensemble, EnsembleResult};
pub use problem::{BasisSource, FieldSource, IntervalData, Problem, ProblemConfig, SpaceData};
