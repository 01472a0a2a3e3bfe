use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use nalgebra_sparse::CscMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bayes_select::GramPieces;
use crate::field_io::{generate_field, load_field, GeneratorParams, Modulation, PermeabilityField};
use crate::grid_fem::{
    build_grids, solve_reference, AffineOperators, CoarseGrid, FineGrid, SourceSpec, TimeGrid, Trajectory,
};
use crate::linalg::{csc_mul_transpose, csr_times_csc, transpose_product};
use crate::msbasis::{load_or_build, OfflineBasis};
use crate::obs::{build_observation_matrix, synthesize_data, ObservationMatrix};
use crate::spacetime_basis::{build_interval_bases, SpacetimeParams};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum FieldSource {
    Generate(GeneratorParams),
    File(PathBuf),
    Given(PermeabilityField),
}

#[derive(Clone, Debug, PartialEq)]
pub enum BasisSource {
    /// Time-independent offline space from the local spectral problems.
    Standard,
    /// Interval-local space-time modes from oversampled snapshots.
    Spacetime(SpacetimeParams),
}

/// Everything that defines the discrete problem and the twin data.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemConfig {
    pub n_fine: usize,
    pub n_coarse: usize,
    pub dt: f64,
    pub t_final: f64,
    pub n_intervals: usize,
    pub field: FieldSource,
    pub modulation: Modulation,
    pub source: SourceSpec,
    pub l_perm: usize,
    pub l_add: usize,
    pub basis: BasisSource,
    /// Observed coarse elements as `(row, col)`.
    pub obs_regions: Vec<(usize, usize)>,
    pub obs_noise: f64,
    /// Seed of the observation noise and of randomized snapshots.
    pub seed: u64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            n_fine: 100,
            n_coarse: 10,
            dt: 1e-3,
            t_final: 0.02,
            n_intervals: 4,
            field: FieldSource::Generate(GeneratorParams::default()),
            modulation: Modulation::default(),
            source: SourceSpec::Constant(1.0),
            l_perm: 2,
            l_add: 18,
            basis: BasisSource::Standard,
            obs_regions: vec![(2, 2), (2, 7), (7, 2), (7, 7)],
            obs_noise: 0.0,
            seed: 1,
        }
    }
}

impl ProblemConfig {
    /// Inflow-outflow setup: unit sources on `K1 = (1,1)` and `K2 = (8,8)`,
    /// unit sinks on `K3 = (1,8)` and `K4 = (8,1)`, observations on the sinks.
    /// Elements are `(row, col)` on the 10x10 coarse grid.
    pub fn example2() -> Self {
        let k = [(1usize, 1usize), (8, 8), (1, 8), (8, 1)];
        let to_elem = |(r, c): (usize, usize)| (c, r);
        Self {
            source: SourceSpec::CoarseElements(vec![
                (to_elem(k[0]), 1.0),
                (to_elem(k[1]), 1.0),
                (to_elem(k[2]), -1.0),
                (to_elem(k[3]), -1.0),
            ]),
            obs_regions: vec![k[2], k[3]],
            ..Self::default()
        }
    }
}

/// Offline space with its projected operators; shared by the intervals that use it.
pub struct SpaceData {
    pub basis: Arc<OfflineBasis>,
    /// Permanent columns followed by additional columns.
    pub p_all: CscMatrix<f64>,
    /// `P^T A_k P` per affine stiffness term.
    pub proj_terms: Vec<DMatrix<f64>>,
    pub proj_mass: DMatrix<f64>,
    pub proj_load: DVector<f64>,
    /// `D P_add`.
    pub s_add: Arc<DMatrix<f64>>,
    pub col_region: Arc<Vec<usize>>,
    pub gram_pieces: GramPieces,
}

impl SpaceData {
    fn new(basis: Arc<OfflineBasis>, ops: &AffineOperators, obs: &ObservationMatrix) -> Self {
        let p_all = basis.all_columns();
        let proj = |a| transpose_product(&p_all, &csr_times_csc(a, &p_all));
        let proj_terms = ops.terms.iter().map(|(_, a)| sym(proj(a))).collect();
        let proj_mass = sym(proj(&ops.mass));
        let proj_load = csc_mul_transpose(&p_all, ops.load.as_slice());
        let s_add = Arc::new(obs.sensitivity(&basis.p_add));
        let col_region = Arc::new((0..basis.n_add()).map(|c| basis.add_owner(c).0).collect());
        let gram_pieces = GramPieces::new(ops, &basis.p_add);
        Self { basis, p_all, proj_terms, proj_mass, proj_load, s_add, col_region, gram_pieces }
    }

    pub fn n_perm(&self) -> usize {
        self.basis.n_perm()
    }

    /// `P_sub^T (M / dt + A(t)) P_sub` for the listed columns of `p_all`.
    pub fn system(&self, coeffs: &[f64], dt: f64, cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(cols.len(), cols.len(), |a, b| {
            let (i, j) = (cols[a], cols[b]);
            let mut v = self.proj_mass[(i, j)] / dt;
            for (c, t) in coeffs.iter().zip(&self.proj_terms) {
                v += c * t[(i, j)];
            }
            v
        })
    }
}

fn sym(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

/// Per-interval data shared by all samples.
pub struct IntervalData {
    pub space: Arc<SpaceData>,
    pub gram: Arc<DMatrix<f64>>,
    /// Factors of the permanent-space step matrices.
    pub fixed_factors: Vec<Cholesky<f64, Dyn>>,
    /// Factors of the full-space step matrices, built on first use.
    pub full_factors: OnceLock<Result<Vec<Cholesky<f64, Dyn>>>>,
}

/// Prepared problem: grids, operators, reference, data and offline spaces.
pub struct Problem {
    pub config: ProblemConfig,
    pub fine: FineGrid,
    pub coarse: CoarseGrid,
    pub time: TimeGrid,
    pub field: PermeabilityField,
    pub ops: AffineOperators,
    pub obs: ObservationMatrix,
    pub reference: Trajectory,
    pub data: Vec<DVector<f64>>,
    pub intervals: Vec<IntervalData>,
}

pub(crate) fn step_factors(space: &SpaceData, ops: &AffineOperators, time: &TimeGrid, n: usize, cols: &[usize]) -> Result<Vec<Cholesky<f64, Dyn>>> {
    time.interval_steps(n)
        .map(|m| {
            let sys = space.system(&ops.coefficients(time.time(m)), time.dt, cols);
            sys.cholesky()
                .ok_or_else(|| Error::Numerical(format!("coarse step matrix at step {m} is not positive definite")))
        })
        .collect()
}

impl Problem {
    pub fn load_field(config: &ProblemConfig) -> Result<PermeabilityField> {
        let mut field = match &config.field {
            FieldSource::Generate(p) => {
                generate_field(&GeneratorParams { n: config.n_fine, ..p.clone() }, config.modulation)?
            }
            FieldSource::File(path) => load_field(path, Some(config.n_fine), config.modulation)?,
            FieldSource::Given(f) => f.clone(),
        };
        field.modulation = config.modulation;
        Ok(field)
    }

    pub fn prepare(config: &ProblemConfig, cache_dir: Option<&Path>) -> Result<Self> {
        let (fine, coarse) = build_grids(config.n_fine, config.n_coarse)?;
        let time = TimeGrid::new(config.dt, config.t_final, config.n_intervals)?;
        let field = Self::load_field(config)?;
        if field.n() != fine.n() {
            return Err(Error::Config(format!("field is {0}x{0}, grid is {1}x{1}", field.n(), fine.n())));
        }
        let ops = AffineOperators::new(&fine, &coarse, &field, &config.source)?;
        let reference = solve_reference(&ops, &time)?;
        let obs = build_observation_matrix(&fine, &coarse, &config.obs_regions)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(u64::MAX);
        let data = synthesize_data(&reference, &obs, &time, config.obs_noise, &mut rng);

        let bases: Vec<Arc<OfflineBasis>> = match &config.basis {
            BasisSource::Standard => {
                let b = Arc::new(load_or_build(cache_dir, &fine, &coarse, &field, config.l_perm, config.l_add)?);
                vec![b; time.n_intervals]
            }
            BasisSource::Spacetime(p) => {
                build_interval_bases(&fine, &coarse, &field, &time, config.l_perm, config.l_add, p, config.seed)?
                    .into_iter()
                    .map(Arc::new)
                    .collect()
            }
        };
        let mut spaces: Vec<Arc<SpaceData>> = Vec::new();
        let mut intervals = Vec::with_capacity(time.n_intervals);
        for (n, basis) in bases.into_iter().enumerate() {
            let space = match spaces.iter().find(|s| Arc::ptr_eq(&s.basis, &basis)) {
                Some(s) => s.clone(),
                None => {
                    let s = Arc::new(SpaceData::new(basis, &ops, &obs));
                    spaces.push(s.clone());
                    s
                }
            };
            let gram = Arc::new(space.gram_pieces.gram(&time, n));
            let perm: Vec<usize> = (0..space.n_perm()).collect();
            let fixed_factors = step_factors(&space, &ops, &time, n, &perm)?;
            intervals.push(IntervalData { space, gram, fixed_factors, full_factors: OnceLock::new() });
        }
        Ok(Self { config: config.clone(), fine, coarse, time, field, ops, obs, reference, data, intervals })
    }

    pub fn reference_final(&self) -> &DVector<f64> {
        self.reference.last()
    }
}
