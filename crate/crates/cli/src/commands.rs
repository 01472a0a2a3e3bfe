//! The five subcommands. Each writes into an output directory and returns a
//! short summary for the terminal.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use msbayes::bayes_select::SamplerConfig;
use msbayes::driver::{run_ensemble, BasisSource, Calibration, EnsembleResult, Method, Problem, ProblemConfig, SigmaMode};
use msbayes::grid_fem::{build_grids, solve_reference, AffineOperators, TimeGrid};
use msbayes::msbasis::load_or_build;
use msbayes::spacetime_basis::build_interval_bases;
use msbayes::{Error, Result};

use crate::config::RunConfig;
use crate::output::{
    heatmap_png, key_values, nodal_csv, parse_key_values, read_nodal_csv, sigma_table, write_field,
};

/// Basis cache location: `MSBAYES_CACHE` if set, else a directory under the
/// system temp dir.
pub fn cache_dir() -> PathBuf {
    std::env::var_os("MSBAYES_CACHE").map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("msbayes-cache"))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
}

/// Fine reference at `T`, plus a heatmap of `log10 kappa_0`.
pub fn cmd_reference(cfg: &RunConfig, out: &Path) -> Result<String> {
    ensure_dir(out)?;
    let p = &cfg.problem;
    let (fine, coarse) = build_grids(p.n_fine, p.n_coarse)?;
    let time = TimeGrid::new(p.dt, p.t_final, p.n_intervals)?;
    let field = Problem::load_field(p)?;
    let ops = AffineOperators::new(&fine, &coarse, &field, &p.source)?;
    let traj = solve_reference(&ops, &time)?;
    write_field(out, "reference", &fine, traj.last().as_slice())?;
    let log_kappa: Vec<f64> = field.kappa0().iter().map(|k| k.log10()).collect();
    heatmap_png(&out.join("field.png"), &log_kappa)?;
    std::fs::write(out.join("config.txt"), cfg.to_text()?)?;
    Ok(format!("reference at T = {}: max {:.6e}, contrast {:.3e}", p.t_final, traj.last().amax(), field.contrast()))
}

/// Builds (or loads from the cache) the offline space and lists its eigenvalues.
pub fn cmd_basis(cfg: &RunConfig, cache: &Path, out: &Path) -> Result<String> {
    ensure_dir(out)?;
    let p = &cfg.problem;
    let (fine, coarse) = build_grids(p.n_fine, p.n_coarse)?;
    let field = Problem::load_field(p)?;
    let bases = match &p.basis {
        BasisSource::Standard => vec![load_or_build(Some(cache), &fine, &coarse, &field, p.l_perm, p.l_add)?],
        BasisSource::Spacetime(st) => {
            let time = TimeGrid::new(p.dt, p.t_final, p.n_intervals)?;
            build_interval_bases(&fine, &coarse, &field, &time, p.l_perm, p.l_add, st, p.seed)?
        }
    };
    let mut csv = String::from("interval,region,mode,eigenvalue\n");
    for (n, b) in bases.iter().enumerate() {
        for (i, r) in b.regions.iter().enumerate() {
            for (j, l) in r.eigenvalues.iter().enumerate() {
                writeln!(csv, "{n},{i},{j},{l:e}").unwrap();
            }
        }
    }
    std::fs::write(out.join("eigenvalues.csv"), csv)?;
    let b = &bases[0];
    let summary = key_values(&[
        ("regions", b.n_regions().to_string()),
        ("permanent_columns", b.n_perm().to_string()),
        ("additional_columns", b.n_add().to_string()),
        ("spaces", bases.len().to_string()),
    ]);
    std::fs::write(out.join("basis.txt"), &summary)?;
    Ok(summary)
}

/// Absolute sampler scales for a configuration.
pub fn resolve_sampler(cfg: &SamplerConfig, mode: SigmaMode, cal: &Calibration) -> SamplerConfig {
    cal.apply(cfg, mode)
}

fn metrics_text(cfg: &RunConfig, run: &SamplerConfig, cal: &Calibration, r: &EnsembleResult, n: usize, seed: u64) -> String {
    let completed = r.completed().count();
    key_values(&[
        ("method", r.method.name().into()),
        ("n_samples", n.to_string()),
        ("completed", completed.to_string()),
        ("failures", r.failures.len().to_string()),
        ("seed", seed.to_string()),
        ("sigma_mode", cfg.sigma_mode.to_string()),
        ("sigma_L", cfg.sampler.sigma_l.to_string()),
        ("sigma_d", cfg.sampler.sigma_d.to_string()),
        ("sigma_L_abs", format!("{:e}", run.sigma_l)),
        ("sigma_d_abs", format!("{:e}", run.sigma_d)),
        ("calibration_residual", format!("{:e}", cal.residual)),
        ("calibration_mismatch", format!("{:e}", cal.mismatch)),
        ("l2_error_pct", format!("{:e}", r.l2_error)),
        ("posterior_l2_error_pct", format!("{:e}", r.posterior_l2_error)),
        ("obs_error", format!("{:e}", r.obs_error)),
        ("galerkin_obs_error", format!("{:e}", r.galerkin_obs_error)),
        ("selection_pct", format!("{:e}", r.selection_pct)),
        ("mean_regions", format!("{:e}", r.mean_regions)),
        ("residual_trace", fmt_list(&r.residual_trace)),
        ("fixed_residual_trace", fmt_list(&r.fixed_residual_trace)),
    ])
}

fn bits(v: &[bool]) -> String {
    v.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Writes an ensemble's results directory.
pub fn write_results(cfg: &RunConfig, problem: &Problem, run: &SamplerConfig, cal: &Calibration, r: &EnsembleResult, n: usize, seed: u64, out: &Path) -> Result<()> {
    let fine = &problem.fine;
    std::fs::write(out.join("metrics.txt"), metrics_text(cfg, run, cal, r, n, seed))?;
    std::fs::write(out.join("config.txt"), cfg.to_text()?)?;
    write_field(out, "mean", fine, r.mean.as_slice())?;
    write_field(out, "std", fine, r.std.as_slice())?;
    write_field(out, "posterior_mean", fine, r.posterior_mean.as_slice())?;
    write_field(out, "posterior_std", fine, r.posterior_std.as_slice())?;
    write_field(out, "reference", fine, problem.reference_final().as_slice())?;
    let mut sel = String::from("sample,interval,regions,columns,beta\n");
    let mut res = String::from("sample,interval,fixed_residual,posterior_residual,fixed_mismatch,posterior_mismatch,active,available\n");
    let mut errs = String::from("sample,l2_error_pct\n");
    let mut k = 0;
    for (i, s) in r.samples.iter().enumerate() {
        let Some(c) = s else { continue };
        writeln!(errs, "{i},{:e}", r.sample_l2_errors[k]).unwrap();
        k += 1;
        for (n, rec) in c.intervals.iter().enumerate() {
            let beta = rec.state.beta.iter().map(|b| format!("{b:e}")).collect::<Vec<_>>().join(";");
            writeln!(sel, "{i},{n},{},{},{beta}", bits(&rec.state.regions), bits(&rec.state.columns)).unwrap();
            writeln!(
                res,
                "{i},{n},{:e},{:e},{:e},{:e},{},{}",
                rec.fixed_residual, rec.posterior_residual, rec.fixed_mismatch, rec.posterior_mismatch, rec.active, rec.available
            )
            .unwrap();
        }
    }
    std::fs::write(out.join("selection.csv"), sel)?;
    std::fs::write(out.join("residuals.csv"), res)?;
    std::fs::write(out.join("sample_errors.csv"), errs)?;
    Ok(())
}

/// Runs one ensemble and writes its results directory. Per-sample fields go
/// to `samples/NNN.csv` as each chain finishes.
pub fn cmd_sample(cfg: &RunConfig, problem: &Problem, method: Method, n: usize, seed: u64, out: &Path) -> Result<(EnsembleResult, String)> {
    let samples_dir = out.join("samples");
    ensure_dir(&samples_dir)?;
    let cal = problem.calibrate()?;
    let run = resolve_sampler(&cfg.sampler, cfg.sigma_mode, &cal);
    let write_err: Mutex<Option<std::io::Error>> = Mutex::new(None);
    let on_sample = |i: usize, c: &msbayes::driver::ChainResult| {
        if let Err(e) = std::fs::write(samples_dir.join(format!("{i:03}.csv")), nodal_csv(&problem.fine, c.galerkin_final.as_slice())) {
            write_err.lock().unwrap().get_or_insert(e);
        }
    };
    let r = run_ensemble(problem, method, &run, n, seed, Some(&on_sample))?;
    if let Some(e) = write_err.into_inner().unwrap() {
        return Err(e.into());
    }
    write_results(cfg, problem, &run, &cal, &r, n, seed, out)?;
    let summary = format!(
        "{}: {} samples, L2 error {:.3}%, max obs error {:.3e}, selected {:.1}%",
        method.name(),
        n,
        r.l2_error,
        r.obs_error,
        r.selection_pct
    );
    Ok((r, summary))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Table1,
    Table2,
    Table3,
    Example2,
}

impl std::str::FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table1" => Ok(Self::Table1),
            "table2" => Ok(Self::Table2),
            "table3" => Ok(Self::Table3),
            "example2" => Ok(Self::Example2),
            _ => Err(Error::Config(format!("unknown experiment '{s}' (expected table1, table2, table3 or example2)"))),
        }
    }
}

/// Metrics of one ensemble in a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct CellMetrics {
    pub selection_pct: f64,
    pub l2_error: f64,
    pub obs_error: f64,
}

impl From<&EnsembleResult> for CellMetrics {
    fn from(r: &EnsembleResult) -> Self {
        Self { selection_pct: r.selection_pct, l2_error: r.l2_error, obs_error: r.obs_error }
    }
}

/// MCMC ensembles over the `sigma_L x sigma_d` grid; `cells[i][j]` belongs to
/// `sigma_l_levels[i]`, `sigma_d_levels[j]`.
pub fn sigma_sweep(cfg: &RunConfig, problem: &Problem, cal: &Calibration) -> Result<Vec<Vec<CellMetrics>>> {
    let e = &cfg.experiment;
    e.sigma_l_levels
        .iter()
        .map(|&sl| {
            e.sigma_d_levels
                .iter()
                .map(|&sd| {
                    let run = cal.apply(&SamplerConfig { sigma_l: sl, sigma_d: sd, ..cfg.sampler.clone() }, cfg.sigma_mode);
                    let r = run_ensemble(problem, Method::Mcmc, &run, e.n_samples, cfg.seed, None)?;
                    log::info!("sigma_L {sl:e} sigma_d {sd:e}: {:.2}% selected, L2 {:.3}%, obs {:.2e}", r.selection_pct, r.l2_error, r.obs_error);
                    Ok(CellMetrics::from(&r))
                })
                .collect()
        })
        .collect()
}

/// Data-driven and residual-only MCMC ensembles of the inflow-outflow problem.
pub fn example2_runs(cfg: &RunConfig, problem: &Problem, cal: &Calibration) -> Result<(EnsembleResult, EnsembleResult)> {
    let e = &cfg.experiment;
    let base = SamplerConfig { sigma_l: e.example2_sigma_l, ..cfg.sampler.clone() };
    let data = cal.apply(&SamplerConfig { sigma_d: e.example2_sigma_d, ..base.clone() }, cfg.sigma_mode);
    let resid = cal.apply(&SamplerConfig { sigma_d: f64::INFINITY, ..base }, cfg.sigma_mode);
    let a = run_ensemble(problem, Method::Mcmc, &data, e.n_samples, cfg.seed, None)?;
    let b = run_ensemble(problem, Method::Mcmc, &resid, e.n_samples, cfg.seed, None)?;
    Ok((a, b))
}

/// Problem of the inflow-outflow experiment: the configured problem with the
/// source and observations of the example.
pub fn example2_problem(p: &ProblemConfig) -> ProblemConfig {
    let ex = ProblemConfig::example2();
    ProblemConfig { source: ex.source, obs_regions: ex.obs_regions, ..p.clone() }
}

pub fn cmd_experiment(cfg: &RunConfig, which: Experiment, cache: &Path, out: &Path) -> Result<String> {
    ensure_dir(out)?;
    std::fs::write(out.join("config.txt"), cfg.to_text()?)?;
    let e = &cfg.experiment;
    match which {
        Experiment::Example2 => {
            let problem = Problem::prepare(&example2_problem(&cfg.problem), Some(cache))?;
            let cal = problem.calibrate()?;
            let (data, resid) = example2_runs(cfg, &problem, &cal)?;
            let mut csv = String::from("likelihood,l2_error_pct,obs_error,selection_pct\n");
            for (name, r) in [("residual_data", &data), ("residual_only", &resid)] {
                writeln!(csv, "{name},{:e},{:e},{:e}", r.l2_error, r.obs_error, r.selection_pct).unwrap();
            }
            std::fs::write(out.join("example2.csv"), &csv)?;
            write_field(out, "example2_mean", &problem.fine, data.mean.as_slice())?;
            write_field(out, "example2_reference", &problem.fine, problem.reference_final().as_slice())?;
            Ok(csv)
        }
        _ => {
            let problem = Problem::prepare(&cfg.problem, Some(cache))?;
            let cal = problem.calibrate()?;
            let cells = sigma_sweep(cfg, &problem, &cal)?;
            let mut sweep = String::from("sigma_L,sigma_d,selection_pct,l2_error_pct,obs_error\n");
            for (i, row) in cells.iter().enumerate() {
                for (j, c) in row.iter().enumerate() {
                    writeln!(sweep, "{:e},{:e},{:e},{:e},{:e}", e.sigma_l_levels[i], e.sigma_d_levels[j], c.selection_pct, c.l2_error, c.obs_error).unwrap();
                }
            }
            std::fs::write(out.join("sweep.csv"), sweep)?;
            let (name, table) = match which {
                Experiment::Table1 => ("table1", sigma_table(&e.sigma_l_levels, &e.sigma_d_levels, |i, j| format!("{:.2}", cells[i][j].selection_pct))),
                Experiment::Table2 => ("table2", sigma_table(&e.sigma_l_levels, &e.sigma_d_levels, |i, j| format!("{:.2}", cells[i][j].l2_error))),
                _ => ("table3", sigma_table(&e.sigma_l_levels, &e.sigma_d_levels, |i, j| format!("{:.2e}", cells[i][j].obs_error))),
            };
            std::fs::write(out.join(format!("{name}.csv")), &table)?;
            Ok(table)
        }
    }
}

/// Summarizes a results directory and re-renders its heatmaps from the CSVs.
pub fn cmd_report(dir: &Path) -> Result<String> {
    let metrics = dir.join("metrics.txt");
    let mut s = String::new();
    if metrics.exists() {
        for (k, v) in parse_key_values(&std::fs::read_to_string(&metrics)?) {
            writeln!(s, "{k:<24} {v}").unwrap();
        }
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for path in entries {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        if name.starts_with("table") || name == "example2.csv" {
            writeln!(s, "\n{name}:\n{}", std::fs::read_to_string(&path)?).unwrap();
        }
        if name.ends_with(".csv") && ["mean", "std", "posterior_mean", "posterior_std", "reference", "example2_mean", "example2_reference"].contains(&name.trim_end_matches(".csv")) {
            heatmap_png(&path.with_extension("png"), &read_nodal_csv(&path)?)?;
        }
    }
    if s.is_empty() {
        return Err(Error::Config(format!("{} holds no metrics.txt or tables", dir.display())));
    }
    Ok(s)
}
