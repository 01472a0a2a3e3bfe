//! Flat `section.key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! errors. Every key has a default, so an empty file is a valid config
//! describing the default twin experiment.

use std::fmt::Write as _;
use std::path::PathBuf;

use msbayes::bayes_select::SamplerConfig;
use msbayes::driver::{BasisSource, FieldSource, Method, ProblemConfig, SigmaMode};
use msbayes::field_io::GeneratorParams;
use msbayes::grid_fem::SourceSpec;
use msbayes::spacetime_basis::SpacetimeParams;
use msbayes::{Error, Result};

/// Sweep levels of the table experiments and the scales of the inflow-outflow experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub sigma_l_levels: Vec<f64>,
    pub sigma_d_levels: Vec<f64>,
    pub n_samples: usize,
    pub example2_sigma_l: f64,
    pub example2_sigma_d: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sigma_l_levels: vec![5e-4, 1e-3, 2e-3],
            sigma_d_levels: vec![1e-6, 1e-3, 1.0],
            n_samples: 100,
            example2_sigma_l: 9e-6,
            example2_sigma_d: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub sampler: SamplerConfig,
    pub sigma_mode: SigmaMode,
    pub method: Method,
    pub n_samples: usize,
    /// Seed of the sampler streams.
    pub seed: u64,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemConfig::default(),
            sampler: SamplerConfig::default(),
            sigma_mode: SigmaMode::Relative,
            method: Method::Mcmc,
            n_samples: 100,
            seed: 1,
            experiment: ExperimentConfig::default(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got '{v}'"))),
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_num(key, s.trim())).collect()
}

/// `row,col;row,col`.
fn parse_regions(key: &str, v: &str) -> Result<Vec<(usize, usize)>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(';')
        .map(|pair| {
            let parts: Vec<&str> = pair.split(',').map(str::trim).collect();
            match parts.as_slice() {
                [r, c] => Ok((parse_num(key, r)?, parse_num(key, c)?)),
                _ => Err(Error::Config(format!("{key}: expected 'row,col' pairs, got '{pair}'"))),
            }
        })
        .collect()
}

/// `constant:VALUE` or `elements:row,col,weight;...`.
fn parse_source(key: &str, v: &str) -> Result<SourceSpec> {
    let (kind, rest) = v.split_once(':').ok_or_else(|| Error::Config(format!("{key}: expected 'constant:V' or 'elements:...'")))?;
    match kind.trim() {
        "constant" => Ok(SourceSpec::Constant(parse_num(key, rest.trim())?)),
        "elements" => rest
            .split(';')
            .map(|t| {
                let parts: Vec<&str> = t.split(',').map(str::trim).collect();
                match parts.as_slice() {
                    [r, c, w] => Ok(((parse_num(key, c)?, parse_num(key, r)?), parse_num(key, w)?)),
                    _ => Err(Error::Config(format!("{key}: expected 'row,col,weight', got '{t}'"))),
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(SourceSpec::CoarseElements),
        other => Err(Error::Config(format!("{key}: unknown source kind '{other}'"))),
    }
}

fn format_source(s: &SourceSpec) -> Result<String> {
    match s {
        SourceSpec::Constant(c) => Ok(format!("constant:{c}")),
        SourceSpec::CoarseElements(v) => Ok(format!(
            "elements:{}",
            v.iter().map(|((col, row), w)| format!("{row},{col},{w}")).collect::<Vec<_>>().join(";")
        )),
        SourceSpec::Cellwise(_) => Err(Error::Config("cellwise sources cannot be written to a config file".into())),
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn generator(&mut self) -> &mut GeneratorParams {
        if !matches!(self.problem.field, FieldSource::Generate(_)) {
            self.problem.field = FieldSource::Generate(GeneratorParams::default());
        }
        match &mut self.problem.field {
            FieldSource::Generate(g) => g,
            _ => unreachable!(),
        }
    }

    fn spacetime(&mut self) -> &mut SpacetimeParams {
        if !matches!(self.problem.basis, BasisSource::Spacetime(_)) {
            self.problem.basis = BasisSource::Spacetime(SpacetimeParams::default());
        }
        match &mut self.problem.basis {
            BasisSource::Spacetime(p) => p,
            _ => unreachable!(),
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let p = &mut self.problem;
        let s = &mut self.sampler;
        match key {
            "grid.n_fine" => p.n_fine = parse_num(key, v)?,
            "grid.n_coarse" => p.n_coarse = parse_num(key, v)?,
            "time.dt" => p.dt = parse_num(key, v)?,
            "time.t_final" => p.t_final = parse_num(key, v)?,
            "time.n_intervals" => p.n_intervals = parse_num(key, v)?,
            "field.path" => p.field = FieldSource::File(PathBuf::from(v)),
            "field.seed" => self.generator().seed = parse_num(key, v)?,
            "field.background" => self.generator().background = parse_num(key, v)?,
            "field.inclusion_value" => self.generator().inclusion_value = parse_num(key, v)?,
            "field.n_channels" => self.generator().n_channels = parse_num(key, v)?,
            "field.n_inclusions" => self.generator().n_inclusions = parse_num(key, v)?,
            "field.modulation" => p.modulation.mode = v.parse()?,
            "field.rate" => p.modulation.rate = parse_num(key, v)?,
            "source" => p.source = parse_source(key, v)?,
            "basis.l_perm" => p.l_perm = parse_num(key, v)?,
            "basis.l_add" => p.l_add = parse_num(key, v)?,
            "basis.source" => match v {
                "standard" => p.basis = BasisSource::Standard,
                "spacetime" => {
                    self.spacetime();
                }
                _ => return Err(Error::Config(format!("{key}: expected standard or spacetime, got '{v}'"))),
            },
            "basis.layers" => self.spacetime().layers = parse_num(key, v)?,
            "basis.buffer" => self.spacetime().buffer = parse_num(key, v)?,
            "basis.extension_steps" => {
                self.spacetime().extension_steps = if v == "auto" { None } else { Some(parse_num(key, v)?) }
            }
            "obs.regions" => p.obs_regions = parse_regions(key, v)?,
            "obs.noise" => p.obs_noise = parse_num(key, v)?,
            "obs.seed" => p.seed = parse_num(key, v)?,
            "sampler.sigma_L" => s.sigma_l = parse_num(key, v)?,
            "sampler.sigma_d" => s.sigma_d = parse_num(key, v)?,
            "sampler.sigma_mode" => self.sigma_mode = v.parse()?,
            "sampler.N_omega" => s.n_omega = parse_num(key, v)?,
            "sampler.N_basis" => s.n_basis = parse_num(key, v)?,
            "sampler.prior_var" => s.prior_var = parse_num(key, v)?,
            "sampler.ridge" => s.ridge = parse_num(key, v)?,
            "sampler.sweeps" => s.sweeps = parse_num(key, v)?,
            "sampler.anchor_observations" => s.anchor_observations = parse_bool(key, v)?,
            "sampler.method" => self.method = v.parse()?,
            "sampler.n_samples" => self.n_samples = parse_num(key, v)?,
            "sampler.seed" => self.seed = parse_num(key, v)?,
            "experiment.sigma_L_levels" => self.experiment.sigma_l_levels = parse_list(key, v)?,
            "experiment.sigma_d_levels" => self.experiment.sigma_d_levels = parse_list(key, v)?,
            "experiment.n_samples" => self.experiment.n_samples = parse_num(key, v)?,
            "experiment.example2_sigma_L" => self.experiment.example2_sigma_l = parse_num(key, v)?,
            "experiment.example2_sigma_d" => self.experiment.example2_sigma_d = parse_num(key, v)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Checks ranges that the library would otherwise reject late.
    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        let s = &self.sampler;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if p.n_fine == 0 || p.n_coarse == 0 || p.n_fine % p.n_coarse != 0 {
            return bad("grid.n_fine must be a positive multiple of grid.n_coarse");
        }
        if !(p.dt > 0.0 && p.t_final > 0.0) || p.n_intervals == 0 {
            return bad("time.dt, time.t_final and time.n_intervals must be positive");
        }
        if !(s.sigma_l > 0.0 && s.sigma_d > 0.0) {
            return bad("sampler.sigma_L and sampler.sigma_d must be positive");
        }
        if !(s.n_omega > 0.0 && s.n_basis > 0.0 && s.prior_var > 0.0 && s.ridge >= 0.0) || s.sweeps == 0 {
            return bad("sampler.N_omega, N_basis, prior_var and sweeps must be positive, ridge nonnegative");
        }
        if self.n_samples == 0 || self.experiment.n_samples == 0 {
            return bad("sample counts must be at least 1");
        }
        if p.obs_noise < 0.0 {
            return bad("obs.noise must be nonnegative");
        }
        let levels = self.experiment.sigma_l_levels.iter().chain(&self.experiment.sigma_d_levels);
        if levels.clone().any(|&x| !(x > 0.0)) || self.experiment.sigma_l_levels.is_empty() || self.experiment.sigma_d_levels.is_empty() {
            return bad("experiment levels must be nonempty lists of positive values");
        }
        if let FieldSource::File(path) = &p.field {
            if !path.exists() {
                return Err(Error::Config(format!("field.path {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    /// Writes every key; `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> Result<String> {
        let p = &self.problem;
        let s = &self.sampler;
        let mut o = String::new();
        let mut kv = |k: &str, v: String| writeln!(o, "{k} = {v}").unwrap();
        kv("grid.n_fine", p.n_fine.to_string());
        kv("grid.n_coarse", p.n_coarse.to_string());
        kv("time.dt", p.dt.to_string());
        kv("time.t_final", p.t_final.to_string());
        kv("time.n_intervals", p.n_intervals.to_string());
        match &p.field {
            FieldSource::File(path) => kv("field.path", path.display().to_string()),
            FieldSource::Generate(g) => {
                kv("field.seed", g.seed.to_string());
                kv("field.background", g.background.to_string());
                kv("field.inclusion_value", g.inclusion_value.to_string());
                kv("field.n_channels", g.n_channels.to_string());
                kv("field.n_inclusions", g.n_inclusions.to_string());
            }
            FieldSource::Given(_) => return Err(Error::Config("in-memory fields cannot be written to a config file".into())),
        }
        kv("field.modulation", p.modulation.mode.to_string());
        kv("field.rate", p.modulation.rate.to_string());
        kv("source", format_source(&p.source)?);
        kv("basis.l_perm", p.l_perm.to_string());
        kv("basis.l_add", p.l_add.to_string());
        match &p.basis {
            BasisSource::Standard => kv("basis.source", "standard".into()),
            BasisSource::Spacetime(st) => {
                kv("basis.source", "spacetime".into());
                kv("basis.layers", st.layers.to_string());
                kv("basis.buffer", st.buffer.to_string());
                kv("basis.extension_steps", st.extension_steps.map_or("auto".into(), |e| e.to_string()));
            }
        }
        kv("obs.regions", p.obs_regions.iter().map(|(r, c)| format!("{r},{c}")).collect::<Vec<_>>().join(";"));
        kv("obs.noise", p.obs_noise.to_string());
        kv("obs.seed", p.seed.to_string());
        kv("sampler.sigma_L", s.sigma_l.to_string());
        kv("sampler.sigma_d", s.sigma_d.to_string());
        kv("sampler.sigma_mode", self.sigma_mode.to_string());
        kv("sampler.N_omega", s.n_omega.to_string());
        kv("sampler.N_basis", s.n_basis.to_string());
        kv("sampler.prior_var", s.prior_var.to_string());
        kv("sampler.ridge", s.ridge.to_string());
        kv("sampler.sweeps", s.sweeps.to_string());
        kv("sampler.anchor_observations", s.anchor_observations.to_string());
        kv("sampler.method", self.method.name().into());
        kv("sampler.n_samples", self.n_samples.to_string());
        kv("sampler.seed", self.seed.to_string());
        kv("experiment.sigma_L_levels", join(&self.experiment.sigma_l_levels));
        kv("experiment.sigma_d_levels", join(&self.experiment.sigma_d_levels));
        kv("experiment.n_samples", self.experiment.n_samples.to_string());
        kv("experiment.example2_sigma_L", self.experiment.example2_sigma_l.to_string());
        kv("experiment.example2_sigma_d", self.experiment.example2_sigma_d.to_string());
        Ok(o)
    }
}
