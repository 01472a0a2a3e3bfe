use nalgebra::DVector;

use super::problem::Problem;
use crate::bayes_select::SamplerConfig;
use crate::{Error, Result};

/// Reference scales of the residual and observation terms, taken from the
/// permanent-space (FixedOnly) chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    /// Median over intervals of `|b|`.
    pub residual: f64,
    /// Median over intervals of `|g|`.
    pub mismatch: f64,
}

/// How `sigma_L` and `sigma_d` in a configuration are read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SigmaMode {
    /// Multiples of the calibrated scales.
    #[default]
    Relative,
    /// Used as given.
    Absolute,
}

impl std::str::FromStr for SigmaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relative" => Ok(SigmaMode::Relative),
            "absolute" => Ok(SigmaMode::Absolute),
            _ => Err(Error::Config(format!("unknown sigma mode '{s}' (expected relative or absolute)"))),
        }
    }
}

impl std::fmt::Display for SigmaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SigmaMode::Relative => "relative",
            SigmaMode::Absolute => "absolute",
        })
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl Calibration {
    /// Converts configured scales into absolute ones. An infinite `sigma_d`
    /// stays infinite.
    pub fn apply(&self, cfg: &SamplerConfig, mode: SigmaMode) -> SamplerConfig {
        match mode {
            SigmaMode::Absolute => cfg.clone(),
            SigmaMode::Relative => SamplerConfig {
                sigma_l: cfg.sigma_l * self.residual,
                sigma_d: cfg.sigma_d * self.mismatch,
                ..cfg.clone()
            },
        }
    }
}

impl Problem {
    /// Runs the permanent-space chain and records the median residual and
    /// mismatch norms.
    pub fn calibrate(&self) -> Result<Calibration> {
        let mut carry = DVector::zeros(self.fine.n_dofs());
        let (mut b, mut g) = (Vec::new(), Vec::new());
        for n in 0..self.time.n_intervals {
            let fixed = self.fixed_solve(n, &carry);
            let sys = self.residual_system(n, &fixed)?;
            b.push(sys.b_norm());
            g.push(sys.g_norm());
            carry = fixed.last().unwrap().clone();
        }
        let residual = median(b);
        if !(residual > 0.0) {
            return Err(Error::Numerical("fixed solution has zero residual; relative scales are undefined".into()));
        }
        let mut mismatch = median(g);
        if !(mismatch > 0.0) {
            log::warn!("fixed solution matches the data exactly; sigma_d is scaled by the residual norm");
            mismatch = residual;
        }
        Ok(Calibration { residual, mismatch })
    }
}
