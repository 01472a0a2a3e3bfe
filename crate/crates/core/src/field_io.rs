//! Permeability fields: loading, synthetic generation and the time law.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::{Error, Result};

const BINARY_MAGIC: &[u8; 4] = b"KPF1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ModulationMode {
    /// `kappa(x, t) = exp(rate t) kappa0(x)` everywhere.
    #[default]
    Literal,
    /// Background cells stay fixed; cells above the background grow.
    InclusionOnly,
}

impl std::str::FromStr for ModulationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(Self::Literal),
            "inclusion_only" => Ok(Self::InclusionOnly),
            _ => Err(Error::Config(format!("unknown modulation mode '{s}'"))),
        }
    }
}

impl std::fmt::Display for ModulationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Literal => "literal",
            Self::InclusionOnly => "inclusion_only",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Modulation {
    pub mode: ModulationMode,
    pub rate: f64,
}

impl Default for Modulation {
    fn default() -> Self {
        Self { mode: ModulationMode::Literal, rate: 250.0 }
    }
}

/// Scalar time factor of one affine term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeFactor {
    Constant,
    Exponential(f64),
}

impl TimeFactor {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeFactor::Constant => 1.0,
            TimeFactor::Exponential(r) => (r * t).exp(),
        }
    }
}

/// Cellwise positive coefficient on an `n x n` grid, row 0 at the bottom.
#[derive(Clone, Debug, PartialEq)]
pub struct PermeabilityField {
    n: usize,
    kappa0: Vec<f64>,
    pub modulation: Modulation,
}

impl PermeabilityField {
    pub fn new(n: usize, kappa0: Vec<f64>, modulation: Modulation) -> Result<Self> {
        if kappa0.len() != n * n {
            return Err(Error::Format(format!("expected {} values for a {n}x{n} field, got {}", n * n, kappa0.len())));
        }
        if let Some(i) = kappa0.iter().position(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::Data(format!("permeability must be positive and finite; cell {i} has {}", kappa0[i])));
        }
        Ok(Self { n, kappa0, modulation })
    }

    pub fn uniform(n: usize, value: f64, modulation: Modulation) -> Self {
        Self::new(n, vec![value; n * n], modulation).expect("uniform field value must be positive")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kappa0(&self) -> &[f64] {
        &self.kappa0
    }

    /// Raw access for tests and tools; positivity is rechecked at assembly.
    pub fn kappa0_mut(&mut self) -> &mut [f64] {
        &mut self.kappa0
    }

    pub fn background(&self) -> f64 {
        self.kappa0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn contrast(&self) -> f64 {
        contrast(&self.kappa0)
    }

    fn is_inclusion(&self, k: f64) -> bool {
        k > self.background()
    }

    /// Cellwise `kappa(., t)`.
    pub fn modulate(&self, t: f64) -> Vec<f64> {
        if t == 0.0 {
            return self.kappa0.clone();
        }
        let g = (self.modulation.rate * t).exp();
        match self.modulation.mode {
            ModulationMode::Literal => self.kappa0.iter().map(|k| k * g).collect(),
            ModulationMode::InclusionOnly => {
                let bg = self.background();
                self.kappa0.iter().map(|&k| if k > bg { k * g } else { k }).collect()
            }
        }
    }

    /// Decomposition `kappa(x, t) = sum_k c_k(t) kappa_k(x)`; all-zero terms are dropped.
    pub fn affine_terms(&self) -> Vec<(TimeFactor, Vec<f64>)> {
        let growth = if self.modulation.rate == 0.0 {
            TimeFactor::Constant
        } else {
            TimeFactor::Exponential(self.modulation.rate)
        };
        match self.modulation.mode {
            ModulationMode::Literal => vec![(growth, self.kappa0.clone())],
            ModulationMode::InclusionOnly => {
                let bg: Vec<f64> = self.kappa0.iter().map(|&k| if self.is_inclusion(k) { 0.0 } else { k }).collect();
                let inc: Vec<f64> = self.kappa0.iter().map(|&k| if self.is_inclusion(k) { k } else { 0.0 }).collect();
                let mut terms = vec![(TimeFactor::Constant, bg)];
                if inc.iter().any(|&k| k != 0.0) {
                    terms.push((growth, inc));
                }
                terms
            }
        }
    }

    /// Digest of the cell values; used as a cache key.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        for k in &self.kappa0 {
            h.update(k.to_le_bytes());
        }
        h.finalize().into()
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for row in self.kappa0.chunks(self.n) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_binary(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(BINARY_MAGIC)?;
        w.write_u32::<LittleEndian>(self.n as u32)?;
        for &k in &self.kappa0 {
            w.write_f64::<LittleEndian>(k)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn contrast(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi / lo
}

/// Reads a square field from CSV or the `KPF1` binary format.
///
/// If `expected_n` is given the field must have that many cells per side.
pub fn load_field(path: &Path, expected_n: Option<usize>, modulation: Modulation) -> Result<PermeabilityField> {
    let mut file = std::fs::File::open(path)?;
    let mut magic = [0u8; 4];
    let is_binary = file.read(&mut magic)? == 4 && &magic == BINARY_MAGIC;
    drop(file);
    let (n, values) = if is_binary { read_binary(path)? } else { read_csv(path)? };
    if let Some(e) = expected_n {
        if n != e {
            return Err(Error::Format(format!("field is {n}x{n}, grid needs {e}x{e}")));
        }
    }
    PermeabilityField::new(n, values, modulation)
}

fn read_csv(path: &Path) -> Result<(usize, Vec<f64>)> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut values = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("line {}: cannot parse '{}'", lineno + 1, s.trim())))
            })
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Format(format!("line {} has {} columns, expected {c}", lineno + 1, row.len())))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    if rows == 0 || rows != cols {
        return Err(Error::Format(format!("field must be square, got {rows} rows x {cols} columns")));
    }
    Ok((rows, values))
}

fn read_binary(path: &Path) -> Result<(usize, Vec<f64>)> {
    let bytes = std::fs::read(path)?;
    let mut r = &bytes[4..];
    let n = r
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::Format("truncated binary header".into()))? as usize;
    if r.len() != n * n * 8 {
        return Err(Error::Format(format!("binary field declares n={n} but holds {} bytes of data", r.len())));
    }
    let mut values = vec![0.0; n * n];
    r.read_f64_into::<LittleEndian>(&mut values)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok((n, values))
}

/// Parameters of the synthetic channel-and-inclusion generator.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorParams {
    pub seed: u64,
    pub n: usize,
    pub background: f64,
    pub inclusion_value: f64,
    pub n_channels: usize,
    pub n_inclusions: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self { seed: 1, n: 100, background: 1.0, inclusion_value: 1e4, n_channels: 6, n_inclusions: 24 }
    }
}

/// Background medium crossed by thin axis-aligned channels and sprinkled
/// with small rectangular inclusions. Deterministic in `seed`.
pub fn generate_field(p: &GeneratorParams, modulation: Modulation) -> Result<PermeabilityField> {
    if !(p.background > 0.0 && p.inclusion_value > 0.0) {
        return Err(Error::Config("generator values must be positive".into()));
    }
    let n = p.n;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut kappa = vec![p.background; n * n];
    let mut fill = |x0: usize, x1: usize, y0: usize, y1: usize| {
        for cy in y0..y1.min(n) {
            for cx in x0..x1.min(n) {
                kappa[cy * n + cx] = p.inclusion_value;
            }
        }
    };
    let thin = (n / 50).max(1);
    for _ in 0..p.n_channels {
        let width = rng.random_range(thin..=2 * thin);
        let len = rng.random_range(n / 2..=n.saturating_sub(2).max(n / 2));
        let across = rng.random_range(0..n.saturating_sub(width).max(1));
        let start = rng.random_range(0..=n - len);
        if rng.random_bool(0.5) {
            fill(start, start + len, across, across + width);
        } else {
            fill(across, across + width, start, start + len);
        }
    }
    let small = (n / 25).max(1);
    for _ in 0..p.n_inclusions {
        let w = rng.random_range(small..=2 * small);
        let h = rng.random_range(small..=2 * small);
        let x0 = rng.random_range(0..n.saturating_sub(w).max(1));
        let y0 = rng.random_range(0..n.saturating_sub(h).max(1));
        fill(x0, x0 + w, y0, y0 + h);
    }
    PermeabilityField::new(n, kappa, modulation)
}
