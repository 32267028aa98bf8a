//! Sweep configuration and its flat `key = value` file format.
//!
//! ```text
//! # comments start with '#'
//! data = synthetic:2000:10        # or a CSV path
//! schema = pumadyn.schema         # required for CSV data
//! header = true
//! preclean = false
//! kernel = rbf
//! theta = 1
//! lengthscales = exp(-1), exp(0), exp(1)
//! sigma2 = 0.001
//! delta = 0.1
//! r = 0.1, 0.01
//! d = 0.001, 0.005, 0.01, 0.05, 0.1, 0.5
//! permutations = 10
//! block_size = 64
//! algorithms = full, blocked, pivoted
//! seed = 42
//! warmup = true
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use stopdet_core::cholesky::BlockPlan;
use stopdet_core::data::{self, CsvOptions, Dataset, Schema};
use stopdet_core::KernelFamily;

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Full,
    Rowwise,
    Blocked,
    Pivoted,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Full => "full",
            Algorithm::Rowwise => "rowwise",
            Algorithm::Blocked => "blocked",
            Algorithm::Pivoted => "pivoted",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "full" => Ok(Algorithm::Full),
            "rowwise" => Ok(Algorithm::Rowwise),
            "blocked" => Ok(Algorithm::Blocked),
            "pivoted" => Ok(Algorithm::Pivoted),
            other => Err(format!("unknown algorithm `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        schema: PathBuf,
        options: CsvOptions,
    },
    Synthetic {
        n: usize,
        dim: usize,
        seed: u64,
    },
}

impl DataSource {
    /// Short label used in run records.
    pub fn label(&self) -> String {
        match self {
            DataSource::Csv { path, .. } => path.display().to_string(),
            DataSource::Synthetic { n, dim, seed } => format!("synthetic:{n}:{dim}:{seed}"),
        }
    }

    /// Loads and preprocesses the data: CSV sources are one-hot encoded and
    /// standardized; synthetic sources are already standard normal.
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Csv {
                path,
                schema,
                options,
            } => {
                let schema = Schema::from_file(schema)?;
                let table = data::load_csv(path, &schema, *options)?;
                Ok(data::standardize(data::one_hot(&table)))
            }
            DataSource::Synthetic { n, dim, seed } => Ok(data::synth_gaussian(*n, *dim, *seed)?),
        }
    }
}

/// Parses `synthetic:N:DIM[:SEED]`.
pub fn parse_synthetic(spec: &str) -> Option<DataSource> {
    let rest = spec.strip_prefix("synthetic:")?;
    let parts: Vec<&str> = rest.split(':').collect();
    let n = parts.first()?.parse().ok()?;
    let dim = parts.get(1)?.parse().ok()?;
    let seed = match parts.get(2) {
        Some(s) => s.parse().ok()?,
        None => 0,
    };
    if parts.len() > 3 {
        return None;
    }
    Some(DataSource::Synthetic { n, dim, seed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: DataSource,
    pub kernel: KernelFamily,
    pub theta: f64,
    pub lengthscales: Vec<f64>,
    pub sigma2: f64,
    pub delta: f64,
    /// Precision targets for the stopped variants.
    pub r_grid: Vec<f64>,
    /// Diagonal tolerances for the pivoted baseline.
    pub d_grid: Vec<f64>,
    pub permutations: usize,
    pub block_size: usize,
    pub algorithms: Vec<Algorithm>,
    pub seed: u64,
    /// One untimed full factorization per lengthscale before timing starts.
    pub warmup: bool,
}

impl RunConfig {
    /// Defaults follow the reference protocol: `theta = 1`, `sigma2 = 1e-3`,
    /// `delta = 0.1`, lengthscales `exp(-1..=3)`, ten permutations.
    pub fn new(source: DataSource) -> Self {
        RunConfig {
            source,
            kernel: KernelFamily::Rbf,
            theta: 1.0,
            lengthscales: (-1..=3).map(|i| f64::from(i).exp()).collect(),
            sigma2: 1e-3,
            delta: 0.1,
            r_grid: vec![0.1],
            d_grid: vec![0.001, 0.005, 0.01, 0.05, 0.1, 0.5],
            permutations: 10,
            block_size: BlockPlan::default_for_host().block_size(),
            algorithms: vec![Algorithm::Full, Algorithm::Blocked],
            seed: 0,
            warmup: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(BenchError::Invalid(m.to_owned()));
        if self.lengthscales.is_empty() {
            return fail("lengthscale grid is empty");
        }
        if self.algorithms.is_empty() {
            return fail("no algorithms selected");
        }
        if self.permutations == 0 {
            return fail("permutation count must be at least 1");
        }
        if self.block_size == 0 {
            return fail("block size must be positive");
        }
        let stopped = self
            .algorithms
            .iter()
            .any(|a| matches!(a, Algorithm::Rowwise | Algorithm::Blocked));
        let pivoted = self.algorithms.contains(&Algorithm::Pivoted);
        if pivoted && self.d_grid.is_empty() {
            return fail("pivoted runs need a nonempty d grid");
        }
        if stopped && !pivoted && self.r_grid.is_empty() {
            return fail("stopped runs need a nonempty r grid or a pivoted pairing");
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut data: Option<(usize, String)> = None;
        let mut schema: Option<PathBuf> = None;
        let mut options = CsvOptions::default();
        let mut cfg = RunConfig::new(DataSource::Synthetic {
            n: 1,
            dim: 1,
            seed: 0,
        });
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| BenchError::Config {
                line,
                msg: format!("expected `key = value`, found `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let err = |msg: String| BenchError::Config { line, msg };
            match key {
                "data" => data = Some((line, value.to_owned())),
                "schema" => schema = Some(PathBuf::from(value)),
                "header" => options.has_header = parse_bool(value).map_err(err)?,
                "preclean" => options.preclean = parse_bool(value).map_err(err)?,
                "kernel" => {
                    cfg.kernel = value.parse().map_err(|e: stopdet_core::Error| err(e.to_string()))?
                }
                "theta" => cfg.theta = parse_real(value).map_err(err)?,
                "lengthscales" | "lengthscale" => cfg.lengthscales = parse_grid(value).map_err(err)?,
                "sigma2" => cfg.sigma2 = parse_real(value).map_err(err)?,
                "delta" => cfg.delta = parse_real(value).map_err(err)?,
                "r" => cfg.r_grid = parse_grid(value).map_err(err)?,
                "d" => cfg.d_grid = parse_grid(value).map_err(err)?,
                "permutations" => cfg.permutations = parse_int(value).map_err(err)?,
                "block_size" => cfg.block_size = parse_int(value).map_err(err)?,
                "algorithms" | "algorithm" => {
                    cfg.algorithms = value
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(err)?
                }
                "seed" => cfg.seed = value.parse().map_err(|_| err(format!("invalid seed `{value}`")))?,
                "warmup" => cfg.warmup = parse_bool(value).map_err(err)?,
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        let (line, data) = data.ok_or_else(|| BenchError::Invalid("missing `data` key".into()))?;
        cfg.source = match parse_synthetic(&data) {
            Some(src) => src,
            None if data.starts_with("synthetic:") => {
                return Err(BenchError::Config {
                    line,
                    msg: format!("malformed synthetic source `{data}`"),
                })
            }
            None => DataSource::Csv {
                path: PathBuf::from(data),
                schema: schema.ok_or_else(|| BenchError::Invalid("CSV data needs a `schema` key".into()))?,
                options,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("invalid boolean `{other}`")),
    }
}

fn parse_int(s: &str) -> std::result::Result<usize, String> {
    s.parse().map_err(|_| format!("invalid integer `{s}`"))
}

/// Accepts plain reals and `exp(x)`.
pub fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let v = match s.strip_prefix("exp(").and_then(|r| r.strip_suffix(')')) {
        Some(inner) => inner.trim().parse::<f64>().map(f64::exp),
        None => s.parse::<f64>(),
    };
    v.map_err(|_| format!("invalid number `{s}`"))
}

pub fn parse_grid(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(parse_real)
        .collect()
}
