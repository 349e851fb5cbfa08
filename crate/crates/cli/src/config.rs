//! Run configuration: flags, a flat `key = value` file, and defaults, in
//! that order of precedence.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde::Serialize;
use stirep_core::solver::auto_terminal;
use stirep_core::synthesis::DEFAULT_POINTS;
use stirep_core::Terminal;

use crate::CliError;

/// `lo:hi:n`, `n` evenly spaced values including both ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n)
            .map(|k| if k == self.n - 1 { self.hi } else { self.lo + k as f64 * step })
            .collect()
    }
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [lo, hi, n] = parts[..] else {
            return Err(format!("expected lo:hi:n, got '{s}'"));
        };
        let num = |x: &str| x.parse::<f64>().map_err(|e| format!("'{x}': {e}"));
        let grid = GridSpec {
            lo: num(lo)?,
            hi: num(hi)?,
            n: n.parse().map_err(|e| format!("'{n}': {e}"))?,
        };
        if !grid.lo.is_finite() || !grid.hi.is_finite() || grid.lo > grid.hi {
            return Err(format!("grid bounds must be finite with lo <= hi, got '{s}'"));
        }
        if grid.n == 0 || (grid.n == 1 && grid.lo != grid.hi) {
            return Err(format!("grid needs at least one point per distinct bound, got '{s}'"));
        }
        Ok(grid)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Crossing {
    #[value(name = "1")]
    First,
    #[value(name = "3")]
    Third,
    Auto,
}

impl Crossing {
    pub fn terminal(self, phidot_i: f64) -> Terminal {
        match self {
            Crossing::First => Terminal::Crossing(1),
            Crossing::Third => Terminal::Crossing(3),
            Crossing::Auto => auto_terminal(phidot_i),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseChoice {
    /// robust extremum selected by --phidot-i
    Robust,
    /// constant-amplitude cos-sin pair
    Reference,
}

/// Every option that may come from a flag or from the config file.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// flat `key = value` file; flags take precedence over it
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// initial slope selecting the extremum
    #[arg(long = "phidot-i", global = true, value_name = "X")]
    pub phidot_i: Option<f64>,
    /// initial slopes as lo:hi:n (sweep default: 65 points over [0, 16])
    #[arg(long, global = true, value_name = "LO:HI:N")]
    pub grid: Option<GridSpec>,
    /// zero crossing of phi that ends the trajectory
    #[arg(long, global = true)]
    pub crossing: Option<Crossing>,
    /// pulse duration
    #[arg(long = "T", global = true, value_name = "T")]
    pub duration: Option<f64>,
    /// decay rate of the excited level
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// relative amplitude errors as lo:hi:n
    #[arg(long = "eps-range", global = true, value_name = "LO:HI:N")]
    pub eps_range: Option<GridSpec>,
    /// single relative amplitude error
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true)]
    pub pulse: Option<PulseChoice>,
    /// time samples of synthesized pulses
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// output directory (default: out)
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// worker threads (default: available parallelism)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// solver residual tolerance; comparison tolerance for `table`
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// JSON seed(s) replacing the built-in multipliers
    #[arg(long = "seed-file", global = true, value_name = "PATH")]
    pub seed_file: Option<PathBuf>,
    /// restrict `table` to one column
    #[arg(long, global = true, value_name = "COLUMN")]
    pub only: Option<String>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("{key}: cannot parse '{value}': {e}")))
}

fn parse_enum<T: ValueEnum>(key: &str, value: &str) -> Result<T, CliError> {
    T::from_str(value, true).map_err(|e| CliError::Config(format!("{key}: {e}")))
}

impl Overrides {
    /// Parses a config file body. Blank lines and `#` comments are skipped;
    /// keys match the long flag names, with `-` or `_`.
    pub fn parse_config(text: &str) -> Result<Self, CliError> {
        let mut o = Overrides::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {}: expected key = value", lineno + 1)));
            };
            let key = key.trim().replace('_', "-");
            let value = value.trim().trim_matches('"');
            match key.as_str() {
                "phidot-i" => o.phidot_i = Some(parse_value(&key, value)?),
                "grid" => o.grid = Some(parse_value(&key, value)?),
                "crossing" => o.crossing = Some(parse_enum(&key, value)?),
                "T" | "t" | "duration" => o.duration = Some(parse_value(&key, value)?),
                "gamma" => o.gamma = Some(parse_value(&key, value)?),
                "eps-range" => o.eps_range = Some(parse_value(&key, value)?),
                "eps" => o.eps = Some(parse_value(&key, value)?),
                "pulse" => o.pulse = Some(parse_enum(&key, value)?),
                "points" => o.points = Some(parse_value(&key, value)?),
                "out" => o.out = Some(PathBuf::from(value)),
                "jobs" => o.jobs = Some(parse_value(&key, value)?),
                "tolerance" => o.tolerance = Some(parse_value(&key, value)?),
                "seed-file" => o.seed_file = Some(PathBuf::from(value)),
                "only" => o.only = Some(value.to_string()),
                _ => return Err(CliError::Config(format!("line {}: unknown key '{key}'", lineno + 1))),
            }
        }
        Ok(o)
    }

    pub fn read_config(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse_config(&text)
    }

    /// Fields set here win over `lower`.
    pub fn or(self, lower: Overrides) -> Overrides {
        Overrides {
            config: self.config.or(lower.config),
            phidot_i: self.phidot_i.or(lower.phidot_i),
            grid: self.grid.or(lower.grid),
            crossing: self.crossing.or(lower.crossing),
            duration: self.duration.or(lower.duration),
            gamma: self.gamma.or(lower.gamma),
            eps_range: self.eps_range.or(lower.eps_range),
            eps: self.eps.or(lower.eps),
            pulse: self.pulse.or(lower.pulse),
            points: self.points.or(lower.points),
            out: self.out.or(lower.out),
            jobs: self.jobs.or(lower.jobs),
            tolerance: self.tolerance.or(lower.tolerance),
            seed_file: self.seed_file.or(lower.seed_file),
            only: self.only.or(lower.only),
        }
    }
}

/// Fully resolved and validated settings of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub phidot_i: Option<f64>,
    pub grid: Option<GridSpec>,
    pub crossing: Crossing,
    pub duration: f64,
    pub gamma: f64,
    pub eps_range: GridSpec,
    pub eps: f64,
    pub pulse: PulseChoice,
    pub points: usize,
    pub out: PathBuf,
    pub jobs: Option<usize>,
    pub tolerance: Option<f64>,
    pub seed_file: Option<PathBuf>,
    pub only: Option<String>,
}

pub const DEFAULT_EPS_RANGE: GridSpec = GridSpec { lo: -0.2, hi: 0.2, n: 401 };

impl RunConfig {
    /// Applies defaults and validates ranges.
    pub fn resolve(command: &str, o: Overrides) -> Result<Self, CliError> {
        let cfg = RunConfig {
            command: command.to_string(),
            phidot_i: o.phidot_i,
            grid: o.grid,
            crossing: o.crossing.unwrap_or(Crossing::Auto),
            duration: o.duration.unwrap_or(1.0),
            gamma: o.gamma.unwrap_or(0.0),
            eps_range: o.eps_range.unwrap_or(DEFAULT_EPS_RANGE),
            eps: o.eps.unwrap_or(0.0),
            pulse: o.pulse.unwrap_or(PulseChoice::Robust),
            points: o.points.unwrap_or(DEFAULT_POINTS),
            out: o.out.unwrap_or_else(|| PathBuf::from("out")),
            jobs: o.jobs,
            tolerance: o.tolerance,
            seed_file: o.seed_file,
            only: o.only,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(p) = self.phidot_i {
            if !p.is_finite() || p < 0.0 {
                return bad(format!("phidot-i must be finite and >= 0, got {p}"));
            }
        }
        if let Some(g) = self.grid {
            if g.lo < 0.0 || g.hi > 250.0 {
                return bad(format!("grid must lie within [0, 250], got {g}"));
            }
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("T must be positive, got {}", self.duration));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return bad(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if !(self.eps.is_finite() && self.eps.abs() <= 0.5) {
            return bad(format!("eps must lie in [-0.5, 0.5], got {}", self.eps));
        }
        if self.eps_range.lo < -0.5 || self.eps_range.hi > 0.5 {
            return bad(format!("eps-range must lie in [-0.5, 0.5], got {}", self.eps_range));
        }
        if self.points < 5 {
            return bad(format!("points must be at least 5, got {}", self.points));
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1".into());
        }
        if let Some(t) = self.tolerance {
            if !(t.is_finite() && t > 0.0) {
                return bad(format!("tolerance must be positive, got {t}"));
            }
        }
        Ok(())
    }

    pub fn require_phidot(&self) -> Result<f64, CliError> {
        self.phidot_i
            .ok_or_else(|| CliError::Config(format!("{} needs --phidot-i", self.command)))
    }
}
