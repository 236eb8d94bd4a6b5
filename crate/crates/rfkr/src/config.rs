//! Experiment configuration: `key = value` files, flag overrides and the
//! validated [`ExperimentConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rfkr_core::{Activation, DomainKind, DomainSpec};

use crate::error::{HarnessError, Result};

/// Every key accepted in config files (dashes in flag names become underscores).
pub const KEYS: &[&str] = &[
    "domain",
    "d",
    "activation",
    "masses",
    "sigma_eps",
    "lambda",
    "grid_n",
    "grid_N",
    "reps",
    "n_test",
    "seed",
    "out",
    "threads",
    "n",
    "N",
    "diagnostics",
    "closed_form",
    "floor",
    "size_cap",
    "cache",
];

pub const DEFAULT_SIZE_CAP: usize = 30_000;
pub const DEFAULT_N_TEST: usize = 10_000;

fn usage(msg: impl Into<String>) -> HarnessError {
    HarnessError::Usage(msg.into())
}

/// Raw string settings, later layers overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Settings::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("line {}: expected `key = value`, got `{line}`", no + 1)))?;
            out.set(k.trim(), v.trim())?;
        }
        Ok(out)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(usage(format!("unknown key `{key}`")));
        }
        self.values.insert(key, value.to_string());
        Ok(())
    }

    /// Applies every entry of `other` on top of `self`.
    pub fn merge(&mut self, other: &Settings) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| usage(format!("invalid value `{v}` for `{key}`"))),
        }
    }

    pub fn parsed_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true" | "yes" | "1" | "on") => Ok(true),
            Some("false" | "no" | "0" | "off") => Ok(false),
            Some(v) => Err(usage(format!("invalid value `{v}` for `{key}`"))),
        }
    }

    pub fn domain(&self) -> Result<DomainSpec> {
        let kind = DomainKind::parse(self.get("domain").unwrap_or("sphere")).map_err(|e| usage(e.to_string()))?;
        let d = self.parsed::<usize>("d")?.ok_or_else(|| usage("missing `d`"))?;
        DomainSpec::new(kind, d).map_err(|e| usage(e.to_string()))
    }

    pub fn activation(&self) -> Result<Activation> {
        Activation::parse(self.get("activation").unwrap_or("shifted_relu:0.5")).map_err(|e| usage(e.to_string()))
    }

    pub fn masses(&self) -> Result<Vec<f64>> {
        parse_masses(self.get("masses").ok_or_else(|| usage("missing `masses`"))?)
    }

    pub fn lambda(&self) -> Result<LambdaPolicy> {
        self.get("lambda").unwrap_or("zero").parse()
    }
}

/// Ridge parameter choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaPolicy {
    /// Minimum-norm interpolation.
    Zero,
    Fixed(f64),
}

impl LambdaPolicy {
    pub fn value(self) -> f64 {
        match self {
            LambdaPolicy::Zero => 0.0,
            LambdaPolicy::Fixed(v) => v,
        }
    }
}

impl FromStr for LambdaPolicy {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "zero" {
            return Ok(LambdaPolicy::Zero);
        }
        match s.trim().parse::<f64>() {
            Ok(v) if v == 0.0 => Ok(LambdaPolicy::Zero),
            Ok(v) if v > 0.0 && v.is_finite() => Ok(LambdaPolicy::Fixed(v)),
            _ => Err(usage(format!("lambda must be `zero` or a finite value >= 0, got `{s}`"))),
        }
    }
}

impl fmt::Display for LambdaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaPolicy::Zero => f.write_str("zero"),
            LambdaPolicy::Fixed(v) => write!(f, "{v}"),
        }
    }
}

/// `"1:0.4,2:0.4"` to a mass vector indexed by level.
pub fn parse_masses(s: &str) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (l, v) = item.split_once(':').ok_or_else(|| usage(format!("mass entry `{item}` is not `level:value`")))?;
        let l: usize = l.trim().parse().map_err(|_| usage(format!("bad level in `{item}`")))?;
        let v: f64 = v.trim().parse().map_err(|_| usage(format!("bad mass in `{item}`")))?;
        if !(v >= 0.0) || !v.is_finite() {
            return Err(usage(format!("mass in `{item}` must be finite and >= 0")));
        }
        if out.len() <= l {
            out.resize(l + 1, 0.0);
        }
        out[l] = v;
    }
    if out.iter().all(|&m| m == 0.0) {
        return Err(usage("target masses are all zero"));
    }
    Ok(out)
}

/// Comma-separated exponents.
pub fn parse_exponents(s: &str) -> Result<Vec<f64>> {
    let out = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0).ok_or_else(|| usage(format!("bad exponent `{t}`"))))
        .collect::<Result<Vec<_>>>()?;
    if out.is_empty() {
        return Err(usage("exponent list is empty"));
    }
    Ok(out)
}

/// `round(d^a)`, at least 1.
pub fn size_from_exponent(d: usize, a: f64) -> usize {
    ((d as f64).powf(a).round() as usize).max(1)
}

/// A fully validated grid experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    pub activation: Activation,
    pub masses: Vec<f64>,
    pub sigma_eps: f64,
    pub lambda: LambdaPolicy,
    pub grid_n: Vec<f64>,
    pub grid_big_n: Vec<f64>,
    pub reps: usize,
    pub n_test: usize,
    pub master_seed: u64,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub run_diagnostics: bool,
    pub run_closed_form: bool,
    pub run_floor: bool,
    pub size_cap: usize,
    pub cache_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let cfg = ExperimentConfig {
            domain: s.domain()?,
            activation: s.activation()?,
            masses: s.masses()?,
            sigma_eps: s.parsed_or("sigma_eps", 0.0)?,
            lambda: s.lambda()?,
            grid_n: parse_exponents(s.get("grid_n").ok_or_else(|| usage("missing `grid_n`"))?)?,
            grid_big_n: parse_exponents(s.get("grid_N").ok_or_else(|| usage("missing `grid_N`"))?)?,
            reps: s.parsed_or("reps", 1)?,
            n_test: s.parsed_or("n_test", DEFAULT_N_TEST)?,
            master_seed: s.parsed_or("seed", 0)?,
            out: s.get("out").map(PathBuf::from),
            threads: s.parsed("threads")?,
            run_diagnostics: s.flag("diagnostics", false)?,
            run_closed_form: s.flag("closed_form", false)?,
            run_floor: s.flag("floor", false)?,
            size_cap: s.parsed_or("size_cap", DEFAULT_SIZE_CAP)?,
            cache_dir: s.get("cache").map(PathBuf::from),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_n.is_empty() || self.grid_big_n.is_empty() {
            return Err(usage("exponent grids must be nonempty"));
        }
        if self.reps == 0 {
            return Err(usage("reps must be at least 1"));
        }
        if !(self.sigma_eps >= 0.0) || !self.sigma_eps.is_finite() {
            return Err(usage("sigma_eps must be finite and >= 0"));
        }
        if self.threads == Some(0) {
            return Err(usage("threads must be at least 1"));
        }
        for (name, list) in [("n", &self.grid_n), ("N", &self.grid_big_n)] {
            for &a in list {
                let size = size_from_exponent(self.domain.d, a);
                if size > self.size_cap {
                    return Err(usage(format!(
                        "{name} = d^{a} = {size} exceeds the size cap {}",
                        self.size_cap
                    )));
                }
            }
        }
        Ok(())
    }

    /// `(log_d n, log_d N)` pairs in cell-major order.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.grid_n.iter().flat_map(|&a| self.grid_big_n.iter().map(move |&b| (a, b))).collect()
    }
}

/// Preset of the `figure1` subcommand at dimension `d`: sphere, shifted ReLU at 0.5,
/// level masses 0.4/0.4/0.1/0.1 on degrees 1 to 4, no noise, minimum-norm fits.
pub fn figure1_settings(d: usize) -> Settings {
    let mut s = Settings::new();
    for (k, v) in [
        ("domain", "sphere".to_string()),
        ("d", d.to_string()),
        ("activation", "shifted_relu:0.5".to_string()),
        ("masses", "1:0.4,2:0.4,3:0.1,4:0.1".to_string()),
        ("sigma_eps", "0".to_string()),
        ("lambda", "zero".to_string()),
        ("grid_n", "1,1.25,1.5,1.75,2,2.25,2.5".to_string()),
        ("grid_N", "1,1.25,1.5,1.75,2,2.25,2.5".to_string()),
        ("reps", "10".to_string()),
    ] {
        s.set(k, &v).expect("preset keys are valid");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_files_and_overrides() {
        let mut s = Settings::parse("# grid\nd = 10\ngrid-n = 1, 1.5\nmasses = 1:0.5\n\nlambda = zero # interpolate\n").unwrap();
        assert_eq!(s.get("d"), Some("10"));
        assert_eq!(s.get("grid_n"), Some("1, 1.5"));
        let mut flags = Settings::new();
        flags.set("d", "12").unwrap();
        s.merge(&flags);
        assert_eq!(s.parsed::<usize>("d").unwrap(), Some(12));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        let e = Settings::parse("bogus = 1").unwrap_err();
        assert!(e.to_string().contains("bogus"));
        assert_eq!(e.exit_code(), 2);
        assert!(Settings::parse("d 10").is_err());
    }

    #[test]
    fn masses_and_lambda() {
        assert_eq!(parse_masses("1:0.4,2:0.4,3:0.1,4:0.1").unwrap(), vec![0.0, 0.4, 0.4, 0.1, 0.1]);
        assert!(parse_masses("1:0").is_err());
        assert!(parse_masses("x").is_err());
        assert_eq!("zero".parse::<LambdaPolicy>().unwrap(), LambdaPolicy::Zero);
        assert_eq!("0".parse::<LambdaPolicy>().unwrap(), LambdaPolicy::Zero);
        assert_eq!("0.5".parse::<LambdaPolicy>().unwrap(), LambdaPolicy::Fixed(0.5));
        assert!("-1".parse::<LambdaPolicy>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut s = figure1_settings(10);
        let cfg = ExperimentConfig::from_settings(&s).unwrap();
        assert_eq!(cfg.cells().len(), 49);
        assert_eq!(cfg.masses.iter().sum::<f64>(), 1.0);
        s.set("grid_n", "").unwrap();
        assert!(ExperimentConfig::from_settings(&s).is_err());
        let mut s = figure1_settings(10);
        s.set("reps", "0").unwrap();
        assert!(ExperimentConfig::from_settings(&s).is_err());
        let mut s = figure1_settings(10);
        s.set("grid_N", "5").unwrap();
        assert!(ExperimentConfig::from_settings(&s).unwrap_err().to_string().contains("size cap"));
    }

    #[test]
    fn sizes() {
        assert_eq!(size_from_exponent(24, 1.5), 118);
        assert_eq!(size_from_exponent(24, 0.0), 1);
        assert_eq!(size_from_exponent(50, 2.0), 2500);
    }
}
