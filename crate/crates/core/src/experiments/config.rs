//! Experiment configuration: presets, a flat `key = value` file format and
//! single-key overrides.
//!
//! Recognised keys:
//!
//! | key        | value                                              |
//! |------------|----------------------------------------------------|
//! | `nu`       | Matérn smoothness                                  |
//! | `sigma1`   | major axis scaling                                 |
//! | `sigma2`   | minor axis scaling                                 |
//! | `theta`    | angle or comma-separated list of angles (radians)  |
//! | `t`        | half-width of the window `[-t, t]²`                |
//! | `M`        | pixels per side                                    |
//! | `n`        | schedule range `a..b` (convergence only)           |
//! | `levels`   | comma-separated levels                             |
//! | `m`        | block size: an integer, `auto` or `schedule`       |
//! | `m_grid`   | block sizes for the m study: list or range `a..b`  |
//! | `reps`     | replications per setting                           |
//! | `seed`     | 64-bit seed                                        |
//! | `out`      | output CSV path                                    |
//!
//! Angles also accept `pi`, `pi/8`, `3pi/8` style values.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentName {
    AnisoAngle,
    Convergence,
    Clt,
    Mselect,
    LevelSweep,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 5] = [
        ExperimentName::AnisoAngle,
        ExperimentName::Convergence,
        ExperimentName::Clt,
        ExperimentName::Mselect,
        ExperimentName::LevelSweep,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::AnisoAngle => "aniso-angle",
            ExperimentName::Convergence => "convergence",
            ExperimentName::Clt => "clt",
            ExperimentName::Mselect => "mselect",
            ExperimentName::LevelSweep => "level-sweep",
        }
    }

    /// Header of the per-setting column in the CSV output.
    pub fn setting_label(&self) -> &'static str {
        match self {
            ExperimentName::AnisoAngle | ExperimentName::Clt => "theta",
            ExperimentName::Convergence => "n",
            ExperimentName::Mselect | ExperimentName::LevelSweep => "t",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|e| e.as_str() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown experiment {s:?}; expected one of aniso-angle, convergence, clt, mselect, level-sweep"
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Paper,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            _ => Err(Error::Config(format!("unknown scale {s:?}; expected desk or paper"))),
        }
    }
}

/// How the block size of the main `p = 2` estimator is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MPolicy {
    Fixed(usize),
    /// Chosen per raster from its topology.
    Auto,
    /// `m_n = n` along the convergence schedule.
    Schedule,
}

impl FromStr for MPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(MPolicy::Auto),
            "schedule" => Ok(MPolicy::Schedule),
            _ => match s.parse::<usize>() {
                Ok(m) if m >= 1 => Ok(MPolicy::Fixed(m)),
                _ => Err(Error::Config(format!("m must be a positive integer, auto or schedule; got {s:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: ExperimentName,
    pub nu: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub thetas: Vec<f64>,
    pub t: f64,
    pub size: usize,
    /// Inclusive schedule index range for the convergence study.
    pub schedule: (usize, usize),
    pub levels: Vec<f64>,
    pub m_policy: MPolicy,
    pub m_grid: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

const DEFAULT_SEED: u64 = 20_230_417;

impl ExperimentConfig {
    /// Built-in configuration. Desk presets trade replications (and for the
    /// CLT and level studies, grid size) for running time.
    pub fn preset(name: ExperimentName, scale: Scale) -> Self {
        let paper = scale == Scale::Paper;
        let base = ExperimentConfig {
            name,
            nu: 2.5,
            sigma1: 2.0,
            sigma2: 0.5,
            thetas: vec![0.0],
            t: 2.5,
            size: 256,
            schedule: (1, 5),
            levels: vec![0.5],
            m_policy: MPolicy::Auto,
            m_grid: Vec::new(),
            replications: 100,
            seed: DEFAULT_SEED,
            output: None,
        };
        match name {
            ExperimentName::AnisoAngle => ExperimentConfig {
                thetas: if paper {
                    (0..=8).map(|k| k as f64 * PI / 16.0).collect()
                } else {
                    (0..=4).map(|k| k as f64 * PI / 8.0).collect()
                },
                m_policy: MPolicy::Fixed(11),
                replications: if paper { 200 } else { 50 },
                ..base
            },
            ExperimentName::Convergence => ExperimentConfig {
                schedule: if paper { (1, 7) } else { (1, 5) },
                m_policy: MPolicy::Schedule,
                replications: if paper { 500 } else { 100 },
                ..base
            },
            ExperimentName::Clt => ExperimentConfig {
                thetas: vec![PI / 4.0],
                t: if paper { 15.0 } else { 7.5 },
                size: if paper { 1024 } else { 512 },
                levels: vec![0.0, 0.5, 1.0],
                m_policy: MPolicy::Fixed(7),
                replications: 200,
                ..base
            },
            ExperimentName::Mselect => ExperimentConfig {
                sigma1: 1.0,
                sigma2: 1.0,
                t: 10.0,
                size: 512,
                levels: vec![0.0],
                m_grid: (2..=20).collect(),
                replications: if paper { 1000 } else { 300 },
                ..base
            },
            ExperimentName::LevelSweep => ExperimentConfig {
                sigma1: 1.0,
                sigma2: 1.0,
                size: if paper { 512 } else { 256 },
                levels: (-6..=6).map(|k| k as f64 * 0.5).collect(),
                replications: if paper { 500 } else { 100 },
                ..base
            },
        }
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "nu" => self.nu = parse_real(key, value)?,
            "sigma1" => self.sigma1 = parse_real(key, value)?,
            "sigma2" => self.sigma2 = parse_real(key, value)?,
            "theta" | "thetas" => self.thetas = parse_list(value, parse_angle)?,
            "t" => self.t = parse_real(key, value)?,
            "M" | "size" => self.size = parse_int(key, value)?,
            "n" | "schedule" => {
                let range = parse_range(value)?;
                self.schedule = (*range.first().expect("nonempty range"), *range.last().expect("nonempty range"));
            }
            "levels" | "u" => self.levels = parse_list(value, |s| parse_real("levels", s))?,
            "m" => self.m_policy = value.parse()?,
            "m_grid" => {
                self.m_grid = if value.contains("..") {
                    parse_range(value)?
                } else {
                    parse_list(value, |s| parse_int("m_grid", s))?
                }
            }
            "reps" | "replications" => self.replications = parse_int(key, value)?,
            "seed" => {
                self.seed =
                    value.parse().map_err(|_| Error::Config(format!("seed must be a 64-bit integer, got {value:?}")))?
            }
            "out" | "output" => self.output = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of a config file. Blank lines and
    /// `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got {raw:?}", lineno + 1)))?;
            self.set(key, value).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("line {}: {msg}", lineno + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.replications < 1 {
            return fail("replications must be at least 1".into());
        }
        if !(self.nu > 1.0 && self.nu.is_finite()) {
            return fail(format!("nu must exceed 1 for differentiable paths, got {}", self.nu));
        }
        if !(self.sigma2 > 0.0 && self.sigma1 >= self.sigma2 && self.sigma1.is_finite()) {
            return fail(format!("need sigma1 ≥ sigma2 > 0, got ({}, {})", self.sigma1, self.sigma2));
        }
        if self.thetas.is_empty() || self.thetas.iter().any(|th| !(0.0..PI).contains(th)) {
            return fail("theta values must lie in [0, π)".into());
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return fail(format!("t must be positive, got {}", self.t));
        }
        if self.size < 3 {
            return fail(format!("M must be at least 3, got {}", self.size));
        }
        if self.levels.is_empty() || self.levels.iter().any(|u| !u.is_finite()) {
            return fail("levels must be a nonempty list of finite numbers".into());
        }
        let (lo, hi) = self.schedule;
        if lo < 1 || hi < lo {
            return fail(format!("schedule range must satisfy 1 ≤ a ≤ b, got {lo}..{hi}"));
        }
        if self.m_grid.iter().any(|&m| m < 1) {
            return fail("m_grid entries must be positive".into());
        }
        match (self.name, self.m_policy) {
            (ExperimentName::Convergence, MPolicy::Schedule) => {}
            (_, MPolicy::Schedule) => return fail("m = schedule only applies to the convergence study".into()),
            _ => {}
        }
        if self.name == ExperimentName::Clt {
            if self.levels.len() < 2 {
                return fail("the CLT study needs at least two levels".into());
            }
            let mut sorted = self.levels.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return fail("CLT levels must be distinct".into());
            }
        }
        if self.name == ExperimentName::Mselect && self.m_grid.is_empty() {
            return fail("the m study needs a nonempty m_grid".into());
        }
        Ok(())
    }
}

/// `M_n = ⌊10 n^{3/2}⌋`.
pub fn schedule_size(n: usize) -> usize {
    (10.0 * (n as f64).powf(1.5)).floor() as usize
}

fn parse_real(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Config(format!("{key} must be a finite number, got {value:?}")))
}

fn parse_int(key: &str, value: &str) -> Result<usize> {
    value.parse().map_err(|_| Error::Config(format!("{key} must be a nonnegative integer, got {value:?}")))
}

fn parse_list<T>(value: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(item).collect()
}

fn parse_range(value: &str) -> Result<Vec<usize>> {
    let (a, b) =
        value.split_once("..").ok_or_else(|| Error::Config(format!("expected a range a..b, got {value:?}")))?;
    // both `a..b` and `a..=b` include `b`
    let (a, b) = (parse_int("range start", a.trim())?, parse_int("range end", b.trim_start_matches('=').trim())?);
    if b < a {
        return Err(Error::Config(format!("empty range {value:?}")));
    }
    Ok((a..=b).collect())
}

/// Radians, or multiples of π written as `pi`, `pi/4`, `3pi/8`, `3*pi/8`.
fn parse_angle(value: &str) -> Result<f64> {
    let v = value.trim();
    if let Ok(x) = v.parse::<f64>() {
        return Ok(x);
    }
    let bad = || Error::Config(format!("cannot read angle {value:?}"));
    let (num, den) = match v.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim().parse::<f64>().map_err(|_| bad())?),
        None => (v, 1.0),
    };
    let coef = num.strip_suffix("pi").ok_or_else(bad)?.trim_end_matches('*').trim();
    let coef = if coef.is_empty() { 1.0 } else { coef.parse::<f64>().map_err(|_| bad())? };
    Ok(coef * PI / den)
}
