//! Simulation studies: simulate, threshold, estimate, compare with the proxy,
//! summarize.
//!
//! Estimates are computed from the thresholded raster only; the real-valued
//! field is used for the proxy and nothing else.

mod config;
mod runners;

use std::io::Write;

pub use config::{schedule_size, ExperimentConfig, ExperimentName, MPolicy, Scale};
pub use runners::{
    clt_analysis, run, run_aniso_angle, run_clt, run_convergence, run_level_sweep, run_mselect, CltAnalysis,
};

use crate::error::{Error, Result};
use crate::stats::{self, SampleSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    /// Raw edge count `P̂⁽¹⁾`.
    P1,
    /// `(π/4)·P̂⁽¹⁾`.
    P1Pi4,
    /// `P̂⁽²⁾` with the configured block size.
    P2,
    /// `P̂⁽²⁾` with the block size chosen from the raster.
    P2Auto,
}

impl Estimator {
    pub fn id(&self) -> &'static str {
        match self {
            Estimator::P1 => "p1",
            Estimator::P1Pi4 => "p1_pi4",
            Estimator::P2 => "p2",
            Estimator::P2Auto => "p2_auto",
        }
    }
}

/// One estimate on one replication at one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    /// Value of the experiment's varied parameter (θ, n or t).
    pub setting: f64,
    pub replication: u64,
    pub level: f64,
    pub estimator: Estimator,
    /// Block size, when the estimator has one.
    pub m: Option<usize>,
    pub estimate: f64,
    pub proxy: f64,
    pub error: f64,
}

/// Error statistics of one `(setting, level, estimator, m)` group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStats {
    pub setting: f64,
    pub level: f64,
    pub estimator: Estimator,
    /// `None` for `p2_auto`, whose block size varies by replication.
    pub m: Option<usize>,
    pub mean_proxy: f64,
    pub mean_error: f64,
    /// Estimates summarized against the proxies.
    pub summary: SampleSummary,
}

/// Experiment-specific summary value.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryLine {
    pub setting: Option<f64>,
    pub level: Option<f64>,
    pub estimator: Option<Estimator>,
    pub m: Option<usize>,
    pub statistic: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub name: ExperimentName,
    pub rows: Vec<Row>,
    pub extras: Vec<SummaryLine>,
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

impl ExperimentResult {
    /// Distinct settings in order of appearance.
    pub fn settings(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.iter().any(|&s| same(s, r.setting)) {
                out.push(r.setting);
            }
        }
        out
    }

    pub fn select(&self, setting: f64, level: f64, estimator: Estimator, m: Option<usize>) -> Vec<&Row> {
        self.rows
            .iter()
            .filter(|r| {
                same(r.setting, setting)
                    && same(r.level, level)
                    && r.estimator == estimator
                    && (estimator == Estimator::P2Auto || m.is_none() || r.m == m)
            })
            .collect()
    }

    /// Error statistics of the rows matching the key; `m` is ignored for
    /// `p2_auto` and, when `None`, for every estimator.
    pub fn group(&self, setting: f64, level: f64, estimator: Estimator, m: Option<usize>) -> Result<GroupStats> {
        let rows = self.select(setting, level, estimator, m);
        if rows.is_empty() {
            return Err(Error::invalid(format!(
                "no rows for setting {setting}, level {level}, estimator {}",
                estimator.id()
            )));
        }
        let estimates: Vec<f64> = rows.iter().map(|r| r.estimate).collect();
        let proxies: Vec<f64> = rows.iter().map(|r| r.proxy).collect();
        let n = rows.len() as f64;
        Ok(GroupStats {
            setting,
            level,
            estimator,
            m: if estimator == Estimator::P2Auto { None } else { m },
            mean_proxy: proxies.iter().sum::<f64>() / n,
            mean_error: rows.iter().map(|r| r.error).sum::<f64>() / n,
            summary: stats::summary(&estimates, &proxies)?,
        })
    }

    /// Statistics for every group, in order of first appearance.
    pub fn groups(&self) -> Result<Vec<GroupStats>> {
        let mut keys: Vec<(f64, f64, Estimator, Option<usize>)> = Vec::new();
        for r in &self.rows {
            let m = if r.estimator == Estimator::P2Auto { None } else { r.m };
            if !keys.iter().any(|k| same(k.0, r.setting) && same(k.1, r.level) && k.2 == r.estimator && k.3 == m) {
                keys.push((r.setting, r.level, r.estimator, m));
            }
        }
        keys.into_iter().map(|(s, u, e, m)| self.group(s, u, e, m)).collect()
    }

    /// Per-replication rows as CSV, preceded by a `# schema=` line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# schema={}/1", self.name)?;
        writeln!(w, "{},replication,level,estimator,m,estimate,proxy,error", self.name.setting_label())?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.setting,
                r.replication,
                r.level,
                r.estimator.id(),
                r.m.map(|m| m.to_string()).unwrap_or_default(),
                r.estimate,
                r.proxy,
                r.error
            )?;
        }
        Ok(())
    }

    /// Group statistics and experiment-specific values as long-format CSV.
    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# schema={}-summary/1", self.name)?;
        writeln!(w, "{},level,estimator,m,statistic,value", self.name.setting_label())?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for g in self.groups()? {
            let mut line = |stat: &str, value: f64| {
                writeln!(
                    w,
                    "{},{},{},{},{stat},{value}",
                    g.setting,
                    g.level,
                    g.estimator.id(),
                    g.m.map(|m| m.to_string()).unwrap_or_default()
                )
            };
            line("n", g.summary.n as f64)?;
            line("mean_estimate", g.summary.mean)?;
            line("sd_estimate", g.summary.sd)?;
            line("mean_proxy", g.mean_proxy)?;
            line("mean_error", g.mean_error)?;
            line("mae", g.summary.mae)?;
            if let Some(mape) = g.summary.mape_opt() {
                line("mape", mape)?;
            }
        }
        for e in &self.extras {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                opt(e.setting),
                opt(e.level),
                e.estimator.map(|x| x.id()).unwrap_or_default(),
                e.m.map(|m| m.to_string()).unwrap_or_default(),
                e.statistic,
                e.value
            )?;
        }
        Ok(())
    }
}
