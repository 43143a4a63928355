use rayon::prelude::*;

use super::config::{schedule_size, ExperimentConfig, ExperimentName, MPolicy};
use super::{Estimator, ExperimentResult, Row, SummaryLine};
use crate::error::{Error, Result};
use crate::estimator::{edge_count, perimeter_hat, perimeter_p1_corrected, select_m};
use crate::gkf::{expected_perimeter_affine, second_spectral_moment, MaternModel};
use crate::grid::{threshold, BinaryField, GridSpec, ScalarField};
use crate::proxy::marching_squares_length;
use crate::sim::{AnisotropyTransform, FieldSampler};
use crate::stats::{self, PcNormality};

#[derive(Debug, Clone, Copy)]
enum Plan {
    P1,
    P1Pi4,
    P2(usize),
    P2Auto,
}

/// Estimate from the raster alone.
fn estimate(bin: &BinaryField, plan: Plan) -> Result<(Estimator, Option<usize>, f64)> {
    Ok(match plan {
        Plan::P1 => (Estimator::P1, None, edge_count(bin) as f64 * bin.spec().epsilon()),
        Plan::P1Pi4 => (Estimator::P1Pi4, None, perimeter_p1_corrected(bin)),
        Plan::P2(m) => (Estimator::P2, Some(m), perimeter_hat(bin, m, 2)?.value),
        Plan::P2Auto => match select_m(bin) {
            Ok(m) => (Estimator::P2Auto, Some(m), perimeter_hat(bin, m, 2)?.value),
            Err(Error::NoExcursionBoundary) => (Estimator::P2Auto, None, 0.0),
            Err(e) => return Err(e),
        },
    })
}

fn evaluate(field: &ScalarField, setting: f64, replication: u64, levels: &[f64], plans: &[Plan]) -> Result<Vec<Row>> {
    let mut rows = Vec::with_capacity(levels.len() * plans.len());
    for &level in levels {
        let bin = threshold(field, level);
        let proxy = marching_squares_length(field, level);
        for &plan in plans {
            let (estimator, m, value) = estimate(&bin, plan)?;
            rows.push(Row { setting, replication, level, estimator, m, estimate: value, proxy, error: value - proxy });
        }
    }
    Ok(rows)
}

/// Stream seed of the `k`-th setting of an experiment.
fn setting_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// All replications of one setting, in replication order.
fn replicate(
    sampler: &FieldSampler,
    seed: u64,
    reps: usize,
    setting: f64,
    levels: &[f64],
    plans: &[Plan],
) -> Result<Vec<Row>> {
    let per_rep: Vec<Result<Vec<Row>>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| evaluate(&sampler.sample(seed, rep), setting, rep, levels, plans))
        .collect();
    let mut rows = Vec::with_capacity(reps * levels.len() * plans.len());
    for r in per_rep {
        rows.extend(r?);
    }
    Ok(rows)
}

fn sampler(cfg: &ExperimentConfig, size: usize, theta: f64) -> Result<FieldSampler> {
    let spec = GridSpec::new(cfg.t, size)?;
    FieldSampler::new(spec, MaternModel::new(cfg.nu)?, AnisotropyTransform::new(cfg.sigma1, cfg.sigma2, theta)?)
}

/// Plans for the configured block size followed by the adaptive one.
fn p2_plans(policy: MPolicy, schedule_m: Option<usize>) -> Vec<Plan> {
    let mut plans = Vec::new();
    match (policy, schedule_m) {
        (MPolicy::Fixed(m), _) => plans.push(Plan::P2(m)),
        (MPolicy::Schedule, Some(m)) => plans.push(Plan::P2(m)),
        _ => {}
    }
    plans.push(Plan::P2Auto);
    plans
}

fn expected(cfg: &ExperimentConfig, level: f64) -> Result<f64> {
    let lambda2 = second_spectral_moment(&MaternModel::new(cfg.nu)?)?;
    let area = (2.0 * cfg.t).powi(2);
    expected_perimeter_affine(area, level, lambda2, cfg.sigma1, cfg.sigma2)
}

fn check(cfg: &ExperimentConfig, name: ExperimentName) -> Result<()> {
    if cfg.name != name {
        return Err(Error::Config(format!("configuration is for {}, not {name}", cfg.name)));
    }
    cfg.validate()
}

/// Mean error of `(π/4)·P̂⁽¹⁾` and `P̂⁽²⁾` against the proxy as the
/// anisotropy axis turns.
pub fn run_aniso_angle(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    check(cfg, ExperimentName::AnisoAngle)?;
    let mut plans = vec![Plan::P1Pi4];
    plans.extend(p2_plans(cfg.m_policy, None));
    let mut rows = Vec::new();
    for (k, &theta) in cfg.thetas.iter().enumerate() {
        let s = sampler(cfg, cfg.size, theta)?;
        rows.extend(replicate(&s, setting_seed(cfg.seed, k), cfg.replications, theta, &cfg.levels, &plans)?);
    }
    Ok(ExperimentResult { name: cfg.name, rows, extras: Vec::new() })
}

/// Errors along `M_n = ⌊10 n^{3/2}⌋`, `ε_n = 2t/(M_n - 1)`, `m_n = n`.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    check(cfg, ExperimentName::Convergence)?;
    let theta = cfg.thetas[0];
    let mut rows = Vec::new();
    let mut extras = Vec::new();
    for (k, n) in (cfg.schedule.0..=cfg.schedule.1).enumerate() {
        let size = schedule_size(n);
        let mut plans = vec![Plan::P1Pi4];
        plans.extend(p2_plans(cfg.m_policy, Some(n)));
        let s = sampler(cfg, size, theta)?;
        rows.extend(replicate(&s, setting_seed(cfg.seed, k), cfg.replications, n as f64, &cfg.levels, &plans)?);
        extras.push(SummaryLine {
            setting: Some(n as f64),
            level: None,
            estimator: None,
            m: None,
            statistic: "pixels_per_side".into(),
            value: size as f64,
        });
    }
    Ok(ExperimentResult { name: cfg.name, rows, extras })
}

/// Joint law of `P̂⁽²⁾` over several levels.
pub fn run_clt(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    check(cfg, ExperimentName::Clt)?;
    let theta = cfg.thetas[0];
    let plans = p2_plans(cfg.m_policy, None);
    let s = sampler(cfg, cfg.size, theta)?;
    let rows = replicate(&s, setting_seed(cfg.seed, 0), cfg.replications, theta, &cfg.levels, &plans)?;
    let mut result = ExperimentResult { name: cfg.name, rows, extras: Vec::new() };
    let analysis = clt_analysis(&result, cfg)?;
    result.extras = analysis.summary_lines(theta);
    Ok(result)
}

/// Normality diagnostics of the multi-level estimate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CltAnalysis {
    pub estimator: Estimator,
    pub levels: Vec<f64>,
    /// Expected perimeters over the window at each level.
    pub expected: Vec<f64>,
    pub means: Vec<f64>,
    /// Shapiro–Wilk `(W, p)` per level.
    pub marginal: Vec<(f64, f64)>,
    /// Squared Mahalanobis distances to the expected vector.
    pub mahalanobis: Vec<f64>,
    pub mahalanobis_mean: f64,
    pub pc: PcNormality,
}

impl CltAnalysis {
    /// `(mean_k / mean_0) / (φ(u_k) / φ(u_0))` for each level.
    pub fn density_ratios(&self) -> Vec<f64> {
        let phi = |u: f64| (-0.5 * u * u).exp();
        let (m0, u0) = (self.means[0], self.levels[0]);
        self.means.iter().zip(&self.levels).map(|(m, &u)| (m / m0) / (phi(u) / phi(u0))).collect()
    }

    fn summary_lines(&self, theta: f64) -> Vec<SummaryLine> {
        let mut out = Vec::new();
        let mut push = |level: Option<f64>, statistic: &str, value: f64| {
            out.push(SummaryLine {
                setting: Some(theta),
                level,
                estimator: Some(self.estimator),
                m: None,
                statistic: statistic.into(),
                value,
            })
        };
        for (k, &u) in self.levels.iter().enumerate() {
            push(Some(u), "expected_perimeter", self.expected[k]);
            push(Some(u), "sw_w", self.marginal[k].0);
            push(Some(u), "sw_p", self.marginal[k].1);
        }
        push(None, "mahalanobis_mean", self.mahalanobis_mean);
        push(None, "pc_sw_p", self.pc.p_value);
        let qq = stats::qq_points(&self.mahalanobis, stats::QqDistribution::ChiSquared(self.levels.len() as f64))
            .unwrap_or_default();
        for (q, d) in qq {
            push(None, &format!("qq_chi2:{q}"), d);
        }
        out
    }
}

pub fn clt_analysis(result: &ExperimentResult, cfg: &ExperimentConfig) -> Result<CltAnalysis> {
    let estimator =
        if result.rows.iter().any(|r| r.estimator == Estimator::P2) { Estimator::P2 } else { Estimator::P2Auto };
    let levels = cfg.levels.clone();
    let k = levels.len();
    let mut vectors: Vec<Vec<f64>> = vec![vec![f64::NAN; k]; cfg.replications];
    for r in result.rows.iter().filter(|r| r.estimator == estimator) {
        let li = levels
            .iter()
            .position(|&u| u == r.level)
            .ok_or_else(|| Error::invalid(format!("row at unexpected level {}", r.level)))?;
        vectors[r.replication as usize][li] = r.estimate;
    }
    if vectors.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::invalid("incomplete replication vectors"));
    }
    let expected: Vec<f64> = levels.iter().map(|&u| expected(cfg, u)).collect::<Result<_>>()?;
    let n = vectors.len() as f64;
    let means: Vec<f64> = (0..k).map(|j| vectors.iter().map(|v| v[j]).sum::<f64>() / n).collect();
    let marginal = (0..k)
        .map(|j| stats::shapiro_wilk(&vectors.iter().map(|v| v[j]).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let mahalanobis = stats::mahalanobis_sq(&vectors, &expected)?;
    let mahalanobis_mean = mahalanobis.iter().sum::<f64>() / n;
    let pc = stats::pc_shapiro_wilk(&vectors)?;
    Ok(CltAnalysis { estimator, levels, expected, means, marginal, mahalanobis, mahalanobis_mean, pc })
}

/// Error of `P̂⁽²⁾` over a grid of block sizes next to the adaptive choice.
pub fn run_mselect(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    check(cfg, ExperimentName::Mselect)?;
    let theta = cfg.thetas[0];
    let mut plans = vec![Plan::P1Pi4, Plan::P2Auto];
    plans.extend(cfg.m_grid.iter().map(|&m| Plan::P2(m)));
    let s = sampler(cfg, cfg.size, theta)?;
    let rows = replicate(&s, setting_seed(cfg.seed, 0), cfg.replications, cfg.t, &cfg.levels, &plans)?;
    let mut extras = Vec::new();
    for &u in &cfg.levels {
        let mut chosen: Vec<usize> =
            rows.iter().filter(|r| r.estimator == Estimator::P2Auto && r.level == u).filter_map(|r| r.m).collect();
        chosen.sort_unstable();
        chosen.dedup();
        for m in chosen {
            let count =
                rows.iter().filter(|r| r.estimator == Estimator::P2Auto && r.level == u && r.m == Some(m)).count();
            extras.push(SummaryLine {
                setting: Some(cfg.t),
                level: Some(u),
                estimator: Some(Estimator::P2Auto),
                m: Some(m),
                statistic: "select_m_count".into(),
                value: count as f64,
            });
        }
    }
    Ok(ExperimentResult { name: cfg.name, rows, extras })
}

/// Estimates and errors across a grid of levels.
pub fn run_level_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    check(cfg, ExperimentName::LevelSweep)?;
    let theta = cfg.thetas[0];
    let mut plans = vec![Plan::P1, Plan::P1Pi4];
    plans.extend(p2_plans(cfg.m_policy, None));
    let s = sampler(cfg, cfg.size, theta)?;
    let rows = replicate(&s, setting_seed(cfg.seed, 0), cfg.replications, cfg.t, &cfg.levels, &plans)?;
    let extras = cfg
        .levels
        .iter()
        .map(|&u| {
            Ok(SummaryLine {
                setting: Some(cfg.t),
                level: Some(u),
                estimator: None,
                m: None,
                statistic: "expected_perimeter".into(),
                value: expected(cfg, u)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult { name: cfg.name, rows, extras })
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    match cfg.name {
        ExperimentName::AnisoAngle => run_aniso_angle(cfg),
        ExperimentName::Convergence => run_convergence(cfg),
        ExperimentName::Clt => run_clt(cfg),
        ExperimentName::Mselect => run_mselect(cfg),
        ExperimentName::LevelSweep => run_level_sweep(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Scale;

    fn small(name: ExperimentName) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset(name, Scale::Desk);
        cfg.replications = 4;
        cfg.size = cfg.size.min(64);
        cfg
    }

    #[test]
    fn row_counts_match_the_design() {
        let cfg = small(ExperimentName::AnisoAngle);
        let res = run(&cfg).unwrap();
        // θ × reps × levels × {p1_pi4, p2, p2_auto}
        assert_eq!(res.rows.len(), 5 * 4 * 3);

        let mut conv = small(ExperimentName::Convergence);
        conv.schedule = (1, 3);
        let res = run(&conv).unwrap();
        assert_eq!(res.rows.len(), 3 * 4 * 3);
        assert_eq!(res.settings(), vec![1.0, 2.0, 3.0]);
        assert!(res.rows.iter().filter(|r| r.estimator == Estimator::P2).all(|r| r.m == Some(r.setting as usize)));

        let mut ms = small(ExperimentName::Mselect);
        ms.m_grid = vec![2, 3, 5];
        let res = run(&ms).unwrap();
        assert_eq!(res.rows.len(), 4 * (2 + 3));
        let counted: f64 = res.extras.iter().filter(|e| e.statistic == "select_m_count").map(|e| e.value).sum();
        assert_eq!(counted, 4.0);

        let mut lv = small(ExperimentName::LevelSweep);
        lv.levels = vec![-1.0, 0.0, 4.5];
        let res = run(&lv).unwrap();
        assert_eq!(res.rows.len(), 4 * 3 * 3);
    }

    #[test]
    fn far_tail_level_gives_zero_estimates() {
        let mut cfg = small(ExperimentName::LevelSweep);
        cfg.levels = vec![8.0];
        let res = run(&cfg).unwrap();
        for r in &res.rows {
            assert_eq!(r.estimate, 0.0, "{r:?}");
            assert_eq!(r.proxy, 0.0);
        }
        let auto = res.group(cfg.t, 8.0, Estimator::P2Auto, None).unwrap();
        assert_eq!(auto.summary.mae, 0.0);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let mut cfg = small(ExperimentName::Clt);
        cfg.t = 3.0;
        cfg.replications = 8;
        let render = |cfg: &ExperimentConfig| {
            let res = run(cfg).unwrap();
            let mut a = Vec::new();
            res.write_csv(&mut a).unwrap();
            res.write_summary_csv(&mut a).unwrap();
            a
        };
        let first = render(&cfg);
        assert_eq!(first, render(&cfg));
        let text = String::from_utf8(first).unwrap();
        assert!(text.starts_with("# schema=clt/1\ntheta,replication,level,estimator,m,estimate,proxy,error\n"));
        assert!(text.contains("# schema=clt-summary/1"));
        cfg.seed += 1;
        assert_ne!(text.into_bytes(), render(&cfg));
    }

    #[test]
    fn replications_are_independent_of_thread_count() {
        let mut cfg = small(ExperimentName::AnisoAngle);
        cfg.thetas = vec![0.3];
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let parallel = pool.install(|| run(&cfg).unwrap());
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run(&cfg).unwrap());
        assert_eq!(parallel, serial);
    }

    #[test]
    fn clt_analysis_on_a_small_run() {
        let mut cfg = small(ExperimentName::Clt);
        cfg.t = 4.0;
        cfg.replications = 30;
        let res = run(&cfg).unwrap();
        let a = clt_analysis(&res, &cfg).unwrap();
        assert_eq!(a.estimator, Estimator::P2);
        assert_eq!(a.mahalanobis.len(), 30);
        assert_eq!(a.expected.len(), 3);
        assert!(a.expected[0] > a.expected[1] && a.expected[1] > a.expected[2]);
        assert!(a.marginal.iter().all(|&(w, p)| w > 0.0 && (0.0..=1.0).contains(&p)));
        assert!((a.density_ratios()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wrong_experiment_name_is_rejected() {
        let cfg = small(ExperimentName::Clt);
        assert!(matches!(run_mselect(&cfg), Err(Error::Config(_))));
    }
}
