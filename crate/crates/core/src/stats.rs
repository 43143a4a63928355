//! Summary errors, normality diagnostics and quantile functions.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::special;

/// Spread of estimates `vᵢ` around reference values `rᵢ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSummary {
    pub n: usize,
    /// Mean and standard deviation (`n - 1` denominator) of the values.
    pub mean: f64,
    pub sd: f64,
    /// `mean |vᵢ - rᵢ|`.
    pub mae: f64,
    /// `100 · mean |vᵢ - rᵢ| / |rᵢ|`, `None` when some `rᵢ = 0`.
    mape: Option<f64>,
    zero_reference: Option<usize>,
}

impl SampleSummary {
    pub fn mape(&self) -> Result<f64> {
        match (self.mape, self.zero_reference) {
            (Some(v), _) => Ok(v),
            (None, Some(index)) => Err(Error::UndefinedMape { index }),
            (None, None) => unreachable!("mape is set whenever no reference is zero"),
        }
    }

    pub fn mape_opt(&self) -> Option<f64> {
        self.mape
    }
}

pub fn summary(values: &[f64], references: &[f64]) -> Result<SampleSummary> {
    if values.is_empty() || values.len() != references.len() {
        return Err(Error::invalid(format!(
            "need equal, nonzero lengths; got {} values and {} references",
            values.len(),
            references.len()
        )));
    }
    let n = values.len();
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let sd = if n > 1 { (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt() } else { 0.0 };
    let mae = values.iter().zip(references).map(|(v, r)| (v - r).abs()).sum::<f64>() / nf;
    let zero_reference = references.iter().position(|&r| r == 0.0);
    let mape = match zero_reference {
        Some(_) => None,
        None => Some(100.0 * values.iter().zip(references).map(|(v, r)| ((v - r) / r).abs()).sum::<f64>() / nf),
    };
    Ok(SampleSummary { n, mean, sd, mae, mape, zero_reference })
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Shapiro–Wilk `W` and its p-value using Royston's approximations
/// (algorithm AS R94), for `3 ≤ n ≤ 5000`.
pub fn shapiro_wilk(sample: &[f64]) -> Result<(f64, f64)> {
    let n = sample.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::invalid(format!("Shapiro–Wilk needs 3 ≤ n ≤ 5000, got {n}")));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("sample contains non-finite values"));
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range <= 1e-19 * x[0].abs().max(1.0) {
        return Err(Error::invalid("Shapiro–Wilk is undefined for a constant sample"));
    }

    let weights = shapiro_wilk_weights(n);
    // full antisymmetric coefficient vector against the ascending sample
    let coef = |i: usize| {
        if i < n / 2 {
            -weights[i]
        } else if n % 2 == 1 && i == n / 2 {
            0.0
        } else {
            weights[n - 1 - i]
        }
    };
    let xs: Vec<f64> = x.iter().map(|v| (v - x[0]) / range).collect();
    let x_mean = xs.iter().sum::<f64>() / n as f64;
    let (mut saa, mut sxx, mut sax) = (0.0, 0.0, 0.0);
    for (i, &xi) in xs.iter().enumerate() {
        let a = coef(i);
        let d = xi - x_mean;
        saa += a * a;
        sxx += d * d;
        sax += a * d;
    }
    // 1 - W computed directly to keep precision when W is close to 1
    let root = (saa * sxx).sqrt();
    let one_minus_w = ((root - sax) * (root + sax) / (saa * sxx)).max(0.0);
    let w = (1.0 - one_minus_w).min(1.0);
    Ok((w, shapiro_wilk_p_value(n, w, one_minus_w)))
}

/// Upper-half weights `a_n, a_{n-1}, …` (largest first) for sample size `n`.
fn shapiro_wilk_weights(n: usize) -> Vec<f64> {
    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let an = n as f64;
    // |m_i| for the lower half, m_i = Φ⁻¹((i - 3/8) / (n + 1/4))
    let m: Vec<f64> = (0..half).map(|i| -special::normal_quantile((i as f64 + 0.625) / (an + 0.25))).collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();
    let a1 = poly(&C1, rsn) + m[0] / ssumm2;
    let mut w = vec![0.0; half];
    w[0] = a1;
    let (first_plain, fac) = if n > 5 {
        let a2 = poly(&C2, rsn) + m[1] / ssumm2;
        w[1] = a2;
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1, fac)
    };
    for i in first_plain..half {
        w[i] = m[i] / fac;
    }
    w
}

fn shapiro_wilk_p_value(n: usize, w: f64, one_minus_w: f64) -> f64 {
    const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
    const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
    const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
    const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
    const G: [f64; 2] = [-2.273, 0.459];

    if n == 3 {
        // exact for n = 3
        let w = w.max(0.75);
        return (1.0 - 6.0 / std::f64::consts::PI * w.sqrt().acos()).clamp(0.0, 1.0);
    }
    if one_minus_w <= 0.0 {
        return 1.0;
    }
    let an = n as f64;
    let y = one_minus_w.ln();
    let (z, mean, sd) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return 0.0;
        }
        (-(gamma - y).ln(), poly(&C3, an), poly(&C4, an).exp())
    } else {
        let ln_n = an.ln();
        (y, poly(&C5, ln_n), poly(&C6, ln_n).exp())
    };
    special::normal_sf((z - mean) / sd).clamp(0.0, 1.0)
}

/// `dᵢ = (xᵢ - c)ᵀ S⁻¹ (xᵢ - c)` with `S` the sample covariance of the rows.
pub fn mahalanobis_sq(samples: &[Vec<f64>], center: &[f64]) -> Result<Vec<f64>> {
    let k = center.len();
    let data = sample_matrix(samples, k)?;
    let n = data.nrows();
    if n <= k {
        return Err(Error::invalid(format!("need more samples than dimensions, got n={n}, k={k}")));
    }
    let cov = sample_covariance(&data);
    let chol = checked_cholesky(cov)?;
    let c = DVector::from_column_slice(center);
    Ok((0..n)
        .map(|i| {
            let d = data.row(i).transpose() - &c;
            let z = chol.l().solve_lower_triangular(&d).expect("nonsingular factor");
            z.norm_squared()
        })
        .collect())
}

fn sample_matrix(samples: &[Vec<f64>], k: usize) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if let Some(bad) = samples.iter().position(|r| r.len() != k) {
        return Err(Error::invalid(format!("row {bad} has {} entries, expected {k}", samples[bad].len())));
    }
    Ok(DMatrix::from_fn(samples.len(), k, |i, j| samples[i][j]))
}

fn sample_covariance(data: &DMatrix<f64>) -> DMatrix<f64> {
    let n = data.nrows();
    let mean = data.row_mean();
    let mut centred = data.clone();
    for mut row in centred.row_iter_mut() {
        row -= &mean;
    }
    centred.transpose() * &centred / (n as f64 - 1.0)
}

/// Cholesky factor, rejecting matrices that are singular to working precision.
fn checked_cholesky(cov: DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let scale = cov.diagonal().max();
    if scale.is_nan() || scale <= 0.0 {
        return Err(Error::DegenerateCovariance);
    }
    let chol = cov.cholesky().ok_or(Error::DegenerateCovariance)?;
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b * b));
    if min_pivot <= 1e-12 * scale {
        return Err(Error::DegenerateCovariance);
    }
    Ok(chol)
}

/// Shapiro–Wilk on standardized principal-component scores.
#[derive(Debug, Clone, PartialEq)]
pub struct PcNormality {
    /// `(W, p)` per component, largest variance first.
    pub components: Vec<(f64, f64)>,
    /// Bonferroni-combined p-value `min(1, k · min pᵢ)`.
    pub p_value: f64,
}

pub fn pc_shapiro_wilk(samples: &[Vec<f64>]) -> Result<PcNormality> {
    let k = samples.first().map(Vec::len).ok_or_else(|| Error::invalid("no samples"))?;
    let data = sample_matrix(samples, k)?;
    let n = data.nrows();
    if n <= k {
        return Err(Error::invalid(format!("need more samples than dimensions, got n={n}, k={k}")));
    }
    let cov = sample_covariance(&data);
    checked_cholesky(cov.clone())?;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mean = data.row_mean();
    let mut components = Vec::with_capacity(k);
    for &c in &order {
        let axis = eig.eigenvectors.column(c);
        let sd = eig.eigenvalues[c].sqrt();
        let scores: Vec<f64> = data.row_iter().map(|row| (row - &mean).dot(&axis.transpose()) / sd).collect();
        components.push(shapiro_wilk(&scores)?);
    }
    let min_p = components.iter().map(|c| c.1).fold(1.0, f64::min);
    Ok(PcNormality { components, p_value: (k as f64 * min_p).min(1.0) })
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("probability must lie in (0, 1), got {p}")))
    }
}

/// Standard normal quantile, about 1e-15 relative after refinement.
pub fn normal_quantile(p: f64) -> Result<f64> {
    check_probability(p)?;
    Ok(special::normal_quantile(p))
}

/// `χ²(df)` quantile: Wilson–Hilferty start, then Newton on the regularized
/// lower incomplete gamma until the step is below `1e-14` relative.
pub fn chi2_quantile(df: f64, p: f64) -> Result<f64> {
    check_probability(p)?;
    if !(df.is_finite() && df > 0.0) {
        return Err(Error::invalid(format!("degrees of freedom must be positive, got {df}")));
    }
    let z = special::normal_quantile(p);
    let v = 2.0 / (9.0 * df);
    let mut x = (df * (1.0 - v + z * v.sqrt()).powi(3)).max(1e-8 * df);
    let half = 0.5 * df;
    let log_norm = half * 2f64.ln() + special::ln_gamma(half);
    for _ in 0..100 {
        let f = special::regularized_gamma_p(half, 0.5 * x) - p;
        let density = ((half - 1.0) * x.ln() - 0.5 * x - log_norm).exp();
        if density <= 0.0 || !density.is_finite() {
            break;
        }
        let mut next = x - f / density;
        if next <= 0.0 {
            next = 0.5 * x;
        }
        let done = (next - x).abs() <= 1e-14 * x;
        x = next;
        if done {
            break;
        }
    }
    Ok(x)
}

/// Reference distribution for Q-Q plots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QqDistribution {
    Normal,
    ChiSquared(f64),
}

/// `(theoretical quantile, ordered sample value)` pairs with plotting
/// positions `(i - 1/2) / n`.
pub fn qq_points(sample: &[f64], dist: QqDistribution) -> Result<Vec<(f64, f64)>> {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let p = (i as f64 + 0.5) / n;
            let q = match dist {
                QqDistribution::Normal => normal_quantile(p)?,
                QqDistribution::ChiSquared(df) => chi2_quantile(df, p)?,
            };
            Ok((q, v))
        })
        .collect()
}
