//! Gaussian random fields on the grid by 2D circulant embedding.
//!
//! The covariance `r(‖A h‖)` is laid out on an `N × N` torus with
//! `N = 2K`, `K = next_pow2(M)`, in the minimal-image convention. Its 2D DFT
//! gives the torus eigenvalues `λ_k`; a field is
//! `Re FFT(√λ_k / N · Z_k)` cropped to `M × M`, with `Z_k` iid complex
//! normal. If the spectrum has an eigenvalue below `-1e-8 · max` the torus
//! is doubled (up to `2^30` points in total).

use std::f64::consts::PI;
use std::sync::Arc;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::gkf::MaternModel;
use crate::grid::{GridSpec, ScalarField};

/// Relative threshold below which a negative torus eigenvalue is fatal.
const NEGATIVE_EIGENVALUE_TOLERANCE: f64 = 1e-8;
const MAX_TORUS_POINTS: usize = 1 << 30;

/// `A = diag(σ₁, σ₂) · R(θ)` with `R(θ) = [[cos θ, sin θ], [-sin θ, cos θ]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisotropyTransform {
    sigma1: f64,
    sigma2: f64,
    theta: f64,
}

impl AnisotropyTransform {
    pub fn new(sigma1: f64, sigma2: f64, theta: f64) -> Result<Self> {
        if !(sigma1.is_finite() && sigma2 > 0.0 && sigma1 >= sigma2) {
            return Err(Error::invalid(format!("need sigma1 ≥ sigma2 > 0, got ({sigma1}, {sigma2})")));
        }
        if !(0.0..PI).contains(&theta) {
            return Err(Error::invalid(format!("theta must lie in [0, π), got {theta}")));
        }
        Ok(Self { sigma1, sigma2, theta })
    }

    pub fn isotropic() -> Self {
        Self { sigma1: 1.0, sigma2: 1.0, theta: 0.0 }
    }

    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.theta.sin_cos();
        [[self.sigma1 * c, self.sigma1 * s], [-self.sigma2 * s, self.sigma2 * c]]
    }

    pub fn apply(&self, h: [f64; 2]) -> [f64; 2] {
        let a = self.matrix();
        [a[0][0] * h[0] + a[0][1] * h[1], a[1][0] * h[0] + a[1][1] * h[1]]
    }
}

impl Default for AnisotropyTransform {
    fn default() -> Self {
        Self::isotropic()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub spec: GridSpec,
    pub model: MaternModel,
    pub transform: AnisotropyTransform,
    pub seed: u64,
    pub replication: u64,
}

/// `r(‖A h‖)`.
pub fn transformed_cov(model: &MaternModel, transform: &AnisotropyTransform, h: [f64; 2]) -> f64 {
    let [x, y] = transform.apply(h);
    model.covariance(x.hypot(y))
}

/// Outcome of building the embedding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingReport {
    /// Torus side `N`.
    pub size: usize,
    /// `N / next_pow2(M)`.
    pub factor: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Small negative eigenvalues set to zero.
    pub clamped: usize,
}

/// Reusable sampler: the root spectrum is computed once per configuration.
pub struct FieldSampler {
    spec: GridSpec,
    n: usize,
    root_spectrum: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    report: EmbeddingReport,
}

impl std::fmt::Debug for FieldSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldSampler").field("spec", &self.spec).field("report", &self.report).finish()
    }
}

impl FieldSampler {
    pub fn new(spec: GridSpec, model: MaternModel, transform: AnisotropyTransform) -> Result<Self> {
        let base = spec.size().next_power_of_two();
        let mut planner = FftPlanner::new();
        let mut factor = 2;
        loop {
            let n = factor * base;
            let fft = planner.plan_fft_forward(n);
            let mut eig = torus_covariance(&spec, &model, &transform, n);
            fft2(&fft, &mut eig, n);
            let (min, max) =
                eig.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| (lo.min(z.re), hi.max(z.re)));
            if min >= -NEGATIVE_EIGENVALUE_TOLERANCE * max {
                let clamped = eig.iter().filter(|z| z.re < 0.0).count();
                if clamped > 0 {
                    log::warn!(
                        "clamped {clamped} small negative eigenvalues (min {min:e}, max {max:e}) on a {n}x{n} torus"
                    );
                }
                if factor > 2 {
                    log::info!("circulant embedding needed a {n}x{n} torus (factor {factor})");
                }
                let scale = 1.0 / n as f64;
                let root_spectrum = eig.iter().map(|z| z.re.max(0.0).sqrt() * scale).collect();
                let report = EmbeddingReport { size: n, factor, min_eigenvalue: min, max_eigenvalue: max, clamped };
                return Ok(Self { spec, n, root_spectrum, fft, report });
            }
            let next = 2 * n;
            if next.saturating_mul(next) > MAX_TORUS_POINTS {
                return Err(Error::EmbeddingFailure { size: n, min_eigenvalue: min, max_eigenvalue: max });
            }
            log::debug!("embedding on {n}x{n} not nonnegative (min {min:e}, max {max:e}); doubling");
            factor *= 2;
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn report(&self) -> &EmbeddingReport {
        &self.report
    }

    /// Realization number `replication` of the stream `seed`.
    pub fn sample(&self, seed: u64, replication: u64) -> ScalarField {
        let mut rng = stream_rng(seed, replication);
        self.sample_with(&mut rng)
    }

    pub fn sample_with<R: RngCore>(&self, rng: &mut R) -> ScalarField {
        let n = self.n;
        let m = self.spec.size();
        let mut buf: Vec<Complex64> = self
            .root_spectrum
            .iter()
            .map(|&s| {
                let (a, b) = box_muller(rng);
                Complex64::new(s * a, s * b)
            })
            .collect();
        let mut scratch = vec![Complex64::default(); self.fft.get_inplace_scratch_len()];
        // rows first (all of them), then only the M columns that survive the crop
        self.fft.process_with_scratch(&mut buf, &mut scratch);
        let mut column = vec![Complex64::default(); n];
        let mut values = vec![0.0; m * m];
        for c in 0..m {
            for (r, slot) in column.iter_mut().enumerate() {
                *slot = buf[r * n + c];
            }
            self.fft.process_with_scratch(&mut column, &mut scratch);
            for r in 0..m {
                values[r * m + c] = column[r].re;
            }
        }
        ScalarField::from_vec(self.spec, values).expect("sampled values are finite")
    }
}

/// One realization for `config`. Experiments sampling many replications
/// should build a [`FieldSampler`] once instead.
pub fn sample_field(config: &SimConfig) -> Result<ScalarField> {
    let sampler = FieldSampler::new(config.spec, config.model, config.transform)?;
    Ok(sampler.sample(config.seed, config.replication))
}

/// Independent generator for replication `replication` of stream `seed`.
pub fn stream_rng(seed: u64, replication: u64) -> Xoshiro256PlusPlus {
    let mixed = splitmix64(seed ^ splitmix64(replication.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    Xoshiro256PlusPlus::seed_from_u64(mixed)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Two independent standard normals.
pub(crate) fn box_muller<R: RngCore>(rng: &mut R) -> (f64, f64) {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    // u1 ∈ (0, 1], u2 ∈ [0, 1)
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * SCALE;
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * PI * u2).sin_cos();
    (r * c, r * s)
}

/// Covariance on the `n × n` torus; entry `(row, col)` holds lag
/// `(col, row)` in pixels, minimal image. Nyquist lags average both images
/// so the array stays even and its spectrum real.
fn torus_covariance(spec: &GridSpec, model: &MaternModel, transform: &AnisotropyTransform, n: usize) -> Vec<Complex64> {
    let eps = spec.epsilon();
    let half = n / 2;
    let images = |k: usize| -> ([f64; 2], usize) {
        if k < half {
            ([k as f64, 0.0], 1)
        } else if k > half {
            ([k as f64 - n as f64, 0.0], 1)
        } else {
            ([half as f64, -(half as f64)], 2)
        }
    };
    let mut out = Vec::with_capacity(n * n);
    for row in 0..n {
        let (ys, ny) = images(row);
        for col in 0..n {
            let (xs, nx) = images(col);
            let mut acc = 0.0;
            for &x in &xs[..nx] {
                for &y in &ys[..ny] {
                    acc += transformed_cov(model, transform, [x * eps, y * eps]);
                }
            }
            out.push(Complex64::new(acc / (nx * ny) as f64, 0.0));
        }
    }
    out
}

/// In-place 2D forward DFT of a row-major `n × n` array.
fn fft2(fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64], n: usize) {
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(data, &mut scratch);
    let mut column = vec![Complex64::default(); n];
    for c in 0..n {
        for (r, slot) in column.iter_mut().enumerate() {
            *slot = data[r * n + c];
        }
        fft.process_with_scratch(&mut column, &mut scratch);
        for (r, v) in column.iter().enumerate() {
            data[r * n + c] = *v;
        }
    }
}

/// Mean of `((X(s+εe₁) - X(s-εe₁)) / 2ε)²` over interior sites and fields,
/// an estimate of `λ₂` along the first axis.
pub fn empirical_lambda2(fields: &[ScalarField]) -> Result<f64> {
    if fields.is_empty() {
        return Err(Error::invalid("need at least one field"));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for field in fields {
        let spec = field.spec();
        let m = spec.size();
        if m < 3 {
            return Err(Error::invalid(format!("need M ≥ 3, got {m}")));
        }
        let scale = 1.0 / (2.0 * spec.epsilon());
        for j in 1..m - 1 {
            for i in 1..m - 1 {
                let d = (field.get(i + 1, j) - field.get(i - 1, j)) * scale;
                sum += d * d;
            }
        }
        count += (m - 2) * (m - 2);
    }
    Ok(sum / count as f64)
}
