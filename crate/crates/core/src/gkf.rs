//! Closed-form expected perimeters of Gaussian excursion sets.
//!
//! For a centred, unit-variance, stationary isotropic Gaussian field `Y`
//! with second spectral moment `λ₂`, the gradient at a point is independent
//! of the value there and `‖∇Y‖` is Rayleigh with scale `√λ₂`. The expected
//! boundary length in a window of area `|T|` is therefore
//!
//! ```text
//! E[P(u)] = |T| · φ(u) · E‖∇Y‖ = |T| · φ(u) · √(π λ₂ / 2).
//! ```
//!
//! For the affine field `X(s) = Y(As)` the same quantity is scaled by
//! `ellipse(σ₁, σ₂) / 2π`, where `σ₁, σ₂` are the singular values of `A`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::special;

/// Unit-variance, unit-range Matérn covariance
/// `r(h) = 2^{1-ν}/Γ(ν) · (√(2ν) h)^ν · K_ν(√(2ν) h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaternModel {
    nu: f64,
}

impl MaternModel {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::invalid(format!("Matérn smoothness must be positive, got {nu}")));
        }
        Ok(Self { nu })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// `r(h)` for `h ≥ 0`.
    pub fn covariance(&self, h: f64) -> f64 {
        let z = (2.0 * self.nu).sqrt() * h;
        if z < 1e-12 {
            return 1.0;
        }
        if let Some(n) = self.half_integer_index() {
            return half_integer_matern(n, z);
        }
        let log_pref = (1.0 - self.nu) * 2f64.ln() - special::ln_gamma(self.nu) + self.nu * z.ln();
        (log_pref.exp() * special::bessel_k(self.nu, z)).min(1.0)
    }

    /// `Some(n)` when `ν = n + 1/2` with `n ≤ 20`.
    fn half_integer_index(&self) -> Option<u32> {
        let n = self.nu - 0.5;
        ((0.0..=20.0).contains(&n) && n.fract() == 0.0).then_some(n as u32)
    }
}

impl Default for MaternModel {
    fn default() -> Self {
        Self { nu: 2.5 }
    }
}

/// `e^{-z} · n!/(2n)! · Σ_k (n+k)!/(k!(n-k)!) (2z)^{n-k}`, the Matérn
/// correlation at `ν = n + 1/2`.
fn half_integer_matern(n: u32, z: f64) -> f64 {
    let factorial = |k: u32| (1..=k).map(f64::from).product::<f64>();
    let scale = factorial(n) / factorial(2 * n);
    let poly: f64 =
        (0..=n).map(|k| factorial(n + k) / (factorial(k) * factorial(n - k)) * (2.0 * z).powi((n - k) as i32)).sum();
    scale * poly * (-z).exp()
}

/// Matérn correlation at distance `h`; errors on negative distances.
pub fn matern_cov(model: &MaternModel, h: f64) -> Result<f64> {
    if h < 0.0 || h.is_nan() {
        return Err(Error::invalid(format!("distance must be nonnegative, got {h}")));
    }
    Ok(model.covariance(h))
}

/// Second spectral moment `λ₂ = -r''(0)`, the variance of each partial
/// derivative of a unit-variance field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralMoment(f64);

impl SpectralMoment {
    pub fn new(lambda2: f64) -> Result<Self> {
        if !(lambda2.is_finite() && lambda2 > 0.0) {
            return Err(Error::invalid(format!("second spectral moment must be positive, got {lambda2}")));
        }
        Ok(Self(lambda2))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// `λ₂ = ν / (ν - 1)` for the `√(2ν)`-scaled Matérn model; requires `ν > 1`.
pub fn second_spectral_moment(model: &MaternModel) -> Result<SpectralMoment> {
    if model.nu <= 1.0 {
        return Err(Error::NonSmoothModel { nu: model.nu });
    }
    SpectralMoment::new(model.nu / (model.nu - 1.0))
}

/// `|T| · φ(u) · √(π λ₂ / 2)`.
pub fn expected_perimeter_isotropic(area: f64, u: f64, lambda2: SpectralMoment) -> Result<f64> {
    if !(area.is_finite() && area > 0.0) {
        return Err(Error::invalid(format!("area must be positive, got {area}")));
    }
    Ok(area * special::normal_pdf(u) * (PI * lambda2.value() / 2.0).sqrt())
}

/// Perimeter of the ellipse with semi-axes `a` and `b`, via the
/// arithmetic-geometric mean (Gauss–Kummer form of `4 max(a,b) E(e)`).
pub fn ellipse_perimeter(a: f64, b: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
        return Err(Error::invalid(format!("semi-axes must be positive, got ({a}, {b})")));
    }
    let (mut x, mut y) = if a >= b { (a, b) } else { (b, a) };
    let big = x;
    // P = 2π (a² - Σ 2^{n-1} c_n²) / AGM(a, b), with c_0² = a² - b².
    let mut correction = 0.5 * (big * big - y * y);
    let mut weight = 1.0;
    for _ in 0..64 {
        let c = 0.5 * (x - y);
        if c.abs() <= 1e-16 * x {
            break;
        }
        let (nx, ny) = (0.5 * (x + y), (x * y).sqrt());
        x = nx;
        y = ny;
        correction += weight * c * c;
        weight *= 2.0;
    }
    let agm = 0.5 * (x + y);
    Ok(2.0 * PI * (big * big - correction) / agm)
}

/// Ellipse-scaled isotropic expectation for the affine field with axis
/// scalings `σ₁ ≥ σ₂ > 0`.
pub fn expected_perimeter_affine(area: f64, u: f64, lambda2: SpectralMoment, sigma1: f64, sigma2: f64) -> Result<f64> {
    if !(sigma1 >= sigma2 && sigma2 > 0.0) {
        return Err(Error::invalid(format!("need sigma1 ≥ sigma2 > 0, got ({sigma1}, {sigma2})")));
    }
    let factor = ellipse_perimeter(sigma1, sigma2)? / (2.0 * PI);
    Ok(factor * expected_perimeter_isotropic(area, u, lambda2)?)
}
