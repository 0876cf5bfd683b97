//! Weighted sums of independent Inverse-Gamma variables: moment fitting,
//! characteristic functions, CDF inversion and sampling.
//!
//! The per-AP unknown interference power is modelled as `IG(α, β)` with
//! density `β^α / Γ(α) · x^{−α−1} e^{−β/x}`. The total seen by the CPU is
//! `Σ_l w_l X_l` with `w_l = |a_l|²`.

mod bessel;
mod inversion;
pub mod quadrature;

pub use bessel::{bessel_k, ln_bessel_k, ln_bessel_k_with, BesselQuadrature};
pub use inversion::{cdf_inverse, gil_pelaez_cdf, CdfValues, CharGrid, QuadratureSpec};

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape/scale pair from a two-moment match:
/// `α = μ²/v + 2`, `β = (μ²/v + 1)·μ`.
pub fn fit_inverse_gamma(mean: f64, variance: f64) -> Result<(f64, f64)> {
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::InvalidArgument { name: "mean", value: mean });
    }
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidArgument { name: "variance", value: variance });
    }
    let r = mean * mean / variance;
    Ok((r + 2.0, (r + 1.0) * mean))
}

/// One weighted Inverse-Gamma term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IgComponent {
    pub alpha: f64,
    pub beta: f64,
    pub weight: f64,
}

impl IgComponent {
    pub fn new(alpha: f64, beta: f64, weight: f64) -> Result<Self> {
        if !(alpha > 2.0) || !alpha.is_finite() {
            return Err(Error::InvalidArgument { name: "alpha", value: alpha });
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidArgument { name: "beta", value: beta });
        }
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::InvalidArgument { name: "weight", value: weight });
        }
        Ok(Self { alpha, beta, weight })
    }

    /// Fits `(α, β)` to a sample mean and variance.
    pub fn from_moments(mean: f64, variance: f64, weight: f64) -> Result<Self> {
        let (alpha, beta) = fit_inverse_gamma(mean, variance)?;
        Self::new(alpha, beta, weight)
    }

    /// Mean of the unweighted variable, `β/(α−1)`.
    pub fn mean(&self) -> f64 {
        self.beta / (self.alpha - 1.0)
    }

    /// Variance of the unweighted variable, `β²/((α−1)²(α−2))`.
    pub fn variance(&self) -> f64 {
        let m = self.alpha - 1.0;
        self.beta * self.beta / (m * m * (self.alpha - 2.0))
    }

    /// `ln E[e^{jtX}]` of the unweighted variable.
    ///
    /// `φ(t) = 2(−jβt)^{α/2} K_α(2(−jβt)^{1/2}) / Γ(α)` on the principal
    /// branch, `(−j)^{1/2} = e^{−jπ/4}`.
    pub fn ln_char(&self, t: f64) -> Result<Complex64> {
        if t == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if t < 0.0 {
            return Ok(self.ln_char(-t)?.conj());
        }
        let bt = self.beta * t;
        // ln(−jβt) = ln(βt) − jπ/2
        let ln_arg = Complex64::new(bt.ln(), -core::f64::consts::FRAC_PI_2);
        let z = Complex64::from_polar(2.0 * bt.sqrt(), -core::f64::consts::FRAC_PI_4);
        let ln_k = ln_bessel_k(self.alpha, z)?;
        Ok(ln_arg * (0.5 * self.alpha) + ln_k + core::f64::consts::LN_2 - libm::lgamma(self.alpha))
    }

    /// Characteristic function of the unweighted variable.
    pub fn char(&self, t: f64) -> Result<Complex64> {
        Ok(self.ln_char(t)?.exp())
    }

    /// One draw of the weighted variable `w·β/G`, `G ~ Gamma(α, 1)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.weight * sample_ig(self.alpha, self.beta, rng)
    }
}

/// Characteristic function `E[e^{jtX}]` of `X ~ IG(α, β)`.
pub fn ig_char(component: &IgComponent, t: f64) -> Result<Complex64> {
    component.char(t)
}

/// Draws `X ~ IG(α, β)` as `β/G` with `G ~ Gamma(α, 1)`.
pub fn sample_ig<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> f64 {
    let gamma = Gamma::new(alpha, 1.0).expect("shape validated by IgComponent");
    beta / gamma.sample(rng)
}

/// `Σ_l w_l X_l` with independent `X_l ~ IG(α_l, β_l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgMixture {
    pub components: Vec<IgComponent>,
}

impl IgMixture {
    pub fn new(components: Vec<IgComponent>) -> Result<Self> {
        if !components.iter().any(|c| c.weight > 0.0) {
            return Err(Error::InvalidArgument { name: "total weight", value: 0.0 });
        }
        Ok(Self { components })
    }

    pub fn single(component: IgComponent) -> Result<Self> {
        Self::new(alloc::vec![component])
    }

    /// `E[Σ w_l X_l]`.
    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.mean()).sum()
    }

    pub fn variance(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.weight * c.variance()).sum()
    }

    /// `ln φ(t) = Σ_l ln φ_l(w_l t)`; zero-weight terms contribute nothing.
    pub fn ln_char(&self, t: f64) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.components.iter().filter(|c| c.weight > 0.0) {
            acc += c.ln_char(c.weight * t)?;
        }
        Ok(acc)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.components.iter().filter(|c| c.weight > 0.0).map(|c| c.sample(rng)).sum()
    }
}

/// Characteristic function of the weighted sum, `Π_l φ_l(w_l t)`.
pub fn mixture_char(mixture: &IgMixture, t: f64) -> Result<Complex64> {
    Ok(mixture.ln_char(t)?.exp())
}
