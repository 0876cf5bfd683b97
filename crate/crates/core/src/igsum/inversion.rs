//! Gil-Pelaez inversion of a mixture characteristic function.
//!
//! `F(x) = ½ − (1/π) ∫₀^∞ Im(e^{−jtx} φ(t)) / t dt`, evaluated by a midpoint
//! Riemann sum on `(0, t_max]`. The mixture is internally rescaled to unit
//! mean, so the truncation criterion and grid are dimensionless.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::IgMixture;
use crate::error::{Error, Result};

/// Riemann-sum settings. `t_max = None` selects the truncation adaptively.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    pub n_points: usize,
    pub t_max: Option<f64>,
    /// Truncate where `|φ(t)| / t` (unit-mean scale) drops below this.
    pub decay_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { n_points: 1 << 16, t_max: None, decay_tol: 1e-10 }
    }
}

/// CDF values after clamping to `[0, 1]` and a monotone clip.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfValues {
    pub values: Vec<f64>,
    /// Largest change made by the clamp/clip, for diagnostics.
    pub max_adjustment: f64,
}

/// Precomputed `φ(t_k)/t_k` on the midpoint nodes `t_k = (k+½)Δt`.
#[derive(Debug, Clone)]
pub struct CharGrid {
    /// Unit of the normalized variable (the mixture mean).
    scale: f64,
    dt: f64,
    t_max: f64,
    psi: Vec<Complex64>,
}

/// Steps between exact re-seeding of the phasor recurrence.
const RESEED: usize = 256;

impl CharGrid {
    pub fn new(mixture: &IgMixture, spec: &QuadratureSpec) -> Result<Self> {
        if spec.n_points < 1 << 10 {
            return Err(Error::InvalidArgument { name: "n_points", value: spec.n_points as f64 });
        }
        let scale = mixture.mean();
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidArgument { name: "mixture mean", value: scale });
        }
        let phi = |tau: f64| mixture.ln_char(tau / scale).map(|l| l.exp());
        let t_max = match spec.t_max {
            Some(t) if t > 0.0 => t * scale,
            Some(t) => return Err(Error::InvalidArgument { name: "t_max", value: t }),
            None => truncation_point(&phi, spec.decay_tol)?,
        };
        let n = spec.n_points;
        let dt = t_max / n as f64;
        let mut psi = Vec::with_capacity(n);
        for k in 0..n {
            let t = (k as f64 + 0.5) * dt;
            psi.push(phi(t)? / t);
        }
        Ok(Self { scale, dt, t_max, psi })
    }

    /// Truncation point in the original (unscaled) units of `t`.
    pub fn t_max(&self) -> f64 {
        self.t_max / self.scale
    }

    pub fn n_points(&self) -> usize {
        self.psi.len()
    }

    /// Grid spacing in the original units of `t`.
    pub fn dt(&self) -> f64 {
        self.dt / self.scale
    }

    /// Mean of the inverted distribution.
    pub fn mean(&self) -> f64 {
        self.scale
    }

    /// `φ(t_k)/t_k` at the normalized nodes; exposed for batch evaluators.
    pub fn weights(&self) -> &[Complex64] {
        &self.psi
    }

    /// Unclamped Riemann-sum value of `F(x)`.
    pub fn cdf_raw(&self, x: f64) -> f64 {
        let y = x / self.scale;
        let step = Complex64::from_polar(1.0, -self.dt * y);
        let mut acc = 0.0;
        for (c, chunk) in self.psi.chunks(RESEED).enumerate() {
            let k0 = (c * RESEED) as f64;
            let mut e = Complex64::from_polar(1.0, -(k0 + 0.5) * self.dt * y);
            let mut part = 0.0;
            for p in chunk {
                part += e.re * p.im + e.im * p.re;
                e *= step;
            }
            acc += part;
        }
        0.5 - self.dt / core::f64::consts::PI * acc
    }

    /// Largest `x` at which the Riemann sum is used directly. The sum is
    /// antiperiodic in `x` with period `2π/Δt`, so far out it aliases back
    /// onto the body of the distribution.
    pub fn alias_limit(&self) -> f64 {
        0.5 * core::f64::consts::PI / self.dt * self.scale
    }

    /// Riemann sum up to the alias limit; beyond it the value at the limit,
    /// raised to the Markov bound `1 − mean/x` where that is larger.
    fn cdf_guarded(&self, x: f64) -> f64 {
        let lim = self.alias_limit();
        if x <= lim {
            self.cdf_raw(x)
        } else {
            self.cdf_raw(lim).max(1.0 - self.scale / x)
        }
    }

    /// `F(x)` clamped to `[0, 1]`; zero for `x ≤ 0`.
    pub fn cdf_at(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.cdf_guarded(x).clamp(0.0, 1.0)
        }
    }

    /// `F` on an ascending grid of positive abscissae.
    pub fn cdf(&self, xs: &[f64]) -> Result<CdfValues> {
        let mut prev = 0.0;
        for &x in xs {
            if !(x > prev) || !x.is_finite() {
                return Err(Error::InvalidArgument { name: "x grid", value: x });
            }
            prev = x;
        }
        let raw: Vec<f64> = xs.iter().map(|&x| self.cdf_guarded(x)).collect();
        Ok(monotone_clip(raw))
    }

    /// `F^{-1}(p)` by bisection to relative width `1e−6`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument { name: "p", value: p });
        }
        let lo0 = 1e-6 * self.scale;
        let mut lo = lo0;
        let mut hi = self.scale;
        if self.cdf_guarded(lo) >= p {
            return Err(Error::BracketFailure { p, lo, hi });
        }
        let mut doublings = 0;
        while self.cdf_guarded(hi) <= p {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > 200 {
                return Err(Error::BracketFailure { p, lo: lo0, hi });
            }
        }
        while hi - lo > 1e-6 * hi {
            let mid = 0.5 * (lo + hi);
            if self.cdf_guarded(mid) > p {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Smallest (to bisection accuracy) `τ` with `|φ(τ)|/τ < tol`, unit-mean scale.
fn truncation_point(phi: &impl Fn(f64) -> Result<Complex64>, tol: f64) -> Result<f64> {
    let crit = |t: f64| phi(t).map(|p| p.norm() / t);
    let mut hi = 1.0;
    let mut m = crit(hi)?;
    let mut doublings = 0;
    while m >= tol {
        hi *= 2.0;
        m = crit(hi)?;
        doublings += 1;
        if doublings > 200 || !hi.is_finite() {
            return Err(Error::TruncationSearch { t_reached: hi, magnitude: m });
        }
    }
    let mut lo = 0.5 * hi;
    if doublings == 0 {
        return Ok(hi);
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if crit(mid)? < tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn monotone_clip(raw: Vec<f64>) -> CdfValues {
    let mut values = Vec::with_capacity(raw.len());
    let mut max_adjustment = 0.0f64;
    let mut running = 0.0f64;
    for r in raw {
        let v = r.clamp(0.0, 1.0).max(running);
        max_adjustment = max_adjustment.max((v - r).abs());
        running = v;
        values.push(v);
    }
    CdfValues { values, max_adjustment }
}

/// `F(x)` of the mixture on an ascending positive grid.
pub fn gil_pelaez_cdf(mixture: &IgMixture, xs: &[f64], spec: &QuadratureSpec) -> Result<CdfValues> {
    CharGrid::new(mixture, spec)?.cdf(xs)
}

/// `F^{-1}(p)` of the mixture.
pub fn cdf_inverse(mixture: &IgMixture, p: f64, spec: &QuadratureSpec) -> Result<f64> {
    CharGrid::new(mixture, spec)?.quantile(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::igsum::IgComponent;

    #[test]
    fn clip_clamps_and_orders() {
        let c = monotone_clip(alloc::vec![-1e-6, 0.2, 0.19, 1.0 + 1e-7]);
        assert_eq!(c.values, alloc::vec![0.0, 0.2, 0.2, 1.0]);
        assert!((c.max_adjustment - 0.01).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids_and_probabilities() {
        let m = IgMixture::single(IgComponent::new(3.0, 2.0, 1.0).unwrap()).unwrap();
        let spec = QuadratureSpec { n_points: 1 << 12, ..Default::default() };
        let g = CharGrid::new(&m, &spec).unwrap();
        assert!(g.cdf(&[1.0, 0.5]).is_err());
        assert!(g.cdf(&[0.0, 1.0]).is_err());
        assert!(g.quantile(0.0).is_err());
        assert!(g.quantile(1.0).is_err());
        let small = QuadratureSpec { n_points: 512, ..Default::default() };
        assert!(CharGrid::new(&m, &small).is_err());
    }

    #[test]
    fn integrand_is_real() {
        let c = IgComponent::new(3.3, 0.8, 1.0).unwrap();
        for &(t, x) in &[(0.1, 0.5), (2.0, 1.3), (40.0, 0.01)] {
            let a = Complex64::from_polar(1.0, -t * x) * c.char(t).unwrap();
            let b = Complex64::from_polar(1.0, t * x) * c.char(-t).unwrap();
            let v = (a - b) / Complex64::new(0.0, 2.0 * t);
            assert!(v.im.abs() <= 1e-12, "{v}");
        }
    }
}
