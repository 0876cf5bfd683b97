//! Tanh-sinh (double-exponential) quadrature on finite intervals.

#[allow(unused_imports)]
use num_traits::Float;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Abscissa cutoff in the transformed variable; beyond it the weights are
/// below double-precision resolution.
const T_MAX: f64 = 3.5;

/// Level-refined tanh-sinh rule. Each level halves the step and reuses all
/// previous nodes.
#[derive(Debug, Clone, Copy)]
pub struct TanhSinh {
    pub rel_tol: f64,
    pub min_level: u32,
    pub max_level: u32,
}

impl Default for TanhSinh {
    fn default() -> Self {
        Self { rel_tol: 1e-12, min_level: 3, max_level: 10 }
    }
}

impl TanhSinh {
    /// Integrates `f` over `[a, b]`, returning the estimate and the last
    /// level-to-level change.
    pub fn integrate<F>(&self, a: f64, b: f64, mut f: F) -> Result<(Complex64, f64)>
    where
        F: FnMut(f64) -> Complex64,
    {
        if a == b {
            return Ok((Complex64::new(0.0, 0.0), 0.0));
        }
        let half = 0.5 * (b - a);
        let mut eval = |t: f64| -> Complex64 {
            let s = core::f64::consts::FRAC_PI_2 * t.sinh();
            let cs = s.cosh();
            let w = core::f64::consts::FRAC_PI_2 * t.cosh() / (cs * cs);
            // distance to the nearest endpoint, without cancellation
            let e = (-2.0 * s.abs()).exp();
            let q = 2.0 * e / (1.0 + e);
            let x = if s >= 0.0 { b - half * q } else { a + half * q };
            let x = x.clamp(a.min(b), a.max(b));
            f(x) * w
        };

        let mut h = 1.0;
        let mut sum = eval(0.0);
        let mut k = 1;
        while (k as f64) * h <= T_MAX {
            let t = k as f64 * h;
            sum += eval(t) + eval(-t);
            k += 1;
        }
        let mut estimate = sum * h * half;
        let mut change = f64::INFINITY;
        for level in 1..=self.max_level {
            h *= 0.5;
            let mut k = 1;
            while (k as f64) * h <= T_MAX {
                let t = k as f64 * h;
                sum += eval(t) + eval(-t);
                k += 2;
            }
            let next = sum * h * half;
            change = (next - estimate).norm();
            estimate = next;
            let scale = estimate.norm();
            if level >= self.min_level && change <= self.rel_tol * scale {
                return Ok((estimate, change));
            }
        }
        if change <= 1e3 * self.rel_tol * estimate.norm() {
            return Ok((estimate, change));
        }
        Err(Error::NoConvergence {
            what: "tanh-sinh quadrature",
            detail: alloc::format!(
                "level {} change {:e} vs estimate {:e}",
                self.max_level,
                change,
                estimate.norm()
            ),
        })
    }
}
