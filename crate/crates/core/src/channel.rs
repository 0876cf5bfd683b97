//! Spatial correlation, correlated Rayleigh sampling, pilot assignment and
//! MMSE-type channel estimation from known-UE statistics.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_sqrt, matvec_into, CMatrix, CVector, ZERO};
use crate::scenario::Point;

/// Negative-eigenvalue tolerance (relative to `tr(R)/N`) for factorisation.
pub const PSD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "model", deny_unknown_fields)]
pub enum CorrelationModel {
    /// Gaussian local scattering around the AP→UE bearing on a
    /// half-wavelength uniform linear array.
    GaussianLocalScattering { asd_deg: f64 },
    Uncorrelated,
}

impl Default for CorrelationModel {
    fn default() -> Self {
        CorrelationModel::GaussianLocalScattering { asd_deg: 15.0 }
    }
}

/// Half-wavelength ULA steering vector `[1, e^{jπ sinθ}, …]`.
pub fn steering_vector(theta: f64, n: usize) -> CVector {
    let base = Complex64::from_polar(1.0, PI * libm::sin(theta));
    let mut acc = Complex64::new(1.0, 0.0);
    CVector::from_fn(n, |_, _| {
        let v = acc;
        acc *= base;
        v
    })
}

/// `R` for the UE at `ue` seen by the AP at `ap`, scaled so `tr(R)/N = beta`.
pub fn correlation_matrix(ap: &Point, ue: &Point, beta: f64, n: usize, model: CorrelationModel) -> CMatrix {
    match model {
        CorrelationModel::Uncorrelated => CMatrix::identity(n, n) * Complex64::new(beta, 0.0),
        CorrelationModel::GaussianLocalScattering { asd_deg } => {
            let theta = libm::atan2(ue[1] - ap[1], ue[0] - ap[0]);
            let sigma = asd_deg.to_radians();
            // first column r[d] = E{e^{jπ d sin(θ+δ)}}, δ ~ N(0, σ²)
            let mut first = vec![ZERO; n];
            if sigma == 0.0 || n == 1 {
                let a = steering_vector(theta, n);
                first.copy_from_slice(a.as_slice());
            } else {
                const HALF_SPAN: f64 = 8.0;
                const STEP: f64 = 0.2;
                let nodes = libm::round(2.0 * HALF_SPAN / STEP) as i32;
                let mut total = 0.0;
                for s in 0..=nodes {
                    let u = -HALF_SPAN + s as f64 * STEP;
                    let w = libm::exp(-0.5 * u * u) * if s == 0 || s == nodes { 0.5 } else { 1.0 };
                    total += w;
                    let base = Complex64::from_polar(1.0, PI * libm::sin(theta + sigma * u));
                    let mut acc = Complex64::new(w, 0.0);
                    for r in first.iter_mut() {
                        *r += acc;
                        acc *= base;
                    }
                }
                first.iter_mut().for_each(|r| *r /= total);
            }
            let scale = Complex64::new(beta, 0.0);
            CMatrix::from_fn(n, n, |i, j| {
                if i >= j {
                    first[i - j] * scale
                } else {
                    first[j - i].conj() * scale
                }
            })
        }
    }
}

/// `n` i.i.d. `CN(0, 1)` entries.
pub fn complex_gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    CVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
    })
}

/// Draws `h ~ CN(0, R)` through the Hermitian square root.
pub fn sample_channel<R: Rng + ?Sized>(r: &CMatrix, rng: &mut R) -> Result<CVector> {
    let root = hermitian_sqrt(r, PSD_TOLERANCE, "spatial correlation")?;
    Ok(sample_with_root(&root, rng))
}

/// Draws `R^{1/2} w` given a precomputed square root.
pub fn sample_with_root<R: Rng + ?Sized>(root: &CMatrix, rng: &mut R) -> CVector {
    let w = complex_gaussian(root.nrows(), rng);
    let mut h = CVector::zeros(root.nrows());
    matvec_into(root, w.as_slice(), h.as_mut_slice());
    h
}

/// Pilot indices (0-based) for `known` known UEs followed by `unknown`
/// unknown UEs.
///
/// `strength[k]` is UE `k`'s received pilot power `p_k β_{k,l*}` at its
/// strongest serving AP `l*`, and `at[k][j]` its power `p_k β_kj` at serving
/// AP `j`. The strongest `τ_p` known UEs get distinct pilots; every other
/// known UE joins the pilot with the least accumulated power at its own
/// strongest AP. Unknown UEs draw pilots uniformly.
pub fn assign_pilots<R: Rng + ?Sized>(
    at: &[Vec<f64>],
    known: usize,
    unknown: usize,
    tau_p: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if tau_p == 0 {
        return Err(Error::InvalidArgument { name: "tau_p", value: 0.0 });
    }
    if at.len() < known {
        return Err(Error::InvalidArgument { name: "known UE gains", value: at.len() as f64 });
    }
    let strongest = |k: usize| -> (usize, f64) {
        at[k].iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |b, (j, v)| if v > b.1 { (j, v) } else { b })
    };
    let mut order: Vec<usize> = (0..known).collect();
    order.sort_by(|&a, &b| strongest(b).1.total_cmp(&strongest(a).1).then(a.cmp(&b)));
    let mut pilot_of = vec![0usize; known + unknown];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); tau_p];
    for (rank, &k) in order.iter().enumerate() {
        let t = if rank < tau_p {
            rank
        } else {
            let (l_star, _) = strongest(k);
            let load = |t: usize| members[t].iter().map(|&i| at[i][l_star]).sum::<f64>();
            (0..tau_p).min_by(|&a, &b| load(a).total_cmp(&load(b)).then(a.cmp(&b))).unwrap_or(0)
        };
        pilot_of[k] = t;
        members[t].push(k);
    }
    let pilots: Vec<usize> = (0..tau_p).collect();
    for p in pilot_of[known..].iter_mut() {
        *p = *pilots.choose(rng).unwrap_or(&0);
    }
    Ok(pilot_of)
}

/// `y = Σ √(τ_p p_i) h_i + n`, noise `CN(0, σ² I)`.
pub fn received_pilot<R: Rng + ?Sized>(
    contributions: &[(f64, &CVector)],
    n: usize,
    tau_p: usize,
    noise_power: f64,
    rng: &mut R,
) -> CVector {
    let mut y = complex_gaussian(n, rng) * Complex64::new(noise_power.sqrt(), 0.0);
    for &(p, h) in contributions {
        y.axpy(Complex64::new((tau_p as f64 * p).sqrt(), 0.0), h, Complex64::new(1.0, 0.0));
    }
    y
}

/// `Σ_{i} τ_p p_i R_i + σ² I` over the supplied (power, correlation) pairs.
pub fn pilot_covariance<'a>(
    members: impl IntoIterator<Item = (f64, &'a CMatrix)>,
    n: usize,
    tau_p: usize,
    noise_power: f64,
) -> CMatrix {
    let mut psi = CMatrix::identity(n, n) * Complex64::new(noise_power, 0.0);
    for (p, r) in members {
        psi += r * Complex64::new(tau_p as f64 * p, 0.0);
    }
    psi
}

/// Linear estimator `ĥ = √(τ_p p_k) R_k Ψ^{-1} y` built from the known-UE
/// pilot covariance `Ψ` only.
#[derive(Debug, Clone)]
pub struct Estimator {
    /// `√(τ_p p_k) R_k Ψ^{-1}`.
    pub map: CMatrix,
}

impl Estimator {
    pub fn new(r_k: &CMatrix, p_k: f64, tau_p: usize, psi_known: &CMatrix) -> Result<Self> {
        let chol = psi_known.clone().cholesky().ok_or(Error::NotPositiveDefinite {
            what: "known pilot covariance",
            min_eigenvalue: crate::linalg::min_eigenvalue(psi_known),
        })?;
        // (R Ψ^{-1})^H = Ψ^{-1} R since both are Hermitian.
        let map = chol.solve(r_k).adjoint() * Complex64::new((tau_p as f64 * p_k).sqrt(), 0.0);
        Ok(Self { map })
    }

    pub fn estimate(&self, y: &CVector) -> CVector {
        &self.map * y
    }
}

/// One-shot form of [`Estimator`].
pub fn estimate_channel(y: &CVector, r_k: &CMatrix, p_k: f64, tau_p: usize, psi_known: &CMatrix) -> Result<CVector> {
    Ok(Estimator::new(r_k, p_k, tau_p, psi_known)?.estimate(y))
}

/// Second-order statistics of every UE at the serving APs for one drop.
///
/// UEs `0..num_known` form the known set; the rest are unknown. `r[k][j]`
/// is UE `k`'s correlation matrix at serving AP `j`.
#[derive(Debug, Clone)]
pub struct ChannelStatistics {
    pub r: Vec<Vec<CMatrix>>,
    pub powers: Vec<f64>,
    pub pilot_of: Vec<usize>,
    pub num_known: usize,
    pub tau_p: usize,
    pub noise_power: f64,
}

impl ChannelStatistics {
    pub fn validate(&self) -> Result<()> {
        let k = self.r.len();
        if self.powers.len() != k || self.pilot_of.len() != k || self.num_known > k || self.num_known == 0 {
            return Err(Error::InvalidArgument { name: "UE count", value: k as f64 });
        }
        if self.r[0].is_empty() {
            return Err(Error::InvalidArgument { name: "serving APs", value: 0.0 });
        }
        if self.r.iter().any(|row| row.len() != self.r[0].len()) {
            return Err(Error::InvalidArgument { name: "serving APs", value: self.r[0].len() as f64 });
        }
        if let Some(&t) = self.pilot_of.iter().find(|&&t| t >= self.tau_p) {
            return Err(Error::InvalidArgument { name: "pilot index", value: t as f64 });
        }
        if let Some(&p) = self.powers.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::InvalidArgument { name: "transmit power", value: p });
        }
        if !(self.noise_power > 0.0) {
            return Err(Error::InvalidArgument { name: "noise power", value: self.noise_power });
        }
        Ok(())
    }

    pub fn num_ues(&self) -> usize {
        self.r.len()
    }

    pub fn num_aps(&self) -> usize {
        self.r.first().map_or(0, |row| row.len())
    }

    pub fn antennas(&self) -> usize {
        self.r.first().and_then(|row| row.first()).map_or(0, |m| m.nrows())
    }

    pub fn is_known(&self, i: usize) -> bool {
        i < self.num_known
    }

    /// UEs on pilot `t`, optionally restricted to the known set.
    pub fn pilot_members(&self, t: usize, known_only: bool) -> impl Iterator<Item = usize> + '_ {
        let end = if known_only { self.num_known } else { self.num_ues() };
        (0..end).filter(move |&i| self.pilot_of[i] == t)
    }

    /// Pilot covariance at AP `j` over the known (or all) UEs on pilot `t`.
    pub fn pilot_covariance(&self, t: usize, j: usize, known_only: bool) -> CMatrix {
        pilot_covariance(
            self.pilot_members(t, known_only).map(|i| (self.powers[i], &self.r[i][j])),
            self.antennas(),
            self.tau_p,
            self.noise_power,
        )
    }
}
