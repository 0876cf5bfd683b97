//! ε-outage rate selection from the fitted interference model, the
//! fixed-margin baseline, and Monte Carlo validation of achieved outage.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::igsum::{CharGrid, IgComponent, IgMixture, QuadratureSpec};
use crate::linalg::{quad_form, CVector};
use crate::receiver::{lsfd_weights, per_ap_unknown_power, sinr_decomposition, CombinedChannelStats, SinrDecomposition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyMethod {
    Proposed,
    FixedMargin,
}

impl PolicyMethod {
    pub fn name(self) -> &'static str {
        match self {
            PolicyMethod::Proposed => "proposed",
            PolicyMethod::FixedMargin => "fixed-margin",
        }
    }
}

/// A selected SINR threshold and the spectral efficiency it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutagePolicy {
    /// Target outage for the proposed method.
    pub epsilon: Option<f64>,
    /// SINR threshold `T` (linear).
    pub threshold: f64,
    /// `prelog · log2(1 + T)` in bit/s/Hz.
    pub se: f64,
    pub method: PolicyMethod,
    /// Fade margin for the baseline (dB).
    pub margin_db: Option<f64>,
}

/// Distribution of the total unknown interference `Σ_l |a_l|² IUI_l`.
#[derive(Debug, Clone)]
pub enum InterferenceModel {
    /// No unknown interference at all.
    Absent,
    InverseGammaSum { mixture: IgMixture, grid: CharGrid },
}

impl InterferenceModel {
    pub fn new(mixture: IgMixture, quad: &QuadratureSpec) -> Result<Self> {
        let grid = CharGrid::new(&mixture, quad)?;
        Ok(InterferenceModel::InverseGammaSum { mixture, grid })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            InterferenceModel::Absent => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            InterferenceModel::InverseGammaSum { grid, .. } => grid.cdf_at(x),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        match self {
            InterferenceModel::Absent if p > 0.0 && p < 1.0 => Ok(0.0),
            InterferenceModel::Absent => Err(Error::InvalidArgument { name: "p", value: p }),
            InterferenceModel::InverseGammaSum { grid, .. } => grid.quantile(p),
        }
    }

    pub fn mixture(&self) -> Option<&IgMixture> {
        match self {
            InterferenceModel::Absent => None,
            InterferenceModel::InverseGammaSum { mixture, .. } => Some(mixture),
        }
    }
}

/// `Pr[SINR ≤ T] = 1 − F_IUI(|DS|²/T − IUSI − a^H F a)`.
pub fn outage_probability(decomp: &SinrDecomposition, model: &InterferenceModel, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument { name: "threshold", value: threshold });
    }
    let y = decomp.signal_power() / threshold - decomp.iusi - decomp.noise_term;
    if y <= 0.0 {
        return Ok(1.0);
    }
    Ok(match model {
        InterferenceModel::Absent => 0.0,
        _ => 1.0 - model.cdf(y),
    })
}

fn check_prelog(prelog: f64) -> Result<()> {
    if !(prelog > 0.0 && prelog <= 1.0) {
        return Err(Error::InvalidArgument { name: "prelog", value: prelog });
    }
    Ok(())
}

/// `T = |DS|² / (F^{-1}(1−ε) + IUSI + a^H F a)`.
pub fn epsilon_outage_policy(
    decomp: &SinrDecomposition,
    model: &InterferenceModel,
    epsilon: f64,
    prelog: f64,
) -> Result<OutagePolicy> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument { name: "epsilon", value: epsilon });
    }
    check_prelog(prelog)?;
    let q = model.quantile(1.0 - epsilon)?;
    let threshold = decomp.signal_power() / (q + decomp.iusi + decomp.noise_term);
    Ok(OutagePolicy {
        epsilon: Some(epsilon),
        threshold,
        se: prelog * libm::log2(1.0 + threshold),
        method: PolicyMethod::Proposed,
        margin_db: None,
    })
}

/// Interference-free SINR divided by a fixed margin `m`.
pub fn baseline_margin_policy(decomp: &SinrDecomposition, margin_db: f64, prelog: f64) -> Result<OutagePolicy> {
    if !(margin_db >= 0.0) || !margin_db.is_finite() {
        return Err(Error::InvalidArgument { name: "margin_db", value: margin_db });
    }
    check_prelog(prelog)?;
    let m = libm::pow(10.0, margin_db / 10.0);
    let threshold = decomp.signal_power() / ((decomp.iusi + decomp.noise_term) * m);
    Ok(OutagePolicy {
        epsilon: None,
        threshold,
        se: prelog * libm::log2(1.0 + threshold),
        method: PolicyMethod::FixedMargin,
        margin_db: Some(margin_db),
    })
}

/// Moment fit of one serving AP's unknown interference power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApFit {
    pub mean: f64,
    pub variance: f64,
    /// `None` when the AP saw no unknown interference.
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// `|a_l|²`.
    pub weight: f64,
}

/// Sample mean and unbiased variance.
pub fn mean_variance(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument { name: "sample count", value: samples.len() as f64 });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, var))
}

/// Steps 2–3: per-AP moments, Inverse-Gamma fits and the weighted mixture.
///
/// `samples[d][l]` is the unknown power at AP `l` in drop `d`. APs whose
/// samples are identically zero drop out; if all do, the model is
/// [`InterferenceModel::Absent`].
pub fn fit_interference(
    samples: &[Vec<f64>],
    weights_sq: &[f64],
    quad: &QuadratureSpec,
) -> Result<(Vec<ApFit>, InterferenceModel)> {
    let aps = weights_sq.len();
    if samples.iter().any(|s| s.len() != aps) {
        return Err(Error::InvalidArgument { name: "samples per drop", value: aps as f64 });
    }
    let mut fits = Vec::with_capacity(aps);
    let mut components = Vec::new();
    for l in 0..aps {
        let column: Vec<f64> = samples.iter().map(|s| s[l]).collect();
        let (mean, variance) = mean_variance(&column)?;
        if mean == 0.0 && variance == 0.0 {
            fits.push(ApFit { mean, variance, alpha: None, beta: None, weight: weights_sq[l] });
            continue;
        }
        if !(variance > 0.0) {
            return Err(Error::NoConvergence {
                what: "interference fit",
                detail: alloc::format!("AP {l} has mean {mean:e} but zero sample variance"),
            });
        }
        let c = IgComponent::from_moments(mean, variance, weights_sq[l])?;
        fits.push(ApFit { mean, variance, alpha: Some(c.alpha), beta: Some(c.beta), weight: weights_sq[l] });
        if weights_sq[l] > 0.0 {
            components.push(c);
        }
    }
    let model = if components.is_empty() {
        InterferenceModel::Absent
    } else {
        InterferenceModel::new(IgMixture::new(components)?, quad)?
    };
    Ok((fits, model))
}

/// Everything produced by the four-step procedure.
#[derive(Debug, Clone)]
pub struct ProcedureOutcome {
    /// Known-UE statistics as the CPU sees them (averaged over drops).
    pub cpu_stats: CombinedChannelStats,
    pub decomposition: SinrDecomposition,
    pub fits: Vec<ApFit>,
    pub model: InterferenceModel,
    pub prelog: f64,
}

impl ProcedureOutcome {
    /// Step 4 for one target.
    pub fn policy(&self, epsilon: f64) -> Result<OutagePolicy> {
        epsilon_outage_policy(&self.decomposition, &self.model, epsilon, self.prelog)
    }

    pub fn baseline(&self, margin_db: f64) -> Result<OutagePolicy> {
        baseline_margin_policy(&self.decomposition, margin_db, self.prelog)
    }

    pub fn lsfd(&self) -> &CVector {
        &self.decomposition.a
    }

    /// Omniscient SINR of a drop: the CPU's known-UE terms with the drop's
    /// own unknown interference `a^H Σ_u a`.
    pub fn drop_sinr(&self, drop: &CombinedChannelStats) -> f64 {
        self.decomposition.sinr_with(quad_form(self.lsfd().as_slice(), &drop.unknown).max(0.0))
    }

    /// Model CDF of the SINR at `threshold`.
    pub fn sinr_cdf(&self, threshold: f64) -> Result<f64> {
        outage_probability(&self.decomposition, &self.model, threshold)
    }
}

/// Steps 1–3 from per-drop statistics: average the known-UE statistics,
/// form the LSFD weights, collect per-AP unknown powers and fit the model.
pub fn run_procedure(fit_drops: &[CombinedChannelStats], prelog: f64, quad: &QuadratureSpec) -> Result<ProcedureOutcome> {
    check_prelog(prelog)?;
    let cpu_stats = CombinedChannelStats::average(fit_drops)?;
    let a = lsfd_weights(&cpu_stats)?;
    let decomposition = sinr_decomposition(&cpu_stats, &a)?;
    let samples: Vec<Vec<f64>> = fit_drops.iter().map(per_ap_unknown_power).collect();
    let (fits, model) = fit_interference(&samples, &decomposition.weights_sq, quad)?;
    Ok(ProcedureOutcome { cpu_stats, decomposition, fits, model, prelog })
}

/// Achieved outage over validation drops with a Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub outage: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
}

/// Smallest number of validation drops accepted.
pub const MIN_VALIDATION_DROPS: usize = 100;

/// Fraction of drops whose SINR falls below `threshold`.
pub fn empirical_outage(threshold: f64, sinrs: &[f64]) -> Result<OutageEstimate> {
    if sinrs.len() < MIN_VALIDATION_DROPS {
        return Err(Error::InvalidArgument { name: "validation drops", value: sinrs.len() as f64 });
    }
    if threshold.is_nan() {
        return Err(Error::InvalidArgument { name: "threshold", value: threshold });
    }
    let hits = sinrs.iter().filter(|&&s| s < threshold).count();
    let (lo, hi) = wilson_interval(hits, sinrs.len(), 1.959_963_984_540_054);
    Ok(OutageEstimate { outage: hits as f64 / sinrs.len() as f64, ci_lo: lo, ci_hi: hi, n: sinrs.len() })
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Empirical CDF distance `sup |F_a − F_b|` between a model CDF and samples.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x)?;
        d = d.max((f - i as f64 / n).abs()).max((f - (i + 1) as f64 / n).abs());
    }
    Ok(d)
}
