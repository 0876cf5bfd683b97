//! Network layout, large-scale propagation and unknown-interferer drops.
//!
//! UE ordering convention used throughout the crate: index 0 is the desired
//! UE, `1..=K_n` are the known interferers, and unknown interferers follow.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::CorrelationModel;
use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Pathloss law `intercept_db − exponent_decades · log10(d / 1 m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Pathloss {
    pub intercept_db: f64,
    pub exponent_decades: f64,
}

impl Default for Pathloss {
    fn default() -> Self {
        Self { intercept_db: -30.5, exponent_decades: 36.7 }
    }
}

/// Log-normal shadowing with covariance `std_db² · 2^(−δ/decorrelation_m)`
/// between UEs `δ` metres apart, as seen by one AP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Shadowing {
    pub std_db: f64,
    pub decorrelation_m: f64,
}

impl Default for Shadowing {
    fn default() -> Self {
        Self { std_db: 4.0, decorrelation_m: 9.0 }
    }
}

impl Shadowing {
    /// Shadowing covariance (dB²) between two UEs `delta` metres apart.
    pub fn covariance(&self, delta: f64) -> f64 {
        self.std_db * self.std_db * libm::exp2(-delta / self.decorrelation_m)
    }
}

/// Where the desired UE sits inside the serving disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesiredUePreset {
    /// Just off the disk centre.
    Center,
    /// 390 m from the centre, near the disk rim.
    Edge,
}

impl DesiredUePreset {
    pub fn position(self) -> Point {
        match self {
            DesiredUePreset::Center => [0.5, 0.5],
            DesiredUePreset::Edge => [390.0, 0.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DesiredUePreset::Center => "center",
            DesiredUePreset::Edge => "edge",
        }
    }
}

/// Network and radio parameters. Defaults reproduce the evaluation setup:
/// 21 APs (3 serving + 6×3 neighbours), 16 antennas, 10 known interferers,
/// 100 mW, −94 dBm noise, τ_c = 200, τ_p = 10.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub num_aps: usize,
    pub serving_aps: usize,
    pub antennas: usize,
    pub known_interferers: usize,
    pub unknown_interferers: usize,
    pub tx_power_mw: f64,
    pub noise_power_dbm: f64,
    pub tau_c: usize,
    pub tau_p: usize,
    pub serving_radius_m: f64,
    pub annulus_m: [f64; 2],
    pub pathloss: Pathloss,
    pub shadowing: Shadowing,
    pub neighbor_clusters: usize,
    pub neighbor_ring_radius_m: f64,
    pub neighbor_spread_m: f64,
    pub desired_ue: DesiredUePreset,
    pub correlation: CorrelationModel,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_aps: 21,
            serving_aps: 3,
            antennas: 16,
            known_interferers: 10,
            unknown_interferers: 100,
            tx_power_mw: 100.0,
            noise_power_dbm: -94.0,
            tau_c: 200,
            tau_p: 10,
            serving_radius_m: 400.0,
            annulus_m: [450.0, 1000.0],
            pathloss: Pathloss::default(),
            shadowing: Shadowing::default(),
            neighbor_clusters: 6,
            neighbor_ring_radius_m: 700.0,
            neighbor_spread_m: 300.0,
            desired_ue: DesiredUePreset::Center,
            correlation: CorrelationModel::default(),
            seed: 1,
        }
    }
}

fn invalid(field: &'static str, reason: &str) -> Error {
    Error::InvalidConfig { field, reason: reason.to_string() }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.serving_aps == 0 {
            return Err(invalid("serving_aps", "must be at least 1"));
        }
        if self.serving_aps > self.num_aps {
            return Err(invalid("serving_aps", "exceeds num_aps"));
        }
        if self.antennas == 0 {
            return Err(invalid("antennas", "must be at least 1"));
        }
        if self.tau_p == 0 {
            return Err(invalid("tau_p", "must be at least 1"));
        }
        if self.tau_p >= self.known_interferers + 1 {
            return Err(invalid("tau_p", "must be smaller than the number of known UEs (K_n + 1)"));
        }
        if self.tau_p >= self.tau_c {
            return Err(invalid("tau_p", "must be smaller than tau_c"));
        }
        if !(self.tx_power_mw > 0.0) || !self.tx_power_mw.is_finite() {
            return Err(invalid("tx_power_mw", "must be positive"));
        }
        if !self.noise_power_dbm.is_finite() {
            return Err(invalid("noise_power_dbm", "must be finite"));
        }
        if !(self.serving_radius_m > 0.0) {
            return Err(invalid("serving_radius_m", "must be positive"));
        }
        let [r_min, r_max] = self.annulus_m;
        if !(r_min > self.serving_radius_m) {
            return Err(invalid("annulus_m", "inner radius must exceed serving_radius_m"));
        }
        if !(r_max > r_min) {
            return Err(invalid("annulus_m", "outer radius must exceed inner radius"));
        }
        if !(self.shadowing.std_db >= 0.0) || !(self.shadowing.decorrelation_m > 0.0) {
            return Err(invalid("shadowing", "std_db must be >= 0 and decorrelation_m > 0"));
        }
        if let CorrelationModel::GaussianLocalScattering { asd_deg } = self.correlation {
            if !(asd_deg >= 0.0) {
                return Err(invalid("correlation", "asd_deg must be >= 0"));
            }
        }
        Ok(())
    }

    /// Receiver noise power in mW.
    pub fn noise_power_mw(&self) -> f64 {
        libm::pow(10.0, self.noise_power_dbm / 10.0)
    }

    /// `τ_u/τ_c`.
    pub fn prelog(&self) -> f64 {
        (self.tau_c - self.tau_p) as f64 / self.tau_c as f64
    }

    /// Number of known UEs, `K_n + 1`.
    pub fn known_ues(&self) -> usize {
        self.known_interferers + 1
    }
}

/// AP and UE positions. The serving APs are `serving_set`; unknown UEs are
/// filled in per drop.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub ap_positions: Vec<Point>,
    pub serving_set: Vec<usize>,
    pub known_ue_positions: Vec<Point>,
    pub unknown_ue_positions: Vec<Point>,
    pub desired_ue_index: usize,
}

impl Geometry {
    /// Known UEs followed by unknown UEs.
    pub fn all_ue_positions(&self) -> impl Iterator<Item = &Point> {
        self.known_ue_positions.iter().chain(&self.unknown_ue_positions)
    }

    pub fn num_ues(&self) -> usize {
        self.known_ue_positions.len() + self.unknown_ue_positions.len()
    }
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    libm::hypot(a[0] - b[0], a[1] - b[1])
}

fn uniform_in_disk<R: Rng + ?Sized>(rng: &mut R, center: Point, radius: f64) -> Point {
    let r = radius * rng.gen::<f64>().sqrt();
    let phi = 2.0 * PI * rng.gen::<f64>();
    [center[0] + r * libm::cos(phi), center[1] + r * libm::sin(phi)]
}

/// Places serving APs, the neighbour tier and the known UEs.
pub fn place_network<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Geometry> {
    config.validate()?;
    let neighbors = config.num_aps - config.serving_aps;
    if neighbors > 0 && (config.neighbor_clusters == 0 || neighbors % config.neighbor_clusters != 0) {
        return Err(invalid("num_aps", "neighbouring APs must split evenly into neighbor_clusters"));
    }
    let mut ap_positions = Vec::with_capacity(config.num_aps);
    for _ in 0..config.serving_aps {
        ap_positions.push(uniform_in_disk(rng, [0.0, 0.0], config.serving_radius_m));
    }
    if neighbors > 0 {
        let per_cluster = neighbors / config.neighbor_clusters;
        for c in 0..config.neighbor_clusters {
            let angle = 2.0 * PI * c as f64 / config.neighbor_clusters as f64;
            let center = [
                config.neighbor_ring_radius_m * libm::cos(angle),
                config.neighbor_ring_radius_m * libm::sin(angle),
            ];
            for _ in 0..per_cluster {
                ap_positions.push(uniform_in_disk(rng, center, config.neighbor_spread_m));
            }
        }
    }
    let mut known_ue_positions = Vec::with_capacity(config.known_ues());
    known_ue_positions.push(config.desired_ue.position());
    for _ in 0..config.known_interferers {
        known_ue_positions.push(uniform_in_disk(rng, [0.0, 0.0], config.serving_radius_m));
    }
    Ok(Geometry {
        ap_positions,
        serving_set: (0..config.serving_aps).collect(),
        known_ue_positions,
        unknown_ue_positions: Vec::new(),
        desired_ue_index: 0,
    })
}

/// `K_u` points uniform by area on the annulus.
pub fn drop_unknown_ues<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Vec<Point> {
    let [r_min, r_max] = config.annulus_m;
    let (a, b) = (r_min * r_min, r_max * r_max);
    (0..config.unknown_interferers)
        .map(|_| {
            let r = (a + (b - a) * rng.gen::<f64>()).sqrt();
            let phi = 2.0 * PI * rng.gen::<f64>();
            [r * libm::cos(phi), r * libm::sin(phi)]
        })
        .collect()
}

/// Pathloss in dB at distance `d` metres.
pub fn pathloss_db(pathloss: &Pathloss, d: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::InvalidArgument { name: "distance", value: d });
    }
    Ok(pathloss.intercept_db - pathloss.exponent_decades * libm::log10(d))
}

/// Shadowing covariance matrix over a set of UE positions.
pub fn shadowing_covariance(shadowing: &Shadowing, positions: &[Point]) -> DMatrix<f64> {
    let n = positions.len();
    DMatrix::from_fn(n, n, |i, j| shadowing.covariance(distance(&positions[i], &positions[j])))
}

/// Lower Cholesky factor, retrying once with `1e−9·σ²` diagonal jitter.
fn shadowing_factor(cov: DMatrix<f64>, variance: f64) -> Result<DMatrix<f64>> {
    if let Some(c) = cov.clone().cholesky() {
        return Ok(c.l());
    }
    let n = cov.nrows();
    let jittered = cov + DMatrix::identity(n, n) * (1e-9 * variance);
    jittered.cholesky().map(|c| c.l()).ok_or(Error::NotPositiveDefinite {
        what: "shadowing covariance",
        min_eigenvalue: f64::NAN,
    })
}

fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Shadowing realisations `F` (dB), one row per UE (known then unknown),
/// one column per AP. Independent across APs, correlated across UEs.
pub fn sample_shadowing<R: Rng + ?Sized>(
    geometry: &Geometry,
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let positions: Vec<Point> = geometry.all_ue_positions().copied().collect();
    let n = positions.len();
    let num_aps = geometry.ap_positions.len();
    let variance = config.shadowing.std_db * config.shadowing.std_db;
    let mut f = DMatrix::zeros(n, num_aps);
    if n == 0 || variance == 0.0 {
        return Ok(f);
    }
    let l = shadowing_factor(shadowing_covariance(&config.shadowing, &positions), variance)?;
    for ap in 0..num_aps {
        let col = &l * gaussian_vector(rng, n);
        f.set_column(ap, &col);
    }
    Ok(f)
}

/// Draws shadowing for newly placed UEs conditioned on values already fixed
/// for other UEs at the same APs (Gaussian conditioning per AP column).
///
/// `fixed` has one row per entry of `fixed_positions` and one column per AP
/// of interest; the result has one row per entry of `new_positions`.
pub fn sample_conditional_shadowing<R: Rng + ?Sized>(
    shadowing: &Shadowing,
    fixed_positions: &[Point],
    fixed: &DMatrix<f64>,
    new_positions: &[Point],
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let m = new_positions.len();
    let aps = fixed.ncols();
    let variance = shadowing.std_db * shadowing.std_db;
    if m == 0 || variance == 0.0 {
        return Ok(DMatrix::zeros(m, aps));
    }
    let cov_nn = shadowing_covariance(shadowing, new_positions);
    if fixed_positions.is_empty() {
        let l = shadowing_factor(cov_nn, variance)?;
        let mut out = DMatrix::zeros(m, aps);
        for ap in 0..aps {
            out.set_column(ap, &(&l * gaussian_vector(rng, m)));
        }
        return Ok(out);
    }
    let cov_ff = shadowing_covariance(shadowing, fixed_positions);
    let cov_nf = DMatrix::from_fn(m, fixed_positions.len(), |i, j| {
        shadowing.covariance(distance(&new_positions[i], &fixed_positions[j]))
    });
    let chol_ff = {
        let n = cov_ff.nrows();
        let c = cov_ff.clone().cholesky().or_else(|| {
            (cov_ff + DMatrix::identity(n, n) * (1e-9 * variance)).cholesky()
        });
        c.ok_or(Error::NotPositiveDefinite { what: "shadowing covariance", min_eigenvalue: f64::NAN })?
    };
    // gain = C_nf C_ff^{-1}
    let gain = chol_ff.solve(&cov_nf.transpose()).transpose();
    let cond = &cov_nn - &gain * cov_nf.transpose();
    let cond = (&cond + cond.transpose()) * 0.5;
    let l = shadowing_factor(cond, variance)?;
    let mut out = DMatrix::zeros(m, aps);
    for ap in 0..aps {
        let mean = &gain * fixed.column(ap);
        out.set_column(ap, &(mean + &l * gaussian_vector(rng, m)));
    }
    Ok(out)
}

/// Distances, shadowing and linear gains for every (UE, AP) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScale {
    /// `β_kl`, linear.
    pub beta: DMatrix<f64>,
    /// `d_kl` in metres.
    pub distance: DMatrix<f64>,
    /// `F_kl` in dB.
    pub shadowing_db: DMatrix<f64>,
}

/// Combines pathloss and shadowing: `β_kl = 10^((PL(d_kl) + F_kl)/10)`.
pub fn large_scale_gains(
    geometry: &Geometry,
    pathloss: &Pathloss,
    shadowing_db: &DMatrix<f64>,
) -> Result<LargeScale> {
    let ues: Vec<Point> = geometry.all_ue_positions().copied().collect();
    let aps = &geometry.ap_positions;
    if shadowing_db.nrows() != ues.len() || shadowing_db.ncols() != aps.len() {
        return Err(Error::InvalidArgument { name: "shadowing rows", value: shadowing_db.nrows() as f64 });
    }
    let distance = DMatrix::from_fn(ues.len(), aps.len(), |k, l| distance(&ues[k], &aps[l]));
    let mut beta = DMatrix::zeros(ues.len(), aps.len());
    for k in 0..ues.len() {
        for l in 0..aps.len() {
            beta[(k, l)] = gain_from_db(pathloss_db(pathloss, distance[(k, l)])? + shadowing_db[(k, l)]);
        }
    }
    Ok(LargeScale { beta, distance, shadowing_db: shadowing_db.clone() })
}

pub fn gain_from_db(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}
