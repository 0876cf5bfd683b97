//! A fixed serving cluster with its known UEs, and random drops of the
//! unknown interferers around it.
//!
//! Every drop is a pure function of `(seed, domain, index)`, so callers can
//! evaluate drops in any order or concurrently.

use alloc::vec::Vec;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::{assign_pilots, correlation_matrix, ChannelStatistics, CorrelationModel};
use crate::error::Result;
use crate::igsum::QuadratureSpec;
use crate::linalg::CMatrix;
use crate::receiver::{combined_channel_stats, CombinedChannelStats, CombinerKind, StatsMethod};
use crate::rng::{domain, substream, ChaCha8Rng};
use crate::scenario::{
    drop_unknown_ues, gain_from_db, large_scale_gains, pathloss_db, place_network, sample_conditional_shadowing,
    sample_shadowing, distance, Geometry, LargeScale, Point, ScenarioConfig,
};

/// Monte Carlo effort and numerical settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    /// Coherence blocks per drop.
    pub n_mc: usize,
    /// Unknown-UE drops used to fit the interference model (Step 1).
    pub fit_drops: usize,
    /// Fresh drops used to measure achieved outage.
    pub validation_drops: usize,
    pub method: StatsMethod,
    pub quadrature: QuadratureSpec,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            n_mc: 100,
            fit_drops: 200,
            validation_drops: 2000,
            method: StatsMethod::Conditional,
            quadrature: QuadratureSpec::default(),
        }
    }
}

/// The serving cluster and known UEs, fixed for a scenario.
#[derive(Debug, Clone)]
pub struct Network {
    config: ScenarioConfig,
    geometry: Geometry,
    known: LargeScale,
    /// `R_kj` for known UE `k` at serving AP `j`.
    known_r: Vec<Vec<CMatrix>>,
}

/// One unknown-UE drop: positions and the channel statistics it induces.
#[derive(Debug, Clone)]
pub struct Drop {
    pub unknown_positions: Vec<Point>,
    pub statistics: ChannelStatistics,
}

impl Network {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let geometry = place_network(config, &mut substream(config.seed, domain::GEOMETRY, 0))?;
        let shadow = sample_shadowing(&geometry, config, &mut substream(config.seed, domain::KNOWN_SHADOWING, 0))?;
        let known = large_scale_gains(&geometry, &config.pathloss, &shadow)?;
        let known_r = geometry
            .known_ue_positions
            .iter()
            .enumerate()
            .map(|(k, ue)| {
                geometry
                    .serving_set
                    .iter()
                    .map(|&l| {
                        correlation_matrix(&geometry.ap_positions[l], ue, known.beta[(k, l)], config.antennas, config.correlation)
                    })
                    .collect()
            })
            .collect();
        Ok(Self { config: config.clone(), geometry, known, known_r })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// Layout with no unknown UEs placed.
    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Large-scale gains of the known UEs towards every AP.
    pub fn known_large_scale(&self) -> &LargeScale {
        &self.known
    }

    fn serving_shadowing(&self) -> DMatrix<f64> {
        let cols: Vec<usize> = self.geometry.serving_set.clone();
        DMatrix::from_fn(self.known.shadowing_db.nrows(), cols.len(), |k, j| self.known.shadowing_db[(k, cols[j])])
    }

    /// Places unknown UEs and builds the serving-cluster statistics.
    ///
    /// Unknown-UE shadowing is drawn only towards the serving APs,
    /// conditioned on the fixed known-UE shadowing there.
    pub fn sample_drop(&self, rng: &mut ChaCha8Rng) -> Result<Drop> {
        let c = &self.config;
        let positions = drop_unknown_ues(c, rng);
        let shadow = sample_conditional_shadowing(
            &c.shadowing,
            &self.geometry.known_ue_positions,
            &self.serving_shadowing(),
            &positions,
            rng,
        )?;
        let serving = &self.geometry.serving_set;
        let mut r = self.known_r.clone();
        for (u, pos) in positions.iter().enumerate() {
            let mut row = Vec::with_capacity(serving.len());
            for (j, &l) in serving.iter().enumerate() {
                let ap = &self.geometry.ap_positions[l];
                let beta = gain_from_db(pathloss_db(&c.pathloss, distance(ap, pos))? + shadow[(u, j)]);
                row.push(correlation_matrix(ap, pos, beta, c.antennas, c.correlation));
            }
            r.push(row);
        }
        let at: Vec<Vec<f64>> = (0..c.known_ues())
            .map(|k| serving.iter().map(|&l| c.tx_power_mw * self.known.beta[(k, l)]).collect())
            .collect();
        let pilot_of = assign_pilots(&at, c.known_ues(), positions.len(), c.tau_p, rng)?;
        let statistics = ChannelStatistics {
            powers: alloc::vec![c.tx_power_mw; r.len()],
            r,
            pilot_of,
            num_known: c.known_ues(),
            tau_p: c.tau_p,
            noise_power: c.noise_power_mw(),
        };
        Ok(Drop { unknown_positions: positions, statistics })
    }

    /// Statistics of the `index`-th drop in `domain`, one entry per combiner.
    pub fn evaluate_drop(
        &self,
        stream: u64,
        index: u64,
        combiners: &[CombinerKind],
        settings: &SimSettings,
    ) -> Result<Vec<CombinedChannelStats>> {
        let mut rng = substream(self.config.seed, stream, index);
        let drop = self.sample_drop(&mut rng)?;
        combined_channel_stats(&drop.statistics, self.geometry.desired_ue_index, combiners, settings.n_mc, settings.method, &mut rng)
    }

    /// The `index`-th drop in `domain` without evaluating it.
    pub fn drop_at(&self, stream: u64, index: u64) -> Result<Drop> {
        self.sample_drop(&mut substream(self.config.seed, stream, index))
    }
}

/// Two APs and two equally strong UEs placed mirror-symmetrically, the
/// second one unknown and on the desired UE's pilot. Its interference is
/// fully correlated across the two APs.
pub fn adversarial_pair(antennas: usize, model: CorrelationModel) -> ChannelStatistics {
    let aps = [[-60.0, 0.0], [60.0, 0.0]];
    let ue = |pos: Point| -> Vec<CMatrix> {
        aps.iter().map(|ap| correlation_matrix(ap, &pos, 1e-3, antennas, model)).collect()
    };
    ChannelStatistics {
        r: alloc::vec![ue([0.0, 50.0]), ue([0.0, -50.0])],
        powers: alloc::vec![0.1, 0.1],
        pilot_of: alloc::vec![0, 0],
        num_known: 1,
        tau_p: 1,
        noise_power: 1e-5,
    }
}
