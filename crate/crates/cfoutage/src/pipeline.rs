//! Parallel drop evaluation and the fit/validate pipeline for one scenario.

use cfoutage_core::error::Result;
use cfoutage_core::rateadapt::{run_procedure, ProcedureOutcome};
use cfoutage_core::receiver::{CombinedChannelStats, CombinerKind};
use cfoutage_core::rng::domain;
use cfoutage_core::scenario::ScenarioConfig;
use cfoutage_core::sim::{Network, SimSettings};
use rayon::prelude::*;

/// Per-drop statistics, `[drop][combiner]`, in drop order.
pub fn evaluate_drops(
    net: &Network,
    stream: u64,
    count: usize,
    combiners: &[CombinerKind],
    settings: &SimSettings,
) -> Result<Vec<Vec<CombinedChannelStats>>> {
    (0..count as u64).into_par_iter().map(|i| net.evaluate_drop(stream, i, combiners, settings)).collect()
}

/// Fit and validation results of one combiner.
#[derive(Debug, Clone)]
pub struct CombinerRun {
    pub combiner: CombinerKind,
    pub outcome: ProcedureOutcome,
    /// Omniscient SINR of every validation drop.
    pub validation_sinr: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: ScenarioConfig,
    pub runs: Vec<CombinerRun>,
}

impl ScenarioRun {
    pub fn get(&self, combiner: CombinerKind) -> Option<&CombinerRun> {
        self.runs.iter().find(|r| r.combiner == combiner)
    }
}

/// Fits the interference model on `fit_drops` drops and measures the SINR
/// on `validation_drops` fresh ones, for each combiner.
pub fn run_scenario(scenario: &ScenarioConfig, settings: &SimSettings, combiners: &[CombinerKind]) -> Result<ScenarioRun> {
    let net = Network::new(scenario)?;
    let fit = evaluate_drops(&net, domain::FIT_DROPS, settings.fit_drops, combiners, settings)?;
    let outcomes: Vec<ProcedureOutcome> = (0..combiners.len())
        .map(|c| {
            let per: Vec<CombinedChannelStats> = fit.iter().map(|d| d[c].clone()).collect();
            run_procedure(&per, scenario.prelog(), &settings.quadrature)
        })
        .collect::<Result<_>>()?;
    drop(fit);
    let sinrs: Vec<Vec<f64>> = (0..settings.validation_drops as u64)
        .into_par_iter()
        .map(|i| {
            let st = net.evaluate_drop(domain::VALIDATION_DROPS, i, combiners, settings)?;
            Ok(outcomes.iter().zip(&st).map(|(o, s)| o.drop_sinr(s)).collect())
        })
        .collect::<Result<_>>()?;
    let runs = combiners
        .iter()
        .zip(outcomes)
        .enumerate()
        .map(|(c, (&combiner, outcome))| CombinerRun {
            combiner,
            outcome,
            validation_sinr: sinrs.iter().map(|s| s[c]).collect(),
        })
        .collect();
    Ok(ScenarioRun { scenario: scenario.clone(), runs })
}
