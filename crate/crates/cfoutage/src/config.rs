//! Experiment configuration: JSON with defaults for every omitted field.

use std::path::{Path, PathBuf};

use cfoutage_core::receiver::CombinerKind;
use cfoutage_core::scenario::{DesiredUePreset, ScenarioConfig};
use cfoutage_core::sim::SimSettings;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SinrCdf,
    OutageCurve,
    OracleCheck,
    ScenarioDump,
    DiagCovariance,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::SinrCdf => "sinr-cdf",
            Experiment::OutageCurve => "outage-curve",
            Experiment::OracleCheck => "oracle-check",
            Experiment::ScenarioDump => "scenario-dump",
            Experiment::DiagCovariance => "diag-covariance",
        }
    }
}

/// Single Inverse-Gamma component checked against the incomplete gamma
/// function by `oracle-check`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSpec {
    pub alpha: f64,
    pub beta: f64,
    pub weight: f64,
    /// Abscissae, spread over quantiles 0.001 to 0.999.
    pub points: usize,
    /// Largest accepted `|F − Q|`.
    pub tolerance: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self { alpha: 3.0, beta: 2.0, weight: 1.0, points: 200, tolerance: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub sim: SimSettings,
    pub combiner: CombinerKind,
    pub experiment: Experiment,
    /// Unknown-interferer counts; each overrides `scenario.unknown_interferers`.
    pub k_u_list: Vec<usize>,
    /// Desired-UE positions; each overrides `scenario.desired_ue`.
    pub presets: Vec<DesiredUePreset>,
    pub epsilon_list: Vec<f64>,
    /// Fade margins of the fixed-margin baseline (dB).
    pub margins_db: Vec<f64>,
    /// Drops inspected by `diag-covariance`.
    pub diag_drops: usize,
    pub oracle: OracleSpec,
    pub output_dir: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            sim: SimSettings::default(),
            combiner: CombinerKind::Rzf,
            experiment: Experiment::OutageCurve,
            k_u_list: vec![50, 100],
            presets: vec![DesiredUePreset::Center, DesiredUePreset::Edge],
            epsilon_list: vec![0.01, 0.05, 0.1],
            margins_db: vec![3.0, 6.0, 10.0, 13.0],
            diag_drops: 50,
            oracle: OracleSpec::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> AppError {
    AppError::Config(format!("{field}: {}", reason.into()))
}

impl ExperimentSpec {
    /// Parses JSON text; blank input gives the defaults.
    pub fn from_json(text: &str) -> Result<Self, AppError> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            AppError::Config(format!("at `{path}`: {}", e.into_inner()))
        })?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The scenario with one `(K_u, preset)` cell applied.
    pub fn scenario_for(&self, k_u: usize, preset: DesiredUePreset) -> ScenarioConfig {
        ScenarioConfig { unknown_interferers: k_u, desired_ue: preset, ..self.scenario.clone() }
    }

    pub fn cells(&self) -> Vec<(usize, DesiredUePreset)> {
        self.k_u_list.iter().flat_map(|&k| self.presets.iter().map(move |&p| (k, p))).collect()
    }

    pub fn validate(&self) -> Result<(), AppError> {
        if self.k_u_list.is_empty() {
            return Err(invalid("k_u_list", "must not be empty"));
        }
        if self.presets.is_empty() {
            return Err(invalid("presets", "must not be empty"));
        }
        if self.epsilon_list.is_empty() {
            return Err(invalid("epsilon_list", "must not be empty"));
        }
        if let Some(e) = self.epsilon_list.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(invalid("epsilon_list", format!("{e} is outside (0, 1)")));
        }
        if let Some(m) = self.margins_db.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
            return Err(invalid("margins_db", format!("{m} is not a non-negative margin")));
        }
        for (k, p) in self.cells() {
            self.scenario_for(k, p).validate().map_err(|e| AppError::Config(format!("scenario (K_u = {k}): {e}")))?;
        }
        let s = &self.sim;
        if s.n_mc < cfoutage_core::receiver::MIN_BLOCKS {
            return Err(invalid("sim.n_mc", format!("at least {} blocks required", cfoutage_core::receiver::MIN_BLOCKS)));
        }
        if s.fit_drops < 2 {
            return Err(invalid("sim.fit_drops", "at least 2 drops required"));
        }
        if s.validation_drops < cfoutage_core::rateadapt::MIN_VALIDATION_DROPS {
            return Err(invalid(
                "sim.validation_drops",
                format!("at least {} drops required", cfoutage_core::rateadapt::MIN_VALIDATION_DROPS),
            ));
        }
        if self.diag_drops == 0 {
            return Err(invalid("diag_drops", "must be positive"));
        }
        let o = &self.oracle;
        if !(o.alpha > 2.0 && o.beta > 0.0 && o.weight > 0.0) || o.points < 2 || !(o.tolerance > 0.0) {
            return Err(invalid("oracle", "needs alpha > 2, beta > 0, weight > 0, points >= 2, tolerance > 0"));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form,
    /// `output_dir` excluded.
    pub fn hash(&self) -> String {
        let canonical = Self { output_dir: PathBuf::new(), ..self.clone() };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
