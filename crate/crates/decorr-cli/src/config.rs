//! Experiment configuration: a versioned JSON document with a mandatory
//! seed. Unknown fields are rejected so typos surface as config errors with
//! line/column positions.

use serde::{Deserialize, Serialize};

use decorr::observables::{make_observable, Observable};
use decorr::rates::RateFamily;
use decorr::systems::{Point, SystemSpec};
use decorr::tower::TailLaw;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Mandatory: there is no wall-clock fallback.
    pub seed: u64,
    pub system: SystemSpec<f64>,
    #[serde(default)]
    pub observables: Vec<ObservableSpec>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub tower: TowerConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    /// Output directory; all artifact paths are relative to it. The --out
    /// flag overrides it.
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct ObservableSpec {
    pub kind: ObservableKindSpec,
    #[serde(default)]
    pub class: Option<decorr::observables::ModulusClass<f64>>,
    #[serde(default)]
    pub anchor: Option<Point<f64>>,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub axis: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKindSpec {
    RadialBump,
    Sawtooth,
    Cosine,
    Coordinate,
    Constant,
}

impl ObservableSpec {
    pub fn build(&self, system: &SystemSpec<f64>) -> anyhow::Result<Observable<f64>> {
        match self.kind {
            ObservableKindSpec::RadialBump => {
                let class = self
                    .class
                    .ok_or_else(|| anyhow::anyhow!("radial_bump needs a class"))?;
                let anchor = self
                    .anchor
                    .ok_or_else(|| anyhow::anyhow!("radial_bump needs an anchor"))?;
                Ok(make_observable(*system, class, anchor)?)
            }
            ObservableKindSpec::Sawtooth => Ok(Observable::sawtooth(*system)?),
            ObservableKindSpec::Cosine => Ok(Observable::cosine(*system)?),
            ObservableKindSpec::Coordinate => {
                Ok(Observable::coordinate(*system, self.axis.unwrap_or(0))?)
            }
            ObservableKindSpec::Constant => Ok(Observable::constant(
                *system,
                self.value
                    .ok_or_else(|| anyhow::anyhow!("constant needs a value"))?,
            )),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub n_points: usize,
    pub burn_in: u64,
    pub spacing: u64,
    pub n_max: usize,
    /// Require an existing ensemble.csv instead of sampling inline.
    #[serde(default)]
    pub reuse_ensemble: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            n_points: 100_000,
            burn_in: 10_000,
            spacing: 16,
            n_max: 32,
            reuse_ensemble: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerConfig {
    pub depth: u32,
    pub cutoff: u32,
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
    /// cmd-tower fails (exit 4) above this remainder mass.
    pub remainder_threshold: f64,
    pub max_truncation: f64,
    /// Refinement grid for the diameter table.
    pub delta_grid: Vec<u32>,
    pub sample_budget: usize,
    #[serde(default)]
    pub binary_cells: bool,
}

impl Default for TowerConfig {
    fn default() -> Self {
        TowerConfig {
            depth: 10_000,
            cutoff: 100_000,
            synthetic: None,
            remainder_threshold: 0.01,
            max_truncation: 1e-3,
            delta_grid: vec![10, 16, 25, 40, 63, 100, 158, 251, 398, 631, 1000],
            sample_budget: 200,
            binary_cells: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub tail: TailLaw<f64>,
    pub branching: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub fit_window: (u64, u64),
    pub candidates: Vec<RateFamily>,
    pub slack: f64,
    /// Coarsening depths for the approximation comparison.
    pub k_grid: Vec<u32>,
    /// Overlay the measured-diameter bound column in correlate output
    /// (circle-type systems only).
    #[serde(default)]
    pub bound_overlay: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            fit_window: (1, 20),
            candidates: vec![RateFamily::Exponential, RateFamily::Polynomial],
            slack: 1.0,
            k_grid: vec![2, 4, 8, 16],
            bound_overlay: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.version != SCHEMA_VERSION {
            anyhow::bail!(
                "config version {} not supported (expected {SCHEMA_VERSION})",
                self.version
            );
        }
        self.system.validate()?;
        for (i, o) in self.observables.iter().enumerate() {
            o.build(&self.system)
                .map_err(|e| anyhow::anyhow!("observable {i}: {e}"))?;
        }
        if let Some(s) = &self.tower.synthetic {
            s.tail.validate()?;
        }
        if self.analysis.slack < 1.0 {
            anyhow::bail!("analysis.slack must be >= 1");
        }
        if self.analysis.fit_window.1 < self.analysis.fit_window.0 {
            anyhow::bail!("analysis.fit_window must be ordered");
        }
        Ok(())
    }
}
