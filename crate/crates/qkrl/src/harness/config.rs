//! Experiment configuration: JSON schema for runs, scaling studies, and
//! budget tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::actorcritic::{CqracConfig, DcqracConfig};
use crate::error::{Error, Result};
use crate::gradient::budget::BudgetParams;
use crate::gradient::gevrey::PhaseBackend;
use crate::policies::Policy;
use crate::qmdp::TabularMdp;

use super::presets;

/// Where the environment comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MdpSource {
    Preset(String),
    Path(String),
    Inline(Box<TabularMdp>),
}

impl MdpSource {
    pub fn load(&self, base: Option<&Path>) -> Result<TabularMdp> {
        match self {
            MdpSource::Preset(name) => presets::mdp_by_name(name),
            MdpSource::Inline(mdp) => {
                mdp.validate()?;
                Ok((**mdp).clone())
            }
            MdpSource::Path(path) => {
                let full = resolve(base, path);
                let text = std::fs::read_to_string(&full).map_err(|e| {
                    Error::config(format!("cannot read MDP spec {}: {e}", full.display()))
                })?;
                TabularMdp::from_json(&text)
            }
        }
    }
}

/// Where the policy comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicySource {
    Preset(String),
    Path(String),
    Inline(Box<Policy>),
}

impl PolicySource {
    pub fn load(&self, base: Option<&Path>) -> Result<Policy> {
        match self {
            PolicySource::Preset(name) => presets::policy_by_name(name),
            PolicySource::Inline(policy) => Ok((**policy).clone()),
            PolicySource::Path(path) => {
                let full = resolve(base, path);
                let text = std::fs::read_to_string(&full).map_err(|e| {
                    Error::config(format!("cannot read policy spec {}: {e}", full.display()))
                })?;
                Ok(serde_json::from_str(&text)?)
            }
        }
    }
}

fn resolve(base: Option<&Path>, path: &str) -> std::path::PathBuf {
    let p = Path::new(path);
    if p.is_absolute() || base.is_none() {
        p.to_path_buf()
    } else {
        base.expect("checked").join(p)
    }
}

/// Estimator selector for `run`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    QpgNumerical,
    QpgAnalytical,
    Cqrac,
    Dcqrac,
    ClassicalCd,
    ClassicalMvmc,
}

/// Oracle fidelity selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    /// Diagonal phases from exact dynamic programming (numerical route).
    ExactPhase,
    /// Value phases extracted from the return-controlled rotation circuit.
    ProbabilityOracle,
    /// Exact directional phases over enumerated outcomes (analytical route).
    #[default]
    Idealized,
    /// No circuit execution; report theorem budgets only.
    Accounting,
}

impl BackendKind {
    pub fn name(&self) -> &'static str {
        match self {
            BackendKind::ExactPhase => "exact-phase",
            BackendKind::ProbabilityOracle => "probability-oracle",
            BackendKind::Idealized => "idealized",
            BackendKind::Accounting => "accounting",
        }
    }

    pub fn phase_backend(&self) -> Result<PhaseBackend> {
        match self {
            BackendKind::ExactPhase => Ok(PhaseBackend::ExactPhase),
            BackendKind::ProbabilityOracle => Ok(PhaseBackend::ProbabilityOracle),
            _ => Err(Error::config(
                "numerical gradient estimation needs the exact-phase or probability-oracle backend",
            )),
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_epsilon() -> f64 {
    0.05
}

fn default_delta() -> f64 {
    0.05
}

/// One experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mdp: MdpSource,
    pub policy: PolicySource,
    pub estimator: EstimatorKind,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub backend: BackendKind,
    /// Actor-critic hyperparameters; defaults derive from epsilon/delta.
    #[serde(default)]
    pub cqrac: Option<CqracConfig>,
    #[serde(default)]
    pub dcqrac: Option<DcqracConfig>,
    /// Iteration override for the training loops.
    #[serde(default)]
    pub iterations: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)?;
        if config.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if !(config.epsilon > 0.0) || !(0.0 < config.delta && config.delta < 1.0) {
            return Err(Error::config("epsilon must be positive and delta in (0, 1)"));
        }
        Ok(config)
    }
}

/// Scaling study over a query-budget or epsilon grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleConfig {
    pub mdp: MdpSource,
    pub policy: PolicySource,
    /// Estimators to sweep.
    pub estimators: Vec<EstimatorKind>,
    /// Query budgets for the analytical estimators.
    #[serde(default)]
    pub budgets: Vec<u64>,
    /// Epsilon grid for epsilon-driven estimators.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

impl ScaleConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Budget-table request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetConfig {
    pub params: BudgetParams,
}
