//! Gradient estimate report type shared by all estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output of a gradient estimator with its query accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub estimate: Vec<f64>,
    /// Oracle queries charged at theorem rates.
    pub queries: u64,
    pub epsilon_target: f64,
    pub delta_target: f64,
    /// Which oracle backend produced the estimate.
    pub backend: String,
    /// Filled when an exact oracle was available for comparison.
    pub error_vs_exact: Option<f64>,
}

impl GradientEstimate {
    pub fn new(
        estimate: Vec<f64>,
        queries: u64,
        epsilon_target: f64,
        delta_target: f64,
        backend: impl Into<String>,
    ) -> Result<Self> {
        if queries == 0 {
            return Err(Error::contract("estimate must account at least one query"));
        }
        if estimate.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("estimate entries must be finite"));
        }
        Ok(Self {
            estimate,
            queries,
            epsilon_target,
            delta_target,
            backend: backend.into(),
            error_vs_exact: None,
        })
    }

    /// Records the sup-norm error against a reference gradient.
    pub fn with_error_vs(mut self, exact: &[f64]) -> Self {
        self.error_vs_exact = Some(linf_distance(&self.estimate, exact));
        self
    }
}

/// Sup-norm distance between two vectors.
pub fn linf_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
