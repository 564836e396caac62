//! Experiment harness: configuration, presets, runs, scaling studies, and
//! the query-budget table.

pub mod config;
pub mod presets;
pub mod run;
pub mod scaling;

use serde::Serialize;

use crate::error::Result;
use crate::gradient::budget::{query_budget, BudgetParams, BudgetVariant};

pub use config::{BackendKind, EstimatorKind, MdpSource, PolicySource, RunConfig, ScaleConfig};
pub use run::{run, EstimateRow, RunSummary};
pub use scaling::{scaling_study, SlopePoint, SlopeReport};

/// One evaluated budget row.
#[derive(Debug, Clone, Serialize)]
pub struct BudgetRow {
    pub variant: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub queries: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Evaluates every budget variant against the supplied symbols; variants
/// with missing symbols report them by name instead of a value.
pub fn budget_table(params: &BudgetParams) -> Vec<BudgetRow> {
    BudgetVariant::ALL
        .iter()
        .map(|variant| match query_budget(*variant, params) {
            Ok(n) => BudgetRow {
                variant: variant.name().to_string(),
                queries: Some(n),
                error: None,
            },
            Err(e) => BudgetRow {
                variant: variant.name().to_string(),
                queries: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}
