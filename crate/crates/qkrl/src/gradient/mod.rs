//! Policy-gradient estimators.
//!
//! [`differencing`] holds central-differencing stencils and the classical
//! shot-based baseline; [`gevrey`] the Fourier-based quantum estimator over
//! value phase oracles; [`oracle`] binary oracles for vector payloads;
//! [`qmc`] quantum multivariate Monte Carlo (QBounded / QEstimator) and the
//! classical mean baseline; [`budget`] the query-budget calculators.

pub mod budget;
pub mod differencing;
pub mod estimate;
pub mod gevrey;
pub mod oracle;
pub mod qmc;

pub use budget::{query_budget, BudgetParams, BudgetVariant};
pub use differencing::{central_diff_coefficients, classical_cd_gradient, smoothed_value};
pub use estimate::{linf_distance, GradientEstimate};
pub use gevrey::{gevrey_params, quantum_gevrey_gradient, GevreyOptions, GevreyParams, PhaseBackend};
pub use oracle::{reinforce_oracle, truncate, BinaryOracle, Outcome};
pub use qmc::{classical_mvmc, qbounded, qestimator, QmcOptions};
