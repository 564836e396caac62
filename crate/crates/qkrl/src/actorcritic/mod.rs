//! Compatible kernel actor-critic algorithms: critics and ridge regression,
//! matching-pursuit sparsification, natural-gradient verification, and the
//! stochastic / deterministic training loops.

pub mod critic;
pub mod cqrac;
pub mod dcqrac;
pub mod natural;
pub mod pursuit;

pub use critic::{
    baseline_value, compatible_kernel, fit_compatible_critic, kernel_ridge_fit,
    kernel_ridge_fit_gram, CompatibleCritic,
};
pub use cqrac::{cqrac_iteration, run_cqrac, CqracConfig, CqracState, IterationStats};
pub use dcqrac::{
    dcqrac_iteration, deterministic_value, run_dcqrac, DcqracConfig, DcqracCritic, DcqracState,
    Transition,
};
pub use natural::{natural_gradient_check, NaturalGradientReport};
pub use pursuit::{matching_pursuit, PursuitResult};
