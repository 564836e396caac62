//! Quantum kernel policies for reinforcement learning at desk scale.
//!
//! The crate simulates quantum-accessible MDPs on a dense statevector and
//! provides the machinery to train and verify kernel-based policies on them:
//!
//! - [`encoding`]: fixed-point register layouts for vector states, actions
//!   and rewards.
//! - [`kernels`]: scalar and operator-valued kernel evaluation with Gram
//!   utilities.
//! - [`statevector`]: the dense simulator (multi-controlled rotations,
//!   diagonal phases, inverse QFT, measurement).
//! - [`qmdp`]: tabular quantum MDP oracles plus exact dynamic-programming
//!   ground truth.
//! - [`policies`]: representer circuits, softmax kernel policies, and the
//!   Gaussian kernel policy with Kitaev-Webb state preparation.
//! - [`gradient`]: numerical (central-differencing / Fourier) and analytical
//!   (quantum multivariate Monte Carlo) policy-gradient estimators with
//!   query-budget calculators.
//! - [`occupancy`]: classical and quantum occupancy sampling.
//! - [`actorcritic`]: compatible-kernel actor-critic training loops.
//! - [`harness`]: experiment configuration, runs, and scaling studies.
//!
//! Every estimator in the crate is paired with an exact oracle (trajectory
//! enumeration, finite differences, or dynamic programming) so that its
//! output can be checked end to end.

pub mod actorcritic;
pub mod encoding;
pub mod error;
pub mod gradient;
pub mod harness;
pub mod kernels;
pub mod ledger;
pub mod occupancy;
pub mod policies;
pub mod qmdp;
pub mod rng;
pub mod statevector;

pub use error::{Error, Result};
pub use ledger::QueryLedger;
