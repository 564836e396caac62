//! Oracle-query accounting.
//!
//! Every oracle call anywhere in the crate is recorded here. One
//! "environment interaction" is one (policy evaluation, transition) pair;
//! a T-step trajectory or occupancy oracle therefore costs T interactions.

use std::cell::Cell;

/// Monotone counters for oracle usage.
///
/// Interior mutability keeps oracle signatures tidy: oracles take
/// `&QueryLedger` and bump the counters they touch.
#[derive(Debug, Default)]
pub struct QueryLedger {
    policy_evals: Cell<u64>,
    transitions: Cell<u64>,
    rewards: Cell<u64>,
    /// Phase-oracle invocations (numerical estimator accounting).
    phase_queries: Cell<u64>,
    /// Binary-oracle queries charged at theorem rates (analytical estimators).
    binary_queries: Cell<u64>,
    /// Actual idealized-backend phase synth invocations, reported separately
    /// from the theorem-rate budgets.
    idealized_invocations: Cell<u64>,
    /// Classically measured trajectories.
    classical_trajectories: Cell<u64>,
    environment_interactions: Cell<u64>,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_policy_eval(&self, n: u64) {
        self.policy_evals.set(self.policy_evals.get() + n);
    }
    pub fn record_transition(&self, n: u64) {
        self.transitions.set(self.transitions.get() + n);
    }
    pub fn record_reward(&self, n: u64) {
        self.rewards.set(self.rewards.get() + n);
    }
    pub fn record_phase_queries(&self, n: u64) {
        self.phase_queries.set(self.phase_queries.get() + n);
    }
    pub fn record_binary_queries(&self, n: u64) {
        self.binary_queries.set(self.binary_queries.get() + n);
    }
    pub fn record_idealized_invocation(&self, n: u64) {
        self.idealized_invocations
            .set(self.idealized_invocations.get() + n);
    }
    pub fn record_classical_trajectories(&self, n: u64) {
        self.classical_trajectories
            .set(self.classical_trajectories.get() + n);
    }
    pub fn record_interactions(&self, n: u64) {
        self.environment_interactions
            .set(self.environment_interactions.get() + n);
    }

    pub fn policy_evals(&self) -> u64 {
        self.policy_evals.get()
    }
    pub fn transitions(&self) -> u64 {
        self.transitions.get()
    }
    pub fn rewards(&self) -> u64 {
        self.rewards.get()
    }
    pub fn phase_queries(&self) -> u64 {
        self.phase_queries.get()
    }
    pub fn binary_queries(&self) -> u64 {
        self.binary_queries.get()
    }
    pub fn idealized_invocations(&self) -> u64 {
        self.idealized_invocations.get()
    }
    pub fn classical_trajectories(&self) -> u64 {
        self.classical_trajectories.get()
    }
    pub fn environment_interactions(&self) -> u64 {
        self.environment_interactions.get()
    }

    /// Folds another ledger into this one (per-thread ledgers, sub-phases).
    pub fn merge(&self, other: &QueryLedger) {
        self.record_policy_eval(other.policy_evals());
        self.record_transition(other.transitions());
        self.record_reward(other.rewards());
        self.record_phase_queries(other.phase_queries());
        self.record_binary_queries(other.binary_queries());
        self.record_idealized_invocation(other.idealized_invocations());
        self.record_classical_trajectories(other.classical_trajectories());
        self.record_interactions(other.environment_interactions());
    }

    /// Snapshot of all counters, for CSV/JSON reporting.
    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            policy_evals: self.policy_evals(),
            transitions: self.transitions(),
            rewards: self.rewards(),
            phase_queries: self.phase_queries(),
            binary_queries: self.binary_queries(),
            idealized_invocations: self.idealized_invocations(),
            classical_trajectories: self.classical_trajectories(),
            environment_interactions: self.environment_interactions(),
        }
    }
}

/// Plain-data copy of the counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LedgerSnapshot {
    pub policy_evals: u64,
    pub transitions: u64,
    pub rewards: u64,
    pub phase_queries: u64,
    pub binary_queries: u64,
    pub idealized_invocations: u64,
    pub classical_trajectories: u64,
    pub environment_interactions: u64,
}
