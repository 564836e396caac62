//! Stochastic compatible kernel actor-critic training loop.
//!
//! Each iteration estimates the policy gradient by quantum multivariate
//! Monte Carlo over a state-action occupancy oracle whose payload is the
//! advantage-weighted log-policy gradient, applies the residual correction,
//! steps the policy weights, collects classical double-horizon trajectories,
//! refits the compatible critic by kernel ridge regression on
//! occupancy-resampled tail returns, and refreshes the baseline. Buffer
//! trimming, matching-pursuit sparsification, shot refresh, and covariance
//! shrinkage run on their configured periods.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::budget::{query_budget, BudgetParams, BudgetVariant};
use crate::gradient::qmc::{qestimator, QmcOptions};
use crate::ledger::QueryLedger;
use crate::occupancy::{build_state_action_occupancy_oracle, residual_correction};
use crate::policies::bounds::bound_sigma_nabla;
use crate::policies::GaussQkp;
use crate::qmdp::{ClassicalPolicy, ClassicalTrajectory, TabularMdp};
use crate::rng::{child_rng, child_seed};

use super::critic::{baseline_value, fit_compatible_critic, CompatibleCritic};
use super::pursuit::matching_pursuit;

/// Hyperparameters of the training loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CqracConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub learning_rate: f64,
    /// Ridge scale; the fit uses `lambda_n = lambda0 * n^(-exponent)`.
    pub lambda0: f64,
    pub lambda_exponent: f64,
    /// Covariance shrink factor, applied every `shrink_every` iterations
    /// (0 disables); variances never drop below `shrink_floor`.
    pub shrink_alpha: f64,
    pub shrink_every: usize,
    pub shrink_floor: f64,
    /// Matching-pursuit sparsification period (0 disables).
    pub sparsify_every: usize,
    pub pursuit_tolerance: f64,
    /// Stored-trajectory cap; the oldest entries are dropped beyond it.
    pub buffer_cap: usize,
    /// Periodic stale-data removal: every `trim_every` iterations the oldest
    /// `trim_fraction` of the stored trajectories is dropped (0 disables).
    pub trim_every: usize,
    pub trim_fraction: f64,
    /// Occupancy resamples per critic fit.
    pub critic_fit_samples: usize,
    pub n1_override: Option<u64>,
    /// Hard cap on the per-iteration shot budget.
    pub n1_cap: u64,
    pub iterations: usize,
}

impl Default for CqracConfig {
    fn default() -> Self {
        Self::new(0.05, 0.05)
    }
}

impl CqracConfig {
    pub fn new(epsilon: f64, delta: f64) -> Self {
        Self {
            epsilon,
            delta,
            learning_rate: 0.5,
            lambda0: 1e-3,
            lambda_exponent: 0.5,
            shrink_alpha: 0.7,
            shrink_every: 10,
            shrink_floor: 0.02,
            sparsify_every: 0,
            pursuit_tolerance: 1e-6,
            buffer_cap: 512,
            trim_every: 5,
            trim_fraction: 0.5,
            critic_fit_samples: 64,
            n1_override: None,
            n1_cap: 200_000,
            iterations: 30,
        }
    }
}

/// Mutable training state.
#[derive(Debug, Clone)]
pub struct CqracState {
    pub policy: GaussQkp,
    pub critic: Option<CompatibleCritic>,
    pub trajectories: Vec<ClassicalTrajectory>,
    pub iteration: usize,
    /// Tracked max |Qhat - b| over the grid.
    pub epsilon_q: f64,
}

impl CqracState {
    pub fn new(policy: GaussQkp) -> Self {
        Self {
            policy,
            critic: None,
            trajectories: Vec::new(),
            iteration: 0,
            epsilon_q: 0.0,
        }
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    /// Exact policy value (dynamic-programming oracle).
    pub value: f64,
    pub grad_norm: f64,
    pub epsilon_q: f64,
    /// Critic action-gradient bound; only tracked by the deterministic loop.
    pub c_p: Option<f64>,
    pub n1: u64,
    pub cumulative_interactions: u64,
}

/// One CQRAC iteration: policy gradient step, critic refit, baseline
/// refresh, periodic maintenance.
pub fn cqrac_iteration(
    state: &mut CqracState,
    mdp: &TabularMdp,
    config: &CqracConfig,
    seed: u64,
    ledger: &QueryLedger,
) -> Result<IterationStats> {
    state.iteration += 1;
    let iter_seed = child_seed(seed, state.iteration as u64);
    let (s_n, a_n) = (mdp.n_states(), mdp.n_actions());
    let d = state.policy.n_centres() * state.policy.a_dims();
    let mut grad_norm = 0.0;
    let mut n1 = 0u64;

    // --- Policy gradient step (skipped until a critic exists). ---
    if let Some(critic) = &state.critic {
        let baseline: Vec<f64> = (0..s_n)
            .map(|s| baseline_value(|s, a| critic.q_value(s, a), &state.policy, s))
            .collect();
        let epsilon_q = (0..s_n)
            .flat_map(|s| (0..a_n).map(move |a| (s, a)))
            .map(|(s, a)| (critic.q_value(s, a) - baseline[s]).abs())
            .fold(0.0, f64::max);
        state.epsilon_q = epsilon_q;

        if epsilon_q > 1e-12 {
            let sigma_nabla = bound_sigma_nabla(&state.policy, 2.0)?;
            n1 = match config.n1_override {
                Some(n) => n,
                None => query_budget(
                    BudgetVariant::CqracB,
                    &BudgetParams {
                        epsilon: Some(config.epsilon),
                        delta: Some(config.delta),
                        d: Some(d),
                        gamma: Some(mdp.gamma),
                        epsilon_q: Some(epsilon_q),
                        sigma_nabla: Some(sigma_nabla),
                        ..Default::default()
                    },
                )?,
            }
            .max(16);
            if n1 > config.n1_cap {
                return Err(Error::budget(format!(
                    "iteration budget n1 = {n1} exceeds the cap {}",
                    config.n1_cap
                )));
            }

            // Advantage-weighted log-policy-gradient payload.
            let policy = &state.policy;
            let payload = |s: usize, a: usize| -> Vec<f64> {
                let action = policy.layout.action.decode(a).expect("action in range");
                let glog = policy
                    .log_policy_grad_gaussian(s, &action)
                    .expect("grid inputs");
                let adv = critic.q_value(s, a) - baseline[s];
                glog.iter().map(|g| adv * g).collect()
            };
            let oracle = build_state_action_occupancy_oracle(mdp, policy, payload, d)?;
            let est = qestimator(
                &oracle,
                n1,
                config.delta,
                &QmcOptions::default(),
                child_seed(iter_seed, 1),
                ledger,
            )?;
            let corrected = residual_correction(&est.estimate, &payload(0, 0), mdp.gamma, mdp.horizon);
            grad_norm = corrected.iter().map(|g| g * g).sum::<f64>().sqrt();

            let mut params = state.policy.params();
            for (p, g) in params.iter_mut().zip(&corrected) {
                *p += config.learning_rate * g;
            }
            state.policy.set_params(&params)?;
        }
    }

    // --- Collect classical double-horizon trajectories. ---
    let n2 = if n1 > 0 {
        n1.min(config.buffer_cap as u64)
    } else {
        config.critic_fit_samples as u64
    };
    let mut rng = child_rng(iter_seed, 2);
    for _ in 0..n2 {
        let tr = mdp.sample_trajectory(&state.policy, 2 * mdp.horizon, &mut rng, ledger);
        state.trajectories.push(tr);
    }
    if state.trajectories.len() > config.buffer_cap {
        let drop = state.trajectories.len() - config.buffer_cap;
        state.trajectories.drain(0..drop);
    }
    if config.trim_every > 0 && state.iteration % config.trim_every == 0 {
        let drop = (state.trajectories.len() as f64 * config.trim_fraction.clamp(0.0, 1.0)) as usize;
        state
            .trajectories
            .drain(0..drop.min(state.trajectories.len().saturating_sub(1)));
    }

    // --- Critic refit on occupancy-resampled tail returns. ---
    let mut fit_rng = child_rng(iter_seed, 3);
    let samples = resample_occupancy_targets(
        mdp,
        &state.trajectories,
        config.critic_fit_samples,
        &mut fit_rng,
    );
    if !samples.is_empty() {
        let lambda_n = config.lambda0 * (samples.len() as f64).powf(-config.lambda_exponent);
        state.critic = Some(fit_compatible_critic(&state.policy, &samples, lambda_n)?);
    }

    // --- Periodic maintenance. ---
    if config.sparsify_every > 0 && state.iteration % config.sparsify_every == 0 {
        sparsify_policy(&mut state.policy, config.pursuit_tolerance)?;
    }
    if config.shrink_every > 0 && state.iteration % config.shrink_every == 0 {
        for v in state.policy.sigma.iter_mut() {
            *v = (*v * config.shrink_alpha).max(config.shrink_floor);
        }
    }

    Ok(IterationStats {
        iteration: state.iteration,
        value: mdp.exact_value(&state.policy),
        grad_norm,
        epsilon_q: state.epsilon_q,
        c_p: None,
        n1,
        cumulative_interactions: ledger.environment_interactions(),
    })
}

/// Geometric-stopping resample of stored double-horizon trajectories into
/// `(s, a, tail return)` critic targets.
fn resample_occupancy_targets(
    mdp: &TabularMdp,
    trajectories: &[ClassicalTrajectory],
    count: usize,
    rng: &mut crate::rng::Rng,
) -> Vec<(usize, usize, f64)> {
    use rand::Rng as _;
    if trajectories.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let tr = &trajectories[rng.gen_range(0..trajectories.len())];
        for t in 0..mdp.horizon.min(tr.states.len()) {
            if rng.gen::<f64>() < 1.0 - mdp.gamma {
                out.push((
                    tr.states[t],
                    tr.actions[t],
                    tr.suffix_return(t, mdp.horizon, mdp.gamma),
                ));
                break;
            }
        }
        // No-return draws contribute no critic target.
    }
    out
}

/// Replaces the policy's representer with a matching-pursuit approximation
/// of its current mean over the state grid.
fn sparsify_policy(policy: &mut GaussQkp, tolerance: f64) -> Result<()> {
    let probes = policy.layout.state.grid();
    let targets: Vec<Vec<f64>> = probes.iter().map(|s| policy.mean_action(s)).collect();
    let result = matching_pursuit(
        &probes,
        &targets,
        &probes,
        &policy.kernel,
        tolerance,
        policy.n_centres().max(1),
    )?;
    if result.centres.is_empty() {
        // The mean is numerically zero; keep a single zero-weight centre.
        policy.centres = vec![probes[0].clone()];
        policy.weights = vec![vec![0.0; policy.a_dims()]];
    } else {
        policy.centres = result.centres;
        policy.weights = result.weights;
    }
    policy.validate()
}

/// Runs the full training loop.
pub fn run_cqrac(
    mdp: &TabularMdp,
    policy: GaussQkp,
    config: &CqracConfig,
    seed: u64,
    ledger: &QueryLedger,
) -> Result<(CqracState, Vec<IterationStats>)> {
    let mut state = CqracState::new(policy);
    let mut stats = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        stats.push(cqrac_iteration(&mut state, mdp, config, seed, ledger)?);
    }
    Ok((state, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{DimRange, GridCodec, RegisterLayout};
    use crate::kernels::{OperatorKernel, ScalarKernel};

    pub(crate) fn bandit_mdp() -> TabularMdp {
        let layout = RegisterLayout::new(
            GridCodec::new(1, 1, DimRange::new(0.0, 1.0)).unwrap(),
            GridCodec::new(1, 1, DimRange::new(0.0, 1.0)).unwrap(),
            4,
            1.0,
        )
        .unwrap();
        let p = vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        let r = vec![1.0, 0.0, 0.0, 0.0];
        TabularMdp::new(layout, p, r, None, 0.5, 1, 1.0).unwrap()
    }

    pub(crate) fn bandit_policy(mdp: &TabularMdp) -> GaussQkp {
        GaussQkp::new(
            mdp.layout,
            OperatorKernel::isotropic(ScalarKernel::KroneckerDelta, 1).unwrap(),
            mdp.layout.state.grid(),
            vec![vec![0.5], vec![0.0]],
            vec![0.25],
        )
        .unwrap()
    }

    #[test]
    fn zero_reward_mdp_leaves_policy_unchanged() {
        let layout = bandit_mdp().layout;
        let p = vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        let r = vec![0.0; 4];
        let mdp = TabularMdp::new(layout, p, r, None, 0.5, 1, 1.0).unwrap();
        let policy = bandit_policy(&mdp);
        let before = policy.params();
        let mut config = CqracConfig::new(0.1, 0.1);
        config.iterations = 5;
        config.shrink_every = 0;
        let ledger = QueryLedger::new();
        let (state, _) = run_cqrac(&mdp, policy, &config, 7, &ledger).unwrap();
        for (b, a) in before.iter().zip(state.policy.params()) {
            // Zero rewards give a zero critic, zero advantage, zero update.
            assert!((b - a).abs() < 1e-9, "{b} vs {a}");
        }
    }

    #[test]
    fn bandit_policy_improves() {
        let mdp = bandit_mdp();
        let policy = bandit_policy(&mdp);
        let v0 = mdp.exact_value(&policy);
        let mut config = CqracConfig::new(0.1, 0.1);
        config.iterations = 12;
        let ledger = QueryLedger::new();
        let (state, stats) = run_cqrac(&mdp, policy, &config, 3, &ledger).unwrap();
        let v1 = mdp.exact_value(&state.policy);
        assert!(v1 > v0 + 0.1, "value went {v0} -> {v1}");
        // pi(best action) should already be large.
        let p_best = state.policy.prob(0, 0);
        assert!(p_best > 0.8, "pi(best) = {p_best}");
        assert!(stats.last().unwrap().cumulative_interactions > 0);
    }

    #[test]
    fn sparsify_preserves_mean_function() {
        let mdp = bandit_mdp();
        let mut policy = bandit_policy(&mdp);
        let means: Vec<Vec<f64>> = mdp
            .layout
            .state
            .grid()
            .iter()
            .map(|s| policy.mean_action(s))
            .collect();
        sparsify_policy(&mut policy, 1e-10).unwrap();
        for (s, m) in mdp.layout.state.grid().iter().zip(&means) {
            let after = policy.mean_action(s);
            for (x, y) in after.iter().zip(m) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn budget_cap_surfaces() {
        let mdp = bandit_mdp();
        let policy = bandit_policy(&mdp);
        let mut config = CqracConfig::new(1e-6, 0.1); // tiny epsilon -> huge n1
        config.n1_cap = 100;
        config.iterations = 3;
        let ledger = QueryLedger::new();
        let result = run_cqrac(&mdp, policy, &config, 1, &ledger);
        assert!(matches!(result, Err(Error::Budget(_))));
    }
}
