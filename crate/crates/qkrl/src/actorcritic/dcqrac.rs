//! Deterministic compatible kernel actor-critic with experience replay.
//!
//! The policy gradient uses a state occupancy oracle whose payload couples
//! the kernel section `kappa(s, :)` with the critic's action gradient at the
//! deterministic head, evaluated classically by central differences. The
//! critic is a linear model over compatible advantage features plus state
//! features, fit by ridge regression against a slowly synced target network
//! on replayed transitions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::budget::{query_budget, BudgetParams, BudgetVariant};
use crate::gradient::qmc::{qbounded, QmcOptions};
use crate::ledger::QueryLedger;
use crate::occupancy::{build_state_occupancy_oracle, residual_correction};
use crate::policies::GaussQkp;
use crate::qmdp::{ClassicalPolicy, TabularMdp};
use crate::rng::{child_rng, child_seed};

use super::cqrac::IterationStats;

/// Hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DcqracConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub learning_rate: f64,
    pub lambda0: f64,
    pub lambda_exponent: f64,
    pub buffer_cap: usize,
    pub batch_size: usize,
    /// Periodic stale-data removal: every `trim_every` iterations the oldest
    /// `trim_fraction` of the buffer is dropped (0 disables).
    pub trim_every: usize,
    pub trim_fraction: f64,
    /// Critic updates between hard target syncs; ignored when `target_tau`
    /// selects exponential averaging.
    pub target_sync_every: usize,
    pub target_tau: Option<f64>,
    pub inner_epochs: usize,
    /// Finite-difference step for the action gradient, as a fraction of the
    /// action range.
    pub fd_step_fraction: f64,
    pub sparsify_every: usize,
    pub pursuit_tolerance: f64,
    pub n1_override: Option<u64>,
    pub n1_cap: u64,
    pub iterations: usize,
}

impl Default for DcqracConfig {
    fn default() -> Self {
        Self::new(0.05, 0.05)
    }
}

impl DcqracConfig {
    pub fn new(epsilon: f64, delta: f64) -> Self {
        Self {
            epsilon,
            delta,
            learning_rate: 0.3,
            lambda0: 1e-4,
            lambda_exponent: 0.5,
            buffer_cap: 2048,
            batch_size: 128,
            trim_every: 5,
            trim_fraction: 0.5,
            target_sync_every: 5,
            target_tau: None,
            inner_epochs: 1,
            fd_step_fraction: 1e-4,
            sparsify_every: 0,
            pursuit_tolerance: 1e-6,
            n1_override: None,
            n1_cap: 200_000,
            iterations: 50,
        }
    }
}

/// Linear critic over compatible advantage features and state features:
/// `Q(s, a) = w . [(a - mu(s)) outer kappa(s, :)] + v . [kappa(s, :), 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcqracCritic {
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    /// Frozen feature geometry: centres, per-state mean, state/action grids.
    pub centres: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    pub kernel: crate::kernels::ScalarKernel,
    pub state_vectors: Vec<Vec<f64>>,
    pub action_vectors: Vec<Vec<f64>>,
}

impl DcqracCritic {
    fn zero(policy: &GaussQkp) -> Self {
        let n = policy.n_centres();
        let a = policy.a_dims();
        let state_vectors = policy.layout.state.grid();
        Self {
            w: vec![0.0; n * a],
            v: vec![0.0; n + 1],
            centres: policy.centres.clone(),
            mu: state_vectors.iter().map(|s| policy.mean_action(s)).collect(),
            kernel: policy.kernel.scalar.clone(),
            state_vectors,
            action_vectors: policy.layout.action.grid(),
        }
    }

    fn kappa_features(&self, s: usize) -> Vec<f64> {
        self.centres
            .iter()
            .map(|c| {
                self.kernel
                    .eval(c, &self.state_vectors[s])
                    .expect("dims validated")
            })
            .collect()
    }

    /// Full feature vector `[advantage features, state features]` at an
    /// arbitrary (possibly off-grid) action.
    fn features(&self, s: usize, action: &[f64]) -> Vec<f64> {
        let kappas = self.kappa_features(s);
        let a_dims = action.len();
        let mut out = Vec::with_capacity(kappas.len() * a_dims + kappas.len() + 1);
        for k in &kappas {
            for (x, m) in action.iter().zip(&self.mu[s]) {
                out.push(k * (x - m));
            }
        }
        out.extend(kappas);
        out.push(1.0);
        out
    }

    pub fn feature_dim(&self) -> usize {
        let n = self.centres.len();
        n * self.mu[0].len() + n + 1
    }

    /// Critic value at an arbitrary action vector.
    pub fn q_at(&self, s: usize, action: &[f64]) -> f64 {
        let feats = self.features(s, action);
        let params: Vec<f64> = self.w.iter().chain(self.v.iter()).cloned().collect();
        feats.iter().zip(&params).map(|(f, p)| f * p).sum()
    }

    pub fn q_value(&self, s: usize, a: usize) -> f64 {
        let action = self.action_vectors[a].clone();
        self.q_at(s, &action)
    }

    /// State-value part `v . [kappa(s, :), 1]` (the critic's baseline).
    pub fn state_value(&self, s: usize) -> f64 {
        let kappas = self.kappa_features(s);
        kappas.iter().zip(&self.v).map(|(k, v)| k * v).sum::<f64>()
            + self.v.last().expect("bias weight")
    }

    /// Central-difference action gradient at the given action.
    pub fn action_gradient(&self, s: usize, action: &[f64], step: f64) -> Vec<f64> {
        let mut grad = vec![0.0; action.len()];
        let mut probe = action.to_vec();
        for (j, g) in grad.iter_mut().enumerate() {
            probe[j] = action[j] + step;
            let plus = self.q_at(s, &probe);
            probe[j] = action[j] - step;
            let minus = self.q_at(s, &probe);
            probe[j] = action[j];
            *g = (plus - minus) / (2.0 * step);
        }
        grad
    }
}

/// One stored transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
}

/// Mutable training state.
#[derive(Debug, Clone)]
pub struct DcqracState {
    pub policy: GaussQkp,
    pub critic: DcqracCritic,
    pub target: DcqracCritic,
    pub buffer: Vec<Transition>,
    pub iteration: usize,
    pub critic_updates: usize,
    /// Tracked bound on the critic action gradient.
    pub c2: f64,
}

impl DcqracState {
    pub fn new(policy: GaussQkp) -> Self {
        let critic = DcqracCritic::zero(&policy);
        Self {
            target: critic.clone(),
            critic,
            policy,
            buffer: Vec::new(),
            iteration: 0,
            critic_updates: 0,
            c2: 0.0,
        }
    }
}

/// One DCQRAC iteration.
pub fn dcqrac_iteration(
    state: &mut DcqracState,
    mdp: &TabularMdp,
    config: &DcqracConfig,
    seed: u64,
    ledger: &QueryLedger,
) -> Result<IterationStats> {
    state.iteration += 1;
    let iter_seed = child_seed(seed.wrapping_add(0xDC), state.iteration as u64);
    let s_n = mdp.n_states();
    let d = state.policy.n_centres() * state.policy.a_dims();
    let fd_step = config.fd_step_fraction * state.policy.layout.action.range.width();
    let mut grad_norm = 0.0;
    let mut n1 = 0u64;

    // --- Deterministic policy gradient step. ---
    let action_grads: Vec<Vec<f64>> = (0..s_n)
        .map(|s| {
            let mu = state
                .policy
                .mean_action(&state.policy.layout.state.decode(s).expect("state"));
            state.critic.action_gradient(s, &mu, fd_step)
        })
        .collect();
    let c2 = action_grads
        .iter()
        .map(|g| g.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    state.c2 = c2;

    if c2 > 1e-12 {
        n1 = match config.n1_override {
            Some(n) => n,
            None => query_budget(
                BudgetVariant::Dcqrac,
                &BudgetParams {
                    epsilon: Some(config.epsilon),
                    delta: Some(config.delta),
                    d: Some(d),
                    gamma: Some(mdp.gamma),
                    c_p: Some(c2),
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

        // Payload over states: kappa(s, :) outer grad_a Q|_(mu(s)).
        let policy = &state.policy;
        let payload = |s: usize| -> Vec<f64> {
            let sv = policy.layout.state.decode(s).expect("state in range");
            let mut out = Vec::with_capacity(d);
            for c in &policy.centres {
                let kappa = policy.kernel.scalar.eval(c, &sv).expect("dims validated");
                for g in &action_grads[s] {
                    out.push(kappa * g);
                }
            }
            out
        };
        let oracle = build_state_occupancy_oracle(mdp, policy, payload, d)?;
        let scale = oracle.max_l2();
        if scale > 1e-12 {
            let normalized = oracle.map_payload(|p| p.iter().map(|x| x / scale).collect())?;
            let est = qbounded(
                &normalized,
                n1,
                config.delta,
                &QmcOptions::default(),
                child_seed(iter_seed, 1),
                ledger,
            )?;
            let raw: Vec<f64> = est.estimate.iter().map(|x| x * scale).collect();
            let corrected = residual_correction(&raw, &payload(0), mdp.gamma, mdp.horizon);
            grad_norm = corrected.iter().map(|g| g * g).sum::<f64>().sqrt();
            let mut params = state.policy.params();
            for (p, g) in params.iter_mut().zip(&corrected) {
                *p += config.learning_rate * g;
            }
            state.policy.set_params(&params)?;
        }
    }

    // --- Collect transitions into the replay buffer. ---
    let n2 = if n1 > 0 {
        n1.min((config.buffer_cap / mdp.horizon.max(1)) as u64).max(1)
    } else {
        (config.batch_size / mdp.horizon.max(1)).max(8) as u64
    };
    let mut rng = child_rng(iter_seed, 2);
    for _ in 0..n2 {
        let tr = mdp.sample_trajectory(&state.policy, mdp.horizon, &mut rng, ledger);
        for t in 0..tr.states.len() {
            let s_next = if t + 1 < tr.states.len() {
                tr.states[t + 1]
            } else {
                tr.states[t]
            };
            state.buffer.push(Transition {
                s: tr.states[t],
                a: tr.actions[t],
                r: tr.rewards[t],
                s_next,
            });
        }
    }
    if state.buffer.len() > config.buffer_cap {
        let drop = state.buffer.len() - config.buffer_cap;
        state.buffer.drain(0..drop);
    }
    if config.trim_every > 0 && state.iteration % config.trim_every == 0 {
        let drop = (state.buffer.len() as f64 * config.trim_fraction.clamp(0.0, 1.0)) as usize;
        state.buffer.drain(0..drop.min(state.buffer.len().saturating_sub(1)));
    }

    // --- Critic regression against the frozen target. ---
    let mut batch_rng = child_rng(iter_seed, 3);
    for _ in 0..config.inner_epochs.max(1) {
        let batch = sample_batch(&state.buffer, config.batch_size, &mut batch_rng);
        if batch.is_empty() {
            break;
        }
        fit_critic(state, mdp, &batch, config)?;
        state.critic_updates += 1;
        match config.target_tau {
            Some(tau) => blend_target(&mut state.target, &state.critic, tau),
            None => {
                if state.critic_updates % config.target_sync_every.max(1) == 0 {
                    state.target = state.critic.clone();
                }
            }
        }
    }

    // --- Periodic sparsification. ---
    if config.sparsify_every > 0 && state.iteration % config.sparsify_every == 0 {
        let probes = state.policy.layout.state.grid();
        let targets: Vec<Vec<f64>> = probes.iter().map(|s| state.policy.mean_action(s)).collect();
        let result = super::pursuit::matching_pursuit(
            &probes,
            &targets,
            &probes,
            &state.policy.kernel,
            config.pursuit_tolerance,
            state.policy.n_centres().max(1),
        )?;
        if !result.centres.is_empty() {
            state.policy.centres = result.centres;
            state.policy.weights = result.weights;
            state.policy.validate()?;
        }
    }

    let epsilon_q = {
        let mut worst: f64 = 0.0;
        for s in 0..s_n {
            let b = state.critic.state_value(s);
            for a in 0..mdp.n_actions() {
                worst = worst.max((state.critic.q_value(s, a) - b).abs());
            }
        }
        worst
    };

    Ok(IterationStats {
        iteration: state.iteration,
        value: deterministic_value(mdp, &state.policy),
        grad_norm,
        epsilon_q,
        c_p: Some(c2),
        n1,
        cumulative_interactions: ledger.environment_interactions(),
    })
}

/// Exact value of the deterministic head (the policy's mean rounded to the
/// action grid).
pub fn deterministic_value(mdp: &TabularMdp, policy: &GaussQkp) -> f64 {
    let head = DeterministicHead { policy };
    mdp.exact_value(&head)
}

struct DeterministicHead<'a> {
    policy: &'a GaussQkp,
}

impl ClassicalPolicy for DeterministicHead<'_> {
    fn n_actions(&self) -> usize {
        self.policy.n_actions()
    }
    fn prob(&self, s: usize, a: usize) -> f64 {
        let sv = self.policy.layout.state.decode(s).expect("state in range");
        let mu = self.policy.mean_action(&sv);
        let clamped: Vec<f64> = mu
            .iter()
            .map(|m| m.clamp(self.policy.layout.action.range.lo, self.policy.layout.action.range.hi))
            .collect();
        let idx = self.policy.layout.action.encode(&clamped).expect("clamped");
        (idx == a) as u8 as f64
    }
    fn params(&self) -> Vec<f64> {
        Vec::new()
    }
    fn set_params(&mut self, _p: &[f64]) -> Result<()> {
        Err(Error::contract("deterministic head is a read-only view"))
    }
    fn grad_log_prob(&self, _s: usize, _a: usize) -> Vec<f64> {
        Vec::new()
    }
}

fn sample_batch(
    buffer: &[Transition],
    batch_size: usize,
    rng: &mut crate::rng::Rng,
) -> Vec<Transition> {
    use rand::Rng as _;
    if buffer.is_empty() {
        return Vec::new();
    }
    (0..batch_size.min(buffer.len() * 2))
        .map(|_| buffer[rng.gen_range(0..buffer.len())])
        .collect()
}

/// Ridge solve of the critic parameters against target values
/// `r + gamma Q_target(s', mu_target(s'))`.
fn fit_critic(
    state: &mut DcqracState,
    mdp: &TabularMdp,
    batch: &[Transition],
    config: &DcqracConfig,
) -> Result<()> {
    // Refresh the critic's feature geometry to the current policy while
    // keeping the parameter values (the ridge solve replaces them anyway).
    let mut critic = DcqracCritic::zero(&state.policy);
    let dim = critic.feature_dim();
    let n = batch.len();
    let mut design = DMatrix::zeros(n, dim);
    let mut targets = DVector::zeros(n);
    for (row, tr) in batch.iter().enumerate() {
        let action = critic.action_vectors[tr.a].clone();
        for (col, f) in critic.features(tr.s, &action).into_iter().enumerate() {
            design[(row, col)] = f;
        }
        // At a = mu_target(s') the advantage features vanish, leaving the
        // target's state-value part.
        targets[row] = tr.r + mdp.gamma * state.target.state_value(tr.s_next);
    }
    let lambda_n = config.lambda0 * (n as f64).powf(-config.lambda_exponent);
    let mut normal = design.transpose() * &design;
    for i in 0..dim {
        normal[(i, i)] += n as f64 * lambda_n.max(1e-10);
    }
    let rhs = design.transpose() * targets;
    let theta = normal
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::solver("critic ridge system is singular"))?;
    let n_w = state.policy.n_centres() * state.policy.a_dims();
    critic.w = theta.iter().take(n_w).cloned().collect();
    critic.v = theta.iter().skip(n_w).cloned().collect();
    state.critic = critic;
    Ok(())
}

fn blend_target(target: &mut DcqracCritic, critic: &DcqracCritic, tau: f64) {
    if target.w.len() != critic.w.len() || target.v.len() != critic.v.len() {
        *target = critic.clone();
        return;
    }
    for (t, c) in target.w.iter_mut().zip(&critic.w) {
        *t = tau * c + (1.0 - tau) * *t;
    }
    for (t, c) in target.v.iter_mut().zip(&critic.v) {
        *t = tau * c + (1.0 - tau) * *t;
    }
    target.mu = critic.mu.clone();
    target.centres = critic.centres.clone();
}

/// Runs the full loop.
pub fn run_dcqrac(
    mdp: &TabularMdp,
    policy: GaussQkp,
    config: &DcqracConfig,
    seed: u64,
    ledger: &QueryLedger,
) -> Result<(DcqracState, Vec<IterationStats>)> {
    let mut state = DcqracState::new(policy);
    let mut stats = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        stats.push(dcqrac_iteration(&mut state, mdp, config, seed, ledger)?);
    }
    Ok((state, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{DimRange, GridCodec, RegisterLayout};
    use crate::kernels::{OperatorKernel, ScalarKernel};

    /// Bandit with a quadratic reward peaking at a* = 0.625 on an 8-point
    /// action grid.
    pub(crate) fn quadratic_bandit() -> TabularMdp {
        let layout = RegisterLayout::new(
            GridCodec::new(1, 1, DimRange::new(0.0, 1.0)).unwrap(),
            GridCodec::new(1, 3, DimRange::new(0.0, 1.0)).unwrap(),
            6,
            1.0,
        )
        .unwrap();
        let (s_n, a_n) = (2, 8);
        let mut p = vec![0.0; s_n * a_n * s_n];
        let mut r = vec![0.0; s_n * a_n];
        let codec = layout.action;
        for s in 0..s_n {
            for a in 0..a_n {
                p[(s * a_n + a) * s_n + s] = 1.0;
                if s == 0 {
                    let av = codec.grid_value(a);
                    r[a] = (1.0 - (av - 0.625) * (av - 0.625)).clamp(0.0, 1.0);
                }
            }
        }
        TabularMdp::new(layout, p, r, None, 0.5, 1, 1.0).unwrap()
    }

    fn gauss_policy(mdp: &TabularMdp, beta: f64, var: f64) -> GaussQkp {
        GaussQkp::new(
            mdp.layout,
            OperatorKernel::isotropic(ScalarKernel::KroneckerDelta, 1).unwrap(),
            mdp.layout.state.grid(),
            vec![vec![beta], vec![0.5]],
            vec![var],
        )
        .unwrap()
    }

    #[test]
    fn linear_critic_payload_is_exact() {
        // Q linear in a with known slope: finite differences recover the
        // slope exactly, and the payload equals slope * kappa(s, :).
        let mdp = quadratic_bandit();
        let policy = gauss_policy(&mdp, 0.2, 0.04);
        let mut critic = DcqracCritic::zero(&policy);
        // Set w so that Q = 0.7 * kappa(s, c_0)(a - mu(s)): slope 0.7 at
        // state 0 (kappa = 1 for the matching Kronecker centre).
        critic.w[0] = 0.7;
        let mu = policy.mean_action(&policy.layout.state.decode(0).unwrap());
        let grad = critic.action_gradient(0, &mu, 1e-4);
        assert!((grad[0] - 0.7).abs() < 1e-9, "slope {}", grad[0]);
    }

    #[test]
    fn frozen_target_keeps_critic_loss_non_increasing() {
        let mdp = quadratic_bandit();
        let policy = gauss_policy(&mdp, 0.4, 0.05);
        let mut state = DcqracState::new(policy);
        let config = DcqracConfig::new(0.1, 0.1);
        // Fill the buffer with a fixed batch.
        let ledger = QueryLedger::new();
        let mut rng = crate::rng::rng_from_seed(3);
        for _ in 0..64 {
            let tr = mdp.sample_trajectory(&state.policy, 1, &mut rng, &ledger);
            state.buffer.push(Transition {
                s: tr.states[0],
                a: tr.actions[0],
                r: tr.rewards[0],
                s_next: tr.states[0],
            });
        }
        let batch = state.buffer.clone();
        let loss = |state: &DcqracState| -> f64 {
            batch
                .iter()
                .map(|tr| {
                    let y = tr.r + mdp.gamma * state.target.state_value(tr.s_next);
                    let q = state.critic.q_value(tr.s, tr.a);
                    (q - y) * (q - y)
                })
                .sum::<f64>()
        };
        fit_critic(&mut state, &mdp, &batch, &config).unwrap();
        let mut last = loss(&state);
        for _ in 0..3 {
            fit_critic(&mut state, &mdp, &batch, &config).unwrap();
            let now = loss(&state);
            assert!(now <= last + 1e-9, "loss {last} -> {now}");
            last = now;
        }
    }

    #[test]
    fn bandit_head_moves_toward_peak() {
        let mdp = quadratic_bandit();
        let policy = gauss_policy(&mdp, 0.15, 0.04);
        let mut config = DcqracConfig::new(0.1, 0.1);
        config.iterations = 40;
        config.learning_rate = 0.1;
        let ledger = QueryLedger::new();
        let (state, _) = run_dcqrac(&mdp, policy, &config, 5, &ledger).unwrap();
        let mu = state
            .policy
            .mean_action(&state.policy.layout.state.decode(0).unwrap());
        assert!(
            (mu[0] - 0.625).abs() <= 0.1,
            "deterministic head at {} vs peak 0.625",
            mu[0]
        );
    }

    #[test]
    fn regularization_does_not_grow_action_gradient() {
        // Fixed data, increasing lambda: the tracked gradient bound must
        // not increase.
        let mdp = quadratic_bandit();
        let policy = gauss_policy(&mdp, 0.3, 0.05);
        let ledger = QueryLedger::new();
        let mut rng = crate::rng::rng_from_seed(11);
        let mut buffer = Vec::new();
        for _ in 0..96 {
            let tr = mdp.sample_trajectory(&policy, 1, &mut rng, &ledger);
            buffer.push(Transition {
                s: tr.states[0],
                a: tr.actions[0],
                r: tr.rewards[0],
                s_next: tr.states[0],
            });
        }
        let mut last_c2 = f64::INFINITY;
        for lambda in [1e-6, 1e-3, 1e-1, 10.0] {
            let mut state = DcqracState::new(policy.clone());
            state.buffer = buffer.clone();
            let mut config = DcqracConfig::new(0.1, 0.1);
            config.lambda0 = lambda;
            config.lambda_exponent = 0.0;
            let batch = state.buffer.clone();
            fit_critic(&mut state, &mdp, &batch, &config).unwrap();
            let mu = state
                .policy
                .mean_action(&state.policy.layout.state.decode(0).unwrap());
            let c2 = state.critic.action_gradient(0, &mu, 1e-4)[0].abs();
            assert!(c2 <= last_c2 + 1e-9, "lambda {lambda}: c2 {c2} > {last_c2}");
            last_c2 = c2;
        }
    }
}
