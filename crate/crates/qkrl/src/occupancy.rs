//! Occupancy distributions: the classical geometric-stopping sampler, exact
//! forward-DP computation, and the quantum occupancy oracle circuit built
//! from discount coins and coin-controlled copies.

use crate::error::Result;
use crate::gradient::oracle::{BinaryOracle, Outcome};
use crate::ledger::QueryLedger;
use crate::qmdp::{trajectory_statevector, ClassicalPolicy, TabularMdp};
use crate::rng::Rng;

/// Finite-horizon occupancy distribution
/// `nu_tilde(z) = (1 - gamma) sum_{t<T} gamma^t P_t(z)` with the no-return
/// atom `gamma^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyDistribution {
    /// Weights per flattened outcome (state-action pair or state).
    pub weights: Vec<f64>,
    /// No-return mass `gamma^T`.
    pub residual: f64,
    pub gamma: f64,
    pub horizon: usize,
}

impl OccupancyDistribution {
    /// `sum nu_tilde + gamma^T` must be 1.
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum::<f64>() + self.residual
    }

    /// Occupancy measure `nu = nu_tilde / (1 - gamma)`.
    pub fn measure(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w / (1.0 - self.gamma)).collect()
    }
}

/// Exact state-action occupancy by forward dynamic programming.
pub fn exact_occupancy<P: ClassicalPolicy + ?Sized>(
    mdp: &TabularMdp,
    policy: &P,
) -> OccupancyDistribution {
    let (s_n, a_n) = (mdp.n_states(), mdp.n_actions());
    let marginals = mdp.state_marginals(policy);
    let mut weights = vec![0.0; s_n * a_n];
    let mut discount = 1.0;
    for row in marginals.iter().take(mdp.horizon) {
        for s in 0..s_n {
            if row[s] == 0.0 {
                continue;
            }
            for a in 0..a_n {
                weights[s * a_n + a] += (1.0 - mdp.gamma) * discount * row[s] * policy.prob(s, a);
            }
        }
        discount *= mdp.gamma;
    }
    OccupancyDistribution {
        weights,
        residual: mdp.gamma.powi(mdp.horizon as i32),
        gamma: mdp.gamma,
        horizon: mdp.horizon,
    }
}

/// Exact state occupancy (action marginalized out).
pub fn exact_state_occupancy<P: ClassicalPolicy + ?Sized>(
    mdp: &TabularMdp,
    policy: &P,
) -> OccupancyDistribution {
    let joint = exact_occupancy(mdp, policy);
    let a_n = mdp.n_actions();
    let weights = (0..mdp.n_states())
        .map(|s| joint.weights[s * a_n..(s + 1) * a_n].iter().sum())
        .collect();
    OccupancyDistribution {
        weights,
        residual: joint.residual,
        gamma: joint.gamma,
        horizon: joint.horizon,
    }
}

/// One draw from the classical occupancy sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancySample {
    pub s: usize,
    pub a: usize,
    /// Step at which the sampler stopped.
    pub t: usize,
    /// False when no return happened within the horizon.
    pub returned: bool,
    /// Discounted return of the continued rollout of horizon length,
    /// starting at the returned pair (a critic target for Q(s, a)).
    pub tail_return: f64,
}

/// Geometric-stopping occupancy sampler: at each of `T` steps the current
/// pair is returned with probability `1 - gamma`; on return the rollout
/// continues for another `T` steps to supply the tail return.
pub fn classical_occupancy_sample<P: ClassicalPolicy + ?Sized>(
    mdp: &TabularMdp,
    policy: &P,
    rng: &mut Rng,
    ledger: &QueryLedger,
) -> OccupancySample {
    use rand::Rng as _;
    let trajectory = mdp.sample_trajectory(policy, 2 * mdp.horizon, rng, ledger);
    for t in 0..mdp.horizon {
        if rng.gen::<f64>() < 1.0 - mdp.gamma {
            return OccupancySample {
                s: trajectory.states[t],
                a: trajectory.actions[t],
                t,
                returned: true,
                tail_return: trajectory.suffix_return(t, mdp.horizon, mdp.gamma),
            };
        }
    }
    let last = mdp.horizon - 1;
    OccupancySample {
        s: trajectory.states[last],
        a: trajectory.actions[last],
        t: last,
        returned: false,
        tail_return: trajectory.suffix_return(last, mdp.horizon, mdp.gamma),
    }
}

/// Binary state-action occupancy oracle: outcomes are (s, a) pairs weighted
/// by `nu_tilde`, with the no-return mass folded onto the all-zero pair
/// exactly as the circuit's output register shows it. One query costs `T`
/// environment interactions.
pub fn build_state_action_occupancy_oracle<P: ClassicalPolicy + ?Sized>(
    mdp: &TabularMdp,
    policy: &P,
    payload: impl Fn(usize, usize) -> Vec<f64>,
    dim: usize,
) -> Result<BinaryOracle> {
    let occ = exact_occupancy(mdp, policy);
    let a_n = mdp.n_actions();
    let mut outcomes = Vec::new();
    for s in 0..mdp.n_states() {
        for a in 0..a_n {
            let mut prob = occ.weights[s * a_n + a];
            if s == 0 && a == 0 {
                prob += occ.residual;
            }
            if prob == 0.0 {
                continue;
            }
            outcomes.push(Outcome {
                prob,
                payload: payload(s, a),
            });
        }
    }
    BinaryOracle::new(outcomes, dim, mdp.horizon as u64)
}

/// Binary state occupancy oracle (action controls removed).
pub fn build_state_occupancy_oracle<P: ClassicalPolicy + ?Sized>(
    mdp: &TabularMdp,
    policy: &P,
    payload: impl Fn(usize) -> Vec<f64>,
    dim: usize,
) -> Result<BinaryOracle> {
    let occ = exact_state_occupancy(mdp, policy);
    let mut outcomes = Vec::new();
    for s in 0..mdp.n_states() {
        let mut prob = occ.weights[s];
        if s == 0 {
            prob += occ.residual;
        }
        if prob == 0.0 {
            continue;
        }
        outcomes.push(Outcome {
            prob,
            payload: payload(s),
        });
    }
    BinaryOracle::new(outcomes, dim, mdp.horizon as u64)
}

/// Undoes the no-return atom: `(raw - gamma^T X(zero)) / (1 - gamma)`
/// recovers `sum_z nu(z) X(z)`.
pub fn residual_correction(raw: &[f64], zero_payload: &[f64], gamma: f64, horizon: usize) -> Vec<f64> {
    let residual = gamma.powi(horizon as i32);
    raw.iter()
        .zip(zero_payload)
        .map(|(r, x0)| (r - residual * x0) / (1.0 - gamma))
        .collect()
}

/// Output of the occupancy oracle circuit.
#[derive(Debug, Clone)]
pub struct OccupancyCircuit {
    /// Marginal probabilities of the output register(s): per (s, a) pair or
    /// per state, with the residual mass landing on index 0.
    pub output_distribution: Vec<f64>,
    /// Probability of the all-continue coin pattern (`gamma^T`).
    pub no_return_prob: f64,
}

/// Builds and runs the occupancy oracle circuit: trajectory superposition,
/// discount-coin ladder `U_gamma = R_Y(2 asin(sqrt(gamma)))` multi-controlled
/// on earlier coins, and coin-pattern-controlled copies of `(s_t, a_t)` into
/// the output register.
pub fn occupancy_circuit<P: ClassicalPolicy + ?Sized>(
    mdp: &TabularMdp,
    policy: &P,
    include_actions: bool,
    ledger: &QueryLedger,
) -> Result<OccupancyCircuit> {
    let t_max = mdp.horizon;
    let ws = mdp.layout.state.qubits();
    let wa = mdp.layout.action.qubits();
    let mut extra: Vec<(String, usize)> = (0..t_max).map(|t| (format!("coin{t}"), 1)).collect();
    extra.push(("out_s".to_string(), ws));
    if include_actions {
        extra.push(("out_a".to_string(), wa));
    }
    let extra_refs: Vec<(&str, usize)> = extra.iter().map(|(n, w)| (n.as_str(), *w)).collect();
    let (mut sv, s_regs, a_regs) = trajectory_statevector(mdp, &extra_refs)?;

    mdp.oracle_init(&mut sv, s_regs[0], ledger)?;
    mdp.oracle_trajectory(&mut sv, policy, &s_regs, &a_regs, ledger)?;

    let coins: Vec<usize> = (0..t_max)
        .map(|t| sv.register(&format!("coin{t}")).map(|r| sv.reg_offset(r)))
        .collect::<Result<_>>()?;
    let out_s = sv.register("out_s")?;
    let out_a = if include_actions {
        Some(sv.register("out_a")?)
    } else {
        None
    };

    // Discount coins: coin_t = |1> means "continue past step t", flipped
    // only while every earlier coin continued.
    let u_gamma = 2.0 * mdp.gamma.sqrt().asin();
    for (t, &coin) in coins.iter().enumerate() {
        let controls: Vec<(usize, bool)> = coins[..t].iter().map(|&q| (q, true)).collect();
        sv.apply_multicontrolled_ry(coin, &controls, u_gamma)?;
    }

    // Copy the stopped pair: pattern (1, ..., 1, 0) over coins 0..=t.
    for t in 0..t_max {
        let mut pattern: Vec<(usize, bool)> = coins[..t].iter().map(|&q| (q, true)).collect();
        pattern.push((coins[t], false));
        for b in 0..ws {
            let mut controls = pattern.clone();
            controls.push((sv.reg_offset(s_regs[t]) + b, true));
            sv.apply_multicontrolled_x(sv.reg_offset(out_s) + b, &controls)?;
        }
        if let Some(out_a) = out_a {
            for b in 0..wa {
                let mut controls = pattern.clone();
                controls.push((sv.reg_offset(a_regs[t]) + b, true));
                sv.apply_multicontrolled_x(sv.reg_offset(out_a) + b, &controls)?;
            }
        }
    }

    // Joint marginal of the output register(s).
    let n_out = if include_actions {
        mdp.n_states() * mdp.n_actions()
    } else {
        mdp.n_states()
    };
    let mut output_distribution = vec![0.0; n_out];
    let mut no_return_prob = 0.0;
    let all_ones = coins.len();
    for (idx, amp) in sv.amplitudes().iter().enumerate() {
        let p = amp.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let s = sv.value_of(idx, out_s);
        let key = match out_a {
            Some(out_a) => s * mdp.n_actions() + sv.value_of(idx, out_a),
            None => s,
        };
        output_distribution[key] += p;
        if coins.iter().filter(|&&q| (idx >> q) & 1 == 1).count() == all_ones {
            no_return_prob += p;
        }
    }
    Ok(OccupancyCircuit {
        output_distribution,
        no_return_prob,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmdp::testmdp::{constant_reward_mdp, random_mdp, TablePolicy};

    #[test]
    fn occupancy_mass_accounting() {
        let mdp = random_mdp(1, 0.6, 3);
        let policy = TablePolicy::uniform(2, 2);
        let occ = exact_occupancy(&mdp, &policy);
        assert!((occ.total_mass() - 1.0).abs() < 1e-12);
        assert!((occ.residual - 0.6f64.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn near_zero_discount_concentrates_on_start() {
        let mdp = random_mdp(2, 1e-12, 3);
        let mut policy = TablePolicy::uniform(2, 2);
        policy.logits = vec![3.0, -3.0, 0.0, 0.0];
        let occ = exact_occupancy(&mdp, &policy);
        // Mass concentrates on t = 0 pairs: d0(s) pi(a|s).
        for s in 0..2 {
            for a in 0..2 {
                let expected = mdp.d0(s) * policy.prob(s, a);
                assert!((occ.weights[s * 2 + a] - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn deterministic_chain_geometric_weights() {
        // Single effective state: stop-time weights are (1-g) g^t by hand.
        let mdp = constant_reward_mdp(0.5, 3);
        let policy = TablePolicy::uniform(2, 2);
        let occ = exact_occupancy(&mdp, &policy);
        // All mass sits in state 0, split evenly over two actions.
        let per_action: f64 = (0..3).map(|t| 0.5f64.powi(t) * 0.5).sum::<f64>() / 2.0;
        assert!((occ.weights[0] - per_action).abs() < 1e-12);
        assert!((occ.weights[1] - per_action).abs() < 1e-12);
        assert!((occ.residual - 0.125).abs() < 1e-15);
    }

    #[test]
    fn sampler_zero_discount_returns_start_pair() {
        let mdp = random_mdp(3, 0.0, 3);
        let policy = TablePolicy::uniform(2, 2);
        let ledger = QueryLedger::new();
        let mut rng = crate::rng::rng_from_seed(4);
        for _ in 0..50 {
            let s = classical_occupancy_sample(&mdp, &policy, &mut rng, &ledger);
            assert!(s.returned);
            assert_eq!(s.t, 0);
        }
    }

    #[test]
    fn sampler_stop_times_geometric() {
        let mdp = constant_reward_mdp(0.5, 3);
        let policy = TablePolicy::uniform(2, 2);
        let ledger = QueryLedger::new();
        let mut rng = crate::rng::rng_from_seed(5);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let s = classical_occupancy_sample(&mdp, &policy, &mut rng, &ledger);
            if s.returned {
                counts[s.t] += 1;
            } else {
                counts[3] += 1;
            }
        }
        let expected = [0.5, 0.25, 0.125, 0.125];
        for (c, e) in counts.iter().zip(expected) {
            let freq = *c as f64 / n as f64;
            assert!((freq - e).abs() < 0.01, "freq {freq} vs {e}");
        }
    }

    #[test]
    fn sampler_matches_exact_occupancy_tv() {
        let mdp = random_mdp(7, 0.5, 3);
        let mut policy = TablePolicy::uniform(2, 2);
        policy.logits = vec![0.5, -0.5, -0.2, 0.2];
        let occ = exact_occupancy(&mdp, &policy);
        let ledger = QueryLedger::new();
        let mut rng = crate::rng::rng_from_seed(6);
        let n = 100_000;
        let mut counts = vec![0usize; 4];
        let mut residual_count = 0usize;
        for _ in 0..n {
            let s = classical_occupancy_sample(&mdp, &policy, &mut rng, &ledger);
            if s.returned {
                counts[s.s * 2 + s.a] += 1;
            } else {
                residual_count += 1;
            }
        }
        let mut tv = (residual_count as f64 / n as f64 - occ.residual).abs();
        for (c, w) in counts.iter().zip(&occ.weights) {
            tv += (*c as f64 / n as f64 - w).abs();
        }
        tv /= 2.0;
        assert!(tv <= 0.01, "TV distance {tv}");
    }

    #[test]
    fn circuit_matches_exact_occupancy() {
        for seed in [0u64, 11] {
            let mdp = random_mdp(seed, 0.6, 3);
            let mut policy = TablePolicy::uniform(2, 2);
            policy.logits = vec![0.3, -0.3, 0.1, -0.1];
            let ledger = QueryLedger::new();
            let circuit = occupancy_circuit(&mdp, &policy, true, &ledger).unwrap();
            let occ = exact_occupancy(&mdp, &policy);
            for (idx, &w) in occ.weights.iter().enumerate() {
                let expected = if idx == 0 { w + occ.residual } else { w };
                assert!(
                    (circuit.output_distribution[idx] - expected).abs() < 1e-10,
                    "pair {idx}: circuit {} vs exact {expected}",
                    circuit.output_distribution[idx]
                );
            }
            assert!((circuit.no_return_prob - occ.residual).abs() < 1e-10);
        }
    }

    #[test]
    fn circuit_state_marginal_variant() {
        let mdp = random_mdp(13, 0.5, 3);
        let policy = TablePolicy::uniform(2, 2);
        let ledger = QueryLedger::new();
        let circuit = occupancy_circuit(&mdp, &policy, false, &ledger).unwrap();
        let occ = exact_state_occupancy(&mdp, &policy);
        for (s, &w) in occ.weights.iter().enumerate() {
            let expected = if s == 0 { w + occ.residual } else { w };
            assert!((circuit.output_distribution[s] - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn geometric_circuit_weights() {
        // Single effective state, gamma = 0.5, T = 3: copy-time masses
        // (0.5, 0.25, 0.125) plus residual 0.125 on the zero branch.
        let mdp = constant_reward_mdp(0.5, 3);
        let policy = TablePolicy::uniform(2, 2);
        let ledger = QueryLedger::new();
        let circuit = occupancy_circuit(&mdp, &policy, false, &ledger).unwrap();
        // State register stays 0 for every branch; residual lands there too.
        assert!((circuit.output_distribution[0] - 1.0).abs() < 1e-10);
        assert!((circuit.no_return_prob - 0.125).abs() < 1e-10);
    }

    #[test]
    fn oracle_expectation_and_residual_correction() {
        let mdp = random_mdp(17, 0.6, 3);
        let mut policy = TablePolicy::uniform(2, 2);
        policy.logits = vec![0.2, 0.4, -0.3, 0.0];
        // Arbitrary payload over pairs.
        let payload = |s: usize, a: usize| vec![(s as f64 + 1.0) * 0.3 - a as f64 * 0.7, s as f64];
        let oracle =
            build_state_action_occupancy_oracle(&mdp, &policy, payload, 2).unwrap();
        let raw = oracle.expectation();
        let corrected = residual_correction(&raw, &payload(0, 0), mdp.gamma, mdp.horizon);
        // Direct sum over the occupancy measure.
        let occ = exact_occupancy(&mdp, &policy);
        let nu = occ.measure();
        let mut direct = vec![0.0; 2];
        for s in 0..2 {
            for a in 0..2 {
                let x = payload(s, a);
                for (d, xi) in direct.iter_mut().zip(&x) {
                    *d += nu[s * 2 + a] * xi;
                }
            }
        }
        for (c, d) in corrected.iter().zip(&direct) {
            assert!((c - d).abs() < 1e-10, "corrected {c} vs direct {d}");
        }
    }

    #[test]
    fn residual_correction_edge_cases() {
        // gamma^T = 0 limit -> raw / (1 - gamma).
        let corrected = residual_correction(&[0.3], &[5.0], 0.0, 3);
        assert!((corrected[0] - 0.3).abs() < 1e-15);
        // Zero payload -> 0.
        let corrected = residual_correction(&[0.0], &[0.0], 0.5, 3);
        assert_eq!(corrected[0], 0.0);
    }

    #[test]
    fn tail_returns_estimate_q_values() {
        let mdp = random_mdp(23, 0.5, 3);
        let policy = TablePolicy::uniform(2, 2);
        let q = mdp.q_values(&policy);
        let ledger = QueryLedger::new();
        let mut rng = crate::rng::rng_from_seed(9);
        let mut sums = vec![0.0; 4];
        let mut counts = vec![0usize; 4];
        for _ in 0..60_000 {
            let s = classical_occupancy_sample(&mdp, &policy, &mut rng, &ledger);
            if s.returned {
                sums[s.s * 2 + s.a] += s.tail_return;
                counts[s.s * 2 + s.a] += 1;
            }
        }
        for s in 0..2 {
            for a in 0..2 {
                let idx = s * 2 + a;
                if counts[idx] < 1000 {
                    continue;
                }
                let mean = sums[idx] / counts[idx] as f64;
                assert!(
                    (mean - q[s][a]).abs() < 0.03,
                    "tail mean {mean} vs Q {q:?} at ({s},{a})"
                );
            }
        }
    }
}
