//! Binary oracles for vector-valued random variables.
//!
//! A binary oracle prepares `sum_w sqrt(P(w)) |w>|X(w)>` for an enumerable
//! outcome space. At desk scale the outcome distribution is explicit, which
//! lets estimators synthesize exact directional phases and lets tests check
//! every expectation against enumeration.

use crate::encoding::GridCodec;
use crate::error::{Error, Result};
use crate::qmdp::{ClassicalPolicy, TabularMdp};
use crate::rng::Rng;

/// l2-norm truncation: `x` if `||x||_2` lies in the closed interval
/// `[a, b]`, the zero vector otherwise.
pub fn truncate(x: &[f64], a: f64, b: f64) -> Vec<f64> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm >= a && norm <= b {
        x.to_vec()
    } else {
        vec![0.0; x.len()]
    }
}

/// One outcome of a quantum experiment.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub prob: f64,
    pub payload: Vec<f64>,
}

/// Enumerable binary oracle `|0> -> sum_w sqrt(P(w)) |w>|X(w)>`.
#[derive(Debug, Clone)]
pub struct BinaryOracle {
    dim: usize,
    outcomes: Vec<Outcome>,
    /// Environment interactions charged per oracle query.
    pub interactions_per_query: u64,
}

impl BinaryOracle {
    pub fn new(outcomes: Vec<Outcome>, dim: usize, interactions_per_query: u64) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::contract("oracle needs at least one outcome"));
        }
        let total: f64 = outcomes.iter().map(|o| o.prob).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::contract(format!(
                "outcome probabilities sum to {total}"
            )));
        }
        for o in &outcomes {
            if o.prob < 0.0 {
                return Err(Error::contract("negative outcome probability"));
            }
            if o.payload.len() != dim {
                return Err(Error::contract("payload dimension mismatch"));
            }
            if o.payload.iter().any(|v| !v.is_finite()) {
                return Err(Error::config("payload must be finite"));
            }
        }
        Ok(Self {
            dim,
            outcomes,
            interactions_per_query,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    /// Exact expectation by enumeration.
    pub fn expectation(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.dim];
        for o in &self.outcomes {
            for (acc, x) in e.iter_mut().zip(&o.payload) {
                *acc += o.prob * x;
            }
        }
        e
    }

    /// Largest payload l2 norm over outcomes.
    pub fn max_l2(&self) -> f64 {
        self.outcomes
            .iter()
            .map(|o| o.payload.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Largest payload l1 norm over outcomes.
    pub fn max_l1(&self) -> f64 {
        self.outcomes
            .iter()
            .map(|o| o.payload.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Trace of the payload covariance.
    pub fn covariance_trace(&self) -> f64 {
        let mean = self.expectation();
        self.outcomes
            .iter()
            .map(|o| {
                o.prob
                    * o.payload
                        .iter()
                        .zip(&mean)
                        .map(|(x, m)| (x - m) * (x - m))
                        .sum::<f64>()
            })
            .sum()
    }

    /// Samples one outcome (a measurement of the oracle).
    pub fn sample(&self, rng: &mut Rng) -> &Outcome {
        use rand::Rng as _;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for o in &self.outcomes {
            acc += o.prob;
            if u < acc {
                return o;
            }
        }
        self.outcomes.last().expect("nonempty")
    }

    /// Oracle with every payload mapped through `f` (normalization,
    /// truncation shells, payload substitution).
    pub fn map_payload(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<BinaryOracle> {
        let outcomes = self
            .outcomes
            .iter()
            .map(|o| Outcome {
                prob: o.prob,
                payload: f(&o.payload),
            })
            .collect::<Vec<_>>();
        let dim = outcomes.first().map(|o| o.payload.len()).unwrap_or(0);
        BinaryOracle::new(outcomes, dim, self.interactions_per_query)
    }

    /// Snaps payloads to a fixed-point codec (the register encoding of
    /// `|X(w)>`); the codec must round-trip every quantized value.
    pub fn quantize(&self, codec: &GridCodec) -> Result<BinaryOracle> {
        if codec.dims != 1 {
            return Err(Error::contract("payload codec is applied per coordinate"));
        }
        self.map_payload(|p| {
            p.iter()
                .map(|&x| {
                    let code = codec.encode(&[x]).expect("payload within codec range");
                    codec.decode(code).expect("code in range")[0]
                })
                .collect()
        })
    }
}

/// Binary oracle for the likelihood-ratio gradient estimator: outcomes are
/// trajectories, payloads `(sum_t grad log pi(a_t|s_t)) R(tau)`.
pub fn reinforce_oracle<P: ClassicalPolicy>(mdp: &TabularMdp, policy: &P) -> Result<BinaryOracle> {
    let d = policy.n_params();
    let mut outcomes = Vec::new();
    for tau in mdp.enumerate_trajectories(policy)? {
        let mut score = vec![0.0; d];
        for (s, a) in tau.states.iter().zip(&tau.actions) {
            for (acc, g) in score.iter_mut().zip(policy.grad_log_prob(*s, *a)) {
                *acc += g;
            }
        }
        let payload: Vec<f64> = score.iter().map(|g| g * tau.ret).collect();
        if payload.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("payload overflow in reinforce oracle"));
        }
        outcomes.push(Outcome {
            prob: tau.prob,
            payload,
        });
    }
    BinaryOracle::new(outcomes, d, mdp.horizon as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmdp::testmdp::{constant_reward_mdp, random_mdp, TablePolicy};

    #[test]
    fn truncate_cases() {
        assert_eq!(truncate(&[0.3, 0.4], 0.0, 1.0), vec![0.3, 0.4]);
        assert_eq!(truncate(&[2.0, 0.0], 0.0, 1.0), vec![0.0, 0.0]);
        // Closed interval at the boundary.
        assert_eq!(truncate(&[1.0, 0.0], 0.0, 1.0), vec![1.0, 0.0]);
        // Idempotent.
        let once = truncate(&[0.9, 0.1], 0.5, 1.0);
        assert_eq!(truncate(&once, 0.5, 1.0), once);
    }

    #[test]
    fn oracle_validates_distribution() {
        let bad = BinaryOracle::new(
            vec![Outcome {
                prob: 0.7,
                payload: vec![1.0],
            }],
            1,
            1,
        );
        assert!(matches!(bad, Err(Error::Contract(_))));
    }

    #[test]
    fn zero_rewards_zero_payloads() {
        let layout = crate::qmdp::testmdp::layout_2s_2a();
        let p = vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        let r = vec![0.0; 4];
        let mdp = TabularMdp::new(layout, p, r, None, 0.5, 2, 1.0).unwrap();
        let policy = TablePolicy::uniform(2, 2);
        let oracle = reinforce_oracle(&mdp, &policy).unwrap();
        assert!(oracle.max_l2() < 1e-15);
    }

    #[test]
    fn one_step_bandit_expectation_by_enumeration() {
        let mdp = constant_reward_mdp(0.5, 1);
        let mut policy = TablePolicy::uniform(2, 2);
        policy.logits = vec![0.4, -0.4, 0.0, 0.0];
        let oracle = reinforce_oracle(&mdp, &policy).unwrap();
        // X(a) = grad log pi(a) r(a); expectation via direct enumeration.
        let mut direct = vec![0.0; 4];
        for a in 0..2 {
            let pa = policy.prob(0, a);
            let g = policy.grad_log_prob(0, a);
            for (d, gi) in direct.iter_mut().zip(g) {
                *d += pa * mdp.r(0, a) * gi;
            }
        }
        for (o, d) in oracle.expectation().iter().zip(&direct) {
            assert!((o - d).abs() < 1e-12);
        }
    }

    #[test]
    fn expectation_matches_exact_policy_gradient() {
        for seed in 0..5 {
            let mdp = random_mdp(seed + 30, 0.6, 3);
            let mut policy = TablePolicy::uniform(2, 2);
            policy.logits = vec![0.3, -0.1, 0.2, -0.5];
            let oracle = reinforce_oracle(&mdp, &policy).unwrap();
            let lr = mdp.value_gradient_enumeration(&policy).unwrap();
            for (o, g) in oracle.expectation().iter().zip(&lr) {
                assert!((o - g).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn quantized_payloads_round_trip() {
        let mdp = random_mdp(2, 0.5, 2);
        let policy = TablePolicy::uniform(2, 2);
        let oracle = reinforce_oracle(&mdp, &policy).unwrap();
        let bound = oracle.max_l2().max(1e-9);
        let codec = GridCodec::new(
            1,
            12,
            crate::encoding::DimRange::new(-bound, bound),
        )
        .unwrap();
        let q = oracle.quantize(&codec).unwrap();
        for (a, b) in oracle.outcomes().iter().zip(q.outcomes()) {
            for (x, y) in a.payload.iter().zip(&b.payload) {
                assert!((x - y).abs() <= codec.spacing() / 2.0 + 1e-12);
                // Quantized values are fixed points of the codec.
                let code = codec.encode(&[*y]).unwrap();
                assert_eq!(codec.decode(code).unwrap()[0], *y);
            }
        }
    }
}
