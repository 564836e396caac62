//! Compatibility and natural-gradient identities for exact least-squares
//! critics on enumerable MDPs.
//!
//! The critic is fit by occupancy-weighted least squares of the state-action
//! values onto the exact log-policy gradient features, expanded over time
//! steps with remaining-horizon targets so both identities hold at finite
//! horizon: the normal equations make the substitution identity exact, and
//! the finite-horizon policy-gradient theorem makes `F(mu) w* = grad V`.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::qmdp::{ClassicalPolicy, TabularMdp};

/// Outcome of the identity checks.
#[derive(Debug, Clone)]
pub struct NaturalGradientReport {
    /// Least-squares critic weights in feature space.
    pub w_star: Vec<f64>,
    /// Fisher information `F = sum nu grad log pi grad log pi^T`.
    pub fisher: DMatrix<f64>,
    /// `F w*`, the gradient reconstructed through the critic.
    pub critic_gradient: Vec<f64>,
    /// Exact policy gradient (finite differences of the exact value).
    pub exact_gradient: Vec<f64>,
    /// sup-norm residual of the normal equations
    /// `sum nu (Q - Qhat) grad log pi` (compatibility identity).
    pub compatibility_gap: f64,
    /// `|| F w* - grad V ||_inf` (natural-gradient identity).
    pub natural_identity_gap: f64,
    /// Baseline subtraction shift of the enumerated gradient.
    pub baseline_shift: f64,
    /// Pseudo-inverse was needed (rank-deficient Fisher matrix).
    pub rank_deficient: bool,
}

/// Runs both identity checks with an exact least-squares critic.
pub fn natural_gradient_check<P: ClassicalPolicy + Clone>(
    mdp: &TabularMdp,
    policy: &P,
) -> Result<NaturalGradientReport> {
    let d = policy.n_params();
    let (s_n, a_n, t_max) = (mdp.n_states(), mdp.n_actions(), mdp.horizon);
    let marginals = mdp.state_marginals(policy);
    let q_tables = mdp.q_tables(policy);

    // Time-expanded dataset: weight gamma^t P_t(s) pi(a|s), feature
    // grad log pi(a|s), target Q over the remaining T - t steps.
    let features: Vec<Vec<Vec<f64>>> = (0..s_n)
        .map(|s| (0..a_n).map(|a| policy.grad_log_prob(s, a)).collect())
        .collect();
    let mut fisher = DMatrix::zeros(d, d);
    let mut moment = DVector::zeros(d); // sum w Q grad log pi
    let mut baseline_moment = DVector::zeros(d); // sum w (Q - b) grad log pi
    let mut discount = 1.0;
    for t in 0..t_max {
        let q_t = &q_tables[t_max - t];
        for s in 0..s_n {
            let ps = marginals[t][s];
            if ps == 0.0 {
                continue;
            }
            let b: f64 = (0..a_n).map(|a| policy.prob(s, a) * q_t[s][a]).sum();
            for a in 0..a_n {
                let w = discount * ps * policy.prob(s, a);
                if w == 0.0 {
                    continue;
                }
                let x = &features[s][a];
                for i in 0..d {
                    moment[i] += w * q_t[s][a] * x[i];
                    baseline_moment[i] += w * (q_t[s][a] - b) * x[i];
                    for j in 0..d {
                        fisher[(i, j)] += w * x[i] * x[j];
                    }
                }
            }
        }
        discount *= mdp.gamma;
    }

    // Solve F w* = moment; fall back to the pseudo-inverse when F is
    // rank-deficient and flag it.
    let svd = fisher.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank_deficient = svd
        .singular_values
        .iter()
        .any(|&s| s <= 1e-10 * max_sv.max(1e-300));
    let w_star = svd
        .solve(&moment, 1e-12 * max_sv.max(1e-300))
        .map_err(crate::error::Error::solver)?;

    let critic_gradient: Vec<f64> = (&fisher * &w_star).iter().cloned().collect();
    let exact_gradient = mdp.value_gradient_fd(policy, 1e-5);

    // Normal-equation residual: sum w (Q - <w*, x>) x.
    let mut residual = vec![0.0; d];
    let mut discount = 1.0;
    for t in 0..t_max {
        let q_t = &q_tables[t_max - t];
        for s in 0..s_n {
            let ps = marginals[t][s];
            if ps == 0.0 {
                continue;
            }
            for a in 0..a_n {
                let w = discount * ps * policy.prob(s, a);
                if w == 0.0 {
                    continue;
                }
                let x = &features[s][a];
                let qhat: f64 = x.iter().zip(w_star.iter()).map(|(xi, wi)| xi * wi).sum();
                for (r, xi) in residual.iter_mut().zip(x) {
                    *r += w * (q_t[s][a] - qhat) * xi;
                }
            }
        }
        discount *= mdp.gamma;
    }
    let compatibility_gap = residual.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let natural_identity_gap = critic_gradient
        .iter()
        .zip(&exact_gradient)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    // Baseline invariance: subtracting b(s) leaves the moment unchanged.
    let baseline_shift = moment
        .iter()
        .zip(baseline_moment.iter())
        .map(|(a, b): (&f64, &f64)| (a - b).abs())
        .fold(0.0, f64::max);

    Ok(NaturalGradientReport {
        w_star: w_star.iter().cloned().collect(),
        fisher,
        critic_gradient,
        exact_gradient,
        compatibility_gap,
        natural_identity_gap,
        baseline_shift,
        rank_deficient,
    })
}
