//! Named benchmark environments and policies used by the CLI and the
//! acceptance studies.

use crate::encoding::{DimRange, GridCodec, RegisterLayout};
use crate::error::{Error, Result};
use crate::kernels::{OperatorKernel, ScalarKernel};
use crate::policies::{GaussQkp, Policy, RawPqc};
use crate::qmdp::TabularMdp;

fn small_layout(a_bits: usize, reward_bits: usize) -> RegisterLayout {
    RegisterLayout::new(
        GridCodec::new(1, 1, DimRange::new(0.0, 1.0)).expect("valid codec"),
        GridCodec::new(1, a_bits, DimRange::new(0.0, 1.0)).expect("valid codec"),
        reward_bits,
        1.0,
    )
    .expect("valid layout")
}

/// Two-armed bandit: action 0 pays 1, action 1 pays 0; horizon 1.
pub fn bandit_mdp() -> TabularMdp {
    let layout = small_layout(1, 4);
    let p = vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
    let r = vec![1.0, 0.0, 0.0, 0.0];
    TabularMdp::new(layout, p, r, None, 0.5, 1, 1.0).expect("valid bandit")
}

/// Gaussian kernel policy for the bandit, started between the two arms.
pub fn bandit_policy() -> GaussQkp {
    let mdp = bandit_mdp();
    GaussQkp::new(
        mdp.layout,
        OperatorKernel::isotropic(ScalarKernel::KroneckerDelta, 1).expect("psd"),
        mdp.layout.state.grid(),
        vec![vec![0.5], vec![0.0]],
        vec![0.25],
    )
    .expect("valid policy")
}

/// Two-state chain: action 1 moves from state 0 to the rewarding state 1,
/// which is absorbing; horizon 4.
pub fn chain_mdp() -> TabularMdp {
    let layout = small_layout(1, 4);
    // [s][a][s'] rows: s0/a0 stay, s0/a1 move, s1 absorbing.
    let p = vec![
        1.0, 0.0, // s0 a0
        0.0, 1.0, // s0 a1
        0.0, 1.0, // s1 a0
        0.0, 1.0, // s1 a1
    ];
    let r = vec![0.0, 0.0, 1.0, 1.0];
    TabularMdp::new(layout, p, r, None, 0.5, 4, 1.0).expect("valid chain")
}

/// Gaussian kernel policy for the chain, started undecided at both states.
pub fn chain_policy() -> GaussQkp {
    let mdp = chain_mdp();
    GaussQkp::new(
        mdp.layout,
        OperatorKernel::isotropic(ScalarKernel::KroneckerDelta, 1).expect("psd"),
        mdp.layout.state.grid(),
        vec![vec![0.5], vec![0.5]],
        vec![0.25],
    )
    .expect("valid policy")
}

/// Random row-stochastic two-state two-action benchmark MDP.
pub fn two_state_mdp(seed: u64) -> TabularMdp {
    random_mdp(seed, 1, 1, 0.5, 3)
}

/// Random row-stochastic MDP over a `2^s_bits`-state, `2^a_bits`-action
/// grid.
pub fn random_mdp(seed: u64, s_bits: usize, a_bits: usize, gamma: f64, horizon: usize) -> TabularMdp {
    use rand::Rng as _;
    let mut rng = crate::rng::rng_from_seed(seed);
    let layout = RegisterLayout::new(
        GridCodec::new(1, s_bits, DimRange::new(0.0, 1.0)).expect("valid codec"),
        GridCodec::new(1, a_bits, DimRange::new(0.0, 1.0)).expect("valid codec"),
        4,
        1.0,
    )
    .expect("valid layout");
    let (s_n, a_n) = (layout.n_states(), layout.n_actions());
    let mut p = vec![0.0; s_n * a_n * s_n];
    for row in 0..s_n * a_n {
        let raw: Vec<f64> = (0..s_n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        for (s2, v) in raw.iter().enumerate() {
            p[row * s_n + s2] = v / total;
        }
        // Force the row to sum to exactly 1 despite rounding.
        let sum: f64 = (0..s_n).map(|s2| p[row * s_n + s2]).sum();
        p[row * s_n + s_n - 1] += 1.0 - sum;
    }
    let r: Vec<f64> = (0..s_n * a_n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut d0: Vec<f64> = (0..s_n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = d0.iter().sum();
    for v in d0.iter_mut() {
        *v /= total;
    }
    let sum: f64 = d0.iter().sum();
    d0[s_n - 1] += 1.0 - sum;
    TabularMdp::new(layout, p, r, Some(d0), gamma, horizon, 1.0).expect("valid mdp")
}

/// Random state-centred softmax policy on an arbitrary layout.
pub fn random_softmax_policy(seed: u64, layout: RegisterLayout) -> crate::policies::SoftmaxQkp {
    use rand::Rng as _;
    let mut rng = crate::rng::rng_from_seed(seed.wrapping_add(0x50F7));
    let centres = layout.state.grid();
    let weights: Vec<Vec<f64>> = (0..layout.n_actions())
        .map(|_| (0..centres.len()).map(|_| rng.gen_range(-0.8..0.8)).collect())
        .collect();
    crate::policies::SoftmaxQkp::new(
        layout,
        ScalarKernel::Rbf { lengthscale: 0.6 },
        centres,
        weights,
        1.5,
    )
    .expect("valid policy")
}

/// Two-parameter Raw-PQC on the two-state layout (one angle per state).
pub fn two_state_rawpqc() -> RawPqc {
    let layout = small_layout(1, 4);
    RawPqc::new(
        layout,
        ScalarKernel::KroneckerDelta,
        layout.state.grid(),
        vec![vec![1.1], vec![2.0]],
    )
    .expect("valid policy")
}

/// Bandit with a quadratic reward peaking at a = 0.625 over an 8-point
/// action grid; the deterministic-gradient benchmark.
pub fn quadratic_bandit_mdp() -> TabularMdp {
    let layout = RegisterLayout::new(
        GridCodec::new(1, 1, DimRange::new(0.0, 1.0)).expect("valid codec"),
        GridCodec::new(1, 3, DimRange::new(0.0, 1.0)).expect("valid codec"),
        6,
        1.0,
    )
    .expect("valid layout");
    let (s_n, a_n) = (2, 8);
    let mut p = vec![0.0; s_n * a_n * s_n];
    let mut r = vec![0.0; s_n * a_n];
    for s in 0..s_n {
        for a in 0..a_n {
            p[(s * a_n + a) * s_n + s] = 1.0;
            if s == 0 {
                let av = layout.action.grid_value(a);
                r[a] = (1.0 - (av - 0.625) * (av - 0.625)).clamp(0.0, 1.0);
            }
        }
    }
    TabularMdp::new(layout, p, r, None, 0.5, 1, 1.0).expect("valid bandit")
}

pub fn quadratic_bandit_policy() -> GaussQkp {
    let mdp = quadratic_bandit_mdp();
    GaussQkp::new(
        mdp.layout,
        OperatorKernel::isotropic(ScalarKernel::KroneckerDelta, 1).expect("psd"),
        mdp.layout.state.grid(),
        vec![vec![0.15], vec![0.5]],
        vec![0.04],
    )
    .expect("valid policy")
}

/// Resolves an environment preset by name.
pub fn mdp_by_name(name: &str) -> Result<TabularMdp> {
    match name {
        "two-armed-bandit" => Ok(bandit_mdp()),
        "two-state-chain" => Ok(chain_mdp()),
        "two-state-random" => Ok(two_state_mdp(100)),
        "quadratic-bandit" => Ok(quadratic_bandit_mdp()),
        _ => Err(Error::config(format!("unknown MDP preset '{name}'"))),
    }
}

/// Resolves a policy preset by name.
pub fn policy_by_name(name: &str) -> Result<Policy> {
    match name {
        "bandit-gauss" => Ok(Policy::Gauss(bandit_policy())),
        "chain-gauss" => Ok(Policy::Gauss(chain_policy())),
        "two-state-rawpqc" => Ok(Policy::RawPqc(two_state_rawpqc())),
        "quadratic-bandit-gauss" => Ok(Policy::Gauss(quadratic_bandit_policy())),
        _ => Err(Error::config(format!("unknown policy preset '{name}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmdp::ClassicalPolicy;

    #[test]
    fn presets_validate() {
        for name in [
            "two-armed-bandit",
            "two-state-chain",
            "two-state-random",
            "quadratic-bandit",
        ] {
            mdp_by_name(name).unwrap().validate().unwrap();
        }
        for name in [
            "bandit-gauss",
            "chain-gauss",
            "two-state-rawpqc",
            "quadratic-bandit-gauss",
        ] {
            let p = policy_by_name(name).unwrap();
            assert!(p.n_params() > 0);
        }
        assert!(mdp_by_name("nope").is_err());
    }

    #[test]
    fn chain_optimum_is_early_switch() {
        let mdp = chain_mdp();
        // Reach the rewarding state at t = 1: V* = 0.5 + 0.25 + 0.125.
        assert!((mdp.optimal_value() - 0.875).abs() < 1e-12);
    }
}
