//! Gaussian quantum kernel policy: a representer-formula mean with a
//! diagonal-covariance Gaussian wavefunction over the action grid.
//!
//! The sampled policy is the discretized Gaussian `pi(a|s) = |c(a)|^2` with
//! amplitudes `c(a) ~ exp(-(a - mu(s))^T Sigma^-1 (a - mu(s)) / 2)` prepared
//! by the conditional-rotation ladder. Two gradient forms are exposed: the
//! exact gradient of the discrete grid policy (used by enumeration oracles)
//! and the continuous-density functional form used in the actor-critic
//! payloads and smoothness bounds.

use serde::{Deserialize, Serialize};

use crate::encoding::RegisterLayout;
use crate::error::{Error, Result};
use crate::kernels::OperatorKernel;
use crate::ledger::QueryLedger;
use crate::qmdp::ClassicalPolicy;
use crate::statevector::{RegId, StateVector};

use super::kitaev_webb::{apply_gaussian_ladder, direct_gaussian_amplitudes};

/// Gaussian kernel policy with classically parametrised mean and covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussQkp {
    pub layout: RegisterLayout,
    pub kernel: OperatorKernel,
    /// Policy centres in state space.
    pub centres: Vec<Vec<f64>>,
    /// Policy weights `beta[i]`, one action-space vector per centre.
    pub weights: Vec<Vec<f64>>,
    /// Diagonal of the covariance matrix (variances), one entry per action
    /// dimension.
    pub sigma: Vec<f64>,
}

impl GaussQkp {
    pub fn new(
        layout: RegisterLayout,
        kernel: OperatorKernel,
        centres: Vec<Vec<f64>>,
        weights: Vec<Vec<f64>>,
        sigma: Vec<f64>,
    ) -> Result<Self> {
        let p = Self {
            layout,
            kernel,
            centres,
            weights,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.layout.action.dims;
        if self.kernel.a_dims() != a {
            return Err(Error::config("operator kernel output dimension mismatch"));
        }
        if self.sigma.len() != a {
            return Err(Error::config("sigma diagonal length mismatch"));
        }
        if self.sigma.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::contract("covariance diagonal must be positive"));
        }
        if self.centres.len() != self.weights.len() || self.centres.is_empty() {
            return Err(Error::config("centres and weights must pair up"));
        }
        for c in &self.centres {
            if c.len() != self.layout.state.dims {
                return Err(Error::config("centre dimension mismatch"));
            }
        }
        for w in &self.weights {
            if w.len() != a {
                return Err(Error::config("weight dimension mismatch"));
            }
        }
        Ok(())
    }

    pub fn n_centres(&self) -> usize {
        self.centres.len()
    }

    pub fn a_dims(&self) -> usize {
        self.layout.action.dims
    }

    /// Representer mean `mu(s) = sum_i K(c_i, s) beta_i`.
    pub fn mean_action(&self, state: &[f64]) -> Vec<f64> {
        let mut mu = vec![0.0; self.a_dims()];
        for (c, beta) in self.centres.iter().zip(&self.weights) {
            let contrib = self
                .kernel
                .apply(c, state, beta)
                .expect("centre/state dimensions validated");
            for (m, x) in mu.iter_mut().zip(contrib) {
                *m += x;
            }
        }
        mu
    }

    fn state_vec(&self, s: usize) -> Vec<f64> {
        self.layout.state.decode(s).expect("state index in range")
    }

    /// Per-dimension (mean, width) in grid-index units.
    fn index_units(&self, mu: &[f64]) -> Vec<(f64, f64)> {
        let spacing = self.layout.action.spacing();
        let lo = self.layout.action.range.lo;
        mu.iter()
            .zip(&self.sigma)
            .map(|(&m, &var)| ((m - lo) / spacing, var.sqrt() / spacing))
            .collect()
    }

    /// Normalized per-dimension amplitude vectors of the prepared state.
    pub fn dim_amplitudes(&self, s: usize) -> Vec<Vec<f64>> {
        let mu = self.mean_action(&self.state_vec(s));
        self.index_units(&mu)
            .into_iter()
            .map(|(m, v)| {
                direct_gaussian_amplitudes(self.layout.action.bits, m, v)
                    .expect("positive width validated")
            })
            .collect()
    }

    /// Expected action vector of the discrete policy at `s`.
    pub fn grid_mean(&self, s: usize) -> Vec<f64> {
        let dims = self.dim_amplitudes(s);
        let codec = &self.layout.action;
        dims.iter()
            .map(|amps| {
                amps.iter()
                    .enumerate()
                    .map(|(x, a)| a * a * codec.grid_value(x))
                    .sum()
            })
            .collect()
    }

    /// Continuous-density functional gradient
    /// `grad_beta log N(a; mu(s), Sigma) = kappa(s, :) outer M^T Sigma^-1 (a - mu(s))`,
    /// flattened row-major over (centre, action dim).
    pub fn log_policy_grad_gaussian(&self, s: usize, action: &[f64]) -> Result<Vec<f64>> {
        let state = self.state_vec(s);
        let mu = self.mean_action(&state);
        if action.len() != mu.len() {
            return Err(Error::contract("action dimension mismatch"));
        }
        let whitened = self.whiten(action, &mu);
        let mut grad = Vec::with_capacity(self.n_centres() * self.a_dims());
        for c in &self.centres {
            let k = self.kernel.scalar.eval(c, &state)?;
            grad.extend(whitened.iter().map(|w| k * w));
        }
        Ok(grad)
    }

    /// `M^T Sigma^-1 (a - mu)`.
    fn whiten(&self, action: &[f64], mu: &[f64]) -> Vec<f64> {
        let a_dims = self.a_dims();
        let resid: Vec<f64> = action
            .iter()
            .zip(mu)
            .zip(&self.sigma)
            .map(|((a, m), var)| (a - m) / var)
            .collect();
        (0..a_dims)
            .map(|j| {
                (0..a_dims)
                    .map(|l| self.kernel.output_matrix[l][j] * resid[l])
                    .sum()
            })
            .collect()
    }

    /// Applies the policy evaluation oracle as an explicit circuit: for each
    /// basis state of the state register, the per-dimension rotation ladders
    /// run under multi-control on that state (the enumerated dispatch
    /// pattern).
    pub fn apply_kw_policy_oracle(
        &self,
        sv: &mut StateVector,
        s_reg: RegId,
        a_reg: RegId,
        ledger: &QueryLedger,
    ) -> Result<()> {
        if !sv.register_is_zeroed(a_reg) {
            return Err(Error::contract("action register must be |0> before the policy oracle"));
        }
        let ws = sv.reg_width(s_reg);
        if ws != self.layout.state.qubits() || sv.reg_width(a_reg) != self.layout.action.qubits() {
            return Err(Error::contract("register shape mismatch"));
        }
        let s_offset = sv.reg_offset(s_reg);
        let a_offset = sv.reg_offset(a_reg);
        let bits = self.layout.action.bits;
        let dims = self.a_dims();
        for s in 0..self.layout.n_states() {
            let state_controls: Vec<(usize, bool)> = (0..ws)
                .map(|b| (s_offset + b, (s >> b) & 1 == 1))
                .collect();
            let mu = self.mean_action(&self.state_vec(s));
            for (d, (m, v)) in self.index_units(&mu).into_iter().enumerate() {
                // Dimension d occupies register value bits
                // [bits*(dims-1-d), bits*(dims-1-d) + bits), LSB first.
                let base = a_offset + bits * (dims - 1 - d);
                let qubits: Vec<usize> = (0..bits).map(|b| base + b).collect();
                apply_gaussian_ladder(sv, &qubits, &state_controls, m, v)?;
            }
        }
        ledger.record_policy_eval(1);
        Ok(())
    }
}

impl ClassicalPolicy for GaussQkp {
    fn n_actions(&self) -> usize {
        self.layout.n_actions()
    }

    fn prob(&self, s: usize, a: usize) -> f64 {
        let dims = self.dim_amplitudes(s);
        let bits = self.layout.action.bits;
        let mask = (1usize << bits) - 1;
        let n_dims = dims.len();
        let mut p = 1.0;
        for (d, amps) in dims.iter().enumerate() {
            let digit = (a >> (bits * (n_dims - 1 - d))) & mask;
            p *= amps[digit] * amps[digit];
        }
        p
    }

    fn params(&self) -> Vec<f64> {
        self.weights.iter().flatten().cloned().collect()
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        let a = self.a_dims();
        if params.len() != self.n_centres() * a {
            return Err(Error::contract("weight parameter count mismatch"));
        }
        for (i, chunk) in params.chunks(a).enumerate() {
            self.weights[i].copy_from_slice(chunk);
        }
        Ok(())
    }

    /// Exact gradient of the discrete grid policy:
    /// `d log pi / d beta_ij = 2 kappa(c_i, s) [M^T Sigma^-1 (a - E_pi[a])]_j`.
    fn grad_log_prob(&self, s: usize, a: usize) -> Vec<f64> {
        let state = self.state_vec(s);
        let action = self.layout.action.decode(a).expect("action index in range");
        let grid_mean = self.grid_mean(s);
        let whitened = self.whiten(&action, &grid_mean);
        let mut grad = Vec::with_capacity(self.n_centres() * self.a_dims());
        for c in &self.centres {
            let k = self
                .kernel
                .scalar
                .eval(c, &state)
                .expect("dimensions validated");
            grad.extend(whitened.iter().map(|w| 2.0 * k * w));
        }
        grad
    }

    /// Tensor product of the per-dimension ladder amplitudes.
    fn action_amplitudes(&self, s: usize) -> Vec<f64> {
        let dims = self.dim_amplitudes(s);
        let mut amps = vec![1.0];
        for d in dims {
            let mut next = Vec::with_capacity(amps.len() * d.len());
            for &prefix in &amps {
                for &x in &d {
                    next.push(prefix * x);
                }
            }
            amps = next;
        }
        amps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{DimRange, GridCodec};
    use crate::kernels::ScalarKernel;

    pub(crate) fn small_layout(a_bits: usize) -> RegisterLayout {
        RegisterLayout::new(
            GridCodec::new(1, 1, DimRange::new(0.0, 1.0)).unwrap(),
            GridCodec::new(1, a_bits, DimRange::new(0.0, 1.0)).unwrap(),
            4,
            1.0,
        )
        .unwrap()
    }

    fn policy(beta: f64, var: f64) -> GaussQkp {
        GaussQkp::new(
            small_layout(2),
            OperatorKernel::isotropic(ScalarKernel::Rbf { lengthscale: 1.0 }, 1).unwrap(),
            vec![vec![0.0]],
            vec![vec![beta]],
            vec![var],
        )
        .unwrap()
    }

    #[test]
    fn zero_weights_zero_mean() {
        let p = policy(0.0, 0.1);
        assert_eq!(p.mean_action(&[0.0]), vec![0.0]);
        assert_eq!(p.mean_action(&[1.0]), vec![0.0]);
    }

    #[test]
    fn single_centre_unit_kernel_mean_is_beta() {
        let p = GaussQkp::new(
            small_layout(2),
            OperatorKernel::isotropic(ScalarKernel::KroneckerDelta, 1).unwrap(),
            vec![vec![0.0]],
            vec![vec![0.75]],
            vec![0.04],
        )
        .unwrap();
        assert_eq!(p.mean_action(&[0.0]), vec![0.75]);
        assert_eq!(p.mean_action(&[1.0]), vec![0.0]);
    }

    #[test]
    fn random_mean_matches_dot_product() {
        use rand::Rng as _;
        let mut rng = crate::rng::rng_from_seed(12);
        for _ in 0..20 {
            let centres: Vec<Vec<f64>> = (0..3).map(|_| vec![rng.gen_range(0.0..1.0)]).collect();
            let weights: Vec<Vec<f64>> = (0..3).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
            let p = GaussQkp::new(
                small_layout(2),
                OperatorKernel::isotropic(ScalarKernel::Rbf { lengthscale: 0.7 }, 1).unwrap(),
                centres.clone(),
                weights.clone(),
                vec![0.09],
            )
            .unwrap();
            let s = vec![1.0];
            let direct: f64 = centres
                .iter()
                .zip(&weights)
                .map(|(c, w)| p.kernel.scalar.eval(c, &s).unwrap() * w[0])
                .sum();
            assert!((p.mean_action(&s)[0] - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn probabilities_sum_to_one_and_match_amplitudes() {
        let p = policy(0.4, 0.05);
        for s in 0..2 {
            let total: f64 = (0..4).map(|a| p.prob(s, a)).sum();
            assert!((total - 1.0).abs() < 1e-10);
            let amps = p.action_amplitudes(s);
            for a in 0..4 {
                assert!((amps[a] * amps[a] - p.prob(s, a)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kw_oracle_marginal_matches_closed_form() {
        let p = policy(0.6, 0.08);
        let ledger = QueryLedger::new();
        let mut sv = StateVector::new(&[("s", 1), ("a", 2)]).unwrap();
        let (rs, ra) = (sv.register("s").unwrap(), sv.register("a").unwrap());
        // Superpose the state register, then run the dispatched ladders.
        sv.apply_multicontrolled_ry(0, &[], 1.1).unwrap();
        p.apply_kw_policy_oracle(&mut sv, rs, ra, &ledger).unwrap();
        // Conditional action distribution per state branch.
        for s in 0..2usize {
            let mut cond = vec![0.0; 4];
            let mut branch = 0.0;
            for (idx, amp) in sv.amplitudes().iter().enumerate() {
                if sv.value_of(idx, rs) == s {
                    cond[sv.value_of(idx, ra)] += amp.norm_sqr();
                    branch += amp.norm_sqr();
                }
            }
            for a in 0..4 {
                assert!((cond[a] / branch - p.prob(s, a)).abs() < 1e-10);
            }
        }
        assert!((sv.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn continuous_gradient_examples() {
        // a = mu -> zero matrix; and the direct substitution case.
        let p = GaussQkp::new(
            small_layout(1),
            OperatorKernel::isotropic(ScalarKernel::KroneckerDelta, 1).unwrap(),
            vec![vec![0.0]],
            vec![vec![0.5]],
            vec![1.0],
        )
        .unwrap();
        let g = p.log_policy_grad_gaussian(0, &[0.5]).unwrap();
        assert_eq!(g, vec![0.0]);
        // N=1, A=1, kappa=1, Sigma=1, a=1, mu=0.5 -> 0.5.
        let g = p.log_policy_grad_gaussian(0, &[1.0]).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn continuous_gradient_matches_finite_differences() {
        use rand::Rng as _;
        let mut rng = crate::rng::rng_from_seed(31);
        for _ in 0..100 {
            let centres: Vec<Vec<f64>> = (0..2).map(|_| vec![rng.gen_range(0.0..1.0)]).collect();
            let weights: Vec<Vec<f64>> = (0..2).map(|_| vec![rng.gen_range(-0.5..0.5)]).collect();
            let var = rng.gen_range(0.05..0.5);
            let p = GaussQkp::new(
                small_layout(2),
                OperatorKernel::isotropic(ScalarKernel::Rbf { lengthscale: 0.8 }, 1).unwrap(),
                centres,
                weights,
                vec![var],
            )
            .unwrap();
            let s = 1usize;
            let action = vec![rng.gen_range(0.0..1.0)];
            let analytic = p.log_policy_grad_gaussian(s, &action).unwrap();

            // Finite differences of log N(a; mu(s), Sigma) w.r.t. beta.
            let log_density = |pol: &GaussQkp| {
                let mu = pol.mean_action(&pol.state_vec(s));
                let mut v = 0.0;
                for ((a, m), var) in action.iter().zip(&mu).zip(&pol.sigma) {
                    v += -0.5 * (a - m) * (a - m) / var;
                }
                v
            };
            let h = 1e-6;
            for (j, &g) in analytic.iter().enumerate() {
                let mut plus = p.clone();
                let mut params = p.params();
                params[j] += h;
                plus.set_params(&params).unwrap();
                params[j] -= 2.0 * h;
                let mut minus = p.clone();
                minus.set_params(&params).unwrap();
                let fd = (log_density(&plus) - log_density(&minus)) / (2.0 * h);
                assert!(
                    (fd - g).abs() <= 1e-6 * (1.0 + g.abs()),
                    "coordinate {j}: fd {fd} vs analytic {g}"
                );
            }
        }
    }

    #[test]
    fn discrete_gradient_matches_log_prob_differences() {
        use rand::Rng as _;
        let mut rng = crate::rng::rng_from_seed(44);
        for _ in 0..20 {
            let p = policy(rng.gen_range(-0.5..0.5), rng.gen_range(0.04..0.3));
            let s = rng.gen_range(0..2);
            let a = rng.gen_range(0..4);
            let analytic = p.grad_log_prob(s, a);
            let h = 1e-6;
            for (j, &g) in analytic.iter().enumerate() {
                let mut params = p.params();
                params[j] += h;
                let mut plus = p.clone();
                plus.set_params(&params).unwrap();
                params[j] -= 2.0 * h;
                let mut minus = p.clone();
                minus.set_params(&params).unwrap();
                let fd = (plus.prob(s, a).ln() - minus.prob(s, a).ln()) / (2.0 * h);
                assert!((fd - g).abs() <= 1e-5 * (1.0 + g.abs()));
            }
        }
    }

    #[test]
    fn singular_sigma_rejected() {
        let r = GaussQkp::new(
            small_layout(1),
            OperatorKernel::isotropic(ScalarKernel::KroneckerDelta, 1).unwrap(),
            vec![vec![0.0]],
            vec![vec![0.1]],
            vec![0.0],
        );
        assert!(matches!(r, Err(Error::Contract(_))));
    }
}
