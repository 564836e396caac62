//! Tabular quantum-accessible MDP: transition/reward/init/trajectory/return
//! oracles on the statevector, plus exact dynamic-programming ground truth
//! used to verify every estimator in the crate.
//!
//! States and actions are the grid points of a [`RegisterLayout`]; all
//! tables are indexed by grid index. Oracles mutate only their statevector
//! argument and record their cost in a [`QueryLedger`]: one environment
//! interaction is one (policy evaluation, transition) pair.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::encoding::{GridCodec, RegisterLayout};
use crate::error::{Error, Result};
use crate::ledger::QueryLedger;
use crate::rng::Rng;
use crate::statevector::{RegId, StateVector};

/// Classical view of a policy over grid indices.
///
/// `grad_log_prob` must be the exact gradient of the distribution the policy
/// actually samples (the discrete grid policy), so that likelihood-ratio
/// enumeration agrees with finite differences of the exact value.
pub trait ClassicalPolicy {
    fn n_actions(&self) -> usize;
    fn prob(&self, s: usize, a: usize) -> f64;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]) -> Result<()>;
    fn grad_log_prob(&self, s: usize, a: usize) -> Vec<f64>;

    fn n_params(&self) -> usize {
        self.params().len()
    }

    /// Real amplitudes `sqrt(pi(a|s))` used by the policy evaluation oracle.
    fn action_amplitudes(&self, s: usize) -> Vec<f64> {
        (0..self.n_actions())
            .map(|a| self.prob(s, a).sqrt())
            .collect()
    }

    fn sample_action(&self, s: usize, rng: &mut Rng) -> usize {
        use rand::Rng as _;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for a in 0..self.n_actions() {
            acc += self.prob(s, a);
            if u < acc {
                return a;
            }
        }
        self.n_actions() - 1
    }
}

/// Explicit finite MDP over the layout's state/action grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    pub layout: RegisterLayout,
    /// Row-stochastic transition table, `[s][a][s']` flattened.
    transition: Vec<f64>,
    /// Reward table `[s][a]`, values in `[0, r_max]`.
    reward: Vec<f64>,
    /// Initial distribution over states.
    initial: Vec<f64>,
    pub gamma: f64,
    pub horizon: usize,
    pub r_max: f64,
}

impl TabularMdp {
    pub fn new(
        layout: RegisterLayout,
        transition: Vec<f64>,
        reward: Vec<f64>,
        initial: Option<Vec<f64>>,
        gamma: f64,
        horizon: usize,
        r_max: f64,
    ) -> Result<Self> {
        let s = layout.n_states();
        let initial = initial.unwrap_or_else(|| {
            let mut d0 = vec![0.0; s];
            d0[0] = 1.0;
            d0
        });
        let mdp = Self {
            layout,
            transition,
            reward,
            initial,
            gamma,
            horizon,
            r_max,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn n_states(&self) -> usize {
        self.layout.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.layout.n_actions()
    }

    pub fn p(&self, s: usize, a: usize, s2: usize) -> f64 {
        self.transition[(s * self.n_actions() + a) * self.n_states() + s2]
    }

    pub fn r(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions() + a]
    }

    pub fn d0(&self, s: usize) -> f64 {
        self.initial[s]
    }

    pub fn validate(&self) -> Result<()> {
        let (s, a) = (self.n_states(), self.n_actions());
        if self.transition.len() != s * a * s {
            return Err(Error::config(format!(
                "transition table has {} entries, expected {}",
                self.transition.len(),
                s * a * s
            )));
        }
        if self.reward.len() != s * a {
            return Err(Error::config("reward table size mismatch"));
        }
        if self.initial.len() != s {
            return Err(Error::config("initial distribution size mismatch"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("gamma must lie in [0, 1)"));
        }
        if !(self.r_max > 0.0) {
            return Err(Error::config("r_max must be positive"));
        }
        for si in 0..s {
            for ai in 0..a {
                let row: f64 = (0..s).map(|s2| self.p(si, ai, s2)).sum();
                if (row - 1.0).abs() > 1e-12 {
                    return Err(Error::config(format!(
                        "transition row ({si},{ai}) sums to {row}"
                    )));
                }
                let r = self.r(si, ai);
                if !(0.0..=self.r_max + 1e-12).contains(&r) {
                    return Err(Error::config(format!(
                        "reward ({si},{ai}) = {r} outside [0, {}]",
                        self.r_max
                    )));
                }
            }
        }
        let d0: f64 = self.initial.iter().sum();
        if (d0 - 1.0).abs() > 1e-12 || self.initial.iter().any(|&p| p < 0.0) {
            return Err(Error::config("initial distribution must be a simplex point"));
        }
        Ok(())
    }

    /// Loads and validates an MDP spec from JSON.
    pub fn from_json(text: &str) -> Result<Self> {
        let mdp: TabularMdp = serde_json::from_str(text)?;
        mdp.validate()?;
        Ok(mdp)
    }

    /// Fixed-point codec for discounted returns, sized to the maximal
    /// achievable return.
    pub fn return_codec(&self, bits: usize) -> Result<GridCodec> {
        let cap = self.max_return();
        GridCodec::new(1, bits, crate::encoding::DimRange::new(0.0, cap.max(1e-9)))
    }

    /// Largest achievable discounted return over the horizon.
    pub fn max_return(&self) -> f64 {
        if self.gamma == 0.0 {
            self.r_max
        } else {
            self.r_max * (1.0 - self.gamma.powi(self.horizon as i32)) / (1.0 - self.gamma)
        }
    }

    // ------------------------------------------------------------------
    // Exact dynamic programming.
    // ------------------------------------------------------------------

    /// Backward-induction state values `v[t][s]` for `t = 0..=T`, where
    /// `v[t]` is the value earned over steps `t..T`, discounted from `t`.
    pub fn value_table<P: ClassicalPolicy + ?Sized>(&self, policy: &P) -> Vec<Vec<f64>> {
        let (s, a, t_max) = (self.n_states(), self.n_actions(), self.horizon);
        let mut v = vec![vec![0.0; s]; t_max + 1];
        for t in (0..t_max).rev() {
            for si in 0..s {
                let mut acc = 0.0;
                for ai in 0..a {
                    let p = policy.prob(si, ai);
                    if p == 0.0 {
                        continue;
                    }
                    let cont: f64 = (0..s).map(|s2| self.p(si, ai, s2) * v[t + 1][s2]).sum();
                    acc += p * (self.r(si, ai) + self.gamma * cont);
                }
                v[t][si] = acc;
            }
        }
        v
    }

    /// Exact policy value `V(d0)` over the horizon.
    pub fn exact_value<P: ClassicalPolicy + ?Sized>(&self, policy: &P) -> f64 {
        let v = self.value_table(policy);
        (0..self.n_states()).map(|s| self.d0(s) * v[0][s]).sum()
    }

    /// `h`-step state-action values: `q[h][s][a]` is the value of taking `a`
    /// in `s` with `h` steps left, for `h = 0..=T`.
    pub fn q_tables<P: ClassicalPolicy + ?Sized>(&self, policy: &P) -> Vec<Vec<Vec<f64>>> {
        let (s, a, t_max) = (self.n_states(), self.n_actions(), self.horizon);
        let v = self.value_table(policy);
        let mut q = vec![vec![vec![0.0; a]; s]; t_max + 1];
        for h in 1..=t_max {
            // h steps remaining corresponds to value-table row T - h + 1
            // for the continuation.
            let vt = &v[t_max - h + 1];
            for si in 0..s {
                for ai in 0..a {
                    let cont: f64 = (0..s).map(|s2| self.p(si, ai, s2) * vt[s2]).sum();
                    q[h][si][ai] = self.r(si, ai) + self.gamma * cont;
                }
            }
        }
        q
    }

    /// Full-horizon `Q(s, a)` under the policy.
    pub fn q_values<P: ClassicalPolicy + ?Sized>(&self, policy: &P) -> Vec<Vec<f64>> {
        self.q_tables(policy).pop().expect("horizon table")
    }

    /// Forward state-occupancy chain: `p[t][s]` is the probability of being
    /// in state `s` at step `t`.
    pub fn state_marginals<P: ClassicalPolicy + ?Sized>(&self, policy: &P) -> Vec<Vec<f64>> {
        let (s, a, t_max) = (self.n_states(), self.n_actions(), self.horizon);
        let mut p = vec![vec![0.0; s]; t_max.max(1)];
        p[0].copy_from_slice(&self.initial);
        for t in 1..t_max {
            for si in 0..s {
                if p[t - 1][si] == 0.0 {
                    continue;
                }
                for ai in 0..a {
                    let w = p[t - 1][si] * policy.prob(si, ai);
                    if w == 0.0 {
                        continue;
                    }
                    for s2 in 0..s {
                        p[t][s2] += w * self.p(si, ai, s2);
                    }
                }
            }
        }
        p
    }

    /// Value of the optimal deterministic policy over the horizon
    /// (finite-horizon value iteration).
    pub fn optimal_value(&self) -> f64 {
        let (s, a, t_max) = (self.n_states(), self.n_actions(), self.horizon);
        let mut v = vec![0.0; s];
        for _ in 0..t_max {
            let mut next = vec![0.0; s];
            for si in 0..s {
                let mut best = f64::NEG_INFINITY;
                for ai in 0..a {
                    let cont: f64 = (0..s).map(|s2| self.p(si, ai, s2) * v[s2]).sum();
                    best = best.max(self.r(si, ai) + self.gamma * cont);
                }
                next[si] = best;
            }
            v = next;
        }
        (0..s).map(|si| self.d0(si) * v[si]).sum()
    }

    // ------------------------------------------------------------------
    // Trajectory enumeration and classical rollouts.
    // ------------------------------------------------------------------

    /// Enumerates all trajectories with their probability and discounted
    /// return. Guarded so the enumeration stays at desk scale.
    pub fn enumerate_trajectories<P: ClassicalPolicy + ?Sized>(
        &self,
        policy: &P,
    ) -> Result<Vec<Trajectory>> {
        let count = ((self.n_states() * self.n_actions()) as f64).powi(self.horizon as i32);
        if count > 2e6 {
            return Err(Error::config(format!(
                "trajectory space too large to enumerate ({count:.0} branches)"
            )));
        }
        let mut out = Vec::new();
        let mut states = Vec::with_capacity(self.horizon);
        let mut actions = Vec::with_capacity(self.horizon);
        if self.horizon == 0 {
            return Ok(out);
        }
        for s0 in 0..self.n_states() {
            let p0 = self.d0(s0);
            if p0 == 0.0 {
                continue;
            }
            states.push(s0);
            self.enumerate_rec(policy, p0, 0.0, 1.0, &mut states, &mut actions, &mut out);
            states.pop();
        }
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn enumerate_rec<P: ClassicalPolicy + ?Sized>(
        &self,
        policy: &P,
        prob: f64,
        ret: f64,
        discount: f64,
        states: &mut Vec<usize>,
        actions: &mut Vec<usize>,
        out: &mut Vec<Trajectory>,
    ) {
        if prob == 0.0 {
            return;
        }
        let t = actions.len();
        let s = *states.last().expect("state pushed");
        for a in 0..self.n_actions() {
            let pa = policy.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            let ret2 = ret + discount * self.r(s, a);
            actions.push(a);
            if t + 1 == self.horizon {
                out.push(Trajectory {
                    prob: prob * pa,
                    states: states.clone(),
                    actions: actions.clone(),
                    ret: ret2,
                });
            } else {
                for s2 in 0..self.n_states() {
                    let p2 = self.p(s, a, s2);
                    if p2 == 0.0 {
                        continue;
                    }
                    states.push(s2);
                    self.enumerate_rec(
                        policy,
                        prob * pa * p2,
                        ret2,
                        discount * self.gamma,
                        states,
                        actions,
                        out,
                    );
                    states.pop();
                }
            }
            actions.pop();
        }
    }

    /// Samples one classical rollout of `steps` steps (a measurement of the
    /// trajectory and return oracles).
    pub fn sample_trajectory<P: ClassicalPolicy + ?Sized>(
        &self,
        policy: &P,
        steps: usize,
        rng: &mut Rng,
        ledger: &QueryLedger,
    ) -> ClassicalTrajectory {
        use rand::Rng as _;
        let mut states = Vec::with_capacity(steps);
        let mut actions = Vec::with_capacity(steps);
        let mut rewards = Vec::with_capacity(steps);
        let mut s = sample_index(&self.initial, rng.gen());
        for _ in 0..steps {
            let a = policy.sample_action(s, rng);
            states.push(s);
            actions.push(a);
            rewards.push(self.r(s, a));
            let row: Vec<f64> = (0..self.n_states()).map(|s2| self.p(s, a, s2)).collect();
            s = sample_index(&row, rng.gen());
        }
        ledger.record_policy_eval(steps as u64);
        ledger.record_transition(steps as u64);
        ledger.record_reward(steps as u64);
        ledger.record_interactions(steps as u64);
        ledger.record_classical_trajectories(1);
        ClassicalTrajectory {
            states,
            actions,
            rewards,
        }
    }

    // ------------------------------------------------------------------
    // Exact policy gradient (test oracle).
    // ------------------------------------------------------------------

    /// Central finite differences of [`exact_value`] with step `h`.
    ///
    /// [`exact_value`]: TabularMdp::exact_value
    pub fn value_gradient_fd<P: ClassicalPolicy + Clone>(&self, policy: &P, h: f64) -> Vec<f64> {
        let base = policy.params();
        let mut grad = vec![0.0; base.len()];
        let mut probe = policy.clone();
        for j in 0..base.len() {
            let mut plus = base.clone();
            plus[j] += h;
            probe.set_params(&plus).expect("param shape preserved");
            let vp = self.exact_value(&probe);
            let mut minus = base.clone();
            minus[j] -= h;
            probe.set_params(&minus).expect("param shape preserved");
            let vm = self.exact_value(&probe);
            grad[j] = (vp - vm) / (2.0 * h);
        }
        grad
    }

    /// Likelihood-ratio form of the gradient by full trajectory enumeration:
    /// `sum_tau P(tau) R(tau) sum_t grad log pi(a_t | s_t)`.
    pub fn value_gradient_enumeration<P: ClassicalPolicy + ?Sized>(
        &self,
        policy: &P,
    ) -> Result<Vec<f64>> {
        let d = policy.n_params();
        let mut grad = vec![0.0; d];
        for tau in self.enumerate_trajectories(policy)? {
            let mut score = vec![0.0; d];
            for (s, a) in tau.states.iter().zip(&tau.actions) {
                for (acc, g) in score.iter_mut().zip(policy.grad_log_prob(*s, *a)) {
                    *acc += g;
                }
            }
            for (gi, si) in grad.iter_mut().zip(&score) {
                *gi += tau.prob * tau.ret * si;
            }
        }
        Ok(grad)
    }

    /// Exact policy gradient with a built-in cross-check: finite differences
    /// of the exact value against likelihood-ratio enumeration. The two
    /// independent routes must agree within 1e-4.
    pub fn exact_policy_gradient<P: ClassicalPolicy + Clone>(
        &self,
        policy: &P,
        h: f64,
    ) -> Result<Vec<f64>> {
        if policy.n_params() > 64 {
            return Err(Error::config("exact gradient supports at most 64 parameters"));
        }
        let fd = self.value_gradient_fd(policy, h);
        let lr = self.value_gradient_enumeration(policy)?;
        for (j, (a, b)) in fd.iter().zip(&lr).enumerate() {
            if (a - b).abs() > 1e-4 {
                return Err(Error::internal(format!(
                    "gradient oracles disagree at coordinate {j}: fd={a}, enumeration={b}"
                )));
            }
        }
        Ok(fd)
    }

    // ------------------------------------------------------------------
    // Quantum oracles.
    // ------------------------------------------------------------------

    /// Initial state oracle: `|0> -> sum_s sqrt(d0(s)) |s>`.
    pub fn oracle_init(&self, sv: &mut StateVector, s_reg: RegId, _ledger: &QueryLedger) -> Result<()> {
        let column: Vec<Complex64> = self
            .initial
            .iter()
            .map(|p| Complex64::new(p.sqrt(), 0.0))
            .collect();
        sv.inject_register_with(s_reg, |_| column.clone())
    }

    /// Policy evaluation oracle: `|s>|0> -> |s> sum_a sqrt(pi(a|s)) |a>`.
    pub fn oracle_policy<P: ClassicalPolicy + ?Sized>(
        &self,
        sv: &mut StateVector,
        policy: &P,
        s_reg: RegId,
        a_reg: RegId,
        ledger: &QueryLedger,
    ) -> Result<()> {
        let n_a = self.n_actions();
        let columns: Vec<Vec<Complex64>> = (0..self.n_states())
            .map(|s| {
                let amps = policy.action_amplitudes(s);
                debug_assert_eq!(amps.len(), n_a);
                amps.iter().map(|&x| Complex64::new(x, 0.0)).collect()
            })
            .collect();
        let s_view = sv.view(s_reg);
        sv.inject_register_with(a_reg, |idx| columns[s_view.get(idx)].clone())?;
        ledger.record_policy_eval(1);
        Ok(())
    }

    /// Transition oracle: `|s, a>|0> -> |s, a> sum_s' sqrt(P(s'|s,a)) |s'>`.
    pub fn oracle_transition(
        &self,
        sv: &mut StateVector,
        s_reg: RegId,
        a_reg: RegId,
        s2_reg: RegId,
        ledger: &QueryLedger,
    ) -> Result<()> {
        let n_s = self.n_states();
        let s_view = sv.view(s_reg);
        let a_view = sv.view(a_reg);
        sv.inject_register_with(s2_reg, |idx| {
            let s = s_view.get(idx);
            let a = a_view.get(idx);
            (0..n_s)
                .map(|s2| Complex64::new(self.p(s, a, s2).sqrt(), 0.0))
                .collect()
        })?;
        ledger.record_transition(1);
        Ok(())
    }

    /// Reward oracle: writes fixed-point `r(s, a)` into the reward register.
    pub fn oracle_reward(
        &self,
        sv: &mut StateVector,
        s_reg: RegId,
        a_reg: RegId,
        r_reg: RegId,
        ledger: &QueryLedger,
    ) -> Result<()> {
        // Pre-encode the table so range errors surface before mutation.
        let mut codes = Vec::with_capacity(self.n_states() * self.n_actions());
        for s in 0..self.n_states() {
            for a in 0..self.n_actions() {
                let code = self.layout.reward.encode(&[self.r(s, a)]).map_err(|e| {
                    Error::config(format!("reward ({s},{a}) does not fit its register: {e}"))
                })?;
                codes.push(code);
            }
        }
        if self.layout.reward.qubits() != sv.reg_width(r_reg) {
            return Err(Error::config("reward register width mismatch"));
        }
        let n_a = self.n_actions();
        let s_view = sv.view(s_reg);
        let a_view = sv.view(a_reg);
        sv.write_register_value_with(r_reg, |idx| codes[s_view.get(idx) * n_a + a_view.get(idx)])?;
        ledger.record_reward(1);
        Ok(())
    }

    /// Trajectory oracle: given a prepared `s_0` register, builds
    /// `sum_tau sqrt(P(tau)) |a_0, s_1, a_1, ..., s_{T-1}, a_{T-1}>` with
    /// `T` policy-oracle calls and `T - 1` transition-oracle calls.
    pub fn oracle_trajectory<P: ClassicalPolicy + ?Sized>(
        &self,
        sv: &mut StateVector,
        policy: &P,
        s_regs: &[RegId],
        a_regs: &[RegId],
        ledger: &QueryLedger,
    ) -> Result<()> {
        let t = self.horizon;
        if s_regs.len() != t || a_regs.len() != t {
            return Err(Error::config(format!(
                "trajectory oracle needs {t} state and action registers"
            )));
        }
        for step in 0..t {
            self.oracle_policy(sv, policy, s_regs[step], a_regs[step], ledger)?;
            if step + 1 < t {
                self.oracle_transition(sv, s_regs[step], a_regs[step], s_regs[step + 1], ledger)?;
            }
        }
        ledger.record_interactions(t as u64);
        Ok(())
    }

    /// Return oracle: writes the fixed-point discounted return
    /// `sum_t gamma^t r(s_t, a_t)` of each trajectory branch.
    pub fn oracle_return(
        &self,
        sv: &mut StateVector,
        s_regs: &[RegId],
        a_regs: &[RegId],
        ret_reg: RegId,
        ret_codec: &GridCodec,
        ledger: &QueryLedger,
    ) -> Result<()> {
        let t = s_regs.len();
        // Fail fast if the maximal return cannot be encoded.
        let max_ret = self.max_return();
        ret_codec
            .encode(&[max_ret])
            .map_err(|e| Error::config(format!("return register cannot hold {max_ret}: {e}")))?;
        let s_views: Vec<_> = s_regs.iter().map(|r| sv.view(*r)).collect();
        let a_views: Vec<_> = a_regs.iter().map(|r| sv.view(*r)).collect();
        let gamma = self.gamma;
        sv.write_register_value_with(ret_reg, |idx| {
            let mut ret = 0.0;
            let mut discount = 1.0;
            for step in 0..t {
                ret += discount * self.r(s_views[step].get(idx), a_views[step].get(idx));
                discount *= gamma;
            }
            ret_codec
                .encode(&[ret])
                .expect("per-branch return bounded by the prechecked maximum")
        })?;
        ledger.record_reward(t as u64);
        Ok(())
    }
}

fn sample_index(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// One enumerated trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub prob: f64,
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub ret: f64,
}

/// One sampled rollout.
#[derive(Debug, Clone)]
pub struct ClassicalTrajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl ClassicalTrajectory {
    /// Discounted return of the `len`-step suffix starting at `from`.
    pub fn suffix_return(&self, from: usize, len: usize, gamma: f64) -> f64 {
        let mut ret = 0.0;
        let mut discount = 1.0;
        for j in from..(from + len).min(self.rewards.len()) {
            ret += discount * self.rewards[j];
            discount *= gamma;
        }
        ret
    }
}

/// Builds a statevector with trajectory registers `s0, a0, ..., s{T-1},
/// a{T-1}` plus any extra registers appended at the end.
pub fn trajectory_statevector(
    mdp: &TabularMdp,
    extra: &[(&str, usize)],
) -> Result<(StateVector, Vec<RegId>, Vec<RegId>)> {
    let t = mdp.horizon;
    let ws = mdp.layout.state.qubits();
    let wa = mdp.layout.action.qubits();
    let mut names: Vec<(String, usize)> = Vec::new();
    for step in 0..t {
        names.push((format!("s{step}"), ws));
        names.push((format!("a{step}"), wa));
    }
    for (n, w) in extra {
        names.push(((*n).to_string(), *w));
    }
    let layout: Vec<(&str, usize)> = names.iter().map(|(n, w)| (n.as_str(), *w)).collect();
    let sv = StateVector::new(&layout)?;
    let s_regs = (0..t)
        .map(|s| sv.register(&format!("s{s}")))
        .collect::<Result<Vec<_>>>()?;
    let a_regs = (0..t)
        .map(|s| sv.register(&format!("a{s}")))
        .collect::<Result<Vec<_>>>()?;
    Ok((sv, s_regs, a_regs))
}
