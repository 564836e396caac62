//! Softmax kernel policies.
//!
//! Two representer families: a state-centred softmax whose per-action
//! observables weight orthogonal kernel-feature projectors (the weight-only
//! special case has exactly normalized probabilities and an O(1) gradient
//! bound), and a state-action-centred softmax with scalar weights and the
//! classic analytic gradient `T (k(s,a) - E_{a'} k(s,a'))`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::encoding::RegisterLayout;
use crate::error::{Error, Result};
use crate::kernels::ScalarKernel;
use crate::qmdp::ClassicalPolicy;
use crate::statevector::{state_preparation_unitary, StateVector};

/// State-centred softmax policy over kernel-feature projectors.
///
/// The feature state `|psi_s> = sum_i sqrt(p_i(s)) |i>` carries normalized
/// kernel activations `p_i(s) = kappa(s, c_i) / sum_j kappa(s, c_j)`; the
/// per-action observable is `O_a = sum_i w[a][i] P_i` with `P_i = |i><i|`,
/// and the policy is the softmax of `T <O_a>`. With `mixing` unset this is
/// the weight-only case (projectors partition the identity); a mixing layer
/// of `R_Y` angles on the feature qubits is supported structurally for
/// exploration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxQkp {
    pub layout: RegisterLayout,
    pub kernel: ScalarKernel,
    pub centres: Vec<Vec<f64>>,
    /// Observable weights, one row per grid action.
    pub weights: Vec<Vec<f64>>,
    pub temperature: f64,
    /// Optional in-circuit rotation layer on the feature qubits.
    #[serde(default)]
    pub mixing: Option<Vec<f64>>,
}

impl SoftmaxQkp {
    pub fn new(
        layout: RegisterLayout,
        kernel: ScalarKernel,
        centres: Vec<Vec<f64>>,
        weights: Vec<Vec<f64>>,
        temperature: f64,
    ) -> Result<Self> {
        let p = Self {
            layout,
            kernel,
            centres,
            weights,
            temperature,
            mixing: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_mixing(mut self, mixing: Vec<f64>) -> Result<Self> {
        if mixing.len() != self.feature_qubits() {
            return Err(Error::config("mixing layer needs one angle per feature qubit"));
        }
        self.mixing = Some(mixing);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.temperature > 0.0) {
            return Err(Error::config("temperature must be positive"));
        }
        if self.centres.is_empty() {
            return Err(Error::config("softmax policy needs at least one centre"));
        }
        if self.weights.len() != self.layout.n_actions() {
            return Err(Error::config("need one weight row per grid action"));
        }
        for row in &self.weights {
            if row.len() != self.centres.len() {
                return Err(Error::config("weight row length must match centre count"));
            }
        }
        // Every state must have positive total activation.
        for s in 0..self.layout.n_states() {
            let state = self.layout.state.decode(s)?;
            let z: f64 = self
                .centres
                .iter()
                .map(|c| self.kernel.eval(&state, c).unwrap_or(0.0))
                .sum();
            if !(z > 0.0) {
                return Err(Error::config(format!(
                    "state {s} has zero kernel activation over all centres"
                )));
            }
        }
        Ok(())
    }

    pub fn n_centres(&self) -> usize {
        self.centres.len()
    }

    fn feature_qubits(&self) -> usize {
        let n = self.n_centres();
        (usize::BITS - (n - 1).leading_zeros()).max(1) as usize
    }

    /// Normalized feature weights `p_i(s)`; with a mixing layer these are
    /// the projector expectations of the rotated feature state.
    pub fn features(&self, s: usize) -> Vec<f64> {
        let state = self.layout.state.decode(s).expect("state in range");
        let raw: Vec<f64> = self
            .centres
            .iter()
            .map(|c| self.kernel.eval(&state, c).expect("dims validated").max(0.0))
            .collect();
        let z: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|k| k / z).collect();
        match &self.mixing {
            None => probs,
            Some(angles) => self.mixed_features(&probs, angles),
        }
    }

    /// Circuit-path features: prepare `|psi_s>`, rotate, project.
    fn mixed_features(&self, probs: &[f64], angles: &[f64]) -> Vec<f64> {
        let w = self.feature_qubits();
        let dim = 1usize << w;
        let mut target = vec![Complex64::new(0.0, 0.0); dim];
        for (i, &p) in probs.iter().enumerate() {
            target[i] = Complex64::new(p.sqrt(), 0.0);
        }
        let mut sv = StateVector::new(&[("f", w)]).expect("feature register fits");
        let reg = sv.register("f").expect("declared");
        let prep = state_preparation_unitary(&target).expect("normalized target");
        sv.apply_register_unitary(reg, &prep).expect("unitary fits");
        for (q, &angle) in angles.iter().enumerate() {
            sv.apply_multicontrolled_ry(q, &[], angle).expect("qubit in range");
        }
        sv.marginal_probs(reg)[..self.n_centres()].to_vec()
    }

    /// Circuit-path feature expectations via explicit projector
    /// measurements; equals [`features`] to roundoff.
    ///
    /// [`features`]: SoftmaxQkp::features
    pub fn features_via_circuit(&self, s: usize) -> Result<Vec<f64>> {
        let w = self.feature_qubits();
        let dim = 1usize << w;
        let raw = self.features_unmixed(s)?;
        let mut target = vec![Complex64::new(0.0, 0.0); dim];
        for (i, &p) in raw.iter().enumerate() {
            target[i] = Complex64::new(p.sqrt(), 0.0);
        }
        let mut sv = StateVector::new(&[("f", w)])?;
        let reg = sv.register("f")?;
        let prep = state_preparation_unitary(&target)?;
        sv.apply_register_unitary(reg, &prep)?;
        if let Some(angles) = &self.mixing {
            for (q, &angle) in angles.iter().enumerate() {
                sv.apply_multicontrolled_ry(q, &[], angle)?;
            }
        }
        Ok((0..self.n_centres())
            .map(|i| sv.projector_expectation(reg, &[i]))
            .collect())
    }

    fn features_unmixed(&self, s: usize) -> Result<Vec<f64>> {
        let state = self.layout.state.decode(s)?;
        let raw: Vec<f64> = self
            .centres
            .iter()
            .map(|c| self.kernel.eval(&state, c).map(|v| v.max(0.0)))
            .collect::<Result<_>>()?;
        let z: f64 = raw.iter().sum();
        Ok(raw.iter().map(|k| k / z).collect())
    }

    /// Observable expectations `<O_a> = sum_i w[a][i] p_i(s)`.
    pub fn observables(&self, s: usize) -> Vec<f64> {
        let feats = self.features(s);
        self.weights
            .iter()
            .map(|row| row.iter().zip(&feats).map(|(w, p)| w * p).sum())
            .collect()
    }

    fn distribution(&self, s: usize) -> Vec<f64> {
        softmax(&self.observables(s), self.temperature)
    }
}

impl ClassicalPolicy for SoftmaxQkp {
    fn n_actions(&self) -> usize {
        self.layout.n_actions()
    }

    fn prob(&self, s: usize, a: usize) -> f64 {
        self.distribution(s)[a]
    }

    fn params(&self) -> Vec<f64> {
        self.weights.iter().flatten().cloned().collect()
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        let n = self.n_centres();
        if params.len() != self.weights.len() * n {
            return Err(Error::contract("weight parameter count mismatch"));
        }
        for (row, chunk) in self.weights.iter_mut().zip(params.chunks(n)) {
            row.copy_from_slice(chunk);
        }
        Ok(())
    }

    /// `d log pi(a|s) / d w[a'][i] = T p_i(s) (delta_{a,a'} - pi(a'|s))`.
    fn grad_log_prob(&self, s: usize, a: usize) -> Vec<f64> {
        let feats = self.features(s);
        let dist = self.distribution(s);
        let n = self.n_centres();
        let mut g = vec![0.0; self.weights.len() * n];
        for a2 in 0..self.weights.len() {
            let factor = self.temperature * ((a2 == a) as u8 as f64 - dist[a2]);
            for (i, &p) in feats.iter().enumerate() {
                g[a2 * n + i] = factor * p;
            }
        }
        g
    }
}

/// State-action-centred softmax with scalar weights:
/// `pi(a|s) ~ exp(T f(s,a))`, `f(s,a) = sum_i w_i kappa(z_i, (s,a))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxStateActionQkp {
    pub layout: RegisterLayout,
    pub kernel: ScalarKernel,
    /// Centres in state-action space (concatenated vectors).
    pub centres: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub temperature: f64,
}

impl SoftmaxStateActionQkp {
    pub fn new(
        layout: RegisterLayout,
        kernel: ScalarKernel,
        centres: Vec<Vec<f64>>,
        weights: Vec<f64>,
        temperature: f64,
    ) -> Result<Self> {
        kernel.validate()?;
        if !(temperature > 0.0) {
            return Err(Error::config("temperature must be positive"));
        }
        if centres.len() != weights.len() || centres.is_empty() {
            return Err(Error::config("centres and weights must pair up"));
        }
        let z_dim = layout.state.dims + layout.action.dims;
        if centres.iter().any(|c| c.len() != z_dim) {
            return Err(Error::config("state-action centre dimension mismatch"));
        }
        Ok(Self {
            layout,
            kernel,
            centres,
            weights,
            temperature,
        })
    }

    fn joint(&self, s: usize, a: usize) -> Vec<f64> {
        let mut z = self.layout.state.decode(s).expect("state in range");
        z.extend(self.layout.action.decode(a).expect("action in range"));
        z
    }

    /// Kernel section `k(s, a) = [kappa(z_i, (s,a))]_i`.
    pub fn kernel_vector(&self, s: usize, a: usize) -> Vec<f64> {
        let z = self.joint(s, a);
        self.centres
            .iter()
            .map(|c| self.kernel.eval(c, &z).expect("dims validated"))
            .collect()
    }

    pub fn f_value(&self, s: usize, a: usize) -> f64 {
        self.kernel_vector(s, a)
            .iter()
            .zip(&self.weights)
            .map(|(k, w)| k * w)
            .sum()
    }

    fn distribution(&self, s: usize) -> Vec<f64> {
        let f: Vec<f64> = (0..self.layout.n_actions())
            .map(|a| self.f_value(s, a))
            .collect();
        softmax(&f, self.temperature)
    }

    /// Analytic functional gradient in representer coordinates:
    /// `T (k(s,a) - sum_{a'} pi(a'|s) k(s,a'))`.
    pub fn log_policy_grad(&self, s: usize, a: usize) -> Vec<f64> {
        let dist = self.distribution(s);
        let mut expected = vec![0.0; self.weights.len()];
        for (a2, &p) in dist.iter().enumerate() {
            for (e, k) in expected.iter_mut().zip(self.kernel_vector(s, a2)) {
                *e += p * k;
            }
        }
        self.kernel_vector(s, a)
            .iter()
            .zip(&expected)
            .map(|(k, e)| self.temperature * (k - e))
            .collect()
    }
}

impl ClassicalPolicy for SoftmaxStateActionQkp {
    fn n_actions(&self) -> usize {
        self.layout.n_actions()
    }

    fn prob(&self, s: usize, a: usize) -> f64 {
        self.distribution(s)[a]
    }

    fn params(&self) -> Vec<f64> {
        self.weights.clone()
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.weights.len() {
            return Err(Error::contract("weight parameter count mismatch"));
        }
        self.weights = params.to_vec();
        Ok(())
    }

    fn grad_log_prob(&self, s: usize, a: usize) -> Vec<f64> {
        self.log_policy_grad(s, a)
    }
}

fn softmax(values: &[f64], temperature: f64) -> Vec<f64> {
    let m = values
        .iter()
        .map(|v| v * temperature)
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v * temperature - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}
