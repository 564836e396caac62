//! Compatible kernel critics and kernel ridge regression.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::ScalarKernel;
use crate::policies::GaussQkp;
use crate::qmdp::ClassicalPolicy;

/// Compatible kernel
/// `K_mu((s,a), (s',a')) = kappa(s, s') (a - mu(s))^T Sigma^-1 (a' - mu(s'))`
/// evaluated at grid indices under the policy's current mean.
pub fn compatible_kernel(policy: &GaussQkp, z1: (usize, usize), z2: (usize, usize)) -> Result<f64> {
    let s1 = policy.layout.state.decode(z1.0)?;
    let s2 = policy.layout.state.decode(z2.0)?;
    let a1 = policy.layout.action.decode(z1.1)?;
    let a2 = policy.layout.action.decode(z2.1)?;
    let mu1 = policy.mean_action(&s1);
    let mu2 = policy.mean_action(&s2);
    let kappa = policy.kernel.scalar.eval(&s1, &s2)?;
    let inner: f64 = a1
        .iter()
        .zip(&mu1)
        .zip(a2.iter().zip(&mu2))
        .zip(&policy.sigma)
        .map(|(((x, m1), (y, m2)), var)| (x - m1) * (y - m2) / var)
        .sum();
    Ok(kappa * inner)
}

/// Exact ridge solve on a precomputed Gram matrix:
/// `beta = (K + n lambda_n I)^-1 y`.
pub fn kernel_ridge_fit_gram(gram: &DMatrix<f64>, targets: &[f64], lambda_n: f64) -> Result<Vec<f64>> {
    let n = targets.len();
    if gram.nrows() != n || gram.ncols() != n || n == 0 {
        return Err(Error::contract("gram matrix must match the sample count"));
    }
    let mut system = gram.clone();
    for i in 0..n {
        system[(i, i)] += n as f64 * lambda_n;
    }
    let y = DVector::from_column_slice(targets);
    system
        .lu()
        .solve(&y)
        .map(|b| b.iter().cloned().collect())
        .ok_or_else(|| Error::solver("ridge system is singular"))
}

/// Kernel ridge regression over raw input points.
pub fn kernel_ridge_fit(
    points: &[Vec<f64>],
    targets: &[f64],
    kernel: &ScalarKernel,
    lambda_n: f64,
) -> Result<Vec<f64>> {
    if points.len() != targets.len() {
        return Err(Error::contract("one target per input point"));
    }
    let gram = kernel.gram(points)?;
    kernel_ridge_fit_gram(&gram, targets, lambda_n)
}

/// Compatible critic in dual form: `Q(z) = sum_i beta_i K_mu(z_i, z)` over
/// fitted sample points, with the policy mean and covariance frozen at fit
/// time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibleCritic {
    /// Fitted sample points as grid indices.
    pub points: Vec<(usize, usize)>,
    pub beta: Vec<f64>,
    /// Mean action per grid state at fit time.
    pub mu: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
    pub kernel: ScalarKernel,
    /// Decoded state vectors (kappa inputs), one per grid state.
    pub state_vectors: Vec<Vec<f64>>,
    /// Decoded action vectors, one per grid action.
    pub action_vectors: Vec<Vec<f64>>,
}

impl CompatibleCritic {
    /// Whitened compatible feature value
    /// `(a - mu(s))^T Sigma^-1 (a' - mu(s'))` between two points.
    fn residual_inner(&self, z1: (usize, usize), z2: (usize, usize)) -> f64 {
        let r1 = self.residual(z1);
        let r2 = self.residual(z2);
        r1.iter()
            .zip(&r2)
            .zip(&self.sigma)
            .map(|((x, y), var)| x * y / var)
            .sum()
    }

    fn residual(&self, z: (usize, usize)) -> Vec<f64> {
        self.action_vectors[z.1]
            .iter()
            .zip(&self.mu[z.0])
            .map(|(a, m)| a - m)
            .collect()
    }

    pub fn kernel_value(&self, z1: (usize, usize), z2: (usize, usize)) -> f64 {
        let kappa = self
            .kernel
            .eval(&self.state_vectors[z1.0], &self.state_vectors[z2.0])
            .expect("state vectors share dimensions");
        kappa * self.residual_inner(z1, z2)
    }

    pub fn q_value(&self, s: usize, a: usize) -> f64 {
        self.points
            .iter()
            .zip(&self.beta)
            .map(|(z, b)| b * self.kernel_value(*z, (s, a)))
            .sum()
    }
}

/// Fits the compatible critic by kernel ridge regression on `(s, a, target)`
/// samples under the policy's current mean function.
pub fn fit_compatible_critic(
    policy: &GaussQkp,
    samples: &[(usize, usize, f64)],
    lambda_n: f64,
) -> Result<CompatibleCritic> {
    if samples.is_empty() {
        return Err(Error::contract("critic fit needs at least one sample"));
    }
    let layout = policy.layout;
    let state_vectors = layout.state.grid();
    let action_vectors = layout.action.grid();
    let mu: Vec<Vec<f64>> = state_vectors
        .iter()
        .map(|s| policy.mean_action(s))
        .collect();
    let mut critic = CompatibleCritic {
        points: samples.iter().map(|(s, a, _)| (*s, *a)).collect(),
        beta: vec![0.0; samples.len()],
        mu,
        sigma: policy.sigma.clone(),
        kernel: policy.kernel.scalar.clone(),
        state_vectors,
        action_vectors,
    };
    let n = samples.len();
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = critic.kernel_value(critic.points[i], critic.points[j]);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let targets: Vec<f64> = samples.iter().map(|(_, _, y)| *y).collect();
    critic.beta = kernel_ridge_fit_gram(&gram, &targets, lambda_n)?;
    Ok(critic)
}

/// Baseline `b(s) = sum_a pi(a|s) Q(s, a)` over the action grid.
pub fn baseline_value<P: ClassicalPolicy + ?Sized>(
    q: impl Fn(usize, usize) -> f64,
    policy: &P,
    s: usize,
) -> f64 {
    (0..policy.n_actions()).map(|a| policy.prob(s, a) * q(s, a)).sum()
}
