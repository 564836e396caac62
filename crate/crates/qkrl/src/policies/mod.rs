//! Quantum kernel policy families.
//!
//! Three families share the [`ClassicalPolicy`] interface: the Raw-PQC with
//! kernel-controlled rotations ([`RawPqc`]), softmax policies over kernel
//! observables ([`SoftmaxQkp`], [`SoftmaxStateActionQkp`]), and the Gaussian
//! kernel policy with wavefunction preparation ([`GaussQkp`]).

pub mod bounds;
pub mod gaussian;
pub mod kitaev_webb;
pub mod representer;
pub mod softmax;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::qmdp::ClassicalPolicy;
use crate::rng::Rng;

pub use bounds::{bound_b1, bound_sigma_nabla, centre_budget};
pub use gaussian::GaussQkp;
pub use kitaev_webb::{
    apply_gaussian_ladder, direct_gaussian_amplitudes, gaussian_ladder_angles, jacobi_theta_sum,
};
pub use representer::{check_higher_order_bound, extract_representer_weights, RawPqc};
pub use softmax::{SoftmaxQkp, SoftmaxStateActionQkp};

/// Any policy family, as stored in run configs and checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Policy {
    Gauss(GaussQkp),
    RawPqc(RawPqc),
    Softmax(SoftmaxQkp),
    SoftmaxStateAction(SoftmaxStateActionQkp),
}

impl ClassicalPolicy for Policy {
    fn n_actions(&self) -> usize {
        match self {
            Policy::Gauss(p) => p.n_actions(),
            Policy::RawPqc(p) => p.n_actions(),
            Policy::Softmax(p) => p.n_actions(),
            Policy::SoftmaxStateAction(p) => p.n_actions(),
        }
    }

    fn prob(&self, s: usize, a: usize) -> f64 {
        match self {
            Policy::Gauss(p) => p.prob(s, a),
            Policy::RawPqc(p) => p.prob(s, a),
            Policy::Softmax(p) => p.prob(s, a),
            Policy::SoftmaxStateAction(p) => p.prob(s, a),
        }
    }

    fn params(&self) -> Vec<f64> {
        match self {
            Policy::Gauss(p) => p.params(),
            Policy::RawPqc(p) => p.params(),
            Policy::Softmax(p) => p.params(),
            Policy::SoftmaxStateAction(p) => p.params(),
        }
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        match self {
            Policy::Gauss(p) => p.set_params(params),
            Policy::RawPqc(p) => p.set_params(params),
            Policy::Softmax(p) => p.set_params(params),
            Policy::SoftmaxStateAction(p) => p.set_params(params),
        }
    }

    fn grad_log_prob(&self, s: usize, a: usize) -> Vec<f64> {
        match self {
            Policy::Gauss(p) => p.grad_log_prob(s, a),
            Policy::RawPqc(p) => p.grad_log_prob(s, a),
            Policy::Softmax(p) => p.grad_log_prob(s, a),
            Policy::SoftmaxStateAction(p) => p.grad_log_prob(s, a),
        }
    }

    fn action_amplitudes(&self, s: usize) -> Vec<f64> {
        match self {
            Policy::Gauss(p) => p.action_amplitudes(s),
            Policy::RawPqc(p) => p.action_amplitudes(s),
            Policy::Softmax(p) => p.action_amplitudes(s),
            Policy::SoftmaxStateAction(p) => p.action_amplitudes(s),
        }
    }

    fn sample_action(&self, s: usize, rng: &mut Rng) -> usize {
        match self {
            Policy::Gauss(p) => p.sample_action(s, rng),
            Policy::RawPqc(p) => p.sample_action(s, rng),
            Policy::Softmax(p) => p.sample_action(s, rng),
            Policy::SoftmaxStateAction(p) => p.sample_action(s, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{DimRange, GridCodec, RegisterLayout};
    use crate::kernels::{OperatorKernel, ScalarKernel};

    fn layout() -> RegisterLayout {
        RegisterLayout::new(
            GridCodec::new(1, 1, DimRange::new(0.0, 1.0)).unwrap(),
            GridCodec::new(1, 1, DimRange::new(0.0, 1.0)).unwrap(),
            4,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn policy_enum_serde_round_trip() {
        let p = Policy::Gauss(
            GaussQkp::new(
                layout(),
                OperatorKernel::isotropic(ScalarKernel::Rbf { lengthscale: 1.0 }, 1).unwrap(),
                vec![vec![0.0]],
                vec![vec![0.5]],
                vec![0.1],
            )
            .unwrap(),
        );
        let text = serde_json::to_string(&p).unwrap();
        let back: Policy = serde_json::from_str(&text).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn probabilities_normalize_through_the_enum() {
        let p = Policy::Softmax(
            SoftmaxQkp::new(
                layout(),
                ScalarKernel::Rbf { lengthscale: 1.0 },
                vec![vec![0.0], vec![1.0]],
                vec![vec![0.4, -0.6], vec![0.0, 0.2]],
                1.7,
            )
            .unwrap(),
        );
        for s in 0..2 {
            let total: f64 = (0..2).map(|a| p.prob(s, a)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
