//! Policy smoothness bounds: centre budgets, l1 bounds on the log-policy
//! gradient, and bounds on its per-coordinate standard deviations.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::gaussian::GaussQkp;
use super::softmax::SoftmaxQkp;
use super::Policy;

/// Standard-normal quantile `Z_p`.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0)
        .expect("unit normal")
        .inverse_cdf(p)
}

/// Centre budget from the Lipschitz constant of the mean function:
/// `N = ceil(L eps_k / (a_max kappa_max))`.
pub fn centre_budget(lipschitz: f64, eps_k: f64, a_max: f64, kappa_max: f64) -> Result<usize> {
    if !(lipschitz > 0.0 && eps_k > 0.0 && a_max > 0.0 && kappa_max > 0.0) {
        return Err(Error::contract("centre budget needs positive inputs"));
    }
    Ok((lipschitz * eps_k / (a_max * kappa_max)).ceil() as usize)
}

/// Quantile form of the Gaussian-policy gradient bound:
/// `B1 <= A N Z_{1 - delta/(2A)} kappa_max`.
pub fn gauss_b1_bound(a_dims: usize, n_centres: usize, kappa_max: f64, delta: f64) -> f64 {
    if kappa_max == 0.0 {
        return 0.0;
    }
    let q = normal_quantile(1.0 - delta / (2.0 * a_dims as f64));
    a_dims as f64 * n_centres as f64 * q * kappa_max
}

/// l1 bound on the gradient of the log-policy, holding with probability at
/// least `1 - delta` over actions drawn from the policy.
pub fn bound_b1(policy: &Policy, delta: f64) -> Result<f64> {
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::contract("delta must lie in (0, 1)"));
    }
    match policy {
        Policy::Gauss(p) => Ok(gauss_b1_bound(
            p.a_dims(),
            p.n_centres(),
            p.kernel.scalar.kappa_max(),
            delta,
        )),
        Policy::Softmax(p) => Ok(softmax1_b1_bound(p)),
        _ => Err(Error::contract(
            "gradient l1 bound is defined for Gaussian and weight-only softmax policies",
        )),
    }
}

/// Weight-only softmax: features are a convex combination, so
/// `||grad log pi||_1 <= 2 T` deterministically.
pub fn softmax1_b1_bound(policy: &SoftmaxQkp) -> f64 {
    2.0 * policy.temperature
}

/// Fraction of sampled standardized gradients whose l1 norm exceeds the
/// quantile bound. Actions are drawn from the continuous Gaussian; the
/// standardized residual `z_j = (a_j - mu_j) / sigma_j` is the regime in
/// which the union-bound quantile argument is stated.
pub fn empirical_b1_violation_rate(
    policy: &GaussQkp,
    bound: f64,
    draws: usize,
    rng: &mut Rng,
) -> f64 {
    use rand::Rng as _;
    use rand_distr::StandardNormal;
    let n_states = policy.layout.n_states();
    let mut violations = 0usize;
    for _ in 0..draws {
        let s = rng.gen_range(0..n_states);
        let state = policy.layout.state.decode(s).expect("state in range");
        let mut l1 = 0.0;
        let z: Vec<f64> = (0..policy.a_dims())
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        for c in &policy.centres {
            let kappa = policy
                .kernel
                .scalar
                .eval(c, &state)
                .expect("dims validated");
            for zj in &z {
                l1 += (kappa * zj).abs();
            }
        }
        if l1 > bound {
            violations += 1;
        }
    }
    violations as f64 / draws as f64
}

/// p-norm bound on the per-coordinate standard deviations of the
/// log-policy gradient: entries `sigma_d(i, j) <= kappa_max / sqrt(Sigma_jj)`
/// over (centre i, action dim j).
pub fn bound_sigma_nabla(policy: &GaussQkp, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::contract("p-norm needs p >= 1"));
    }
    let kappa_max = policy.kernel.scalar.kappa_max();
    let entries: Vec<f64> = (0..policy.n_centres())
        .flat_map(|_| policy.sigma.iter().map(move |v| kappa_max / v.sqrt()))
        .collect();
    Ok(p_norm(&entries, p))
}

fn p_norm(v: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        v.iter().cloned().fold(0.0, f64::max)
    } else {
        v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{DimRange, GridCodec, RegisterLayout};
    use crate::kernels::{OperatorKernel, ScalarKernel};

    fn gauss(sigma: Vec<f64>, n_centres: usize) -> GaussQkp {
        let a_dims = sigma.len();
        let layout = RegisterLayout::new(
            GridCodec::new(1, 1, DimRange::new(0.0, 1.0)).unwrap(),
            GridCodec::new(a_dims, 2, DimRange::new(0.0, 1.0)).unwrap(),
            4,
            1.0,
        )
        .unwrap();
        GaussQkp::new(
            layout,
            OperatorKernel::isotropic(ScalarKernel::Rbf { lengthscale: 1.0 }, a_dims).unwrap(),
            (0..n_centres).map(|i| vec![i as f64 / n_centres as f64]).collect(),
            vec![vec![0.3; a_dims]; n_centres],
            sigma,
        )
        .unwrap()
    }

    #[test]
    fn centre_budget_formula() {
        assert_eq!(centre_budget(16.0, 0.25, 2.0, 1.0).unwrap(), 2);
        assert_eq!(centre_budget(8.0, 0.25, 2.0, 1.0).unwrap(), 1);
        // Doubling L doubles N.
        assert_eq!(centre_budget(32.0, 0.25, 2.0, 1.0).unwrap(), 4);
    }

    #[test]
    fn quantile_bound_reference_value() {
        // A = 1, N = 1, kappa_max = 1, delta = 0.05 -> Z_{0.975}.
        let b = gauss_b1_bound(1, 1, 1.0, 0.05);
        assert!((b - 1.95996).abs() < 1e-4);
        assert_eq!(gauss_b1_bound(1, 1, 0.0, 0.05), 0.0);
    }

    #[test]
    fn violation_rate_within_delta() {
        let delta = 0.05;
        let p = gauss(vec![1.0], 1);
        let bound = bound_b1(&Policy::Gauss(p.clone()), delta).unwrap();
        let mut rng = crate::rng::rng_from_seed(1);
        let rate = empirical_b1_violation_rate(&p, bound, 100_000, &mut rng);
        assert!(rate <= delta, "rate {rate} exceeds delta {delta}");
    }

    #[test]
    fn sigma_nabla_examples() {
        let p = gauss(vec![1.0], 1);
        assert!((bound_sigma_nabla(&p, 1.0).unwrap() - 1.0).abs() < 1e-12);
        // Scaling Sigma by 4 halves the bound.
        let p4 = gauss(vec![4.0], 1);
        assert!((bound_sigma_nabla(&p4, 1.0).unwrap() - 0.5).abs() < 1e-12);
        // Infinity norm takes the largest entry.
        let p2 = gauss(vec![0.25, 1.0], 2);
        assert!((bound_sigma_nabla(&p2, f64::INFINITY).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empirical_sd_below_sigma_nabla_bound() {
        use rand::Rng as _;
        use rand_distr::StandardNormal;
        let p = gauss(vec![0.25], 2);
        let bound_inf = bound_sigma_nabla(&p, f64::INFINITY).unwrap();
        let mut rng = crate::rng::rng_from_seed(6);
        // Per-coordinate SD of the continuous gradient over on-policy draws.
        let mut samples: Vec<Vec<f64>> = Vec::new();
        for _ in 0..20_000 {
            let s = rng.gen_range(0..2);
            let state = p.layout.state.decode(s).unwrap();
            let mu = p.mean_action(&state);
            let z: f64 = rng.sample(StandardNormal);
            let a = vec![mu[0] + p.sigma[0].sqrt() * z];
            samples.push(p.log_policy_grad_gaussian(s, &a).unwrap());
        }
        let d = samples[0].len();
        for j in 0..d {
            let mean: f64 = samples.iter().map(|g| g[j]).sum::<f64>() / samples.len() as f64;
            let var: f64 = samples.iter().map(|g| (g[j] - mean).powi(2)).sum::<f64>()
                / samples.len() as f64;
            assert!(
                var.sqrt() <= bound_inf + 0.05,
                "coordinate {j}: sd {} vs bound {bound_inf}",
                var.sqrt()
            );
        }
    }

    #[test]
    fn unsupported_variant_rejected() {
        let layout = RegisterLayout::new(
            GridCodec::new(1, 1, DimRange::new(0.0, 1.0)).unwrap(),
            GridCodec::new(1, 1, DimRange::new(0.0, 1.0)).unwrap(),
            4,
            1.0,
        )
        .unwrap();
        let raw = super::super::representer::RawPqc::new(
            layout,
            ScalarKernel::KroneckerDelta,
            layout.state.grid(),
            vec![vec![0.1], vec![0.2]],
        )
        .unwrap();
        assert!(matches!(
            bound_b1(&Policy::RawPqc(raw), 0.05),
            Err(Error::Contract(_))
        ));
    }
}
