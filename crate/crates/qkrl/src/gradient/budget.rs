//! Query-budget calculators for every estimator family.
//!
//! Budgets are evaluated with constant factor 1 and an explicit `ln(d /
//! delta)` factor; `xi(p) = max(0, 1/2 - 1/p)` converts across p-norms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Budget formula selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetVariant {
    /// Classical softmax policy gradient with the parameter-shift rule.
    SoftmaxPgClassical,
    /// Numerical quantum policy gradient (Fourier gradient estimation).
    NumericalQpg,
    /// Numerical QPG with representer policies (same form, d = N A).
    NumericalQpgRkhs,
    /// Analytical quantum policy gradient via bounded quantum Monte Carlo.
    AnalyticalQpg,
    /// Analytical QPG with kernel policies (same form, d = N A).
    AnalyticalQpgRkhs,
    /// Bounded quantum Monte Carlo on the likelihood-ratio oracle.
    ReinforceQuantum,
    /// Classical multivariate Monte Carlo on the same oracle.
    ReinforceClassical,
    /// Stochastic kernel actor-critic, range form.
    CqracA,
    /// Stochastic kernel actor-critic, variance form.
    CqracB,
    /// Classical counterpart of the stochastic actor-critic.
    CqracClassical,
    /// Deterministic kernel actor-critic.
    Dcqrac,
    /// Classical counterpart of the deterministic actor-critic.
    DcqracClassical,
}

impl BudgetVariant {
    pub const ALL: [BudgetVariant; 12] = [
        BudgetVariant::SoftmaxPgClassical,
        BudgetVariant::NumericalQpg,
        BudgetVariant::NumericalQpgRkhs,
        BudgetVariant::AnalyticalQpg,
        BudgetVariant::AnalyticalQpgRkhs,
        BudgetVariant::ReinforceQuantum,
        BudgetVariant::ReinforceClassical,
        BudgetVariant::CqracA,
        BudgetVariant::CqracB,
        BudgetVariant::CqracClassical,
        BudgetVariant::Dcqrac,
        BudgetVariant::DcqracClassical,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BudgetVariant::SoftmaxPgClassical => "softmax-pg-classical",
            BudgetVariant::NumericalQpg => "numerical-qpg",
            BudgetVariant::NumericalQpgRkhs => "numerical-qpg-rkhs",
            BudgetVariant::AnalyticalQpg => "analytical-qpg",
            BudgetVariant::AnalyticalQpgRkhs => "analytical-qpg-rkhs",
            BudgetVariant::ReinforceQuantum => "reinforce-quantum",
            BudgetVariant::ReinforceClassical => "reinforce-classical",
            BudgetVariant::CqracA => "cqrac-a",
            BudgetVariant::CqracB => "cqrac-b",
            BudgetVariant::CqracClassical => "cqrac-classical",
            BudgetVariant::Dcqrac => "dcqrac",
            BudgetVariant::DcqracClassical => "dcqrac-classical",
        }
    }
}

/// Symbols feeding the budget formulas; variants check for the ones they
/// need and report the missing names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BudgetParams {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    /// Parameter dimensionality (d = N A for kernel policies).
    pub d: Option<usize>,
    pub horizon: Option<usize>,
    pub r_max: Option<f64>,
    pub gamma: Option<f64>,
    /// Norm order; defaults to 2 (xi = 0).
    pub p: Option<f64>,
    /// Bound on the log-policy gradient p-norm; defaults to 1.
    pub b_p: Option<f64>,
    pub temperature: Option<f64>,
    /// Bound on higher-order policy derivatives; defaults to 1.
    pub d_bound: Option<f64>,
    pub epsilon_q: Option<f64>,
    pub sigma_nabla: Option<f64>,
    pub c_p: Option<f64>,
    /// Operator norm of the payload covariance (classical actor-critic
    /// budgets); defaults to 0.
    pub sigma_x_norm: Option<f64>,
}

/// `xi(p) = max(0, 1/2 - 1/p)`.
pub fn xi(p: f64) -> f64 {
    if p.is_infinite() {
        0.5
    } else {
        (0.5 - 1.0 / p).max(0.0)
    }
}

struct Required<'a> {
    params: &'a BudgetParams,
    missing: Vec<&'static str>,
}

impl<'a> Required<'a> {
    fn new(params: &'a BudgetParams) -> Self {
        Self {
            params,
            missing: Vec::new(),
        }
    }
    fn f(&mut self, field: Option<f64>, name: &'static str) -> f64 {
        match field {
            Some(v) => v,
            None => {
                self.missing.push(name);
                f64::NAN
            }
        }
    }
    fn epsilon(&mut self) -> f64 {
        self.f(self.params.epsilon, "epsilon")
    }
    fn delta(&mut self) -> f64 {
        self.f(self.params.delta, "delta")
    }
    fn d(&mut self) -> f64 {
        match self.params.d {
            Some(v) => v as f64,
            None => {
                self.missing.push("d");
                f64::NAN
            }
        }
    }
    fn horizon(&mut self) -> f64 {
        match self.params.horizon {
            Some(v) => v as f64,
            None => {
                self.missing.push("horizon");
                f64::NAN
            }
        }
    }
    fn r_max(&mut self) -> f64 {
        self.f(self.params.r_max, "r_max")
    }
    fn gamma(&mut self) -> f64 {
        self.f(self.params.gamma, "gamma")
    }
    fn finish(self, value: f64) -> Result<u64> {
        if !self.missing.is_empty() {
            return Err(Error::contract(format!(
                "budget is missing symbols: {}",
                self.missing.join(", ")
            )));
        }
        if !value.is_finite() || value < 0.0 {
            return Err(Error::contract("budget evaluated to a non-finite value"));
        }
        Ok(value.ceil().max(1.0) as u64)
    }
}

/// Evaluates the query budget for a variant.
pub fn query_budget(variant: BudgetVariant, params: &BudgetParams) -> Result<u64> {
    let p = params.p.unwrap_or(2.0);
    let b_p = params.b_p.unwrap_or(1.0);
    let d_bound = params.d_bound.unwrap_or(1.0);
    let mut req = Required::new(params);
    let value = match variant {
        BudgetVariant::SoftmaxPgClassical => {
            let (eps, delta, d) = (req.epsilon(), req.delta(), req.d());
            let (t, r, g) = (req.horizon(), req.r_max(), req.gamma());
            let temp = req.f(params.temperature, "temperature");
            let log = (d / delta).ln();
            temp * temp * r * r * t * t * log / (eps * eps * (1.0 - g) * (1.0 - g))
        }
        BudgetVariant::NumericalQpg | BudgetVariant::NumericalQpgRkhs => {
            let (eps, delta, d) = (req.epsilon(), req.delta(), req.d());
            let (t, r, g) = (req.horizon(), req.r_max(), req.gamma());
            let log = (d / delta).ln();
            d.sqrt() * d_bound * t * r * log / (eps * (1.0 - g))
        }
        BudgetVariant::AnalyticalQpg
        | BudgetVariant::AnalyticalQpgRkhs
        | BudgetVariant::ReinforceQuantum => {
            let (eps, delta, d) = (req.epsilon(), req.delta(), req.d());
            let (t, r, g) = (req.horizon(), req.r_max(), req.gamma());
            let log = (d / delta).ln();
            d.powf(xi(p)) * b_p * t * r * log / (eps * (1.0 - g))
        }
        BudgetVariant::ReinforceClassical => {
            let (eps, delta, d) = (req.epsilon(), req.delta(), req.d());
            let (t, r, g) = (req.horizon(), req.r_max(), req.gamma());
            let log = (d / delta).ln();
            let base = d.powf(xi(p)) * b_p * t * r / (eps * (1.0 - g));
            base * base * log
        }
        BudgetVariant::CqracA => {
            let (eps, delta, d, g) = (req.epsilon(), req.delta(), req.d(), req.gamma());
            let eq = req.f(params.epsilon_q, "epsilon_q");
            let log = (d / delta).ln();
            d.powf(xi(p)) * eq * b_p * log / ((1.0 - g) * eps)
        }
        BudgetVariant::CqracB => {
            let (eps, delta, d, g) = (req.epsilon(), req.delta(), req.d(), req.gamma());
            let eq = req.f(params.epsilon_q, "epsilon_q");
            let sn = req.f(params.sigma_nabla, "sigma_nabla");
            let log = (d / delta).ln();
            d.powf(xi(p)) * eq * sn * log / ((1.0 - g) * eps)
        }
        BudgetVariant::CqracClassical => {
            let (eps, delta, d, g) = (req.epsilon(), req.delta(), req.d(), req.gamma());
            let eq = req.f(params.epsilon_q, "epsilon_q");
            let sx = params.sigma_x_norm.unwrap_or(0.0);
            let log = (d / delta).ln();
            (d.powf(2.0 * xi(p)) * eq * eq * b_p * b_p + sx) * log
                / ((1.0 - g) * (1.0 - g) * eps * eps)
        }
        BudgetVariant::Dcqrac => {
            let (eps, delta, d, g) = (req.epsilon(), req.delta(), req.d(), req.gamma());
            let cp = req.f(params.c_p, "c_p");
            let log = (d / delta).ln();
            d.powf(xi(p)) * cp * log / ((1.0 - g) * eps)
        }
        BudgetVariant::DcqracClassical => {
            let (eps, delta, d, g) = (req.epsilon(), req.delta(), req.d(), req.gamma());
            let cp = req.f(params.c_p, "c_p");
            let log = (d / delta).ln();
            cp * cp * log / ((1.0 - g) * (1.0 - g) * eps * eps)
        }
    };
    req.finish(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> BudgetParams {
        BudgetParams {
            epsilon: Some(0.1),
            delta: Some(0.05),
            d: Some(2),
            horizon: Some(3),
            r_max: Some(1.0),
            gamma: Some(0.5),
            ..Default::default()
        }
    }

    #[test]
    fn xi_values() {
        assert_eq!(xi(2.0), 0.0);
        assert_eq!(xi(1.0), 0.0);
        assert_eq!(xi(f64::INFINITY), 0.5);
        assert!((xi(4.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn reinforce_budget_reference_value() {
        // ceil( (3 * 1 / (0.1 * 0.5)) * ln(2 / 0.05) ) = ceil(221.33) = 222.
        let n = query_budget(BudgetVariant::ReinforceQuantum, &base()).unwrap();
        assert_eq!(n, 222);
    }

    #[test]
    fn missing_symbols_are_listed() {
        let mut p = base();
        p.epsilon_q = None;
        let err = query_budget(BudgetVariant::CqracB, &p).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("epsilon_q"), "{text}");
        assert!(text.contains("sigma_nabla"), "{text}");
    }

    #[test]
    fn infinity_norm_introduces_sqrt_d() {
        let mut p = base();
        p.p = Some(f64::INFINITY);
        p.d = Some(4);
        let with_xi = query_budget(BudgetVariant::ReinforceQuantum, &p).unwrap();
        p.p = Some(2.0);
        let without = query_budget(BudgetVariant::ReinforceQuantum, &p).unwrap();
        // sqrt(4) = 2 times larger, up to ceiling.
        assert!((with_xi as f64 / without as f64 - 2.0).abs() < 0.02);
    }

    #[test]
    fn budgets_monotone_in_inverse_epsilon() {
        let mut p = base();
        p.epsilon_q = Some(1.0);
        p.sigma_nabla = Some(2.0);
        p.c_p = Some(1.5);
        p.temperature = Some(1.0);
        for variant in BudgetVariant::ALL {
            let n_coarse = query_budget(variant, &p).unwrap();
            let mut fine = p.clone();
            fine.epsilon = Some(0.05);
            let n_fine = query_budget(variant, &fine).unwrap();
            assert!(n_fine >= n_coarse, "{variant:?}");
        }
    }

    #[test]
    fn quantum_vs_classical_quadratic_relation() {
        let p = base();
        let nq = query_budget(BudgetVariant::ReinforceQuantum, &p).unwrap() as f64;
        let nc = query_budget(BudgetVariant::ReinforceClassical, &p).unwrap() as f64;
        let log = (2.0f64 / 0.05).ln();
        // nc = nq^2 / log, up to ceiling effects.
        assert!((nc - nq * nq / log).abs() / nc < 0.02);
    }
}
