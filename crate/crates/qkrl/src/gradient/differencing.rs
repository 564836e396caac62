//! Central-differencing stencils and the classical shot-based gradient
//! baseline.

use crate::error::{Error, Result};
use crate::gradient::estimate::GradientEstimate;
use crate::ledger::QueryLedger;
use crate::qmdp::{ClassicalPolicy, TabularMdp};
use crate::rng::child_rng;

/// First-derivative central-differencing coefficients `c_{-m..m}` from the
/// closed form `c_l = (-1)^(l+1) (m!)^2 / (l (m+l)! (m-l)!)`, `c_0 = 0`.
/// Index `l + m` holds `c_l`.
pub fn central_diff_coefficients(m: usize) -> Result<Vec<f64>> {
    if !(1..=6).contains(&m) {
        return Err(Error::contract("scheme order m must lie in 1..=6"));
    }
    let fact = |k: usize| (1..=k).map(|x| x as f64).product::<f64>();
    let m_fact_sq = fact(m) * fact(m);
    let mut c = vec![0.0; 2 * m + 1];
    for l in 1..=m as i64 {
        let sign = if (l + 1) % 2 == 0 { 1.0 } else { -1.0 };
        let value = sign * m_fact_sq
            / (l as f64 * fact((m as i64 + l) as usize) * fact((m as i64 - l) as usize));
        c[(m as i64 + l) as usize] = value;
        c[(m as i64 - l) as usize] = -value;
    }
    Ok(c)
}

/// Smoothed derivative estimate `sum_l c_l f(theta + l h) / h` along one
/// coordinate.
pub fn smoothed_value(
    mut f: impl FnMut(f64) -> f64,
    theta: f64,
    h: f64,
    scheme_m: usize,
) -> Result<f64> {
    let c = central_diff_coefficients(scheme_m)?;
    let m = scheme_m as i64;
    let mut acc = 0.0;
    for l in -m..=m {
        let cl = c[(l + m) as usize];
        if cl != 0.0 {
            acc += cl * f(theta + l as f64 * h);
        }
    }
    Ok(acc / h)
}

/// Options for the classical central-differencing estimator.
#[derive(Debug, Clone)]
pub struct CdOptions {
    pub epsilon: f64,
    pub delta: f64,
    /// Stencil order m (2m + 1 points).
    pub scheme_m: usize,
    /// Fixed stencil step; when unset the step is derived from the Gevrey
    /// remainder bound at the requested epsilon.
    pub step: Option<f64>,
    /// Estimate stencil values from sampled rollouts; exact values otherwise.
    pub shot_based: bool,
    /// Bound on higher-order policy derivatives entering the Gevrey step.
    pub d_bound: f64,
    pub max_queries: Option<u64>,
}

impl CdOptions {
    pub fn new(epsilon: f64, delta: f64) -> Self {
        Self {
            epsilon,
            delta,
            scheme_m: 2,
            step: None,
            shot_based: true,
            d_bound: 1.0,
            max_queries: None,
        }
    }
}

/// Step size from the Lagrangian remainder bound with Gevrey growth
/// `G_k = (M/2) c^k`.
pub fn remainder_step(mdp: &TabularMdp, scheme_m: usize, epsilon: f64, d_bound: f64) -> f64 {
    let k = 2 * scheme_m + 1;
    let big_m = 4.0 * mdp.r_max / (1.0 - mdp.gamma);
    let c = d_bound * (mdp.horizon * mdp.horizon) as f64;
    let g_k = big_m / 2.0 * c.powi(k as i32);
    let fact: f64 = (1..=k).map(|x| x as f64).product();
    let h = (fact * epsilon / (4.0 * (scheme_m as f64).powi(k as i32) * g_k))
        .powf(1.0 / (k as f64 - 1.0));
    h.clamp(1e-6, 0.25)
}

/// Per-dimension central-differencing gradient with Monte-Carlo value
/// estimation at each stencil point (or exact values for bias studies).
pub fn classical_cd_gradient<P: ClassicalPolicy + Clone>(
    mdp: &TabularMdp,
    policy: &P,
    opts: &CdOptions,
    seed: u64,
    ledger: &QueryLedger,
) -> Result<GradientEstimate> {
    let c = central_diff_coefficients(opts.scheme_m)?;
    let m = opts.scheme_m as i64;
    let h = opts
        .step
        .unwrap_or_else(|| remainder_step(mdp, opts.scheme_m, opts.epsilon, opts.d_bound));
    let d = policy.n_params();
    let base = policy.params();
    let k = 2 * opts.scheme_m + 1;
    let b0 = mdp.max_return();

    // Per-point shot counts from the Hoeffding budget at precision
    // eps h / (k |c_l|).
    let mut shots_per_l = vec![0u64; 2 * opts.scheme_m + 1];
    let points = (2 * opts.scheme_m * d) as f64;
    if opts.shot_based {
        for l in -m..=m {
            let cl = c[(l + m) as usize];
            if cl == 0.0 {
                continue;
            }
            let prec = opts.epsilon * h / (k as f64 * cl.abs());
            let n = (2.0 * b0 * b0 / (prec * prec)
                * (2.0 * points / opts.delta).ln())
            .ceil() as u64;
            shots_per_l[(l + m) as usize] = n.max(1);
        }
        let total: u64 = shots_per_l.iter().sum::<u64>() * d as u64;
        if let Some(cap) = opts.max_queries {
            if total > cap {
                return Err(Error::budget(format!(
                    "stencil sampling needs {total} rollouts, cap is {cap}"
                )));
            }
        }
    }

    let mut probe = policy.clone();
    let mut grad = vec![0.0; d];
    let mut total_queries = 0u64;
    for j in 0..d {
        let mut acc = 0.0;
        for l in -m..=m {
            let cl = c[(l + m) as usize];
            if cl == 0.0 {
                continue;
            }
            let mut params = base.clone();
            params[j] += l as f64 * h;
            probe.set_params(&params)?;
            let v = if opts.shot_based {
                let shots = shots_per_l[(l + m) as usize];
                let mut rng = child_rng(seed, (j as u64) << 8 | (l + m) as u64);
                let mut sum = 0.0;
                for _ in 0..shots {
                    let tr = mdp.sample_trajectory(&probe, mdp.horizon, &mut rng, ledger);
                    sum += tr.suffix_return(0, mdp.horizon, mdp.gamma);
                }
                total_queries += shots;
                sum / shots as f64
            } else {
                total_queries += 1;
                mdp.exact_value(&probe)
            };
            acc += cl * v;
        }
        grad[j] = acc / h;
    }
    GradientEstimate::new(
        grad,
        total_queries,
        opts.epsilon,
        opts.delta,
        if opts.shot_based {
            "classical-cd"
        } else {
            "classical-cd-exact"
        },
    )
}
