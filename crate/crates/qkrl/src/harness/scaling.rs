//! Error-versus-queries scaling studies with log-log slope regression.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gradient::differencing::{classical_cd_gradient, CdOptions};
use crate::gradient::gevrey::{quantum_gevrey_gradient, GevreyOptions};
use crate::gradient::linf_distance;
use crate::gradient::qmc::{qbounded, QmcOptions};
use crate::gradient::reinforce_oracle;
use crate::ledger::QueryLedger;
use crate::qmdp::ClassicalPolicy;
use crate::rng::child_rng;

use super::config::{EstimatorKind, ScaleConfig};

/// One grid point of a study.
#[derive(Debug, Clone, Serialize)]
pub struct SlopePoint {
    pub queries: f64,
    /// Root-mean-square sup-norm error over seeds; RMS makes the
    /// slope estimate track the variance scaling directly.
    pub rms_error: f64,
}

/// Regression summary for one estimator.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeReport {
    pub estimator: String,
    pub points: Vec<SlopePoint>,
    /// Log-log slope of error against queries; absent for degenerate data.
    pub slope: Option<f64>,
    /// Half-width of the two-standard-error confidence band.
    pub ci_half_width: Option<f64>,
    /// Zero-error (constant-payload) grids cannot be regressed.
    pub degenerate: bool,
}

/// Runs the study for every configured estimator.
pub fn scaling_study(config: &ScaleConfig, base_dir: Option<&Path>) -> Result<Vec<SlopeReport>> {
    let mdp = config.mdp.load(base_dir)?;
    let policy = config.policy.load(base_dir)?;
    let exact = mdp.value_gradient_fd(&policy, 1e-5);
    let mut reports = Vec::new();
    for estimator in &config.estimators {
        let points: Vec<SlopePoint> = match estimator {
            EstimatorKind::QpgAnalytical | EstimatorKind::ClassicalMvmc => {
                if config.budgets.len() < 4 {
                    return Err(Error::contract("scaling study needs at least 4 grid points"));
                }
                let oracle = reinforce_oracle(&mdp, &policy)?;
                let scale = oracle.max_l2().max(1e-12);
                let normalized = oracle.map_payload(|p| p.iter().map(|x| x / scale).collect())?;
                config
                    .budgets
                    .iter()
                    .map(|&n| {
                        let mut errs = Vec::new();
                        for &seed in &config.seeds {
                            let err = match estimator {
                                EstimatorKind::QpgAnalytical => {
                                    let ledger = QueryLedger::new();
                                    let est = qbounded(
                                        &normalized,
                                        n,
                                        config.delta,
                                        &QmcOptions::default(),
                                        seed,
                                        &ledger,
                                    )?;
                                    let rescaled: Vec<f64> =
                                        est.estimate.iter().map(|x| x * scale).collect();
                                    linf_distance(&rescaled, &exact)
                                }
                                _ => {
                                    // Classical mean at exactly n samples.
                                    let mut rng = child_rng(seed, n);
                                    let mut mean = vec![0.0; oracle.dim()];
                                    for _ in 0..n {
                                        let o = oracle.sample(&mut rng);
                                        for (m, x) in mean.iter_mut().zip(&o.payload) {
                                            *m += x;
                                        }
                                    }
                                    for m in mean.iter_mut() {
                                        *m /= n as f64;
                                    }
                                    linf_distance(&mean, &exact)
                                }
                            };
                            errs.push(err);
                        }
                        Ok(SlopePoint {
                            queries: n as f64,
                            rms_error: rms(&errs),
                        })
                    })
                    .collect::<Result<_>>()?
            }
            EstimatorKind::QpgNumerical | EstimatorKind::ClassicalCd => {
                if config.epsilons.len() < 4 {
                    return Err(Error::contract("scaling study needs at least 4 grid points"));
                }
                config
                    .epsilons
                    .iter()
                    .map(|&eps| {
                        let mut errs = Vec::new();
                        let mut queries = 0.0;
                        for &seed in &config.seeds {
                            let ledger = QueryLedger::new();
                            let est = match estimator {
                                EstimatorKind::QpgNumerical => {
                                    let opts = GevreyOptions::new(eps, config.delta);
                                    quantum_gevrey_gradient(&mdp, &policy, &opts, seed, &ledger)?
                                }
                                _ => {
                                    let mut opts = CdOptions::new(eps, config.delta);
                                    opts.scheme_m = 1;
                                    opts.step = Some(0.05);
                                    classical_cd_gradient(&mdp, &policy, &opts, seed, &ledger)?
                                }
                            };
                            queries += est.queries as f64;
                            errs.push(linf_distance(&est.estimate, &exact));
                        }
                        Ok(SlopePoint {
                            queries: queries / config.seeds.len() as f64,
                            rms_error: rms(&errs),
                        })
                    })
                    .collect::<Result<_>>()?
            }
            other => {
                return Err(Error::config(format!(
                    "estimator {other:?} has no scaling-study mode"
                )))
            }
        };
        reports.push(regress(estimator_name(*estimator), points));
    }
    Ok(reports)
}

fn rms(errs: &[f64]) -> f64 {
    (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt()
}

fn estimator_name(kind: EstimatorKind) -> String {
    match kind {
        EstimatorKind::QpgNumerical => "qpg-numerical",
        EstimatorKind::QpgAnalytical => "qpg-analytical",
        EstimatorKind::Cqrac => "cqrac",
        EstimatorKind::Dcqrac => "dcqrac",
        EstimatorKind::ClassicalCd => "classical-cd",
        EstimatorKind::ClassicalMvmc => "classical-mvmc",
    }
    .to_string()
}

/// OLS log-log regression with a two-standard-error band.
pub fn regress(estimator: String, points: Vec<SlopePoint>) -> SlopeReport {
    if points.iter().any(|p| p.rms_error <= 0.0 || p.queries <= 0.0) {
        return SlopeReport {
            estimator,
            points,
            slope: None,
            ci_half_width: None,
            degenerate: true,
        };
    }
    let xs: Vec<f64> = points.iter().map(|p| p.queries.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.rms_error.ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let dof = (n - 2.0).max(1.0);
    let se = (rss / dof / sxx).sqrt();
    SlopeReport {
        estimator,
        points,
        slope: Some(slope),
        ci_half_width: Some(2.0 * se),
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{MdpSource, PolicySource};

    #[test]
    fn quantum_and_classical_slopes_separate() {
        let config = ScaleConfig {
            mdp: MdpSource::Preset("two-armed-bandit".into()),
            policy: PolicySource::Preset("bandit-gauss".into()),
            estimators: vec![EstimatorKind::QpgAnalytical, EstimatorKind::ClassicalMvmc],
            budgets: vec![128, 512, 2048, 8192],
            epsilons: vec![],
            seeds: (0..24).collect(),
            delta: 0.05,
        };
        let reports = scaling_study(&config, None).unwrap();
        let quantum = reports[0].slope.unwrap();
        let classical = reports[1].slope.unwrap();
        assert!(
            (-1.3..=-0.7).contains(&quantum),
            "quantum slope {quantum}"
        );
        assert!(
            (-0.7..=-0.3).contains(&classical),
            "classical slope {classical}"
        );
    }

    #[test]
    fn too_few_points_rejected() {
        let config = ScaleConfig {
            mdp: MdpSource::Preset("two-armed-bandit".into()),
            policy: PolicySource::Preset("bandit-gauss".into()),
            estimators: vec![EstimatorKind::QpgAnalytical],
            budgets: vec![128, 256],
            epsilons: vec![],
            seeds: vec![0],
            delta: 0.05,
        };
        assert!(matches!(
            scaling_study(&config, None),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn constant_payload_flagged_degenerate() {
        let points = vec![
            SlopePoint { queries: 10.0, rms_error: 0.0 },
            SlopePoint { queries: 20.0, rms_error: 0.0 },
            SlopePoint { queries: 40.0, rms_error: 0.0 },
            SlopePoint { queries: 80.0, rms_error: 0.0 },
        ];
        let report = regress("control".into(), points);
        assert!(report.degenerate);
        assert!(report.slope.is_none());
    }
}
