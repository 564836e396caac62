//! Run dispatcher: executes one configuration over its seeds and writes
//! bit-stable CSV/JSON artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::actorcritic::{run_cqrac, run_dcqrac, CqracConfig, DcqracConfig, IterationStats};
use crate::error::{Error, Result};
use crate::gradient::budget::{query_budget, BudgetParams, BudgetVariant};
use crate::gradient::differencing::{classical_cd_gradient, CdOptions};
use crate::gradient::gevrey::{quantum_gevrey_gradient, GevreyOptions};
use crate::gradient::qmc::{classical_mvmc, qbounded, QmcOptions};
use crate::gradient::reinforce_oracle;
use crate::ledger::QueryLedger;
use crate::policies::{GaussQkp, Policy};
use crate::qmdp::{ClassicalPolicy, TabularMdp};

use super::config::{BackendKind, EstimatorKind, RunConfig};

/// One estimator-run row of the ledger CSV.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateRow {
    pub seed: u64,
    pub estimator: String,
    pub backend: String,
    pub epsilon: f64,
    pub delta: f64,
    pub queries: u64,
    pub error_vs_exact: Option<f64>,
}

/// Artifacts of a run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub rows: Vec<EstimateRow>,
    pub files: Vec<PathBuf>,
    pub final_values: Vec<f64>,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.12e}")
}

fn write_file(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    files.push(path);
    Ok(())
}

/// Executes the configured run and writes its artifacts under `out_dir`.
pub fn run(config: &RunConfig, base_dir: Option<&Path>, out_dir: &Path) -> Result<RunSummary> {
    let mdp = config.mdp.load(base_dir)?;
    let policy = config.policy.load(base_dir)?;
    match config.estimator {
        EstimatorKind::Cqrac | EstimatorKind::Dcqrac => run_training(config, &mdp, policy, out_dir),
        _ => run_estimators(config, &mdp, policy, out_dir),
    }
}

fn run_estimators(
    config: &RunConfig,
    mdp: &TabularMdp,
    policy: Policy,
    out_dir: &Path,
) -> Result<RunSummary> {
    let exact = mdp.value_gradient_fd(&policy, 1e-5);
    let ledger = QueryLedger::new();
    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let row = match config.estimator {
            EstimatorKind::QpgNumerical => {
                let mut opts = GevreyOptions::new(config.epsilon, config.delta);
                opts.backend = config.backend.phase_backend()?;
                let est = quantum_gevrey_gradient(mdp, &policy, &opts, seed, &ledger)?
                    .with_error_vs(&exact);
                EstimateRow {
                    seed,
                    estimator: "qpg-numerical".into(),
                    backend: est.backend.clone(),
                    epsilon: config.epsilon,
                    delta: config.delta,
                    queries: est.queries,
                    error_vs_exact: est.error_vs_exact,
                }
            }
            EstimatorKind::QpgAnalytical => {
                let oracle = reinforce_oracle(mdp, &policy)?;
                let n = query_budget(
                    BudgetVariant::ReinforceQuantum,
                    &BudgetParams {
                        epsilon: Some(config.epsilon),
                        delta: Some(config.delta),
                        d: Some(policy.n_params()),
                        horizon: Some(mdp.horizon),
                        r_max: Some(mdp.r_max),
                        gamma: Some(mdp.gamma),
                        ..Default::default()
                    },
                )?;
                if config.backend == BackendKind::Accounting {
                    EstimateRow {
                        seed,
                        estimator: "qpg-analytical".into(),
                        backend: "accounting".into(),
                        epsilon: config.epsilon,
                        delta: config.delta,
                        queries: n,
                        error_vs_exact: None,
                    }
                } else {
                    let scale = oracle.max_l2().max(1e-12);
                    let normalized =
                        oracle.map_payload(|p| p.iter().map(|x| x / scale).collect())?;
                    let est = qbounded(
                        &normalized,
                        n,
                        config.delta,
                        &QmcOptions::default(),
                        seed,
                        &ledger,
                    )?;
                    let rescaled: Vec<f64> = est.estimate.iter().map(|x| x * scale).collect();
                    let err = crate::gradient::linf_distance(&rescaled, &exact);
                    EstimateRow {
                        seed,
                        estimator: "qpg-analytical".into(),
                        backend: est.backend.clone(),
                        epsilon: config.epsilon,
                        delta: config.delta,
                        queries: est.queries,
                        error_vs_exact: Some(err),
                    }
                }
            }
            EstimatorKind::ClassicalMvmc => {
                let oracle = reinforce_oracle(mdp, &policy)?;
                let bound = oracle.max_l1().max(1e-12);
                let est = classical_mvmc(&oracle, config.epsilon, config.delta, bound, seed, &ledger)?
                    .with_error_vs(&exact);
                EstimateRow {
                    seed,
                    estimator: "classical-mvmc".into(),
                    backend: "classical".into(),
                    epsilon: config.epsilon,
                    delta: config.delta,
                    queries: est.queries,
                    error_vs_exact: est.error_vs_exact,
                }
            }
            EstimatorKind::ClassicalCd => {
                let opts = CdOptions::new(config.epsilon, config.delta);
                let est = classical_cd_gradient(mdp, &policy, &opts, seed, &ledger)?
                    .with_error_vs(&exact);
                EstimateRow {
                    seed,
                    estimator: "classical-cd".into(),
                    backend: "classical".into(),
                    epsilon: config.epsilon,
                    delta: config.delta,
                    queries: est.queries,
                    error_vs_exact: est.error_vs_exact,
                }
            }
            _ => unreachable!("training estimators dispatched elsewhere"),
        };
        rows.push(row);
    }

    let mut files = Vec::new();
    write_file(out_dir, "estimates.csv", &estimates_csv(&rows), &mut files)?;
    write_file(out_dir, "ledger.csv", &ledger_csv(&ledger), &mut files)?;
    let summary = serde_json::to_string_pretty(&rows)?;
    write_file(out_dir, "summary.json", &summary, &mut files)?;
    Ok(RunSummary {
        rows,
        files,
        final_values: Vec::new(),
    })
}

fn run_training(
    config: &RunConfig,
    mdp: &TabularMdp,
    policy: Policy,
    out_dir: &Path,
) -> Result<RunSummary> {
    let gauss: GaussQkp = match policy {
        Policy::Gauss(g) => g,
        _ => {
            return Err(Error::config(
                "actor-critic training expects a Gaussian kernel policy",
            ))
        }
    };
    let mut files = Vec::new();
    let mut csv = String::from("seed,iteration,value_exact,grad_norm,epsilon_q,c_p,queries_cumulative\n");
    let mut final_values = Vec::new();
    for &seed in &config.seeds {
        let ledger = QueryLedger::new();
        let (stats, checkpoint) = match config.estimator {
            EstimatorKind::Cqrac => {
                let mut cfg = config
                    .cqrac
                    .clone()
                    .unwrap_or_else(|| CqracConfig::new(config.epsilon, config.delta));
                if let Some(iters) = config.iterations {
                    cfg.iterations = iters;
                }
                let (state, stats) = run_cqrac(mdp, gauss.clone(), &cfg, seed, &ledger)?;
                let checkpoint = serde_json::json!({
                    "policy": Policy::Gauss(state.policy.clone()),
                    "critic": state.critic,
                    "ledger": ledger.snapshot(),
                });
                (stats, checkpoint)
            }
            EstimatorKind::Dcqrac => {
                let mut cfg = config
                    .dcqrac
                    .clone()
                    .unwrap_or_else(|| DcqracConfig::new(config.epsilon, config.delta));
                if let Some(iters) = config.iterations {
                    cfg.iterations = iters;
                }
                let (state, stats) = run_dcqrac(mdp, gauss.clone(), &cfg, seed, &ledger)?;
                let checkpoint = serde_json::json!({
                    "policy": Policy::Gauss(state.policy.clone()),
                    "critic": state.critic,
                    "target_critic": state.target,
                    "ledger": ledger.snapshot(),
                });
                (stats, checkpoint)
            }
            _ => unreachable!("estimator runs dispatched elsewhere"),
        };
        for s in &stats {
            append_stats_row(&mut csv, seed, s);
        }
        if let Some(last) = stats.last() {
            final_values.push(last.value);
        }
        let name = format!("checkpoint_{seed}.json");
        write_file(out_dir, &name, &serde_json::to_string_pretty(&checkpoint)?, &mut files)?;
    }
    write_file(out_dir, "iterations.csv", &csv, &mut files)?;
    Ok(RunSummary {
        rows: Vec::new(),
        files,
        final_values,
    })
}

fn append_stats_row(csv: &mut String, seed: u64, s: &IterationStats) {
    let c_p = s.c_p.map(fmt_f64).unwrap_or_default();
    let _ = writeln!(
        csv,
        "{seed},{},{},{},{},{c_p},{}",
        s.iteration,
        fmt_f64(s.value),
        fmt_f64(s.grad_norm),
        fmt_f64(s.epsilon_q),
        s.cumulative_interactions
    );
}

/// Fixed-column estimator CSV.
pub fn estimates_csv(rows: &[EstimateRow]) -> String {
    let mut out = String::from("seed,estimator,backend,epsilon,delta,queries,error_vs_exact\n");
    for r in rows {
        let err = r.error_vs_exact.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{err}",
            r.seed,
            r.estimator,
            r.backend,
            fmt_f64(r.epsilon),
            fmt_f64(r.delta),
            r.queries
        );
    }
    out
}

/// Fixed-column oracle-usage CSV.
pub fn ledger_csv(ledger: &QueryLedger) -> String {
    let s = ledger.snapshot();
    format!(
        "policy_evals,transitions,rewards,phase_queries,binary_queries,idealized_invocations,classical_trajectories,environment_interactions\n{},{},{},{},{},{},{},{}\n",
        s.policy_evals,
        s.transitions,
        s.rewards,
        s.phase_queries,
        s.binary_queries,
        s.idealized_invocations,
        s.classical_trajectories,
        s.environment_interactions
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{MdpSource, PolicySource};

    fn bandit_run_config(estimator: EstimatorKind) -> RunConfig {
        RunConfig {
            mdp: MdpSource::Preset("two-armed-bandit".into()),
            policy: PolicySource::Preset("bandit-gauss".into()),
            estimator,
            epsilon: 0.1,
            delta: 0.1,
            seeds: vec![3],
            backend: BackendKind::Idealized,
            cqrac: None,
            dcqrac: None,
            iterations: Some(5),
        }
    }

    #[test]
    fn smoke_bandit_cqrac_run() {
        let dir = std::env::temp_dir().join("qkrl_run_test_cqrac");
        let _ = std::fs::remove_dir_all(&dir);
        let summary = run(&bandit_run_config(EstimatorKind::Cqrac), None, &dir).unwrap();
        assert!(!summary.final_values.is_empty());
        let csv = std::fs::read_to_string(dir.join("iterations.csv")).unwrap();
        assert!(csv.lines().count() >= 6, "{csv}");
        assert!(dir.join("checkpoint_3.json").exists());
    }

    #[test]
    fn deterministic_reruns_are_byte_identical() {
        let dir_a = std::env::temp_dir().join("qkrl_run_test_det_a");
        let dir_b = std::env::temp_dir().join("qkrl_run_test_det_b");
        let _ = std::fs::remove_dir_all(&dir_a);
        let _ = std::fs::remove_dir_all(&dir_b);
        let mut config = bandit_run_config(EstimatorKind::QpgAnalytical);
        config.seeds = vec![7, 8];
        run(&config, None, &dir_a).unwrap();
        run(&config, None, &dir_b).unwrap();
        for name in ["estimates.csv", "ledger.csv", "summary.json"] {
            let a = std::fs::read(dir_a.join(name)).unwrap();
            let b = std::fs::read(dir_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs across reruns");
        }
    }

    #[test]
    fn accounting_backend_reports_budget_without_running() {
        let dir = std::env::temp_dir().join("qkrl_run_test_acct");
        let _ = std::fs::remove_dir_all(&dir);
        let mut config = bandit_run_config(EstimatorKind::QpgAnalytical);
        config.backend = BackendKind::Accounting;
        let summary = run(&config, None, &dir).unwrap();
        assert!(summary.rows[0].queries > 0);
        assert!(summary.rows[0].error_vs_exact.is_none());
    }

    #[test]
    fn numerical_run_reports_error() {
        let dir = std::env::temp_dir().join("qkrl_run_test_num");
        let _ = std::fs::remove_dir_all(&dir);
        let mut config = bandit_run_config(EstimatorKind::QpgNumerical);
        config.policy = PolicySource::Preset("two-state-rawpqc".into());
        config.mdp = MdpSource::Preset("two-state-random".into());
        config.backend = BackendKind::ExactPhase;
        let summary = run(&config, None, &dir).unwrap();
        assert!(summary.rows[0].error_vs_exact.unwrap() <= 0.1);
    }
}
