//! Command-line harness for qkrl experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qkrl::gradient::budget::BudgetParams;
use qkrl::harness::{self, BackendKind, RunConfig, ScaleConfig};
use qkrl::policies::Policy;
use qkrl::qmdp::{ClassicalPolicy, TabularMdp};
use qkrl::Error;

#[derive(Parser)]
#[command(name = "qkrl", about = "Quantum kernel policy experiments", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "qkrl-out")]
    out: PathBuf,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a configured estimator or training run.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Override the config seeds with a single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the oracle backend.
        #[arg(long, value_parser = parse_backend)]
        backend: Option<BackendKind>,
    },
    /// Run an error-versus-queries scaling study.
    Scale {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evaluate the query-budget table for a parameter set.
    Budget {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Load and validate an MDP spec.
    ValidateMdp {
        /// Path to the MDP spec JSON.
        #[arg(long)]
        config: PathBuf,
    },
    /// Print a policy's parameters and per-state action distributions.
    DumpPolicy {
        /// Path to a policy source JSON ({"preset": ...} or {"inline": ...}).
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    match s {
        "exact-phase" => Ok(BackendKind::ExactPhase),
        "probability-oracle" => Ok(BackendKind::ProbabilityOracle),
        "idealized" => Ok(BackendKind::Idealized),
        "accounting" => Ok(BackendKind::Accounting),
        other => Err(format!(
            "unknown backend '{other}' (expected exact-phase, probability-oracle, idealized, accounting)"
        )),
    }
}

fn read_config(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Budget(_) => ExitCode::from(3),
        _ => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            common,
            seed,
            backend,
        } => {
            let text = read_config(&common.config)?;
            let mut config = RunConfig::from_json(&text)?;
            if let Some(seed) = seed {
                config.seeds = vec![seed];
            }
            if let Some(backend) = backend {
                config.backend = backend;
            }
            let base = common.config.parent().map(Path::to_path_buf);
            let summary = harness::run(&config, base.as_deref(), &common.out)?;
            if !common.quiet {
                for row in &summary.rows {
                    let err = row
                        .error_vs_exact
                        .map(|e| format!("{e:.6}"))
                        .unwrap_or_else(|| "-".into());
                    println!(
                        "seed {} {} [{}]: queries {} error {}",
                        row.seed, row.estimator, row.backend, row.queries, err
                    );
                }
                for (seed, value) in config.seeds.iter().zip(&summary.final_values) {
                    println!("seed {seed}: final exact value {value:.6}");
                }
                for file in &summary.files {
                    println!("wrote {}", file.display());
                }
            }
            Ok(())
        }
        Command::Scale { common } => {
            let text = read_config(&common.config)?;
            let config = ScaleConfig::from_json(&text)?;
            let base = common.config.parent().map(Path::to_path_buf);
            let reports = harness::scaling_study(&config, base.as_deref())?;
            std::fs::create_dir_all(&common.out)?;
            let path = common.out.join("slopes.json");
            std::fs::write(&path, serde_json::to_string_pretty(&reports)?)?;
            if !common.quiet {
                for r in &reports {
                    match r.slope {
                        Some(s) => println!(
                            "{}: slope {s:.4} (+- {:.4})",
                            r.estimator,
                            r.ci_half_width.unwrap_or(f64::NAN)
                        ),
                        None => println!(
                            "{}: degenerate grid (zero error), slope undefined",
                            r.estimator
                        ),
                    }
                }
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Budget { common } => {
            let text = read_config(&common.config)?;
            let params: BudgetParams = serde_json::from_str(&text)?;
            let rows = harness::budget_table(&params);
            std::fs::create_dir_all(&common.out)?;
            let path = common.out.join("budgets.json");
            std::fs::write(&path, serde_json::to_string_pretty(&rows)?)?;
            if !common.quiet {
                for row in &rows {
                    match (row.queries, &row.error) {
                        (Some(n), _) => println!("{}: {n}", row.variant),
                        (None, Some(e)) => println!("{}: {e}", row.variant),
                        _ => {}
                    }
                }
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::ValidateMdp { config } => {
            let text = read_config(&config)?;
            let mdp = TabularMdp::from_json(&text)?;
            println!(
                "valid MDP: {} states, {} actions, horizon {}, gamma {}, r_max {}, optimal value {:.6}",
                mdp.n_states(),
                mdp.n_actions(),
                mdp.horizon,
                mdp.gamma,
                mdp.r_max,
                mdp.optimal_value()
            );
            Ok(())
        }
        Command::DumpPolicy { config } => {
            let text = read_config(&config)?;
            let source: qkrl::harness::PolicySource = serde_json::from_str(&text)?;
            let policy = source.load(config.parent())?;
            println!("parameters: {:?}", policy.params());
            let n_states = match &policy {
                Policy::Gauss(p) => p.layout.n_states(),
                Policy::RawPqc(p) => p.layout.n_states(),
                Policy::Softmax(p) => p.layout.n_states(),
                Policy::SoftmaxStateAction(p) => p.layout.n_states(),
            };
            for s in 0..n_states {
                let probs: Vec<String> = (0..policy.n_actions())
                    .map(|a| format!("{:.6}", policy.prob(s, a)))
                    .collect();
                println!("state {s}: [{}]", probs.join(", "));
            }
            Ok(())
        }
    }
}
