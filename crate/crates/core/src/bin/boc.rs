use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use boc_core::hardness;
use boc_core::harness::{self, ExperimentConfig};
use boc_core::model::{self, DatasetFormat, Instance};
use boc_core::verify;

#[derive(Parser)]
#[command(
    name = "boc",
    version,
    about = "Online clustering with bandit feedback"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print D*, the optimal weights and proportions of an instance file.
    Hardness {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Turn a labelled dataset into an instance file, optionally rescaled.
    Prepare {
        #[arg(long)]
        dataset: PathBuf,
        /// Number of feature columns.
        #[arg(long)]
        d: usize,
        #[arg(long)]
        target_dstar: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// 0-based label column; defaults to the column after the features.
        #[arg(long)]
        label_column: Option<usize>,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
        #[arg(long)]
        header: bool,
    },
    /// Run the built-in reference checks.
    Verify,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let out = harness::run_experiment(&cfg)?;
            harness::emit(
                &out.records,
                &out.summary,
                &cfg.trials_path(),
                &cfg.summary_path(),
            )?;
            println!("D* = {:.6}", out.hardness.d_star);
            println!(
                "{:<8} {:>10} {:>7} {:>12} {:>10} {:>6} {:>6} {:>12}",
                "alg", "delta", "trials", "mean_tau", "std_tau", "errors", "unterm", "lower_bound"
            );
            for row in &out.summary {
                println!(
                    "{:<8} {:>10.3e} {:>7} {:>12.1} {:>10.1} {:>6} {:>6} {:>12.2}{}",
                    row.algorithm.to_string(),
                    row.delta,
                    row.trials,
                    row.mean_tau,
                    row.std_tau,
                    row.errors,
                    row.nonterminated,
                    row.lower_bound,
                    if row.all_errors { "  all wrong" } else { "" }
                );
            }
            let unterminated: usize = out.summary.iter().map(|r| r.nonterminated).sum();
            Ok(if unterminated == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Hardness { instance } => {
            let inst = Instance::read_json(&instance)?;
            let sol = hardness::solve_dstar(&inst)
                .with_context(|| format!("solving {}", instance.display()))?;
            let doc = serde_json::json!({
                "d_star": sol.d_star,
                "w_star": sol.w_star.values(),
                "lambda_star": sol.lambda_star.values(),
                "gap": sol.gap,
                "iterations": sol.iterations,
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Prepare {
            dataset,
            d,
            target_dstar,
            out,
            label_column,
            delimiter,
            header,
        } => {
            anyhow::ensure!(delimiter.is_ascii(), "delimiter must be ASCII");
            let format = DatasetFormat {
                d,
                label_column,
                delimiter: delimiter as u8,
                has_header: header,
            };
            let raw = model::load_dataset(&dataset, &format)?;
            let inst = match target_dstar {
                Some(t) => {
                    let (scaled, s) = model::rescale_to_hardness(&raw, t)?;
                    log::info!("scaled centers by {s:.6}");
                    scaled
                }
                None => raw,
            };
            inst.write_json(&out)?;
            println!(
                "wrote {} (M={}, K={}, d={})",
                out.display(),
                inst.num_arms(),
                inst.num_clusters(),
                inst.dim()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify => {
            let results = verify::run_all();
            for r in &results {
                println!("{r}");
            }
            Ok(if results.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
