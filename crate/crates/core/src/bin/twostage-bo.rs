use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use twostage_bo::experiment::{
    output_root, plot_regret, read_results, read_summary_file, run_experiment, summarize, write_summary, write_summary_file,
    ExperimentConfig, MetricKind, PlotStyle,
};
use twostage_bo::Error;

/// Bayesian optimization of two-stage stochastic programs.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (strategy, replicate) cell of an experiment configuration.
    Run {
        config: PathBuf,
        /// Cells run concurrently.
        #[arg(short, long, default_value_t = 1)]
        parallelism: usize,
        /// Root for relative output directories (overrides TWOSTAGE_BO_OUTPUT).
        #[arg(long)]
        output_root: Option<PathBuf>,
    },
    /// Mean, standard error and ±2 SE band per strategy and checkpoint.
    Summarize {
        results: PathBuf,
        /// Summary CSV (default: summary.csv next to the results).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a summary as an SVG or PNG regret plot.
    Plot {
        summary: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        metric: Option<Metric>,
        #[arg(long)]
        log_y: bool,
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Regret,
    Cost,
    OracleCost,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TWOSTAGE_BO_LOG", "info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Run { config, parallelism, output_root: root } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let outcome = run_experiment(&cfg, parallelism, &root.unwrap_or_else(output_root))?;
            println!("{}", outcome.results_path.display());
            if outcome.succeeded() {
                Ok(ExitCode::SUCCESS)
            } else {
                for f in &outcome.failures {
                    eprintln!("cell {} seed {} failed: {}", f.strategy, f.seed, f.message);
                }
                Ok(ExitCode::from(1))
            }
        }
        Command::Summarize { results, out } => {
            let summary = summarize(&read_results(&results)?);
            let out = out.unwrap_or_else(|| results.with_file_name("summary.csv"));
            write_summary_file(&out, &summary)?;
            write_summary(std::io::stdout().lock(), &summary)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { summary, out, metric, log_y, title } => {
            let metric = metric.map(|m| match m {
                Metric::Regret => MetricKind::Regret,
                Metric::Cost => MetricKind::Cost,
                Metric::OracleCost => MetricKind::OracleCost,
            });
            let style = PlotStyle { metric, log_y, title, ..PlotStyle::default() };
            plot_regret(&read_summary_file(&summary)?, &out, &style)?;
            println!("{}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
