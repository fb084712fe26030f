//! Batch experiments: TOML configuration, resumable replicated runs with
//! per-checkpoint CSV results, mean ± 2 SE summaries and regret plots.
//!
//! A minimal configuration names the problem and the strategies; every
//! other value takes its default:
//!
//! ```toml
//! replicates = 20          # seeds base_seed, base_seed + 1, ...
//! base_seed = 0
//! output_dir = "gp-1-1-1"  # relative to the output root
//! strategies = ["jKG", "aKG", "2sKG", "jRS", "2sRS"]
//!
//! [problem]
//! id = "gp-1-1-1"          # gp-{dx}-{dy}-{du}, gp-short-{x|y|u}, optical-table, supply-chain
//! lengthscales = [0.4, 0.4, 0.4]
//! outputscale = 10.0
//! n_features = 1024
//! noise_sd = 0.0
//!
//! [budget]
//! n_init = 10
//! n_total = 100
//! n_init_step1 = 10
//! n_total_step1 = 50
//! n_init_step2 = 10
//! n_total_step2 = 50
//! n_u_rec = 128
//! checkpoint_every = 5
//! fit_starts = 4
//!
//! [acquisition]
//! n_x = 20
//! n_y = 20
//! n_u = 64
//! n_v = 64
//! restarts = 10
//! raw_samples = 256
//! max_iters = 200
//! batch_limit = 4
//!
//! [recommendation]
//! restarts = 10
//! raw_samples = 256
//! max_iters = 200
//! batch_limit = 4
//! ```

mod config;
mod font;
mod plot;
mod results;
mod runner;
mod summary;

pub use config::ExperimentConfig;
pub use plot::{plot_regret, render, PlotFormat, PlotStyle};
pub use results::{read_results, read_rows, rows_from_history, write_results, write_rows, MetricKind, ResultRow, RESULT_HEADER};
pub use runner::{output_root, run_experiment, CellFailure, ExperimentOutcome, OUTPUT_ROOT_VAR};
pub use summary::{read_summary, read_summary_file, summarize, write_summary, write_summary_file, SummaryRow, SUMMARY_HEADER};
