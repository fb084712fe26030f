use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::AcqSizes;
use crate::driver::{BudgetConfig, Strategy};
use crate::error::{Error, Result};
use crate::optimize::OptimizeConfig;
use crate::problems::{is_registered, Problem, ProblemSpec};

/// A batch of replicated runs: every strategy on `replicates` independent
/// problem instances with seeds `base_seed, base_seed + 1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub strategies: Vec<Strategy>,
    pub budget: BudgetConfig,
    pub replicates: usize,
    pub base_seed: u64,
    /// Relative paths are resolved against the output root.
    pub output_dir: PathBuf,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    replicates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    base_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output_dir: Option<String>,
    strategies: Vec<String>,
    problem: RawProblem,
    #[serde(default)]
    budget: RawBudget,
    #[serde(default)]
    acquisition: RawOptimizer,
    #[serde(default)]
    recommendation: RawOptimizer,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    lengthscales: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outputscale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_features: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_sd: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBudget {
    #[serde(skip_serializing_if = "Option::is_none")]
    n_init: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_total: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_init_step1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_total_step1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_init_step2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_total_step2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_u_rec: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint_every: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit_starts: Option<usize>,
}

/// Shared by the `[acquisition]` and `[recommendation]` sections; the
/// discretization sizes are only accepted in the former.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    #[serde(skip_serializing_if = "Option::is_none")]
    n_x: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_y: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_u: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_v: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    restarts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    raw_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    batch_limit: Option<usize>,
}

impl RawOptimizer {
    fn apply(&self, base: &OptimizeConfig) -> OptimizeConfig {
        OptimizeConfig {
            n_restarts: self.restarts.unwrap_or(base.n_restarts),
            n_raw: self.raw_samples.unwrap_or(base.n_raw),
            max_iters: self.max_iters.unwrap_or(base.max_iters),
            batch_limit: self.batch_limit.unwrap_or(base.batch_limit),
            ..base.clone()
        }
    }

    fn from_config(cfg: &OptimizeConfig, sizes: Option<AcqSizes>) -> Self {
        Self {
            n_x: sizes.map(|s| s.n_x),
            n_y: sizes.map(|s| s.n_y),
            n_u: sizes.map(|s| s.n_u),
            n_v: sizes.map(|s| s.n_v),
            restarts: Some(cfg.n_restarts),
            raw_samples: Some(cfg.n_raw),
            max_iters: Some(cfg.max_iters),
            batch_limit: Some(cfg.batch_limit),
        }
    }
}

/// 1-based line of the first `key = ...` assignment in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn config_error(text: &str, key: &str, msg: impl std::fmt::Display) -> Error {
    match line_of(text, key) {
        Some(line) => Error::Config(format!("line {line} (`{key}`): {msg}")),
        None => Error::Config(format!("`{key}`: {msg}")),
    }
}

impl ExperimentConfig {
    /// Minimal configuration with every other field at its default.
    pub fn new(problem: ProblemSpec, strategies: Vec<Strategy>) -> Result<Self> {
        let text = format!(
            "strategies = [{}]\n[problem]\nid = \"{}\"\n",
            strategies.iter().map(|s| format!("\"{s}\"")).collect::<Vec<_>>().join(", "),
            problem.id
        );
        let mut cfg = Self::parse_str(&text)?;
        cfg.problem = problem;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses and validates a TOML document, resolving defaults.
    pub fn parse_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let p = &raw.problem;
        if !is_registered(&p.id) {
            return Err(config_error(text, "id", format!("unknown problem id `{}`", p.id)));
        }
        let base = ProblemSpec::new(p.id.clone());
        let problem = ProblemSpec {
            id: p.id.clone(),
            lengthscales: p.lengthscales,
            outputscale: p.outputscale.unwrap_or(base.outputscale),
            n_features: p.n_features.unwrap_or(base.n_features),
            noise_sd: p.noise_sd.unwrap_or(base.noise_sd),
        };
        if !(problem.noise_sd >= 0.0 && problem.noise_sd.is_finite()) {
            return Err(config_error(text, "noise_sd", "must be finite and nonnegative"));
        }
        if !(problem.outputscale > 0.0 && problem.outputscale.is_finite()) {
            return Err(config_error(text, "outputscale", "must be positive"));
        }
        if problem.lengthscales.is_some_and(|l| l.iter().any(|v| !(*v > 0.0 && v.is_finite()))) {
            return Err(config_error(text, "lengthscales", "must be positive"));
        }
        if problem.n_features == 0 {
            return Err(config_error(text, "n_features", "must be at least 1"));
        }
        if raw.strategies.is_empty() {
            return Err(config_error(text, "strategies", "at least one strategy is required"));
        }
        let mut strategies = Vec::new();
        for name in &raw.strategies {
            let s = Strategy::parse(name).ok_or_else(|| {
                config_error(text, "strategies", format!("unknown strategy `{name}` (expected jKG, aKG, 2sKG, jRS or 2sRS)"))
            })?;
            if strategies.contains(&s) {
                return Err(config_error(text, "strategies", format!("strategy `{s}` listed twice")));
            }
            strategies.push(s);
        }
        let replicates = raw.replicates.unwrap_or(1);
        if replicates == 0 {
            return Err(config_error(text, "replicates", "must be at least 1"));
        }

        // Budget defaults depend on the problem family only.
        let defaults = BudgetConfig::for_problem(&Problem::build(&ProblemSpec { n_features: 1, ..problem.clone() }, 0)?);
        let b = &raw.budget;
        let a = &raw.acquisition;
        let r = &raw.recommendation;
        if r.n_x.or(r.n_y).or(r.n_u).or(r.n_v).is_some() {
            return Err(Error::Config("[recommendation]: discretization sizes belong in [acquisition]".into()));
        }
        let budget = BudgetConfig {
            n_init: b.n_init.unwrap_or(defaults.n_init),
            n_total: b.n_total.unwrap_or(defaults.n_total),
            n_init_step1: b.n_init_step1.unwrap_or(defaults.n_init_step1),
            n_total_step1: b.n_total_step1.unwrap_or(defaults.n_total_step1),
            n_init_step2: b.n_init_step2.unwrap_or(defaults.n_init_step2),
            n_total_step2: b.n_total_step2.unwrap_or(defaults.n_total_step2),
            sizes: AcqSizes {
                n_x: a.n_x.unwrap_or(defaults.sizes.n_x),
                n_y: a.n_y.unwrap_or(defaults.sizes.n_y),
                n_u: a.n_u.unwrap_or(defaults.sizes.n_u),
                n_v: a.n_v.unwrap_or(defaults.sizes.n_v),
            },
            n_u_rec: b.n_u_rec.unwrap_or(defaults.n_u_rec),
            acq_optimizer: a.apply(&defaults.acq_optimizer),
            rec_optimizer: r.apply(&defaults.rec_optimizer),
            checkpoint_every: b.checkpoint_every.unwrap_or(defaults.checkpoint_every),
            fit_starts: b.fit_starts.unwrap_or(defaults.fit_starts),
        };
        if let Err(Error::InvalidArgument(msg)) | Err(Error::Config(msg)) = budget.validate() {
            let key = ["n_init_step1", "n_init_step2", "n_init", "n_u_rec", "n_u", "n_v", "n_x", "n_y", "checkpoint_every", "fit_starts"]
                .into_iter()
                .find(|k| msg.starts_with(k))
                .unwrap_or("budget");
            return Err(config_error(text, key, msg));
        }
        Ok(Self {
            problem,
            strategies,
            budget,
            replicates,
            base_seed: raw.base_seed.unwrap_or(0),
            output_dir: PathBuf::from(raw.output_dir.unwrap_or_else(|| p.id.clone())),
        })
    }

    /// TOML document with every field written out.
    pub fn to_toml(&self) -> String {
        let b = &self.budget;
        let raw = RawConfig {
            replicates: Some(self.replicates),
            base_seed: Some(self.base_seed),
            output_dir: Some(self.output_dir.to_string_lossy().into_owned()),
            strategies: self.strategies.iter().map(|s| s.name().to_string()).collect(),
            problem: RawProblem {
                id: self.problem.id.clone(),
                lengthscales: self.problem.lengthscales,
                outputscale: Some(self.problem.outputscale),
                n_features: Some(self.problem.n_features),
                noise_sd: Some(self.problem.noise_sd),
            },
            budget: RawBudget {
                n_init: Some(b.n_init),
                n_total: Some(b.n_total),
                n_init_step1: Some(b.n_init_step1),
                n_total_step1: Some(b.n_total_step1),
                n_init_step2: Some(b.n_init_step2),
                n_total_step2: Some(b.n_total_step2),
                n_u_rec: Some(b.n_u_rec),
                checkpoint_every: Some(b.checkpoint_every),
                fit_starts: Some(b.fit_starts),
            },
            acquisition: RawOptimizer::from_config(&b.acq_optimizer, Some(b.sizes)),
            recommendation: RawOptimizer::from_config(&b.rec_optimizer, None),
        };
        toml::to_string(&raw).expect("config serializes")
    }

    /// Seeds of the replicates in order.
    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.replicates as u64).map(move |r| self.base_seed + r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "strategies = [\"jKG\"]\n[problem]\nid = \"gp-1-1-1\"\n";

    #[test]
    fn minimal_config_takes_the_table_defaults() {
        let cfg = ExperimentConfig::parse_str(MINIMAL).unwrap();
        let b = &cfg.budget;
        assert_eq!((b.sizes.n_x, b.sizes.n_y, b.sizes.n_u, b.sizes.n_v), (20, 20, 64, 64));
        assert_eq!(b.n_u_rec, 128);
        assert_eq!((b.acq_optimizer.n_restarts, b.acq_optimizer.n_raw, b.acq_optimizer.max_iters), (10, 256, 200));
        assert_eq!((b.n_init, b.n_total), (10, 100));
        assert_eq!(cfg.replicates, 1);
        assert_eq!(cfg.strategies, vec![Strategy::JointKg]);
        assert_eq!(cfg.output_dir, PathBuf::from("gp-1-1-1"));
        assert_eq!(cfg.problem, ProblemSpec::new("gp-1-1-1"));
    }

    #[test]
    fn round_trip_is_exact() {
        let text = "replicates = 3\nstrategies = [\"jKG\", \"2sRS\"]\n[problem]\nid = \"gp-2-1-1\"\nlengthscales = [0.2, 0.4, 0.4]\nnoise_sd = 2.0\n[budget]\nn_total = 40\n[acquisition]\nn_v = 32\n";
        let cfg = ExperimentConfig::parse_str(text).unwrap();
        let again = ExperimentConfig::parse_str(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.budget.sizes.n_v, 32);
        assert_eq!(cfg.problem.lengthscales, Some([0.2, 0.4, 0.4]));
    }

    #[test]
    fn invalid_budget_names_the_line() {
        let text = format!("{MINIMAL}[budget]\nn_init = 20\nn_total = 10\n");
        let err = ExperimentConfig::parse_str(&text).unwrap_err().to_string();
        assert!(err.contains("line 5") && err.contains("n_init (20) exceeds n_total (10)"), "{err}");
    }

    #[test]
    fn unknown_keys_and_problems_are_rejected() {
        let err = ExperimentConfig::parse_str(&format!("{MINIMAL}colour = 1\n")).unwrap_err().to_string();
        assert!(err.contains("colour") && err.contains("line 4"), "{err}");
        let err = ExperimentConfig::parse_str("strategies = [\"jKG\"]\n[problem]\nid = \"gp-0-1-1\"\n").unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("gp-0-1-1"), "{err}");
        let err = ExperimentConfig::parse_str("strategies = [\"xKG\"]\n[problem]\nid = \"gp-1-1-1\"\n").unwrap_err().to_string();
        assert!(err.contains("xKG"), "{err}");
        assert!(ExperimentConfig::parse_str("strategies = []\n[problem]\nid = \"gp-1-1-1\"\n").is_err());
        assert!(ExperimentConfig::parse_str(&format!("replicates = 0\n{MINIMAL}")).is_err());
    }
}
