//! Run configuration: one JSON file describing a full experiment, with
//! every field overridable from the command line.
//!
//! The `evolution` and `mixture` sections are strict (all fields required)
//! so a config file documents the complete search setup; the remaining
//! sections fall back to defaults and may be omitted.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Serialize};

use edl_core::downstream::BlobConfig;
use edl_core::evolve::{EvolutionConfig, GdConfig, MutationMode};
use edl_core::probspace::MixtureConfig;
use edl_core::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable overriding `output_dir` (the command-line flag
/// still wins over the variable).
pub const OUTPUT_DIR_ENV: &str = "EDL_OUTPUT_DIR";

/// Format of the per-generation training log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogFormat {
    #[default]
    Jsonl,
    Csv,
}

impl std::fmt::Display for LogFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LogFormat::Jsonl => "jsonl",
            LogFormat::Csv => "csv",
        })
    }
}

impl FromStr for LogFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(LogFormat::Jsonl),
            "csv" => Ok(LogFormat::Csv),
            other => Err(Error::InvalidArgument(format!(
                "unknown log format `{other}` (expected `jsonl` or `csv`)"
            ))),
        }
    }
}

/// Downstream demo settings: blob task shape plus the training loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DownstreamConfig {
    pub blob: BlobConfig,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Dataset seeds; both loss arms see the same data per seed.
    pub seeds: Vec<u64>,
}

impl Default for DownstreamConfig {
    fn default() -> Self {
        Self {
            blob: BlobConfig::default(),
            epochs: 400,
            learning_rate: 0.5,
            seeds: vec![1, 2, 3],
        }
    }
}

impl DownstreamConfig {
    pub fn validate(&self) -> Result<()> {
        self.blob.validate()?;
        if self.epochs == 0 {
            return Err(Error::InvalidArgument(
                "downstream.epochs must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "downstream.learning_rate = {} must be positive",
                self.learning_rate
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument(
                "downstream.seeds must not be empty".into(),
            ));
        }
        Ok(())
    }
}

/// Monte-Carlo variance probe settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub batch_counts: Vec<usize>,
    pub pairs_per_batch: usize,
    pub trials: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            batch_counts: vec![1, 2, 4, 8],
            pairs_per_batch: 256,
            trials: 100,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_counts.is_empty() || self.batch_counts.contains(&0) {
            return Err(Error::InvalidArgument(
                "probe.batch_counts must be non-empty and positive".into(),
            ));
        }
        if self.pairs_per_batch == 0 {
            return Err(Error::InvalidArgument(
                "probe.pairs_per_batch must be positive".into(),
            ));
        }
        if self.trials < 30 {
            return Err(Error::InvalidArgument(format!(
                "probe.trials = {} must be at least 30",
                self.trials
            )));
        }
        Ok(())
    }
}

fn default_seed() -> u64 {
    1
}

fn default_mode() -> MutationMode {
    MutationMode::Chaotic
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_ablation_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

/// Everything a run needs. See `configs/` for complete examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Config schema version; this build reads version 1.
    pub schema_version: u32,
    #[serde(default = "default_mode")]
    pub mutation_mode: MutationMode,
    /// Master seed for single-run commands.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub evolution: EvolutionConfig,
    pub mixture: MixtureConfig,
    #[serde(default)]
    pub gd: GdConfig,
    #[serde(default)]
    pub downstream: DownstreamConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub log_format: LogFormat,
    /// Seeds used by the ablation command (both modes run each seed).
    #[serde(default = "default_ablation_seeds")]
    pub ablation_seeds: Vec<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Version {
                found: self.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        self.evolution.validate()?;
        self.mixture.validate()?;
        self.gd.validate()?;
        self.downstream.validate()?;
        self.probe.validate()?;
        if self.ablation_seeds.is_empty() {
            return Err(Error::InvalidArgument(
                "ablation_seeds must not be empty".into(),
            ));
        }
        Ok(())
    }
}

/// Command-line overrides: each flag shadows the config field of the same
/// name. Nested sections use a section prefix (`--gd-steps`).
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigOverrides {
    #[arg(long, value_name = "normal|chaotic")]
    pub mutation_mode: Option<MutationMode>,
    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long)]
    pub population_size: Option<usize>,
    #[arg(long)]
    pub elite_count: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub batches: Option<usize>,
    #[arg(long)]
    pub pairs_per_batch: Option<usize>,
    #[arg(long)]
    pub sigma_high: Option<f64>,
    #[arg(long)]
    pub sigma_low: Option<f64>,
    #[arg(long)]
    pub accuracy_threshold: Option<f64>,
    #[arg(long)]
    pub max_attempts: Option<usize>,
    #[arg(long)]
    pub class_count: Option<usize>,
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[arg(long)]
    pub validation_pairs: Option<usize>,
    #[arg(long)]
    pub shared_pairs: Option<bool>,
    #[arg(long)]
    pub workers: Option<usize>,

    #[arg(long)]
    pub weight_uniform: Option<f64>,
    #[arg(long)]
    pub weight_extreme: Option<f64>,
    #[arg(long)]
    pub weight_boundary: Option<f64>,
    #[arg(long)]
    pub extreme_concentration: Option<f64>,
    #[arg(long)]
    pub boundary_gap: Option<f64>,

    #[arg(long)]
    pub gd_steps: Option<usize>,
    #[arg(long)]
    pub gd_learning_rate: Option<f64>,
    #[arg(long)]
    pub gd_pairs_per_step: Option<usize>,

    #[arg(long)]
    pub downstream_epochs: Option<usize>,
    #[arg(long)]
    pub downstream_learning_rate: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub downstream_seeds: Option<Vec<u64>>,

    #[arg(long, value_delimiter = ',')]
    pub probe_batch_counts: Option<Vec<usize>>,
    #[arg(long)]
    pub probe_pairs_per_batch: Option<usize>,
    #[arg(long)]
    pub probe_trials: Option<usize>,

    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, value_name = "jsonl|csv")]
    pub log_format: Option<LogFormat>,
    #[arg(long, value_delimiter = ',')]
    pub ablation_seeds: Option<Vec<u64>>,
}

macro_rules! override_field {
    ($target:expr, $src:expr) => {
        if let Some(v) = &$src {
            $target = v.clone();
        }
    };
}

impl ConfigOverrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        override_field!(cfg.mutation_mode, self.mutation_mode);
        override_field!(cfg.seed, self.seed);

        override_field!(cfg.evolution.population_size, self.population_size);
        override_field!(cfg.evolution.elite_count, self.elite_count);
        override_field!(cfg.evolution.generations, self.generations);
        override_field!(cfg.evolution.batches, self.batches);
        override_field!(cfg.evolution.pairs_per_batch, self.pairs_per_batch);
        override_field!(cfg.evolution.sigma_high, self.sigma_high);
        override_field!(cfg.evolution.sigma_low, self.sigma_low);
        override_field!(cfg.evolution.accuracy_threshold, self.accuracy_threshold);
        override_field!(cfg.evolution.max_attempts, self.max_attempts);
        override_field!(cfg.evolution.class_count, self.class_count);
        override_field!(cfg.evolution.init_scale, self.init_scale);
        override_field!(cfg.evolution.validation_pairs, self.validation_pairs);
        override_field!(cfg.evolution.shared_pairs, self.shared_pairs);
        override_field!(cfg.evolution.workers, self.workers);

        override_field!(cfg.mixture.weight_uniform, self.weight_uniform);
        override_field!(cfg.mixture.weight_extreme, self.weight_extreme);
        override_field!(cfg.mixture.weight_boundary, self.weight_boundary);
        override_field!(
            cfg.mixture.extreme_concentration,
            self.extreme_concentration
        );
        override_field!(cfg.mixture.boundary_gap, self.boundary_gap);

        override_field!(cfg.gd.steps, self.gd_steps);
        override_field!(cfg.gd.learning_rate, self.gd_learning_rate);
        override_field!(cfg.gd.pairs_per_step, self.gd_pairs_per_step);

        override_field!(cfg.downstream.epochs, self.downstream_epochs);
        override_field!(
            cfg.downstream.learning_rate,
            self.downstream_learning_rate
        );
        override_field!(cfg.downstream.seeds, self.downstream_seeds);

        override_field!(cfg.probe.batch_counts, self.probe_batch_counts);
        override_field!(cfg.probe.pairs_per_batch, self.probe_pairs_per_batch);
        override_field!(cfg.probe.trials, self.probe_trials);

        override_field!(cfg.output_dir, self.output_dir);
        override_field!(cfg.log_format, self.log_format);
        override_field!(cfg.ablation_seeds, self.ablation_seeds);
    }
}

/// Load a config, apply the output-dir environment override, then the
/// command-line overrides, then validate.
pub fn load_effective(path: &Path, overrides: &ConfigOverrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
        if !dir.is_empty() {
            cfg.output_dir = PathBuf::from(dir);
        }
    }
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}
