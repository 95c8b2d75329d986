//! Run configuration: one JSON document describing dataset, model,
//! training, and evaluation policy.
//!
//! Parsing is strict — unknown keys are errors, so a typo like
//! `"regmie"` fails loudly instead of silently using a default. Defaults
//! are materialized at parse time: re-serializing a parsed config emits
//! every effective value, which is what gets embedded into artifacts for
//! auditability.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{Budget, PolicyFamily};
use crate::multiexit::{HeadShape, ModelSpec, PlacementScheme, Task};
use crate::numerics::adamw::AdamWConfig;
use crate::numerics::schedule::LrSchedule;
use crate::regimes::{RegimeKind, RegimeSpec, Scaling, TrainOptions};
use crate::workbench::dataset::{
    generate_synthetic, load_csv_dataset, Dataset, SyntheticKind, DEFAULT_FRACTIONS,
};

/// Where the data comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Synthetic {
        kind: SyntheticKind,
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_d")]
        d: usize,
        #[serde(default = "default_classes")]
        classes: usize,
        #[serde(default = "default_noise")]
        noise: f64,
        /// Dataset seed; omitted means "use the run seed".
        #[serde(default)]
        seed: Option<u64>,
    },
    Csv {
        path: String,
        label: String,
        #[serde(default = "default_fractions")]
        fractions: [f64; 3],
        #[serde(default)]
        seed: Option<u64>,
    },
}

fn default_n() -> usize {
    600
}
fn default_d() -> usize {
    4
}
fn default_classes() -> usize {
    3
}
fn default_noise() -> f64 {
    0.3
}
fn default_fractions() -> [f64; 3] {
    DEFAULT_FRACTIONS
}

impl DatasetConfig {
    /// Builds the dataset, substituting `run_seed` where no explicit
    /// dataset seed was configured.
    pub fn build(&self, run_seed: u64) -> Result<Dataset> {
        match self {
            DatasetConfig::Synthetic {
                kind,
                n,
                d,
                classes,
                noise,
                seed,
            } => generate_synthetic(*kind, *n, *d, *classes, *noise, seed.unwrap_or(run_seed)),
            DatasetConfig::Csv {
                path,
                label,
                fractions,
                seed,
            } => load_csv_dataset(
                Path::new(path),
                label,
                *fractions,
                seed.unwrap_or(run_seed),
            ),
        }
    }
}

/// Backbone and head architecture. Exit placements come either as an
/// explicit list or as a scheme name ("every-2", "dense-sparse",
/// "sparse-dense") — exactly one of the two.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placements: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement_scheme: Option<String>,
    #[serde(default)]
    pub head: HeadShape,
}

fn default_hidden() -> usize {
    32
}
fn default_blocks() -> usize {
    6
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_dim: default_hidden(),
            blocks: default_blocks(),
            placements: None,
            placement_scheme: Some("every-1".into()),
            head: HeadShape::default(),
        }
    }
}

impl ModelConfig {
    /// Expands placements from whichever of the two fields is set.
    pub fn resolved_placements(&self) -> Result<Vec<usize>> {
        match (&self.placements, &self.placement_scheme) {
            (Some(_), Some(_)) => Err(Error::Config(
                "set either 'placements' or 'placement_scheme', not both".into(),
            )),
            (Some(p), None) => Ok(p.clone()),
            (None, Some(s)) => s.parse::<PlacementScheme>()?.placements(self.blocks),
            (None, None) => Err(Error::Config(
                "one of 'placements' or 'placement_scheme' is required".into(),
            )),
        }
    }

    /// Concrete model spec for a dataset with `input_dim` features.
    pub fn model_spec(&self, input_dim: usize, task: Task, init_seed: u64) -> Result<ModelSpec> {
        let spec = ModelSpec {
            input_dim,
            hidden_dim: self.hidden_dim,
            blocks: self.blocks,
            placements: self.resolved_placements()?,
            head: self.head,
            task,
            init_seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Optimizer, schedule, and loop controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    /// Warm-restart cosine schedule, per optimizer step.
    pub lr_max: f64,
    pub lr_min: f64,
    pub lr_t0: usize,
    pub lr_t_mult: u32,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Probe gradient dominance every N epochs (0 disables).
    pub gd_every: usize,
    /// Sample cap for the dominance probe.
    pub gd_probe: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 60,
            patience: 8,
            batch_size: 32,
            lr_max: 1e-3,
            lr_min: 1e-5,
            lr_t0: 200,
            lr_t_mult: 2,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            gd_every: 0,
            gd_probe: 256,
        }
    }
}

impl TrainConfig {
    /// Concrete loop options; the shuffle streams key off the run seed.
    pub fn train_options(&self, run_seed: u64) -> Result<TrainOptions> {
        let opts = TrainOptions {
            max_epochs: self.max_epochs,
            patience: self.patience,
            batch_size: self.batch_size,
            lr: LrSchedule::new(self.lr_max, self.lr_min, self.lr_t0, self.lr_t_mult)?,
            adamw: AdamWConfig {
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
                weight_decay: self.weight_decay,
            },
            shuffle_seed: run_seed,
            gd_every: self.gd_every,
            gd_probe: self.gd_probe,
        };
        opts.validate()?;
        Ok(opts)
    }
}

/// Which training schedule to run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegimeConfig {
    pub kind: RegimeKind,
    pub scaling: Scaling,
}

impl Default for RegimeConfig {
    fn default() -> Self {
        RegimeConfig {
            kind: RegimeKind::Joint,
            scaling: Scaling::Uniform,
        }
    }
}

impl RegimeConfig {
    pub fn regime_spec(&self) -> RegimeSpec {
        RegimeSpec {
            kind: self.kind,
            scaling: self.scaling,
        }
    }
}

/// Budgeted-evaluation policy family and budgets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    /// "max_prob", "norm_entropy", or "patience".
    pub family: String,
    /// Cost budgets as fractions of the full network; the unlimited
    /// budget is always evaluated in addition.
    pub budgets: Vec<f64>,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            family: "max_prob".into(),
            budgets: vec![0.25, 0.5, 0.75, 1.0],
        }
    }
}

impl PolicyConfig {
    pub fn family(&self) -> Result<PolicyFamily> {
        self.family.parse()
    }

    /// Configured budgets plus the unlimited reference point.
    pub fn budget_list(&self) -> Result<Vec<Budget>> {
        let mut budgets = Vec::with_capacity(self.budgets.len() + 1);
        for &f in &self.budgets {
            let b = Budget::Fraction(f);
            b.validate()?;
            budgets.push(b);
        }
        budgets.push(Budget::Unlimited);
        Ok(budgets)
    }
}

/// The complete run description. Parse with [`RunConfig::from_json_str`];
/// unknown keys anywhere are configuration errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub regime: RegimeConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_output_dir() -> String {
    "runs".into()
}

impl RunConfig {
    pub fn from_json_str(json: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            serde_json::from_str(json).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Full validation before any compute: placements, schedule, policy,
    /// and seeds. Dataset parameters are validated by the builders.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("'seeds' must not be empty".into()));
        }
        let placements = self.model.resolved_placements()?;
        if placements.is_empty() {
            return Err(Error::Config("model needs at least one exit".into()));
        }
        // A throwaway spec exercises the full structural validation.
        self.model
            .model_spec(1, Task::Classification { classes: 2 }, 0)?;
        self.train.train_options(0)?;
        self.policy.family()?;
        self.policy.budget_list()?;
        if let DatasetConfig::Csv { fractions, .. } = &self.dataset {
            crate::workbench::dataset::split_sizes(100, *fractions)?;
        }
        Ok(())
    }

    /// The fully-materialized document embedded into artifacts: every
    /// effective value explicit, keys in stable order.
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }
}
