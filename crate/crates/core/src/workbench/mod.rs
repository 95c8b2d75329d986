//! Experiment workbench: datasets, run configuration, checkpoints, and
//! report emission. This layer turns the core training/analysis machinery
//! into reproducible runs — everything an experiment writes to disk goes
//! through here.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod report;
pub mod run;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use config::{
    DatasetConfig, ModelConfig, PolicyConfig, RegimeConfig, RunConfig, TrainConfig,
};
pub use dataset::{
    generate_synthetic, load_csv_dataset, split_sizes, Dataset, Split, SyntheticKind,
    DEFAULT_FRACTIONS,
};
pub use run::{
    analyze_pair, analyze_single, evaluate_model, run_dir, run_training, task_for, TrainedRun,
};
