//! Experiment configuration file.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::PolicyVariant;
use crate::compression::{validate_levels, BudgetSplit, DEFAULT_LEVELS};
use crate::encoders::{EncoderKind, TrainConfig};
use crate::env::StreamSpec;
use crate::error::{Error, Result};
use crate::policy::BanditParams;

fn default_k() -> usize {
    4
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_finetune() -> TrainConfig {
    TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub rounds: u64,
    pub seeds: Vec<u64>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub embedding_dim: Option<usize>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Start runs from saved snapshots in this directory instead of pre-training.
    #[serde(default)]
    pub snapshot_dir: Option<PathBuf>,
    #[serde(default)]
    pub pretrain: TrainConfig,
    #[serde(default = "default_finetune")]
    pub finetune: TrainConfig,
}

fn default_levels() -> Vec<f64> {
    DEFAULT_LEVELS.to_vec()
}

fn default_alpha_k() -> f64 {
    BudgetSplit::default().alpha_k
}

fn default_encoder() -> EncoderKind {
    EncoderKind::Autoencoder
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VariantSpec {
    Cb {
        #[serde(default)]
        name: Option<String>,
    },
    Ue {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        full_retrain: bool,
    },
    Me {
        #[serde(default)]
        name: Option<String>,
    },
    Oe {
        #[serde(default)]
        name: Option<String>,
    },
    Compression {
        #[serde(default)]
        name: Option<String>,
        #[serde(default = "default_levels")]
        levels: Vec<f64>,
        #[serde(default = "default_alpha_k")]
        alpha_k: f64,
        #[serde(default)]
        alpha_p: f64,
        #[serde(default)]
        staged: bool,
        #[serde(default = "default_encoder")]
        encoder: EncoderKind,
    },
}

impl VariantSpec {
    pub fn name(&self) -> String {
        let (name, default) = match self {
            VariantSpec::Cb { name } => (name, "cb"),
            VariantSpec::Ue { name, .. } => (name, "ue"),
            VariantSpec::Me { name } => (name, "me"),
            VariantSpec::Oe { name } => (name, "oe"),
            VariantSpec::Compression { name, .. } => (name, "compression"),
        };
        name.clone().unwrap_or_else(|| default.to_string())
    }

    /// The agent variant, or `None` for the compression agent.
    pub fn policy_variant(&self) -> Option<PolicyVariant> {
        match self {
            VariantSpec::Cb { .. } => Some(PolicyVariant::BaselineCb),
            VariantSpec::Ue { .. } => Some(PolicyVariant::UniversalEmbedding),
            VariantSpec::Me { .. } => Some(PolicyVariant::MiniBatchEmbedding),
            VariantSpec::Oe { .. } => Some(PolicyVariant::OnlineEmbedding),
            VariantSpec::Compression { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    #[serde(default)]
    pub bandit: BanditParams,
    pub stream: StreamSpec,
    pub variants: Vec<VariantSpec>,
}

fn under(prefix: &str, e: Error) -> Error {
    match e {
        Error::Config { field, msg } => {
            let tail = field.split_once('.').map_or(field.as_str(), |(_, t)| t);
            Error::Config {
                field: format!("{prefix}.{tail}"),
                msg,
            }
        }
        other => other,
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config {
            field: "config".into(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.rounds == 0 {
            return Err(Error::config("run.rounds", "must be at least 1"));
        }
        if self.run.seeds.is_empty() {
            return Err(Error::config("run.seeds", "need at least one seed"));
        }
        if self.run.k == 0 {
            return Err(Error::config("run.k", "must be at least 1"));
        }
        if self.run.embedding_dim == Some(0) {
            return Err(Error::config("run.embedding_dim", "must be at least 1"));
        }
        self.run
            .pretrain
            .validate()
            .map_err(|e| under("run.pretrain", e))?;
        self.run
            .finetune
            .validate()
            .map_err(|e| under("run.finetune", e))?;
        self.bandit.validate()?;
        self.stream.validate()?;
        if self.variants.is_empty() {
            return Err(Error::config("variants", "need at least one variant"));
        }
        let mut names = HashSet::new();
        for (i, v) in self.variants.iter().enumerate() {
            let name = v.name();
            if name.is_empty()
                || name.contains(|c: char| !(c.is_ascii_alphanumeric() || c == '-' || c == '_'))
            {
                return Err(Error::config(
                    format!("variants[{i}].name"),
                    "use letters, digits, '-' or '_'",
                ));
            }
            if !names.insert(name.clone()) {
                return Err(Error::config(
                    format!("variants[{i}].name"),
                    format!("duplicate variant name {name:?}"),
                ));
            }
            if let VariantSpec::Compression {
                levels,
                alpha_k,
                alpha_p,
                ..
            } = v
            {
                validate_levels(levels).map_err(|e| under(&format!("variants[{i}]"), e))?;
                BudgetSplit {
                    alpha_k: *alpha_k,
                    alpha_p: *alpha_p,
                }
                .validate()
                .map_err(|e| match e {
                    Error::Config { field, msg } => Error::Config {
                        field: format!("variants[{i}].{field}"),
                        msg,
                    },
                    other => other,
                })?;
            }
        }
        Ok(())
    }

    /// Keeps only the named variants, in declaration order.
    pub fn select_variants(&mut self, names: &[String]) -> Result<()> {
        if names.is_empty() {
            return Ok(());
        }
        for n in names {
            if !self.variants.iter().any(|v| &v.name() == n) {
                return Err(Error::config("variant", format!("no variant named {n:?}")));
            }
        }
        self.variants.retain(|v| names.contains(&v.name()));
        Ok(())
    }
}

/// Commented starting point for a new experiment.
pub const CONFIG_TEMPLATE: &str = r#"# Experiment configuration.

[run]
# Online rounds per (variant, seed); the stream is replayed from its start if shorter.
rounds = 20000
seeds = [1, 2, 3]
# Number of clusters and per-cluster embeddings (me, oe).
k = 4
# Shared representation width; defaults to ceil(D / 4).
# embedding_dim = 8
out_dir = "runs"
# snapshot_dir = "runs/snapshots"

[run.pretrain]
epochs = 20
learning_rate = 0.5
minibatch_size = 16

# Encoder updates at each batch boundary.
[run.finetune]
epochs = 5
learning_rate = 0.5
minibatch_size = 16

# Thompson sampling exploration: v = r * sqrt(24 / epsilon * d * ln(1 / gamma)).
# r is the reward-noise scale. scale_override = 0.0 makes the bandits greedy.
[bandit]
r = 0.5
epsilon = 0.5
gamma = 0.1
refresh_every = 1000

[stream]
pretrain_count = 2000
online_count = 20000
batch_size = 1000
# seed = 7   # pin the data across run seeds

[stream.source]
kind = "gaussian"     # or "csv" (path, label_column) or "idx" (images, labels)
components = 4
dim = 32
std = 0.15

# Nonstationarity layers, applied in order.
[[stream.layers]]
kind = "shuffled_labels"

# [[stream.layers]]
# kind = "negative_inputs"
# mode = "rand"            # or "half"

# [[stream.layers]]
# kind = "cluster_drift"
# ramp_from = [0.7, 0.1, 0.1, 0.1]
# ramp_to = [0.1, 0.1, 0.1, 0.7]

# [[stream.layers]]
# kind = "multi_task"
# target_dim = 32
# source = { kind = "csv", path = "data/other.csv", label_column = 0 }

[[variants]]
kind = "cb"

[[variants]]
kind = "ue"

[[variants]]
kind = "me"

[[variants]]
kind = "oe"

[[variants]]
kind = "compression"
levels = [0.25, 0.5, 0.75, 1.0]
alpha_k = 0.1
alpha_p = 0.0
staged = false
encoder = "autoencoder"  # or "linear"
"#;
