//! Two-bandit adaptive compression.
//!
//! A level bandit looks at the raw context and picks how much of it to keep;
//! the chosen level's encoder compresses the context, the result is padded
//! with trailing zeros back to the input width, and a classification bandit
//! picks the class. Both bandits learn from the same 0/1 reward, each
//! reduced by its own cost `alpha · c`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::classifier_seed;
use crate::cts::CtsBandit;
use crate::encoders::{
    compressed_width, fit_linear_encoder, train_autoencoder, update_autoencoder, Encoder,
    EncoderKind, TrainConfig,
};
use crate::error::{check_dim, Error, Result};
use crate::persist::Snapshot;
use crate::policy::{BanditParams, CompressionDetail, Policy};
use crate::scalar::Scalar;
use crate::seed::{derive_seed, STREAM_ENCODER, STREAM_LEVEL_BANDIT};

pub const DEFAULT_LEVELS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// Cost weights of the level bandit (`alpha_k`) and the classifier (`alpha_p`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetSplit {
    pub alpha_k: f64,
    pub alpha_p: f64,
}

impl Default for BudgetSplit {
    fn default() -> Self {
        Self {
            alpha_k: 0.1,
            alpha_p: 0.0,
        }
    }
}

impl BudgetSplit {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha_k", self.alpha_k), ("alpha_p", self.alpha_p)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(name, "must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// `(r - alpha_k·c, r - alpha_p·c)`
pub fn assign_reward<T: Scalar>(split: &BudgetSplit, r: T, c: f64) -> (T, T) {
    (r - T::of(split.alpha_k * c), r - T::of(split.alpha_p * c))
}

pub fn validate_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::config(
            "levels",
            "need at least one compression level",
        ));
    }
    if levels.iter().any(|&c| !(c > 0.0 && c <= 1.0)) {
        return Err(Error::config("levels", "every level must lie in (0, 1]"));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config(
            "levels",
            "levels must be strictly increasing",
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionConfig {
    pub levels: Vec<f64>,
    pub encoder_kind: EncoderKind,
    pub split: BudgetSplit,
    /// Reset both bandits at every batch boundary.
    pub staged: bool,
    pub batch_size: usize,
    pub bandit: BanditParams,
    pub pretrain: TrainConfig,
    pub finetune: TrainConfig,
    pub seed: u64,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        Self {
            levels: DEFAULT_LEVELS.to_vec(),
            encoder_kind: EncoderKind::Autoencoder,
            split: BudgetSplit::default(),
            staged: false,
            batch_size: 1000,
            bandit: BanditParams::default(),
            pretrain: TrainConfig::default(),
            finetune: TrainConfig {
                epochs: 5,
                ..TrainConfig::default()
            },
            seed: 0,
        }
    }
}

impl CompressionConfig {
    pub fn validate(&self) -> Result<()> {
        validate_levels(&self.levels)?;
        self.split.validate()?;
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        self.pretrain.validate()?;
        self.finetune.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Pending<T> {
    level: usize,
    padded: Vec<T>,
    context: Vec<T>,
    arm: usize,
}

#[derive(Debug, Clone)]
pub struct CompressionAgent<T> {
    config: CompressionConfig,
    input_dim: usize,
    encoders: Vec<Encoder<T>>,
    level_bandit: CtsBandit<T>,
    class_bandit: CtsBandit<T>,
    history: Vec<Vec<T>>,
    batch_buffer: Vec<Vec<T>>,
    pending: Option<Pending<T>>,
    last: Option<CompressionDetail<T>>,
    batches_done: u64,
}

impl<T: Scalar> CompressionAgent<T> {
    pub fn new(config: CompressionConfig, input_dim: usize, classes: usize) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::config("input_dim", "must be at least 1"));
        }
        let level_bandit = CtsBandit::new(config.bandit.config(
            config.levels.len(),
            input_dim,
            derive_seed(config.seed, STREAM_LEVEL_BANDIT),
        ))?;
        let class_bandit = CtsBandit::new(config.bandit.config(
            classes,
            input_dim,
            classifier_seed(config.seed),
        ))?;
        Ok(Self {
            config,
            input_dim,
            encoders: Vec::new(),
            level_bandit,
            class_bandit,
            history: Vec::new(),
            batch_buffer: Vec::new(),
            pending: None,
            last: None,
            batches_done: 0,
        })
    }

    pub fn config(&self) -> &CompressionConfig {
        &self.config
    }

    pub fn levels(&self) -> &[f64] {
        &self.config.levels
    }

    pub fn encoders(&self) -> &[Encoder<T>] {
        &self.encoders
    }

    pub fn level_bandit(&self) -> &CtsBandit<T> {
        &self.level_bandit
    }

    pub fn class_bandit(&self) -> &CtsBandit<T> {
        &self.class_bandit
    }

    pub fn batches_done(&self) -> u64 {
        self.batches_done
    }

    pub fn buffered(&self) -> usize {
        self.batch_buffer.len()
    }

    /// Level chosen by the last unresolved `step`.
    pub fn pending_level(&self) -> Option<usize> {
        self.pending.as_ref().map(|p| p.level)
    }

    fn encoder_seed(&self, level: usize, batch: u64) -> u64 {
        derive_seed(
            derive_seed(derive_seed(self.config.seed, STREAM_ENCODER), level as u64),
            batch,
        )
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        check_dim("context", self.input_dim, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("context has non-finite entries".into()));
        }
        Ok(())
    }

    fn fit_level(&self, data: &[Vec<T>], level: usize, batch: u64) -> Result<Encoder<T>> {
        let width = compressed_width(self.config.levels[level], self.input_dim);
        Ok(match self.config.encoder_kind {
            EncoderKind::Linear => fit_linear_encoder(data, width)?.encoder.into(),
            EncoderKind::Autoencoder => {
                let cfg = self
                    .config
                    .pretrain
                    .with_seed(self.encoder_seed(level, batch));
                train_autoencoder(data, width, &cfg)?.0.into()
            }
        })
    }

    /// Fits one encoder per level on unlabeled contexts and resets both bandits.
    pub fn pretrain(&mut self, unlabeled: &[Vec<T>]) -> Result<()> {
        if unlabeled.is_empty() {
            return Err(Error::Input("pre-training set is empty".into()));
        }
        for x in unlabeled {
            self.check_input(x)?;
        }
        self.encoders = (0..self.config.levels.len())
            .map(|i| self.fit_level(unlabeled, i, 0))
            .collect::<Result<_>>()?;
        self.history = unlabeled.to_vec();
        self.batch_buffer.clear();
        self.pending = None;
        self.last = None;
        self.batches_done = 0;
        self.level_bandit.reinitialize();
        self.class_bandit.reinitialize();
        Ok(())
    }

    /// Picks a compression level from the raw context.
    pub fn select_compression(&mut self, x: &[T]) -> Result<usize> {
        self.check_input(x)?;
        self.level_bandit.sample_arm(x)
    }

    /// Encodes `x` at `level` and pads it with trailing zeros to the input width.
    pub fn compress(&self, x: &[T], level: usize) -> Result<Vec<T>> {
        let enc = self
            .encoders
            .get(level)
            .ok_or_else(|| Error::Protocol("compression agent has not been pre-trained".into()))?;
        let mut z = enc.encode(x)?;
        z.resize(self.input_dim, T::zero());
        Ok(z)
    }

    pub fn step(&mut self, x: &[T]) -> Result<usize> {
        if self.pending.is_some() {
            return Err(Error::Protocol("step called twice without observe".into()));
        }
        if self.encoders.is_empty() {
            return Err(Error::Protocol(
                "compression agent has not been pre-trained".into(),
            ));
        }
        let level = self.select_compression(x)?;
        let padded = self.compress(x, level)?;
        let arm = self.class_bandit.sample_arm(&padded)?;
        self.pending = Some(Pending {
            level,
            padded,
            context: x.to_vec(),
            arm,
        });
        Ok(arm)
    }

    pub fn observe(&mut self, reward: T) -> Result<()> {
        let p = self
            .pending
            .take()
            .ok_or_else(|| Error::Protocol("observe called without a pending step".into()))?;
        let c = self.config.levels[p.level];
        let (r_k, r_p) = assign_reward(&self.config.split, reward, c);
        self.level_bandit.update(p.level, &p.context, r_k)?;
        self.class_bandit.update(p.arm, &p.padded, r_p)?;
        self.last = Some(CompressionDetail {
            level: p.level,
            c,
            r_k,
            r_p,
        });
        self.history.push(p.context.clone());
        self.batch_buffer.push(p.context);
        if self.batch_buffer.len() >= self.config.batch_size {
            self.end_of_batch()?;
        }
        Ok(())
    }

    /// One full round against a known label: returns `(level, class arm, reward)`.
    pub fn round(&mut self, x: &[T], label: usize) -> Result<(usize, usize, T)> {
        let arm = self.step(x)?;
        let level = self.pending_level().expect("step leaves a pending round");
        let r = if arm == label { T::one() } else { T::zero() };
        self.observe(r)?;
        Ok((level, arm, r))
    }

    /// Updates every level's encoder and, when staged, resets both bandits.
    pub fn end_of_batch(&mut self) -> Result<()> {
        let batch = std::mem::take(&mut self.batch_buffer);
        let b = self.batches_done + 1;
        if !batch.is_empty() {
            for i in 0..self.encoders.len() {
                match self.config.encoder_kind {
                    EncoderKind::Linear => {
                        self.encoders[i] = self.fit_level(&self.history, i, b)?;
                    }
                    EncoderKind::Autoencoder => {
                        let cfg = self.config.finetune.with_seed(self.encoder_seed(i, b));
                        if let Encoder::Autoencoder(ae) = &mut self.encoders[i] {
                            update_autoencoder(ae, &batch, &cfg)?;
                        }
                    }
                }
            }
        }
        if self.config.staged {
            self.level_bandit.reinitialize();
            self.class_bandit.reinitialize();
        }
        self.batches_done = b;
        Ok(())
    }
}

/// Pre-trained compression state: one encoder per level and both bandits.
#[derive(Debug, Clone)]
pub struct CompressionSnapshot<T> {
    pub encoders: Vec<Encoder<T>>,
    pub level_bandit: CtsBandit<T>,
    pub class_bandit: CtsBandit<T>,
}

impl<T: Scalar> CompressionSnapshot<T> {
    /// Writes `encoder_<i>.bin`, `level_bandit.bin` and `bandit.bin`.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, e) in self.encoders.iter().enumerate() {
            e.save(&dir.join(format!("encoder_{i}.bin")))?;
        }
        self.level_bandit.save(&dir.join("level_bandit.bin"))?;
        self.class_bandit.save(&dir.join("bandit.bin"))
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut encoders = Vec::new();
        loop {
            let p = dir.join(format!("encoder_{}.bin", encoders.len()));
            if !p.exists() {
                break;
            }
            encoders.push(Encoder::load(&p)?);
        }
        Ok(Self {
            encoders,
            level_bandit: CtsBandit::load(&dir.join("level_bandit.bin"))?,
            class_bandit: CtsBandit::load(&dir.join("bandit.bin"))?,
        })
    }
}

impl<T: Scalar> CompressionAgent<T> {
    pub fn snapshot(&self) -> CompressionSnapshot<T> {
        CompressionSnapshot {
            encoders: self.encoders.clone(),
            level_bandit: self.level_bandit.clone(),
            class_bandit: self.class_bandit.clone(),
        }
    }

    /// Replaces the pre-trained state with a saved one; `history` must be the
    /// pre-training contexts it was built from.
    pub fn restore(&mut self, snapshot: CompressionSnapshot<T>, history: &[Vec<T>]) -> Result<()> {
        let mismatch = |what: String| Error::Input(format!("snapshot does not fit agent: {what}"));
        if snapshot.encoders.len() != self.config.levels.len() {
            return Err(mismatch(format!(
                "{} encoders for {} levels",
                snapshot.encoders.len(),
                self.config.levels.len()
            )));
        }
        for (i, e) in snapshot.encoders.iter().enumerate() {
            let width = compressed_width(self.config.levels[i], self.input_dim);
            if e.kind() != self.config.encoder_kind
                || e.input_dim() != self.input_dim
                || e.output_dim() != width
            {
                return Err(mismatch(format!("encoder {i}")));
            }
        }
        let same = |a: &CtsBandit<T>, b: &CtsBandit<T>| {
            a.config().arms == b.config().arms && a.config().dim == b.config().dim
        };
        if !same(&snapshot.level_bandit, &self.level_bandit)
            || !same(&snapshot.class_bandit, &self.class_bandit)
        {
            return Err(mismatch("bandit shape".into()));
        }
        for x in history {
            self.check_input(x)?;
        }
        self.encoders = snapshot.encoders;
        self.level_bandit = snapshot.level_bandit;
        self.class_bandit = snapshot.class_bandit;
        self.history = history.to_vec();
        self.batch_buffer.clear();
        self.pending = None;
        self.last = None;
        self.batches_done = 0;
        Ok(())
    }
}

impl<T: Scalar> Policy<T> for CompressionAgent<T> {
    fn step(&mut self, context: &[T]) -> Result<usize> {
        CompressionAgent::step(self, context)
    }

    fn observe(&mut self, reward: T) -> Result<()> {
        CompressionAgent::observe(self, reward)
    }

    fn last_compression(&self) -> Option<CompressionDetail<T>> {
        self.last
    }
}
