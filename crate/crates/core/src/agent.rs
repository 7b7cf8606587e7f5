//! Adaptive bandit with context-dependent embeddings, plus its comparison
//! variants.
//!
//! * `BaselineCb` runs the bandit on raw contexts.
//! * `UniversalEmbedding` uses a single autoencoder for every context.
//! * `MiniBatchEmbedding` picks a per-cluster autoencoder; clusters are
//!   recomputed from the whole history at each batch boundary.
//! * `OnlineEmbedding` picks a per-cluster autoencoder and moves the chosen
//!   centroid after every context; no re-clustering.
//!
//! All variants share one classification bandit over a fixed representation
//! width `m` (the raw dimension for the baseline). Encoders are fine-tuned at
//! batch boundaries; the bandit is never reset.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::{kmeans_fit, recompute_clusters, ClusterModel};
use crate::cts::CtsBandit;
use crate::encoders::{train_autoencoder, update_autoencoder, Autoencoder, Encoder, TrainConfig};
use crate::error::{check_dim, Error, Result};
use crate::linalg::squared_distance;
use crate::persist::Snapshot;
use crate::policy::{BanditParams, Policy};
use crate::scalar::Scalar;
use crate::seed::{derive_seed, STREAM_BANDIT, STREAM_CLUSTER, STREAM_ENCODER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyVariant {
    #[serde(rename = "cb")]
    BaselineCb,
    #[serde(rename = "ue")]
    UniversalEmbedding,
    #[serde(rename = "me")]
    MiniBatchEmbedding,
    #[serde(rename = "oe")]
    OnlineEmbedding,
}

impl PolicyVariant {
    pub fn short_name(self) -> &'static str {
        match self {
            PolicyVariant::BaselineCb => "cb",
            PolicyVariant::UniversalEmbedding => "ue",
            PolicyVariant::MiniBatchEmbedding => "me",
            PolicyVariant::OnlineEmbedding => "oe",
        }
    }

    fn clustered(self) -> bool {
        matches!(
            self,
            PolicyVariant::MiniBatchEmbedding | PolicyVariant::OnlineEmbedding
        )
    }
}

/// Seed of the classification bandit for a given run seed.
pub fn classifier_seed(seed: u64) -> u64 {
    derive_seed(seed, STREAM_BANDIT)
}

/// Default shared embedding width: `ceil(D/4)`.
pub fn default_embedding_dim(input_dim: usize) -> usize {
    input_dim.div_ceil(4).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub variant: PolicyVariant,
    /// Number of clusters/embeddings; ignored by `BaselineCb` and `UniversalEmbedding`.
    pub k: usize,
    pub batch_size: usize,
    /// Shared representation width; `None` means `ceil(D/4)`.
    pub embedding_dim: Option<usize>,
    pub bandit: BanditParams,
    pub pretrain: TrainConfig,
    /// Schedule for boundary fine-tuning (the seed field is replaced per call).
    pub finetune: TrainConfig,
    /// Retrain the universal embedding from scratch on the full history at
    /// each boundary instead of fine-tuning it on the batch.
    pub universal_full_retrain: bool,
    pub seed: u64,
}

impl AgentConfig {
    pub fn new(variant: PolicyVariant) -> Self {
        Self {
            variant,
            k: 4,
            batch_size: 1000,
            embedding_dim: None,
            bandit: BanditParams::default(),
            pretrain: TrainConfig::default(),
            finetune: TrainConfig {
                epochs: 5,
                ..TrainConfig::default()
            },
            universal_full_retrain: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.variant.clustered() && self.k == 0 {
            return Err(Error::config("k", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.embedding_dim == Some(0) {
            return Err(Error::config("embedding_dim", "must be at least 1"));
        }
        self.pretrain.validate()?;
        self.finetune.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Pending<T> {
    cluster: Option<usize>,
    representation: Vec<T>,
    arm: usize,
}

#[derive(Debug, Clone)]
pub struct AbacodeAgent<T> {
    config: AgentConfig,
    input_dim: usize,
    repr_dim: usize,
    arms: usize,
    clusters: Option<ClusterModel<T>>,
    encoders: Vec<Autoencoder<T>>,
    bandit: CtsBandit<T>,
    history: Vec<Vec<T>>,
    batch_buffer: Vec<Vec<T>>,
    pending: Option<Pending<T>>,
    batches_done: u64,
    pretrain_members: Vec<Vec<usize>>,
}

impl<T: Scalar> AbacodeAgent<T> {
    /// A fresh agent for `input_dim`-dimensional contexts and `arms` classes.
    /// Call [`pretrain`](Self::pretrain) before stepping embedding variants.
    pub fn new(config: AgentConfig, input_dim: usize, arms: usize) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::config("input_dim", "must be at least 1"));
        }
        let repr_dim = match config.variant {
            PolicyVariant::BaselineCb => input_dim,
            _ => config
                .embedding_dim
                .unwrap_or_else(|| default_embedding_dim(input_dim)),
        };
        let bandit = CtsBandit::new(config.bandit.config(
            arms,
            repr_dim,
            classifier_seed(config.seed),
        ))?;
        Ok(Self {
            config,
            input_dim,
            repr_dim,
            arms,
            clusters: None,
            encoders: Vec::new(),
            bandit,
            history: Vec::new(),
            batch_buffer: Vec::new(),
            pending: None,
            batches_done: 0,
            pretrain_members: Vec::new(),
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn variant(&self) -> PolicyVariant {
        self.config.variant
    }

    pub fn representation_dim(&self) -> usize {
        self.repr_dim
    }

    pub fn clusters(&self) -> Option<&ClusterModel<T>> {
        self.clusters.as_ref()
    }

    pub fn encoders(&self) -> &[Autoencoder<T>] {
        &self.encoders
    }

    pub fn bandit(&self) -> &CtsBandit<T> {
        &self.bandit
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn buffered(&self) -> usize {
        self.batch_buffer.len()
    }

    pub fn batches_done(&self) -> u64 {
        self.batches_done
    }

    pub fn has_pending(&self) -> bool {
        self.pending.is_some()
    }

    /// Indices of the pre-training points each cluster's encoder was trained on.
    pub fn pretrain_members(&self) -> &[Vec<usize>] {
        &self.pretrain_members
    }

    /// Cluster index of the last stepped context, if the variant clusters.
    pub fn pending_cluster(&self) -> Option<usize> {
        self.pending.as_ref().and_then(|p| p.cluster)
    }

    fn encoder_seed(&self, encoder: usize, batch: u64) -> u64 {
        derive_seed(
            derive_seed(
                derive_seed(self.config.seed, STREAM_ENCODER),
                encoder as u64,
            ),
            batch,
        )
    }

    fn cluster_seed(&self) -> u64 {
        derive_seed(self.config.seed, STREAM_CLUSTER)
    }

    fn train_fresh(&self, data: &[Vec<T>], encoder: usize, batch: u64) -> Result<Autoencoder<T>> {
        let cfg = self
            .config
            .pretrain
            .with_seed(self.encoder_seed(encoder, batch));
        train_autoencoder(data, self.repr_dim, &cfg).map(|(m, _)| m)
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        check_dim("context", self.input_dim, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("context has non-finite entries".into()));
        }
        Ok(())
    }

    /// Builds the initial clusters and embeddings from unlabeled contexts and
    /// resets the bandit.
    pub fn pretrain(&mut self, unlabeled: &[Vec<T>]) -> Result<()> {
        if unlabeled.is_empty() {
            return Err(Error::Input("pre-training set is empty".into()));
        }
        for x in unlabeled {
            self.check_input(x)?;
        }
        self.clusters = None;
        self.encoders.clear();
        self.pretrain_members.clear();
        match self.config.variant {
            PolicyVariant::BaselineCb => {}
            PolicyVariant::UniversalEmbedding => {
                self.encoders.push(self.train_fresh(unlabeled, 0, 0)?);
                self.pretrain_members.push((0..unlabeled.len()).collect());
            }
            PolicyVariant::MiniBatchEmbedding | PolicyVariant::OnlineEmbedding => {
                let k = self.config.k;
                if unlabeled.len() < k {
                    return Err(Error::Input(format!(
                        "{} pre-training contexts cannot form {k} clusters",
                        unlabeled.len()
                    )));
                }
                let clusters = kmeans_fit(unlabeled, k, self.cluster_seed())?;
                let mut members = vec![Vec::new(); k];
                for (i, x) in unlabeled.iter().enumerate() {
                    members[clusters.assign(x)?].push(i);
                }
                for (j, idx) in members.iter().enumerate() {
                    // A cluster that ends up empty falls back to all data.
                    let data: Vec<Vec<T>> = if idx.is_empty() {
                        unlabeled.to_vec()
                    } else {
                        idx.iter().map(|&i| unlabeled[i].clone()).collect()
                    };
                    self.encoders.push(self.train_fresh(&data, j, 0)?);
                }
                self.clusters = Some(clusters);
                self.pretrain_members = members;
            }
        }
        self.history = unlabeled.to_vec();
        self.batch_buffer.clear();
        self.pending = None;
        self.batches_done = 0;
        self.bandit.reinitialize();
        Ok(())
    }

    /// Maps a context to the representation the bandit sees, without
    /// touching any state.
    pub fn represent(&self, x: &[T]) -> Result<(Option<usize>, Vec<T>)> {
        self.check_input(x)?;
        match self.config.variant {
            PolicyVariant::BaselineCb => Ok((None, x.to_vec())),
            PolicyVariant::UniversalEmbedding => {
                let enc = self.encoders.first().ok_or_else(not_pretrained)?;
                Ok((None, enc.encode(x)?))
            }
            PolicyVariant::MiniBatchEmbedding | PolicyVariant::OnlineEmbedding => {
                let clusters = self.clusters.as_ref().ok_or_else(not_pretrained)?;
                let j = clusters.assign(x)?;
                Ok((Some(j), self.encoders[j].encode(x)?))
            }
        }
    }

    pub fn step(&mut self, x: &[T]) -> Result<usize> {
        if self.pending.is_some() {
            return Err(Error::Protocol("step called twice without observe".into()));
        }
        self.check_input(x)?;
        let cluster = match (&mut self.clusters, self.config.variant) {
            (Some(c), PolicyVariant::OnlineEmbedding) => {
                let j = c.assign(x)?;
                c.update_online(x, j)?;
                Some(j)
            }
            (Some(c), _) => Some(c.assign(x)?),
            (None, v) if v.clustered() => return Err(not_pretrained()),
            (None, _) => None,
        };
        let representation = match (cluster, self.config.variant) {
            (_, PolicyVariant::BaselineCb) => x.to_vec(),
            (Some(j), _) => self.encoders[j].encode(x)?,
            (None, _) => self
                .encoders
                .first()
                .ok_or_else(not_pretrained)?
                .encode(x)?,
        };
        let arm = self.bandit.sample_arm(&representation)?;
        self.batch_buffer.push(x.to_vec());
        self.history.push(x.to_vec());
        self.pending = Some(Pending {
            cluster,
            representation,
            arm,
        });
        Ok(arm)
    }

    pub fn observe(&mut self, reward: T) -> Result<()> {
        let pending = self
            .pending
            .as_ref()
            .ok_or_else(|| Error::Protocol("observe called without a pending step".into()))?;
        self.bandit
            .update(pending.arm, &pending.representation, reward)?;
        self.pending = None;
        if self.batch_buffer.len() >= self.config.batch_size {
            self.end_of_batch()?;
        }
        Ok(())
    }

    /// Refreshes clusters and embeddings from the finished mini-batch.
    pub fn end_of_batch(&mut self) -> Result<()> {
        let batch = std::mem::take(&mut self.batch_buffer);
        let b = self.batches_done + 1;
        if !batch.is_empty() {
            match self.config.variant {
                PolicyVariant::BaselineCb => {}
                PolicyVariant::UniversalEmbedding => {
                    if self.config.universal_full_retrain {
                        self.encoders[0] = self.train_fresh(&self.history, 0, b)?;
                    } else {
                        self.finetune(0, &batch, b)?;
                    }
                }
                PolicyVariant::MiniBatchEmbedding => {
                    let old = self.clusters.take().ok_or_else(not_pretrained)?;
                    let new =
                        recompute_clusters(&self.history, self.config.k, self.cluster_seed())?;
                    let pairing = greedy_pairing(old.centroids(), new.centroids());
                    let mut previous: Vec<Option<Autoencoder<T>>> =
                        std::mem::take(&mut self.encoders)
                            .into_iter()
                            .map(Some)
                            .collect();
                    self.encoders = pairing
                        .iter()
                        .map(|&i| previous[i].take().expect("pairing is a permutation"))
                        .collect();
                    self.clusters = Some(new);
                    self.finetune_by_cluster(&batch, b)?;
                }
                PolicyVariant::OnlineEmbedding => self.finetune_by_cluster(&batch, b)?,
            }
        }
        self.batches_done = b;
        Ok(())
    }

    fn finetune_by_cluster(&mut self, batch: &[Vec<T>], b: u64) -> Result<()> {
        let clusters = self.clusters.as_ref().ok_or_else(not_pretrained)?;
        let mut members: Vec<Vec<Vec<T>>> = vec![Vec::new(); clusters.k()];
        for x in batch {
            members[clusters.assign(x)?].push(x.clone());
        }
        for (j, data) in members.iter().enumerate() {
            if !data.is_empty() {
                self.finetune(j, data, b)?;
            }
        }
        Ok(())
    }

    fn finetune(&mut self, encoder: usize, data: &[Vec<T>], b: u64) -> Result<()> {
        let cfg = self
            .config
            .finetune
            .with_seed(self.encoder_seed(encoder, b));
        update_autoencoder(&mut self.encoders[encoder], data, &cfg).map(|_| ())
    }

    pub fn snapshot(&self) -> AgentSnapshot<T> {
        AgentSnapshot {
            clusters: self.clusters.clone(),
            encoders: self.encoders.iter().cloned().map(Encoder::from).collect(),
            bandit: self.bandit.clone(),
        }
    }

    /// Replaces the pre-trained state with a saved one. `history` must be the
    /// pre-training contexts the snapshot was built from.
    pub fn restore(&mut self, snapshot: AgentSnapshot<T>, history: &[Vec<T>]) -> Result<()> {
        let mismatch = |what: String| Error::Input(format!("snapshot does not fit agent: {what}"));
        let expected_encoders = match self.config.variant {
            PolicyVariant::BaselineCb => 0,
            PolicyVariant::UniversalEmbedding => 1,
            _ => self.config.k,
        };
        if snapshot.encoders.len() != expected_encoders {
            return Err(mismatch(format!(
                "{} encoders, expected {expected_encoders}",
                snapshot.encoders.len()
            )));
        }
        let mut encoders = Vec::with_capacity(expected_encoders);
        for enc in snapshot.encoders {
            if enc.input_dim() != self.input_dim || enc.output_dim() != self.repr_dim {
                return Err(mismatch(format!(
                    "encoder {}→{}, expected {}→{}",
                    enc.input_dim(),
                    enc.output_dim(),
                    self.input_dim,
                    self.repr_dim
                )));
            }
            match enc {
                Encoder::Autoencoder(ae) => encoders.push(ae),
                Encoder::Linear(_) => return Err(mismatch("linear encoder".into())),
            }
        }
        match (&snapshot.clusters, self.config.variant.clustered()) {
            (Some(c), true) if c.k() == self.config.k && c.dim() == self.input_dim => {}
            (None, false) => {}
            _ => return Err(mismatch("cluster model".into())),
        }
        let bc = snapshot.bandit.config();
        if bc.dim != self.repr_dim || bc.arms != self.arms {
            return Err(mismatch(format!(
                "bandit {}×{}, expected {}×{}",
                bc.arms, bc.dim, self.arms, self.repr_dim
            )));
        }
        for x in history {
            self.check_input(x)?;
        }
        self.clusters = snapshot.clusters;
        self.encoders = encoders;
        self.bandit = snapshot.bandit;
        self.history = history.to_vec();
        self.batch_buffer.clear();
        self.pending = None;
        self.batches_done = 0;
        Ok(())
    }
}

impl<T: Scalar> Policy<T> for AbacodeAgent<T> {
    fn step(&mut self, context: &[T]) -> Result<usize> {
        AbacodeAgent::step(self, context)
    }

    fn observe(&mut self, reward: T) -> Result<()> {
        AbacodeAgent::observe(self, reward)
    }
}

fn not_pretrained() -> Error {
    Error::Protocol("agent has not been pre-trained".into())
}

/// For each new centroid, the index of the old centroid it inherits from.
/// Pairs are taken closest-first; ties go to the lower (old, new) indices.
pub fn greedy_pairing<T: Scalar>(old: &[Vec<T>], new: &[Vec<T>]) -> Vec<usize> {
    let mut pairs: Vec<(T, usize, usize)> = Vec::with_capacity(old.len() * new.len());
    for (i, o) in old.iter().enumerate() {
        for (j, n) in new.iter().enumerate() {
            pairs.push((squared_distance(o, n), i, j));
        }
    }
    pairs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut old_used = vec![false; old.len()];
    let mut out = vec![usize::MAX; new.len()];
    for (_, i, j) in pairs {
        if !old_used[i] && out[j] == usize::MAX {
            old_used[i] = true;
            out[j] = i;
        }
    }
    out
}

/// Pre-trained agent state: clusters, encoders and the classification bandit.
#[derive(Debug, Clone)]
pub struct AgentSnapshot<T> {
    pub clusters: Option<ClusterModel<T>>,
    pub encoders: Vec<Encoder<T>>,
    pub bandit: CtsBandit<T>,
}

impl<T: Scalar> AgentSnapshot<T> {
    /// Writes `clusters.bin` (when present), `encoder_<i>.bin` and `bandit.bin`.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        if let Some(c) = &self.clusters {
            c.save(&dir.join("clusters.bin"))?;
        }
        for (i, e) in self.encoders.iter().enumerate() {
            e.save(&dir.join(format!("encoder_{i}.bin")))?;
        }
        self.bandit.save(&dir.join("bandit.bin"))
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let clusters_path = dir.join("clusters.bin");
        let clusters = if clusters_path.exists() {
            Some(ClusterModel::load(&clusters_path)?)
        } else {
            None
        };
        let mut encoders = Vec::new();
        loop {
            let p = dir.join(format!("encoder_{}.bin", encoders.len()));
            if !p.exists() {
                break;
            }
            encoders.push(Encoder::load(&p)?);
        }
        Ok(Self {
            clusters,
            encoders,
            bandit: CtsBandit::load(&dir.join("bandit.bin"))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn blobs(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ls = Vec::new();
        for i in 0..n {
            let l = i % 2;
            let c = if l == 0 { 0.8 } else { 0.2 };
            xs.push(
                (0..d)
                    .map(|_| c + 0.05 * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            );
            ls.push(l);
        }
        (xs, ls)
    }

    fn cfg(variant: PolicyVariant) -> AgentConfig {
        AgentConfig {
            k: 2,
            batch_size: 10,
            seed: 3,
            pretrain: TrainConfig {
                epochs: 3,
                ..TrainConfig::default()
            },
            finetune: TrainConfig {
                epochs: 1,
                ..TrainConfig::default()
            },
            ..AgentConfig::new(variant)
        }
    }

    fn agent(variant: PolicyVariant) -> AbacodeAgent<f64> {
        let (xs, _) = blobs(60, 6, 1);
        let mut a = AbacodeAgent::new(cfg(variant), 6, 3).unwrap();
        a.pretrain(&xs).unwrap();
        a
    }

    #[test]
    fn baseline_is_bare_bandit_on_raw_contexts() {
        let mut a = agent(PolicyVariant::BaselineCb);
        assert!(a.encoders().is_empty() && a.clusters().is_none());
        assert_eq!(a.representation_dim(), 6);
        let mut bare =
            CtsBandit::new(BanditParams::default().config(3, 6, classifier_seed(3))).unwrap();
        let (xs, ls) = blobs(40, 6, 2);
        for (x, &l) in xs.iter().zip(&ls) {
            let got = a.step(x).unwrap();
            let want = bare.sample_arm(x).unwrap();
            assert_eq!(got, want);
            let r = if got == l { 1.0 } else { 0.0 };
            a.observe(r).unwrap();
            bare.update(want, x, r).unwrap();
        }
    }

    #[test]
    fn universal_has_exactly_one_encoder() {
        let a = agent(PolicyVariant::UniversalEmbedding);
        assert_eq!(a.encoders().len(), 1);
        assert!(a.clusters().is_none());
        assert_eq!(a.representation_dim(), 2);
    }

    #[test]
    fn clustered_encoders_train_on_their_own_blob() {
        let (xs, ls) = blobs(60, 6, 1);
        let mut a = AbacodeAgent::new(cfg(PolicyVariant::MiniBatchEmbedding), 6, 3).unwrap();
        a.pretrain(&xs).unwrap();
        let members = a.pretrain_members();
        assert_eq!(members.len(), 2);
        for group in members {
            assert!(!group.is_empty());
            let blob = ls[group[0]];
            assert!(group.iter().all(|&i| ls[i] == blob));
        }
    }

    #[test]
    fn online_moves_one_centroid_minibatch_none() {
        let (xs, _) = blobs(4, 6, 9);
        let mut oe = agent(PolicyVariant::OnlineEmbedding);
        let before = oe.clusters().unwrap().clone();
        oe.step(&xs[0]).unwrap();
        let after = oe.clusters().unwrap();
        let moved = (0..2)
            .filter(|&j| before.centroids()[j] != after.centroids()[j])
            .count();
        assert_eq!(moved, 1);

        let mut me = agent(PolicyVariant::MiniBatchEmbedding);
        let before = me.clusters().unwrap().clone();
        me.step(&xs[0]).unwrap();
        assert_eq!(me.clusters().unwrap(), &before);
    }

    #[test]
    fn protocol_is_enforced() {
        let mut a = agent(PolicyVariant::UniversalEmbedding);
        assert!(matches!(a.observe(1.0), Err(Error::Protocol(_))));
        a.step(&[0.5; 6]).unwrap();
        assert!(matches!(a.step(&[0.5; 6]), Err(Error::Protocol(_))));
        a.observe(1.0).unwrap();
        assert!(matches!(a.observe(1.0), Err(Error::Protocol(_))));
        assert!(a.step(&[0.5; 5]).is_err());
        assert!(!a.has_pending());
    }

    #[test]
    fn batch_boundary_fires_once_per_batch() {
        let mut a = agent(PolicyVariant::OnlineEmbedding);
        let (xs, _) = blobs(25, 6, 4);
        for (i, x) in xs.iter().enumerate() {
            a.step(x).unwrap();
            a.observe(0.0).unwrap();
            assert_eq!(a.batches_done() as usize, (i + 1) / 10);
            assert!(a.buffered() < 10);
        }
        assert_eq!(a.history_len(), 60 + 25);
    }

    #[test]
    fn reward_moves_posterior_toward_rewarded_arm() {
        let mut a = agent(PolicyVariant::UniversalEmbedding);
        let x = vec![0.8; 6];
        let first = a.step(&x).unwrap();
        a.observe(1.0).unwrap();
        let (_, z) = a.represent(&x).unwrap();
        let score = |a: &AbacodeAgent<f64>, arm| dot(&z, a.bandit().posterior_mean(arm).unwrap());
        let rewarded = score(&a, first);
        for arm in (0..3).filter(|&arm| arm != first) {
            assert!(rewarded > score(&a, arm));
        }
    }

    #[test]
    fn baseline_boundary_only_clears_buffer() {
        let mut a = agent(PolicyVariant::BaselineCb);
        a.step(&[0.1; 6]).unwrap();
        a.observe(1.0).unwrap();
        let bandit_before = a.bandit().arms().to_vec();
        a.end_of_batch().unwrap();
        assert_eq!(a.buffered(), 0);
        assert_eq!(a.bandit().arms(), bandit_before.as_slice());
    }

    #[test]
    fn minibatch_reclusters_after_shift() {
        let mut a = agent(PolicyVariant::MiniBatchEmbedding);
        let before = a.clusters().unwrap().clone();
        for _ in 0..10 {
            a.step(&[5.0; 6]).unwrap();
            a.observe(0.0).unwrap();
        }
        assert_eq!(a.batches_done(), 1);
        assert_ne!(a.clusters().unwrap(), &before);
    }

    #[test]
    fn only_clusters_with_members_are_finetuned() {
        let mut a = agent(PolicyVariant::OnlineEmbedding);
        let before = a.encoders().to_vec();
        // Every context lands in the cluster nearest to 0.8.
        let target = a.clusters().unwrap().assign(&[0.8; 6]).unwrap();
        for _ in 0..10 {
            a.step(&[0.8; 6]).unwrap();
            a.observe(0.0).unwrap();
        }
        for j in 0..2 {
            assert_eq!(a.encoders()[j] == before[j], j != target);
        }
    }

    #[test]
    fn single_cluster_variants_match_universal() {
        let run = |variant| {
            let mut c = cfg(variant);
            c.k = 1;
            let (xs, ls) = blobs(60, 6, 1);
            let mut a = AbacodeAgent::<f64>::new(c, 6, 3).unwrap();
            a.pretrain(&xs).unwrap();
            let (stream, labels) = blobs(35, 6, 8);
            let _ = ls;
            stream
                .iter()
                .zip(&labels)
                .map(|(x, &l)| {
                    let arm = a.step(x).unwrap();
                    a.observe(if arm == l { 1.0 } else { 0.0 }).unwrap();
                    arm
                })
                .collect::<Vec<_>>()
        };
        let ue = run(PolicyVariant::UniversalEmbedding);
        assert_eq!(run(PolicyVariant::MiniBatchEmbedding), ue);
        assert_eq!(run(PolicyVariant::OnlineEmbedding), ue);
    }

    #[test]
    fn pairing_prefers_nearest() {
        let old = vec![vec![0.0], vec![10.0], vec![20.0]];
        let new = vec![vec![19.0], vec![1.0], vec![11.0]];
        assert_eq!(greedy_pairing(&old, &new), vec![2, 0, 1]);
    }

    #[test]
    fn snapshot_restore_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let a = agent(PolicyVariant::MiniBatchEmbedding);
        a.snapshot().save_dir(dir.path()).unwrap();
        let loaded = AgentSnapshot::<f64>::load_dir(dir.path()).unwrap();
        let (xs, _) = blobs(60, 6, 1);
        let mut b = AbacodeAgent::new(cfg(PolicyVariant::MiniBatchEmbedding), 6, 3).unwrap();
        b.restore(loaded.clone(), &xs).unwrap();
        assert_eq!(b.clusters(), a.clusters());
        assert_eq!(b.encoders(), a.encoders());

        let mut wrong =
            AbacodeAgent::<f64>::new(cfg(PolicyVariant::MiniBatchEmbedding), 7, 3).unwrap();
        assert!(wrong.restore(loaded, &[]).is_err());
    }
}
