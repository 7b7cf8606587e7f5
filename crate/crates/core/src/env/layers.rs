//! Nonstationarity constructions applied to an online stream, batch by batch.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::synth::check_probabilities;
use super::{LabeledExample, Stream};
use crate::error::{Error, Result};
use crate::seed::rng_from;

pub fn validate_schedule(schedule: &[Vec<f64>], batches: usize, clusters: usize) -> Result<()> {
    if schedule.len() != batches {
        return Err(Error::config(
            "drift.schedule",
            format!(
                "has {} entries but the stream has {batches} batches",
                schedule.len()
            ),
        ));
    }
    for (b, w) in schedule.iter().enumerate() {
        if w.len() != clusters {
            return Err(Error::config(
                format!("drift.schedule[{b}]"),
                format!("has {} weights for {clusters} clusters", w.len()),
            ));
        }
        check_probabilities(w).map_err(|msg| Error::config(format!("drift.schedule[{b}]"), msg))?;
    }
    Ok(())
}

/// Linear interpolation from `from` (first batch) to `to` (last batch).
pub fn ramp_schedule(from: &[f64], to: &[f64], batches: usize) -> Result<Vec<Vec<f64>>> {
    if from.len() != to.len() {
        return Err(Error::config(
            "drift.ramp",
            "endpoints have different lengths",
        ));
    }
    Ok((0..batches)
        .map(|b| {
            let t = if batches > 1 {
                b as f64 / (batches - 1) as f64
            } else {
                0.0
            };
            from.iter().zip(to).map(|(f, g)| f + t * (g - f)).collect()
        })
        .collect())
}

/// Rebuilds an online stream by drawing, for each batch, a cluster from that
/// batch's weights and then an example uniformly from the cluster's pool.
/// Returns the examples and the cluster of each.
pub fn apply_cluster_drift(
    pools: &[Vec<LabeledExample>],
    schedule: &[Vec<f64>],
    online_count: usize,
    batch_size: usize,
    seed: u64,
) -> Result<(Vec<LabeledExample>, Vec<usize>)> {
    let batches = online_count.div_ceil(batch_size.max(1));
    validate_schedule(schedule, batches, pools.len())?;
    for (j, pool) in pools.iter().enumerate() {
        if pool.is_empty() && schedule.iter().any(|w| w[j] > 0.0) {
            return Err(Error::Input(format!(
                "cluster {j} has no examples but positive drift weight"
            )));
        }
    }
    let mut rng = rng_from(seed);
    let mut out = Vec::with_capacity(online_count);
    let mut clusters = Vec::with_capacity(online_count);
    for (b, w) in schedule.iter().enumerate() {
        let picker = rand::distr::weighted::WeightedIndex::new(w)
            .map_err(|e| Error::config(format!("drift.schedule[{b}]"), e.to_string()))?;
        let n = batch_size.min(online_count - b * batch_size);
        for _ in 0..n {
            let j = rng.sample(&picker);
            let pool = &pools[j];
            out.push(pool[rng.random_range(0..pool.len())].clone());
            clusters.push(j);
        }
    }
    Ok((out, clusters))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeMode {
    /// Each example is negated with probability 1/2.
    Half,
    /// The negation probability is drawn uniformly once per batch.
    Rand,
}

pub fn negate(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| 1.0 - v).collect()
}

/// Replaces contexts by `1 - x` at random; returns which examples were negated.
pub fn apply_negative_inputs(
    online: &mut [LabeledExample],
    batch_size: usize,
    mode: NegativeMode,
    seed: u64,
) -> Result<Vec<bool>> {
    if let Some((i, _)) = online
        .iter()
        .enumerate()
        .find(|(_, e)| e.x.iter().any(|v| !(0.0..=1.0).contains(v)))
    {
        return Err(Error::Contract(format!(
            "example {i} has features outside [0, 1]; negation needs scaled inputs"
        )));
    }
    let mut rng = rng_from(seed);
    let mut flags = Vec::with_capacity(online.len());
    for batch in online.chunks_mut(batch_size.max(1)) {
        let p = match mode {
            NegativeMode::Half => 0.5,
            NegativeMode::Rand => rng.random::<f64>(),
        };
        for e in batch {
            let flip = rng.random::<f64>() < p;
            if flip {
                e.x = negate(&e.x);
            }
            flags.push(flip);
        }
    }
    Ok(flags)
}

/// Relabels every batch through its own uniformly drawn permutation of the
/// classes; returns the permutations (`perm[old] = new`).
pub fn apply_shuffled_labels(
    online: &mut [LabeledExample],
    batch_size: usize,
    classes: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    let mut rng = rng_from(seed);
    online
        .chunks_mut(batch_size.max(1))
        .map(|batch| {
            let mut perm: Vec<usize> = (0..classes).collect();
            perm.shuffle(&mut rng);
            for e in batch {
                e.label = perm[e.label];
            }
            perm
        })
        .collect()
}

/// Resamples `x` to `target` points by linear interpolation over index
/// positions; first and last values are kept.
pub fn stretch(x: &[f64], target: usize) -> Vec<f64> {
    match (x.len(), target) {
        (_, 0) => Vec::new(),
        (0, _) => vec![0.0; target],
        (1, _) => vec![x[0]; target],
        (_, 1) => vec![x[0]],
        (n, _) => (0..target)
            .map(|i| {
                let pos = i as f64 * (n - 1) as f64 / (target - 1) as f64;
                let lo = (pos.floor() as usize).min(n - 2);
                let t = pos - lo as f64;
                x[lo] + t * (x[lo + 1] - x[lo])
            })
            .collect(),
    }
}

/// Interleaves two streams by a fair coin per draw, stretching every context
/// to `target_dim` and shifting the second stream's labels past the first's.
pub fn mix_domains(a: &Stream, b: &Stream, target_dim: usize, seed: u64) -> Result<Stream> {
    if target_dim == 0 {
        return Err(Error::config("multi_task.target_dim", "must be at least 1"));
    }
    if a.online.is_empty() || b.online.is_empty() {
        return Err(Error::Input("cannot mix an empty stream".into()));
    }
    let mut rng = rng_from(seed);
    let mut coin_merge = |left: Vec<(Vec<f64>, usize, usize)>,
                          right: Vec<(Vec<f64>, usize, usize)>| {
        let mut out = Vec::with_capacity(left.len() + right.len());
        let (mut li, mut ri) = (left.into_iter().peekable(), right.into_iter().peekable());
        loop {
            let take_left = match (li.peek(), ri.peek()) {
                (None, None) => break,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                _ => rng.random::<bool>(),
            };
            out.push(if take_left { li.next() } else { ri.next() }.expect("peeked"));
        }
        out
    };
    let shift = a.classes;
    let comp_shift = a
        .components
        .as_ref()
        .and_then(|c| c.iter().max())
        .map_or(0, |m| m + 1);
    let pre = coin_merge(
        a.pretrain
            .iter()
            .map(|x| (stretch(x, target_dim), 0, 0))
            .collect(),
        b.pretrain
            .iter()
            .map(|x| (stretch(x, target_dim), 0, 0))
            .collect(),
    );
    let comp = |s: &Stream, i: usize| s.components.as_ref().map_or(0, |c| c[i]);
    let online = coin_merge(
        a.online
            .iter()
            .enumerate()
            .map(|(i, e)| (stretch(&e.x, target_dim), e.label, comp(a, i)))
            .collect(),
        b.online
            .iter()
            .enumerate()
            .map(|(i, e)| {
                (
                    stretch(&e.x, target_dim),
                    e.label + shift,
                    comp(b, i) + comp_shift,
                )
            })
            .collect(),
    );
    let components = (a.components.is_some() && b.components.is_some())
        .then(|| online.iter().map(|o| o.2).collect());
    Ok(Stream {
        pretrain: pre.into_iter().map(|p| p.0).collect(),
        online: online
            .into_iter()
            .map(|(x, label, _)| LabeledExample { x, label })
            .collect(),
        classes: a.classes + b.classes,
        batch_size: a.batch_size,
        components,
    })
}
