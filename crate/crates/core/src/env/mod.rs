//! Labeled context streams, their nonstationary variants, and the
//! feedback-only environment agents interact with.

mod layers;
mod load;
mod spec;
mod synth;

pub use layers::{
    apply_cluster_drift, apply_negative_inputs, apply_shuffled_labels, mix_domains, negate,
    ramp_schedule, stretch, validate_schedule, NegativeMode,
};
pub use load::{load_csv, load_idx, parse_csv, parse_idx, LabelColumn};
pub use spec::{build_stream, DriftSpec, LayerSpec, SourceSpec, StreamSpec};
pub use synth::{synth_gaussian_mixture, GaussianMixture, MixtureSpec};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub x: Vec<f64>,
    pub label: usize,
}

impl LabeledExample {
    pub fn new(x: Vec<f64>, label: usize) -> Self {
        Self { x, label }
    }
}

/// Examples with a dense label set `0..classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub examples: Vec<LabeledExample>,
    pub classes: usize,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.examples.first().map_or(0, |e| e.x.len())
    }
}

/// Unlabeled pre-training contexts followed by a labeled online stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub pretrain: Vec<Vec<f64>>,
    pub online: Vec<LabeledExample>,
    pub classes: usize,
    pub batch_size: usize,
    /// Generating component (or cluster) of each online example, when known.
    pub components: Option<Vec<usize>>,
}

impl Stream {
    pub fn dim(&self) -> usize {
        self.pretrain
            .first()
            .or(self.online.first().map(|e| &e.x))
            .map_or(0, Vec::len)
    }

    pub fn batch_count(&self) -> usize {
        self.online.len().div_ceil(self.batch_size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("stream.batch_size", "must be at least 1"));
        }
        if self.online.is_empty() {
            return Err(Error::Input("online stream is empty".into()));
        }
        let d = self.dim();
        for x in self.pretrain.iter().chain(self.online.iter().map(|e| &e.x)) {
            if x.len() != d {
                return Err(Error::Input(format!(
                    "stream mixes context widths {d} and {}",
                    x.len()
                )));
            }
        }
        if let Some(e) = self.online.iter().find(|e| e.label >= self.classes) {
            return Err(Error::Input(format!(
                "label {} outside {} classes",
                e.label, self.classes
            )));
        }
        Ok(())
    }
}

/// Per-feature affine map onto `[0, 1]`, fitted once and then applied with clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler {
    lo: Vec<f64>,
    range: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(data: &[Vec<f64>]) -> Result<Self> {
        let d = data
            .first()
            .ok_or_else(|| Error::Input("cannot fit scaling on no data".into()))?
            .len();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for x in data {
            for (j, &v) in x.iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        let range = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| if h > l { h - l } else { 1.0 })
            .collect();
        Ok(Self { lo, range })
    }

    pub fn apply(&self, x: &mut [f64]) {
        for ((v, lo), r) in x.iter_mut().zip(&self.lo).zip(&self.range) {
            *v = ((*v - lo) / r).clamp(0.0, 1.0);
        }
    }
}

/// Scales a stream with statistics from its pre-training split only
/// (the online split if there is no pre-training data).
pub fn scale_stream(stream: &mut Stream) -> Result<FeatureScaler> {
    let scaler = if stream.pretrain.is_empty() {
        let xs: Vec<Vec<f64>> = stream.online.iter().map(|e| e.x.clone()).collect();
        FeatureScaler::fit(&xs)?
    } else {
        FeatureScaler::fit(&stream.pretrain)?
    };
    for x in &mut stream.pretrain {
        scaler.apply(x);
    }
    for e in &mut stream.online {
        scaler.apply(&mut e.x);
    }
    Ok(scaler)
}

/// The only signal an agent receives: 1 for the correct class, 0 otherwise.
pub fn bandit_feedback(chosen_arm: usize, label: usize) -> u8 {
    u8::from(chosen_arm == label)
}

/// Replays a stream forever, exposing contexts and feedback bits but never labels.
#[derive(Debug, Clone)]
pub struct Environment {
    stream: Stream,
    cursor: usize,
    rounds: u64,
    current: Option<usize>,
}

impl Environment {
    pub fn new(stream: Stream) -> Result<Self> {
        stream.validate()?;
        Ok(Self {
            stream,
            cursor: 0,
            rounds: 0,
            current: None,
        })
    }

    pub fn pretrain_contexts(&self) -> &[Vec<f64>] {
        &self.stream.pretrain
    }

    pub fn classes(&self) -> usize {
        self.stream.classes
    }

    pub fn dim(&self) -> usize {
        self.stream.dim()
    }

    pub fn batch_size(&self) -> usize {
        self.stream.batch_size
    }

    /// Rounds served so far.
    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// Advances to the next context, wrapping to the start after the last one.
    pub fn next_context(&mut self) -> &[f64] {
        let i = self.cursor;
        self.cursor = (self.cursor + 1) % self.stream.online.len();
        self.rounds += 1;
        self.current = Some(i);
        &self.stream.online[i].x
    }

    /// Feedback for `arm` on the current context.
    pub fn feedback(&self, arm: usize) -> Result<u8> {
        let i = self
            .current
            .ok_or_else(|| Error::Protocol("feedback requested before any context".into()))?;
        Ok(bandit_feedback(arm, self.stream.online[i].label))
    }
}
