//! Isotropic Gaussian-mixture streams.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{LabeledExample, Stream};
use crate::error::{Error, Result};
use crate::seed::rng_from;

/// Mixture description as written in configs. Missing means are drawn
/// uniformly from the unit cube; missing weights are uniform; missing labels
/// give component `j` class `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub components: usize,
    pub dim: usize,
    pub std: f64,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub means: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub labels: Option<Vec<usize>>,
}

impl MixtureSpec {
    pub fn new(components: usize, dim: usize, std: f64) -> Self {
        Self {
            components,
            dim,
            std,
            weights: None,
            means: None,
            labels: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub means: Vec<Vec<f64>>,
    pub std: f64,
    pub weights: Vec<f64>,
    pub labels: Vec<usize>,
}

impl GaussianMixture {
    /// Resolves a spec, drawing any missing means from `rng`.
    pub fn from_spec<R: Rng + ?Sized>(spec: &MixtureSpec, rng: &mut R) -> Result<Self> {
        let k = spec.components;
        if k == 0 {
            return Err(Error::config("source.components", "must be at least 1"));
        }
        if spec.dim == 0 {
            return Err(Error::config("source.dim", "must be at least 1"));
        }
        if !(spec.std >= 0.0) || !spec.std.is_finite() {
            return Err(Error::config(
                "source.std",
                "must be finite and non-negative",
            ));
        }
        let means = match &spec.means {
            Some(m) => {
                if m.len() != k || m.iter().any(|v| v.len() != spec.dim) {
                    return Err(Error::config(
                        "source.means",
                        format!("need {k} means of width {}", spec.dim),
                    ));
                }
                m.clone()
            }
            None => (0..k)
                .map(|_| (0..spec.dim).map(|_| rng.random::<f64>()).collect())
                .collect(),
        };
        let weights = match &spec.weights {
            Some(w) => {
                if w.len() != k {
                    return Err(Error::config("source.weights", format!("need {k} weights")));
                }
                check_probabilities(w).map_err(|msg| Error::config("source.weights", msg))?;
                w.clone()
            }
            None => vec![1.0 / k as f64; k],
        };
        let labels = match &spec.labels {
            Some(l) if l.len() != k => {
                return Err(Error::config("source.labels", format!("need {k} labels")));
            }
            Some(l) => l.clone(),
            None => (0..k).collect(),
        };
        Ok(Self {
            means,
            std: spec.std,
            weights,
            labels,
        })
    }

    pub fn classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn sample_from<R: Rng + ?Sized>(&self, component: usize, rng: &mut R) -> Vec<f64> {
        self.means[component]
            .iter()
            .map(|&m| {
                if self.std == 0.0 {
                    m
                } else {
                    m + self.std * rng.sample::<f64, _>(StandardNormal)
                }
            })
            .collect()
    }

    /// Draws `n` examples with component probabilities `weights`.
    pub fn draw<R: Rng + ?Sized>(
        &self,
        weights: &[f64],
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<(usize, LabeledExample)>> {
        let picker = WeightedIndex::new(weights)
            .map_err(|e| Error::Input(format!("bad component weights: {e}")))?;
        Ok((0..n)
            .map(|_| {
                let j = picker.sample(rng);
                let x = self.sample_from(j, rng);
                (j, LabeledExample::new(x, self.labels[j]))
            })
            .collect())
    }
}

pub(super) fn check_probabilities(w: &[f64]) -> std::result::Result<(), String> {
    if w.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err("probabilities must be finite and non-negative".into());
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(format!("probabilities sum to {total}, not 1"));
    }
    Ok(())
}

/// Samples a mixture stream; pre-training labels are dropped.
pub fn synth_gaussian_mixture(
    spec: &MixtureSpec,
    pretrain_count: usize,
    online_count: usize,
    batch_size: usize,
    seed: u64,
) -> Result<Stream> {
    let mut rng = rng_from(seed);
    let mix = GaussianMixture::from_spec(spec, &mut rng)?;
    let pretrain = mix
        .draw(&mix.weights, pretrain_count, &mut rng)?
        .into_iter()
        .map(|(_, e)| e.x)
        .collect();
    let (components, online) = mix
        .draw(&mix.weights, online_count, &mut rng)?
        .into_iter()
        .unzip();
    Ok(Stream {
        pretrain,
        online,
        classes: mix.classes(),
        batch_size,
        components: Some(components),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_std_returns_means() {
        let mut spec = MixtureSpec::new(2, 3, 0.0);
        spec.means = Some(vec![vec![0.1, 0.2, 0.3], vec![0.9, 0.8, 0.7]]);
        let s = synth_gaussian_mixture(&spec, 5, 50, 10, 1).unwrap();
        for (e, &c) in s.online.iter().zip(s.components.as_ref().unwrap()) {
            assert_eq!(&e.x, &spec.means.as_ref().unwrap()[c]);
            assert_eq!(e.label, c);
        }
        assert_eq!(s.pretrain.len(), 5);
    }

    #[test]
    fn component_frequencies_follow_weights() {
        let mut spec = MixtureSpec::new(3, 2, 0.1);
        spec.weights = Some(vec![0.2, 0.5, 0.3]);
        let s = synth_gaussian_mixture(&spec, 0, 100_000, 1000, 2).unwrap();
        let mut counts = [0usize; 3];
        for &c in s.components.as_ref().unwrap() {
            counts[c] += 1;
        }
        for (c, w) in counts.iter().zip([0.2, 0.5, 0.3]) {
            assert!((*c as f64 / 100_000.0 - w).abs() < 0.01);
        }
    }

    #[test]
    fn seeded_and_validated() {
        let spec = MixtureSpec::new(4, 5, 0.2);
        let a = synth_gaussian_mixture(&spec, 10, 20, 5, 3).unwrap();
        assert_eq!(a, synth_gaussian_mixture(&spec, 10, 20, 5, 3).unwrap());
        assert_ne!(a, synth_gaussian_mixture(&spec, 10, 20, 5, 4).unwrap());
        let mut bad = spec.clone();
        bad.weights = Some(vec![0.5, 0.5, 0.5, -0.5]);
        assert!(synth_gaussian_mixture(&bad, 1, 1, 1, 0).is_err());
        assert!(synth_gaussian_mixture(&MixtureSpec::new(0, 5, 0.1), 1, 1, 1, 0).is_err());
    }

    #[test]
    fn shared_labels_collapse_classes() {
        let mut spec = MixtureSpec::new(4, 2, 0.1);
        spec.labels = Some(vec![0, 1, 0, 1]);
        let s = synth_gaussian_mixture(&spec, 0, 10, 5, 0).unwrap();
        assert_eq!(s.classes, 2);
    }
}
