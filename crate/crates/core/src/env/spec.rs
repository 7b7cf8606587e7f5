//! Declarative stream descriptions and their construction.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::layers::{
    apply_cluster_drift, apply_negative_inputs, apply_shuffled_labels, mix_domains, ramp_schedule,
    validate_schedule, NegativeMode,
};
use super::load::{load_csv, load_idx, LabelColumn};
use super::synth::{GaussianMixture, MixtureSpec};
use super::{scale_stream, FeatureScaler, LabeledExample, Stream};
use crate::clustering::kmeans_fit;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from, STREAM_DATA, STREAM_LAYER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    Csv {
        path: PathBuf,
        label_column: LabelColumn,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
    Gaussian(MixtureSpec),
}

/// Per-batch cluster weights: an explicit list, or a linear ramp between two vectors.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    #[serde(default)]
    pub schedule: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub ramp_from: Option<Vec<f64>>,
    #[serde(default)]
    pub ramp_to: Option<Vec<f64>>,
    /// Clusters used to partition non-synthetic data; defaults to the run's `k`.
    #[serde(default)]
    pub clusters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    ClusterDrift(DriftSpec),
    NegativeInputs {
        mode: NegativeMode,
    },
    ShuffledLabels,
    MultiTask {
        source: SourceSpec,
        target_dim: usize,
    },
}

fn default_batch_size() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    pub source: SourceSpec,
    pub pretrain_count: usize,
    pub online_count: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Fixes the data across run seeds when set.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub layers: Vec<LayerSpec>,
}

impl StreamSpec {
    pub fn validate(&self) -> Result<()> {
        if self.online_count == 0 {
            return Err(Error::config("stream.online_count", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("stream.batch_size", "must be at least 1"));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                LayerSpec::ClusterDrift(d) => {
                    let ok = match (&d.schedule, &d.ramp_from, &d.ramp_to) {
                        (Some(_), None, None) => true,
                        (None, Some(_), Some(_)) => true,
                        _ => false,
                    };
                    if !ok {
                        return Err(Error::config(
                            format!("stream.layers[{i}]"),
                            "give either `schedule` or both `ramp_from` and `ramp_to`",
                        ));
                    }
                }
                LayerSpec::MultiTask { target_dim: 0, .. } => {
                    return Err(Error::config(
                        format!("stream.layers[{i}].target_dim"),
                        "must be at least 1",
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

struct Base {
    stream: Stream,
    mixture: Option<GaussianMixture>,
    scaler: FeatureScaler,
}

fn build_base(spec: &StreamSpec, source: &SourceSpec, seed: u64) -> Result<Base> {
    let mut rng = rng_from(seed);
    let (mut stream, mixture) = match source {
        SourceSpec::Gaussian(m) => {
            let mix = GaussianMixture::from_spec(m, &mut rng)?;
            let pretrain = mix
                .draw(&mix.weights, spec.pretrain_count, &mut rng)?
                .into_iter()
                .map(|(_, e)| e.x)
                .collect();
            let (components, online) = mix
                .draw(&mix.weights, spec.online_count, &mut rng)?
                .into_iter()
                .unzip();
            let classes = mix.classes();
            let stream = Stream {
                pretrain,
                online,
                classes,
                batch_size: spec.batch_size,
                components: Some(components),
            };
            (stream, Some(mix))
        }
        SourceSpec::Csv { path, label_column } => {
            (split(load_csv(path, label_column)?, spec, &mut rng)?, None)
        }
        SourceSpec::Idx { images, labels } => {
            (split(load_idx(images, labels)?, spec, &mut rng)?, None)
        }
    };
    let scaler = scale_stream(&mut stream)?;
    Ok(Base {
        stream,
        mixture,
        scaler,
    })
}

fn split(
    ds: super::Dataset,
    spec: &StreamSpec,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Stream> {
    let mut examples = ds.examples;
    examples.shuffle(rng);
    if examples.len() <= spec.pretrain_count {
        return Err(Error::Input(format!(
            "dataset has {} examples, none left after {} pre-training contexts",
            examples.len(),
            spec.pretrain_count
        )));
    }
    let online: Vec<LabeledExample> = examples
        .split_off(spec.pretrain_count)
        .into_iter()
        .take(spec.online_count)
        .collect();
    Ok(Stream {
        pretrain: examples.into_iter().map(|e| e.x).collect(),
        online,
        classes: ds.classes,
        batch_size: spec.batch_size,
        components: None,
    })
}

/// Builds the scaled stream for one run. `default_clusters` partitions
/// non-synthetic data for drift layers that do not name a cluster count.
pub fn build_stream(spec: &StreamSpec, run_seed: u64, default_clusters: usize) -> Result<Stream> {
    spec.validate()?;
    let data_seed = spec
        .seed
        .unwrap_or_else(|| derive_seed(run_seed, STREAM_DATA));
    let Base {
        mut stream,
        mixture,
        scaler,
    } = build_base(spec, &spec.source, data_seed)?;
    let layer_root = derive_seed(data_seed, STREAM_LAYER);
    for (i, layer) in spec.layers.iter().enumerate() {
        let seed = derive_seed(layer_root, i as u64);
        match layer {
            LayerSpec::ClusterDrift(d) => {
                let batches = stream.batch_count();
                let n = stream.online.len();
                match &mixture {
                    Some(mix) if i == 0 => {
                        let schedule = resolve_schedule(d, batches, mix.means.len())?;
                        let mut rng = rng_from(seed);
                        let mut online = Vec::with_capacity(n);
                        let mut components = Vec::with_capacity(n);
                        for (b, w) in schedule.iter().enumerate() {
                            let count = stream.batch_size.min(n - b * stream.batch_size);
                            for (j, mut e) in mix.draw(w, count, &mut rng)? {
                                scaler.apply(&mut e.x);
                                online.push(e);
                                components.push(j);
                            }
                        }
                        stream.online = online;
                        stream.components = Some(components);
                    }
                    _ => {
                        let k = d.clusters.unwrap_or(default_clusters);
                        if stream.pretrain.len() < k || k == 0 {
                            return Err(Error::Input(format!(
                                "cannot form {k} drift clusters from {} pre-training contexts",
                                stream.pretrain.len()
                            )));
                        }
                        let schedule = resolve_schedule(d, batches, k)?;
                        let model = kmeans_fit(&stream.pretrain, k, seed)?;
                        let mut pools = vec![Vec::new(); k];
                        for e in &stream.online {
                            pools[model.assign(&e.x)?].push(e.clone());
                        }
                        let (online, components) =
                            apply_cluster_drift(&pools, &schedule, n, stream.batch_size, seed)?;
                        stream.online = online;
                        stream.components = Some(components);
                    }
                }
            }
            LayerSpec::NegativeInputs { mode } => {
                apply_negative_inputs(&mut stream.online, stream.batch_size, *mode, seed)?;
            }
            LayerSpec::ShuffledLabels => {
                apply_shuffled_labels(&mut stream.online, stream.batch_size, stream.classes, seed);
            }
            LayerSpec::MultiTask { source, target_dim } => {
                let other = build_base(spec, source, derive_seed(seed, 1))?.stream;
                stream = mix_domains(&stream, &other, *target_dim, seed)?;
            }
        }
    }
    stream.validate()?;
    Ok(stream)
}

fn resolve_schedule(d: &DriftSpec, batches: usize, clusters: usize) -> Result<Vec<Vec<f64>>> {
    let schedule = match (&d.schedule, &d.ramp_from, &d.ramp_to) {
        (Some(s), _, _) => s.clone(),
        (None, Some(from), Some(to)) => ramp_schedule(from, to, batches)?,
        _ => return Err(Error::config("drift", "missing schedule")),
    };
    validate_schedule(&schedule, batches, clusters)?;
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(layers: Vec<LayerSpec>) -> StreamSpec {
        StreamSpec {
            source: SourceSpec::Gaussian(MixtureSpec::new(3, 4, 0.05)),
            pretrain_count: 60,
            online_count: 300,
            batch_size: 100,
            seed: None,
            layers,
        }
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            pretrain_count = 10
            online_count = 20
            [source]
            kind = "gaussian"
            components = 2
            dim = 3
            std = 0.1
            [[layers]]
            kind = "negative_inputs"
            mode = "rand"
            [[layers]]
            kind = "shuffled_labels"
            [[layers]]
            kind = "cluster_drift"
            ramp_from = [1.0, 0.0]
            ramp_to = [0.0, 1.0]
        "#;
        let spec: StreamSpec = toml::from_str(text).unwrap();
        assert_eq!(spec.batch_size, 1000);
        assert_eq!(spec.layers.len(), 3);
        assert_eq!(spec.layers[1], LayerSpec::ShuffledLabels);
        let again: StreamSpec = toml::from_str(&toml::to_string(&spec).unwrap()).unwrap();
        assert_eq!(again, spec);
    }

    #[test]
    fn scaled_and_deterministic() {
        let spec = gaussian(vec![LayerSpec::ShuffledLabels]);
        let a = build_stream(&spec, 5, 3).unwrap();
        assert_eq!(a, build_stream(&spec, 5, 3).unwrap());
        assert_ne!(a, build_stream(&spec, 6, 3).unwrap());
        assert!(a
            .online
            .iter()
            .flat_map(|e| &e.x)
            .chain(a.pretrain.iter().flatten())
            .all(|v| (0.0..=1.0).contains(v)));
        let mut pinned = spec.clone();
        pinned.seed = Some(1);
        assert_eq!(
            build_stream(&pinned, 5, 3).unwrap(),
            build_stream(&pinned, 6, 3).unwrap()
        );
    }

    #[test]
    fn synthetic_drift_draws_from_scheduled_components() {
        let spec = gaussian(vec![LayerSpec::ClusterDrift(DriftSpec {
            schedule: Some(vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ]),
            ..DriftSpec::default()
        })]);
        let s = build_stream(&spec, 1, 3).unwrap();
        let comps = s.components.unwrap();
        for b in 0..3 {
            assert!(comps[b * 100..(b + 1) * 100].iter().all(|&c| c == b));
            assert!(s.online[b * 100..(b + 1) * 100]
                .iter()
                .all(|e| e.label == b));
        }
        let mut short = spec.clone();
        short.online_count = 400;
        assert!(matches!(
            build_stream(&short, 1, 3),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn file_drift_clusters_pretrain_data() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let mut text = String::new();
        for i in 0..400 {
            let c = i % 2;
            let v = if c == 0 { 0.1 } else { 0.9 } + (i % 7) as f64 * 0.001;
            text.push_str(&format!("{v},{v},{c}\n"));
        }
        std::fs::write(&path, text).unwrap();
        let spec = StreamSpec {
            source: SourceSpec::Csv {
                path,
                label_column: LabelColumn::Index(2),
            },
            pretrain_count: 100,
            online_count: 200,
            batch_size: 100,
            seed: None,
            layers: vec![LayerSpec::ClusterDrift(DriftSpec {
                schedule: Some(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
                ..DriftSpec::default()
            })],
        };
        let s = build_stream(&spec, 3, 2).unwrap();
        assert_eq!(s.online.len(), 200);
        let first = s.online[0].label;
        assert!(s.online[..100].iter().all(|e| e.label == first));
        assert!(s.online[100..].iter().all(|e| e.label != first));
    }

    #[test]
    fn multitask_extends_classes() {
        let spec = gaussian(vec![LayerSpec::MultiTask {
            source: SourceSpec::Gaussian(MixtureSpec::new(2, 7, 0.05)),
            target_dim: 5,
        }]);
        let s = build_stream(&spec, 2, 3).unwrap();
        assert_eq!(s.classes, 5);
        assert_eq!(s.dim(), 5);
        assert_eq!(s.online.len(), 600);
    }

    #[test]
    fn bad_layer_specs() {
        let spec = gaussian(vec![LayerSpec::ClusterDrift(DriftSpec::default())]);
        assert!(spec.validate().is_err());
        let spec = gaussian(vec![LayerSpec::MultiTask {
            source: SourceSpec::Gaussian(MixtureSpec::new(2, 7, 0.05)),
            target_dim: 0,
        }]);
        assert!(spec.validate().is_err());
    }
}
