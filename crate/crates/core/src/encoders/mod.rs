//! Context-representation functions.

mod autoencoder;
mod linear;

pub use autoencoder::{
    train_autoencoder, update_autoencoder, Autoencoder, AutoencoderParams, MinMax, TrainReport,
};
pub use linear::{fit_linear_encoder, LinearEncoder, LinearFit};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// SGD schedule for autoencoders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub minibatch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            learning_rate: 0.5,
            minibatch_size: 16,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("train.epochs", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config(
                "train.learning_rate",
                "must be positive and finite",
            ));
        }
        if self.minibatch_size == 0 {
            return Err(Error::config("train.minibatch_size", "must be at least 1"));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Width of the representation kept at compression level `c`: `max(1, round(c·D))`.
pub fn compressed_width(level: f64, input_dim: usize) -> usize {
    ((level * input_dim as f64).round() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Linear,
    Autoencoder,
}

/// Either encoder family behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoder<T> {
    Autoencoder(Autoencoder<T>),
    Linear(LinearEncoder<T>),
}

impl<T: Scalar> Encoder<T> {
    pub fn kind(&self) -> EncoderKind {
        match self {
            Encoder::Autoencoder(_) => EncoderKind::Autoencoder,
            Encoder::Linear(_) => EncoderKind::Linear,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Encoder::Autoencoder(m) => m.input_dim(),
            Encoder::Linear(m) => m.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Encoder::Autoencoder(m) => m.hidden(),
            Encoder::Linear(m) => m.output_dim(),
        }
    }

    pub fn encode(&self, x: &[T]) -> Result<Vec<T>> {
        match self {
            Encoder::Autoencoder(m) => m.encode(x),
            Encoder::Linear(m) => m.encode(x),
        }
    }

    pub fn reconstruct(&self, x: &[T]) -> Result<Vec<T>> {
        match self {
            Encoder::Autoencoder(m) => m.reconstruct(x),
            Encoder::Linear(m) => m.reconstruct(x),
        }
    }
}

impl<T> From<Autoencoder<T>> for Encoder<T> {
    fn from(m: Autoencoder<T>) -> Self {
        Encoder::Autoencoder(m)
    }
}

impl<T> From<LinearEncoder<T>> for Encoder<T> {
    fn from(m: LinearEncoder<T>) -> Self {
        Encoder::Linear(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_law() {
        assert_eq!(compressed_width(0.25, 32), 8);
        assert_eq!(compressed_width(1.0, 93), 93);
        assert_eq!(compressed_width(0.01, 10), 1);
        assert_eq!(compressed_width(0.5, 5), 3);
    }

    #[test]
    fn train_config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
