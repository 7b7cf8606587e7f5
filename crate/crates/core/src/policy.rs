//! The agent-facing side of the decision loop.
//!
//! A policy sees a context, picks an arm, and is then told the reward of
//! that arm. Nothing else crosses this boundary; in particular no label.

use serde::{Deserialize, Serialize};

use crate::cts::CtsConfig;
use crate::error::Result;
use crate::scalar::Scalar;

pub trait Policy<T: Scalar> {
    fn step(&mut self, context: &[T]) -> Result<usize>;
    fn observe(&mut self, reward: T) -> Result<()>;

    /// Extra per-round fields for compression agents, valid after `observe`.
    fn last_compression(&self) -> Option<CompressionDetail<T>> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionDetail<T> {
    pub level: usize,
    pub c: f64,
    pub r_k: T,
    pub r_p: T,
}

/// Exploration parameters shared by every bandit an agent owns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BanditParams {
    pub r: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub scale_override: Option<f64>,
    pub refresh_every: usize,
}

impl Default for BanditParams {
    fn default() -> Self {
        Self {
            r: 0.5,
            epsilon: 0.5,
            gamma: 0.1,
            scale_override: None,
            refresh_every: 1000,
        }
    }
}

impl BanditParams {
    pub fn config<T: Scalar>(&self, arms: usize, dim: usize, seed: u64) -> CtsConfig<T> {
        CtsConfig {
            arms,
            dim,
            r: T::of(self.r),
            epsilon: T::of(self.epsilon),
            gamma: T::of(self.gamma),
            seed,
            scale_override: self.scale_override.map(T::of),
            refresh_every: self.refresh_every,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config::<f64>(1, 1, 0).validate()
    }

    pub fn greedy() -> Self {
        Self {
            scale_override: Some(0.0),
            ..Self::default()
        }
    }
}
