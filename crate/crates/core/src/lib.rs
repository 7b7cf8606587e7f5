//! Contextual Thompson Sampling with adaptive, context-dependent embeddings.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the bottom of this file fix the common `f64` instantiations.

pub mod agent;
pub mod clustering;
pub mod compression;
pub mod cts;
pub mod encoders;
pub mod env;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod persist;
pub mod policy;
pub mod scalar;
pub mod seed;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type CtsBandit = cts::CtsBandit<f64>;
pub type CtsBandit32 = cts::CtsBandit<f32>;
pub type CtsConfig = cts::CtsConfig<f64>;
pub type ClusterModel = clustering::ClusterModel<f64>;
pub type Autoencoder = encoders::Autoencoder<f64>;
pub type LinearEncoder = encoders::LinearEncoder<f64>;
pub type Encoder = encoders::Encoder<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type AbacodeAgent = agent::AbacodeAgent<f64>;
pub type CompressionAgent = compression::CompressionAgent<f64>;
