//! Spatio-temporal demand prediction with a VAE-GAN hybrid.
//!
//! The pipeline turns trip records (or a synthetic process) into gridded
//! demand maps, trains an encoder / generator / discriminator trio built
//! from ConvLSTM and 3-D convolution stacks, and evaluates one-step and
//! rollout forecasts against classical baselines.

pub mod error;
pub mod evaluate;
pub mod ingest;
pub mod model;
pub mod objectives;
pub mod provenance;
pub mod stmap;
pub mod synth;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
