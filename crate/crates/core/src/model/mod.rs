//! The D-GAN network: encoders, decoder (generator), discriminator, the
//! per-batch loss graph and checkpoint persistence.

mod arch;
mod checkpoint;
mod network;
mod step;

pub use arch::{factor_tensor, history_tensor, ArchSpec, FactorScaler, FactorSelection};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, FORMAT_VERSION,
};
pub use network::{
    fuse, is_discriminator_param, is_generator_param, sample_prior, Dgan, LatentCode, DECODER,
    DISCRIMINATOR, ENCODER, FACTOR_ENCODER,
};
pub use step::{BatchInputs, BatchNoise, DiscriminatorVars, GeneratorVars, LossConfig, LossVars, Pairs};
