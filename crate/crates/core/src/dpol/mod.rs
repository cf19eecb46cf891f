//! Observation-conditioned DDPM policy over the encoded hybrid action,
//! trained on a mix of simulated and real demonstrations.

mod codec;
mod cotrain;
mod model;
mod schedule;

pub use codec::{decode_action, encode_action, ACTION_DIM};
pub use cotrain::{cotrain, CoTrainConfig, CoTrainReport, DiffusionPolicy, LossRecord, Preset, SourceSampler};
pub use model::{
    diffusion_loss, diffusion_loss_with, reverse_step, sample_action, sample_codes, time_embedding, EpsNet, LossOutput, EMBED_DIM,
};
pub use schedule::{diffuse_with, forward_diffuse, reverse_mean, NoiseSchedule};
