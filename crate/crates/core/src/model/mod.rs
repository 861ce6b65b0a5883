//! The multi-task network and its persistence.

mod checkpoint;
mod config;
mod encoder;
mod layers;
mod net;
mod task;

pub use checkpoint::{
    decode_f32_le, encode_f32_le, load_checkpoint, save_checkpoint, CheckpointManifest, MANIFEST,
};
pub use config::{ModelConfig, TaskSelection, Variant};
pub use encoder::{Encoder, StandInCache, StandInEncoder, STAGE_STRIDES};
pub use layers::{AttentionModule, ConvBnRelu, ConvBnReluCache, HeadCache, SegmentationHead};
pub use net::{
    attention_mask, co_interactive_fuse, decode, encode, param_group, relearn, AecifNet, Branch,
    ForwardCache, ForwardOutput, Intermediates, PredictionScores,
};
pub use task::*;
