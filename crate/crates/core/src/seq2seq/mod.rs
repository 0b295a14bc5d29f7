//! Attention encoder–decoder over token ids.
//!
//! A bidirectional GRU encodes the source into per-position annotations.
//! The decoder is a GRU whose input at each step is the previous target
//! embedding concatenated with an additive-attention context vector; its
//! new state is projected to target-vocabulary logits.

mod config;
mod model;
mod train;

pub use config::{ModelConfig, MAX_SOURCE_TOKENS};
pub use model::{
    init_model, parameter_manifest, Annotations, DecoderState, ModelParams, StepOutput, INIT_SCALE,
};
pub use train::{encode_corpus, train, EpochStats, TrainConfig};
