//! Interactive, adaptive neural translation for historical text.
//!
//! The crate covers the whole engine: tensors with reverse-mode
//! differentiation, tokenization and synthetic corpora, an attention
//! encoder–decoder, free and prefix-constrained search, online adaptation
//! with checkpoints, the JSON/HTTP service, and a simulated-user benchmark.

pub mod adaptation;
pub mod decoding;
pub mod error;
pub mod numerics;
pub mod seq2seq;
pub mod server;
pub mod simulator;
pub mod task;
pub mod textdata;

pub use error::{Error, Result};
