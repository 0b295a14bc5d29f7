use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textdata::TokenMode;

/// Sources longer than this many tokens (BOS/EOS included) are rejected.
pub const MAX_SOURCE_TOKENS: usize = 512;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size_src: usize,
    pub vocab_size_tgt: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub mode: TokenMode,
    pub seed: u64,
}

impl ModelConfig {
    pub const DEFAULT_EMBED: usize = 64;
    pub const DEFAULT_HIDDEN: usize = 128;

    pub fn new(vocab_size_src: usize, vocab_size_tgt: usize, mode: TokenMode) -> Self {
        ModelConfig {
            vocab_size_src,
            vocab_size_tgt,
            embed_dim: Self::DEFAULT_EMBED,
            hidden_dim: Self::DEFAULT_HIDDEN,
            mode,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size_src", self.vocab_size_src),
            ("vocab_size_tgt", self.vocab_size_tgt),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        // BOS and EOS must be valid ids on both sides.
        if self.vocab_size_src < 3 || self.vocab_size_tgt < 3 {
            return Err(Error::Config("vocabularies need at least 3 ids (PAD, BOS, EOS)".into()));
        }
        Ok(())
    }

    /// Width of the attention hidden layer.
    pub fn attention_dim(&self) -> usize {
        self.hidden_dim
    }
}
