//! Fixtures shared by the benchmarks.

use mthd_core::adaptation::Checkpoint;
use mthd_core::seq2seq::{init_model, ModelConfig};
use mthd_core::textdata::{TokenMode, Vocabulary};

pub const SOURCES: [&str; 3] = ["vna casa vieja en la villa", "dixo el rey a su hijo", "mui bueno es el vino"];
pub const TARGETS: [&str; 3] = ["una casa vieja en la villa", "dijo el rey a su hijo", "muy bueno es el vino"];

/// An untrained char-mode checkpoint of the given size.
pub fn char_checkpoint(embed_dim: usize, hidden_dim: usize) -> Checkpoint {
    let sv = Vocabulary::build(SOURCES, TokenMode::Char, 1);
    let tv = Vocabulary::build(TARGETS, TokenMode::Char, 1);
    let mut c = ModelConfig::new(sv.len(), tv.len(), TokenMode::Char);
    c.embed_dim = embed_dim;
    c.hidden_dim = hidden_dim;
    c.seed = 1;
    Checkpoint::new(init_model(&c).expect("valid config"), sv, tv).expect("matching vocabularies")
}
