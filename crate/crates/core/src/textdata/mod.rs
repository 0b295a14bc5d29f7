//! Vocabularies, tokenization, parallel corpora and the synthetic
//! old-spelling generator.

mod corpus;
mod rules;
mod vocab;

pub use corpus::{read_lines, write_lines, ParallelCorpus};
pub use rules::{gen_synthetic_corpus, AntiquationRules, Pattern, Rule, DEFAULT_RULES};
pub use vocab::{TokenMode, Vocabulary, BOS, EOS, PAD, UNK};

/// Default `min_freq` per token mode.
pub fn default_min_freq(mode: TokenMode) -> usize {
    match mode {
        TokenMode::Char => 1,
        TokenMode::Word => 2,
    }
}
