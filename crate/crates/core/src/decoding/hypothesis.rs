use std::cmp::Ordering;

use crate::error::Result;
use crate::textdata::Vocabulary;

/// A scored target sequence, `BOS .. EOS`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub ids: Vec<usize>,
    /// Sum of token log-probabilities, EOS included.
    pub score: f64,
    /// `score` divided by the number of generated tokens (EOS included).
    pub normalized_score: f64,
    /// Portion of `score` contributed by teacher-forced prefix tokens.
    pub prefix_score: f64,
}

impl Hypothesis {
    pub(crate) fn new(ids: Vec<usize>, score: f64, prefix_score: f64) -> Self {
        let generated = ids.len().saturating_sub(1).max(1);
        Hypothesis {
            normalized_score: score / generated as f64,
            ids,
            score,
            prefix_score,
        }
    }

    /// Content tokens between BOS and EOS.
    pub fn content(&self) -> &[usize] {
        let end = self.ids.len().saturating_sub(1).max(1);
        &self.ids[1.min(end)..end]
    }

    pub fn text(&self, vocab: &Vocabulary) -> Result<String> {
        vocab.detokenize(&self.ids)
    }

    pub(crate) fn ranking_score(&self, length_norm: bool) -> f64 {
        if length_norm {
            self.normalized_score
        } else {
            self.score
        }
    }
}

/// Best first: higher score, then lexicographically lower ids, then shorter.
pub(crate) fn rank(a_score: f64, a_ids: &[usize], b_score: f64, b_ids: &[usize]) -> Ordering {
    b_score
        .total_cmp(&a_score)
        .then_with(|| a_ids.cmp(b_ids))
        .then_with(|| a_ids.len().cmp(&b_ids.len()))
}

/// The user's validated characters; the next hypothesis must start with them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Feedback {
    pub prefix_chars: String,
}

impl Feedback {
    pub fn new(prefix: impl Into<String>) -> Self {
        Feedback {
            prefix_chars: prefix.into(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.prefix_chars.is_empty()
    }
}

/// A prefix-constrained result rendered with the feedback kept verbatim.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainedHypothesis {
    pub hypothesis: Hypothesis,
    pub text: String,
    /// Number of teacher-forced tokens after BOS.
    pub forced_len: usize,
}
