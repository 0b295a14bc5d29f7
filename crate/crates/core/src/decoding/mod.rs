//! Search over the model's output distribution: greedy, beam, and
//! prefix-constrained beam search for interactive correction.

mod constrained;
mod hypothesis;
mod search;

pub use constrained::{compatible_tokens, constrained_next_distribution, prefix_constrained_search, segment_feedback};
pub use hypothesis::{ConstrainedHypothesis, Feedback, Hypothesis};
pub use search::{beam_search, default_max_len, greedy_decode, BeamConfig};
