use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Sgd;
use crate::seq2seq::ModelParams;
use crate::textdata::Vocabulary;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptationConfig {
    pub steps: usize,
    pub learning_rate: f64,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        AdaptationConfig {
            steps: 3,
            learning_rate: 0.01,
        }
    }
}

/// Loss before each update step, followed by the loss after the last one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdaptationReport {
    pub losses: Vec<f64>,
}

impl AdaptationReport {
    pub fn steps(&self) -> usize {
        self.losses.len().saturating_sub(1)
    }

    pub fn initial_loss(&self) -> f64 {
        self.losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("report always has the initial loss")
    }
}

/// Runs `config.steps` SGD updates on one validated pair. Vocabularies are
/// fixed: unseen tokens map to UNK. On a non-finite loss the parameters are
/// restored and [`Error::Diverged`] is returned.
pub fn adapt(
    model: &mut ModelParams,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    source: &str,
    target: &str,
    config: &AdaptationConfig,
) -> Result<AdaptationReport> {
    if source.trim().is_empty() || target.trim().is_empty() {
        return Err(Error::Sample("source and target must be non-empty".into()));
    }
    let src = src_vocab.tokenize(source);
    let tgt = tgt_vocab.tokenize(target);
    let sgd = Sgd::new(config.learning_rate)?;

    let snapshot = model.params().clone();
    let mut losses = Vec::with_capacity(config.steps + 1);
    let outcome = (|| -> Result<()> {
        for step in 0..config.steps {
            let (loss, grads) = model.loss_and_gradients(&src, &tgt)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { step });
            }
            losses.push(loss);
            model.params_mut().accumulate(&grads);
            sgd.step(model.params_mut());
        }
        let last = model.sequence_nll(&src, &tgt)?;
        if !last.is_finite() {
            return Err(Error::Diverged { step: config.steps });
        }
        losses.push(last);
        Ok(())
    })();

    match outcome {
        Ok(()) => Ok(AdaptationReport { losses }),
        Err(e) => {
            *model.params_mut() = snapshot;
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoding::greedy_decode;
    use crate::seq2seq::{init_model, ModelConfig};
    use crate::textdata::TokenMode;

    fn setup(seed: u64) -> (ModelParams, Vocabulary, Vocabulary) {
        let sv = Vocabulary::build(["vna vida nueua", "dixo"], TokenMode::Char, 1);
        let tv = Vocabulary::build(["una vida nueva", "dijo"], TokenMode::Char, 1);
        let mut c = ModelConfig::new(sv.len(), tv.len(), TokenMode::Char);
        c.embed_dim = 8;
        c.hidden_dim = 12;
        c.seed = seed;
        (init_model(&c).unwrap(), sv, tv)
    }

    #[test]
    fn zero_steps_is_a_bit_exact_no_op() {
        let (mut m, sv, tv) = setup(0);
        let before = m.clone();
        let cfg = AdaptationConfig { steps: 0, ..Default::default() };
        let r = adapt(&mut m, &sv, &tv, "vna", "una", &cfg).unwrap();
        assert_eq!(r.losses.len(), 1);
        assert_eq!(r.steps(), 0);
        assert!(m.params().values_equal_bitwise(before.params()));
    }

    #[test]
    fn one_small_step_lowers_the_loss() {
        for seed in 0..20 {
            let (mut m, sv, tv) = setup(seed);
            let cfg = AdaptationConfig { steps: 1, learning_rate: 0.01 };
            let r = adapt(&mut m, &sv, &tv, "vna vida", "una vida", &cfg).unwrap();
            assert_eq!(r.losses.len(), 2);
            assert!(r.final_loss() < r.initial_loss(), "seed {seed}: {:?}", r.losses);
        }
    }

    #[test]
    fn repeated_adaptation_overfits_one_pair() {
        let (mut m, sv, tv) = setup(3);
        let cfg = AdaptationConfig { steps: 3, learning_rate: 0.5 };
        for _ in 0..25 {
            adapt(&mut m, &sv, &tv, "dixo", "dijo", &cfg).unwrap();
        }
        let src = sv.tokenize("dixo");
        let out = greedy_decode(&m, &src, 10).unwrap();
        assert_eq!(out.text(&tv).unwrap(), "dijo");
    }

    #[test]
    fn divergence_restores_parameters() {
        let (mut m, sv, tv) = setup(1);
        let before = m.clone();
        let cfg = AdaptationConfig { steps: 3, learning_rate: 1e300 };
        let e = adapt(&mut m, &sv, &tv, "vna vida", "una vida", &cfg).unwrap_err();
        assert!(matches!(e, Error::Diverged { .. }), "{e}");
        assert!(m.params().values_equal_bitwise(before.params()));
    }

    #[test]
    fn empty_sample_rejected() {
        let (mut m, sv, tv) = setup(0);
        let e = adapt(&mut m, &sv, &tv, "  ", "una", &AdaptationConfig::default()).unwrap_err();
        assert!(matches!(e, Error::Sample(_)));
    }

    #[test]
    fn unknown_characters_do_not_grow_vocabularies() {
        let (mut m, sv, tv) = setup(0);
        let shape = m.params().iter().next().unwrap().value.shape().to_vec();
        adapt(&mut m, &sv, &tv, "ωψ", "ξ", &AdaptationConfig::default()).unwrap();
        assert_eq!(m.params().iter().next().unwrap().value.shape(), shape.as_slice());
    }
}
