use rand::seq::SliceRandom;

use super::model::ModelParams;
use crate::error::{Error, Result};
use crate::numerics::{seeded_rng, Sgd};
use crate::textdata::{ParallelCorpus, Vocabulary};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Pairs per update; gradients are summed over the batch.
    pub batch_size: usize,
    /// Seed for the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            learning_rate: 0.1,
            batch_size: 1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub pairs: usize,
}

/// Tokenized `(source, target)` id sequences.
pub fn encode_corpus(corpus: &ParallelCorpus, src: &Vocabulary, tgt: &Vocabulary) -> Vec<(Vec<usize>, Vec<usize>)> {
    corpus
        .pairs()
        .iter()
        .map(|(s, t)| (src.tokenize(s), tgt.tokenize(t)))
        .collect()
}

/// Shuffled minibatch SGD over `data` for `config.epochs` epochs.
pub fn train(
    model: &mut ModelParams,
    data: &[(Vec<usize>, Vec<usize>)],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<Vec<EpochStats>> {
    if config.batch_size == 0 || config.batch_size > 32 {
        return Err(Error::Config(format!("batch size must be in 1..=32, got {}", config.batch_size)));
    }
    let sgd = Sgd::new(config.learning_rate)?;
    let mut rng = seeded_rng(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            for &i in batch {
                let (src, tgt) = &data[i];
                let (loss, grads) = model.loss_and_gradients(src, tgt)?;
                if !loss.is_finite() {
                    return Err(Error::Diverged { step: epoch });
                }
                total += loss;
                model.params_mut().accumulate(&grads);
            }
            sgd.step(model.params_mut());
        }
        let stats = EpochStats {
            epoch: epoch + 1,
            mean_loss: if data.is_empty() { 0.0 } else { total / data.len() as f64 },
            pairs: data.len(),
        };
        on_epoch(&stats);
        history.push(stats);
    }
    Ok(history)
}
