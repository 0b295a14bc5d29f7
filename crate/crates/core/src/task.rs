//! Task bindings: a checkpoint plus the search settings used to serve it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adaptation::{adapt, AdaptationConfig, AdaptationReport, Checkpoint};
use crate::decoding::{beam_search, prefix_constrained_search, segment_feedback, BeamConfig, Feedback};
use crate::error::{Error, Result};
use crate::seq2seq::{encode_corpus, init_model, train, EpochStats, ModelConfig, TrainConfig};
use crate::textdata::{default_min_freq, ParallelCorpus, TokenMode, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Modernize,
    Normalize,
}

impl TaskKind {
    pub const ALL: [TaskKind; 2] = [TaskKind::Modernize, TaskKind::Normalize];

    pub fn mode(self) -> TokenMode {
        match self {
            TaskKind::Modernize => TokenMode::Word,
            TaskKind::Normalize => TokenMode::Char,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Modernize => "modernize",
            TaskKind::Normalize => "normalize",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "modernize" => Ok(TaskKind::Modernize),
            "normalize" => Ok(TaskKind::Normalize),
            other => Err(Error::Config(format!("unknown task {other:?}"))),
        }
    }
}

/// A servable model: translation, prefix correction and adaptation.
#[derive(Clone, Debug)]
pub struct TaskModel {
    pub checkpoint: Checkpoint,
    pub beam_width: usize,
}

impl TaskModel {
    pub fn new(checkpoint: Checkpoint) -> Self {
        TaskModel {
            checkpoint,
            beam_width: BeamConfig::DEFAULT_WIDTH,
        }
    }

    /// Checks that the checkpoint's token mode matches `task`.
    pub fn for_task(checkpoint: Checkpoint, task: TaskKind) -> Result<Self> {
        let mode = checkpoint.model.config().mode;
        if mode != task.mode() {
            return Err(Error::Config(format!("task {task} needs a {} model, got {mode}", task.mode())));
        }
        Ok(Self::new(checkpoint))
    }

    fn source_ids(&self, source: &str) -> Result<Vec<usize>> {
        if source.trim().is_empty() {
            return Err(Error::Sample("empty source".into()));
        }
        Ok(self.checkpoint.src_vocab.tokenize(source))
    }

    fn beam_config(&self, source_tokens: usize) -> BeamConfig {
        BeamConfig {
            beam_width: self.beam_width,
            ..BeamConfig::for_source(source_tokens)
        }
    }

    /// Top beam hypothesis, rendered.
    pub fn translate(&self, source: &str) -> Result<String> {
        let src = self.source_ids(source)?;
        let hyps = beam_search(&self.checkpoint.model, &src, &self.beam_config(src.len()))?;
        hyps[0].text(&self.checkpoint.tgt_vocab)
    }

    /// Best hypothesis starting with `prefix`. The length limit is widened
    /// when the prefix alone would exceed it.
    pub fn correct(&self, source: &str, prefix: &str) -> Result<String> {
        let src = self.source_ids(source)?;
        let feedback = Feedback::new(prefix);
        let (forced, fragment) = segment_feedback(&feedback, &self.checkpoint.tgt_vocab);
        let needed = forced.len() + usize::from(!fragment.is_empty());
        let mut cfg = self.beam_config(src.len());
        cfg.max_len = cfg.max_len.max(needed + 5);
        let out = prefix_constrained_search(&self.checkpoint.model, &self.checkpoint.tgt_vocab, &src, &feedback, &cfg)?;
        Ok(out.text)
    }

    pub fn learn(&mut self, source: &str, target: &str, config: &AdaptationConfig) -> Result<AdaptationReport> {
        let ck = &mut self.checkpoint;
        adapt(&mut ck.model, &ck.src_vocab, &ck.tgt_vocab, source, target, config)
    }

    pub fn checksum(&self) -> u64 {
        self.checkpoint.checksum()
    }
}

/// Model dimensions and seed for [`train_checkpoint`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelShape {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub seed: u64,
}

impl Default for ModelShape {
    fn default() -> Self {
        ModelShape {
            embed_dim: ModelConfig::DEFAULT_EMBED,
            hidden_dim: ModelConfig::DEFAULT_HIDDEN,
            seed: 0,
        }
    }
}

/// Builds both vocabularies from `corpus`, initializes a model for `task`
/// and trains it.
pub fn train_checkpoint(
    corpus: &ParallelCorpus,
    task: TaskKind,
    shape: ModelShape,
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<Checkpoint> {
    if corpus.is_empty() {
        return Err(Error::Corpus("training corpus is empty".into()));
    }
    let mode = task.mode();
    let src_vocab = Vocabulary::build(corpus.sources(), mode, default_min_freq(mode));
    let tgt_vocab = Vocabulary::build(corpus.targets(), mode, default_min_freq(mode));
    let mut mc = ModelConfig::new(src_vocab.len(), tgt_vocab.len(), mode);
    mc.embed_dim = shape.embed_dim;
    mc.hidden_dim = shape.hidden_dim;
    mc.seed = shape.seed;
    let mut model = init_model(&mc)?;
    let data = encode_corpus(corpus, &src_vocab, &tgt_vocab);
    train(&mut model, &data, config, on_epoch)?;
    Checkpoint::new(model, src_vocab, tgt_vocab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn char_model() -> TaskModel {
        let sv = Vocabulary::build(["vna casa"], TokenMode::Char, 1);
        let tv = Vocabulary::build(["una casa"], TokenMode::Char, 1);
        let mut c = ModelConfig::new(sv.len(), tv.len(), TokenMode::Char);
        c.embed_dim = 6;
        c.hidden_dim = 8;
        TaskModel::new(Checkpoint::new(init_model(&c).unwrap(), sv, tv).unwrap())
    }

    #[test]
    fn task_names_roundtrip() {
        for t in TaskKind::ALL {
            assert_eq!(t.as_str().parse::<TaskKind>().unwrap(), t);
            assert_eq!(serde_json::to_string(&t).unwrap(), format!("\"{t}\""));
        }
        assert!("translate".parse::<TaskKind>().is_err());
    }

    #[test]
    fn mode_must_match_task() {
        let m = char_model();
        assert!(TaskModel::for_task(m.checkpoint.clone(), TaskKind::Normalize).is_ok());
        assert!(TaskModel::for_task(m.checkpoint, TaskKind::Modernize).is_err());
    }

    #[test]
    fn long_prefix_is_still_honored() {
        let m = char_model();
        let prefix = "una casa una casa una casa una casa";
        assert!(m.correct("v", prefix).unwrap().starts_with(prefix));
    }

    #[test]
    fn trains_a_usable_checkpoint() {
        let corpus = ParallelCorpus::new(vec![("dixo".into(), "dijo".into()), ("vno".into(), "uno".into())]);
        let shape = ModelShape { embed_dim: 6, hidden_dim: 8, seed: 2 };
        let cfg = TrainConfig { epochs: 2, ..Default::default() };
        let mut epochs = 0;
        let ck = train_checkpoint(&corpus, TaskKind::Normalize, shape, &cfg, |_| epochs += 1).unwrap();
        assert_eq!(epochs, 2);
        assert_eq!(ck.model.config().mode, TokenMode::Char);
        assert!(TaskModel::for_task(ck, TaskKind::Normalize).unwrap().translate("dixo").is_ok());
        let empty = ParallelCorpus::new(vec![]);
        assert!(train_checkpoint(&empty, TaskKind::Normalize, shape, &cfg, |_| {}).is_err());
    }

    #[test]
    fn empty_source_rejected() {
        assert!(matches!(char_model().translate(" "), Err(Error::Sample(_))));
    }
}
