use crate::adaptation::AdaptationConfig;
use crate::error::Result;
use crate::task::TaskModel;

/// What the simulated user talks to.
pub trait InteractiveEngine {
    /// First hypothesis for `source`.
    fn translate(&mut self, source: &str) -> Result<String>;
    /// New hypothesis for `source` that starts with `prefix`.
    fn correct(&mut self, source: &str, prefix: &str) -> Result<String>;
    /// Accepts `target` as the translation of `source`, learning from the
    /// pair iff `learn`.
    fn validate(&mut self, source: &str, target: &str, learn: bool) -> Result<()>;
}

/// Drives a [`TaskModel`] in process.
#[derive(Clone, Debug)]
pub struct LocalEngine {
    pub model: TaskModel,
    pub adaptation: AdaptationConfig,
}

impl LocalEngine {
    pub fn new(model: TaskModel, adaptation: AdaptationConfig) -> Self {
        LocalEngine { model, adaptation }
    }
}

impl InteractiveEngine for LocalEngine {
    fn translate(&mut self, source: &str) -> Result<String> {
        self.model.translate(source)
    }

    fn correct(&mut self, source: &str, prefix: &str) -> Result<String> {
        self.model.correct(source, prefix)
    }

    fn validate(&mut self, source: &str, target: &str, learn: bool) -> Result<()> {
        if learn {
            self.model.learn(source, target, &self.adaptation)?;
        }
        Ok(())
    }
}
