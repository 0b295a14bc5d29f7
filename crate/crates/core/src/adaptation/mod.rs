//! Online learning from validated samples, checkpoints, and the
//! validated-sample log.

mod adapt;
mod checkpoint;
mod log;

pub use adapt::{adapt, AdaptationConfig, AdaptationReport};
pub use checkpoint::{fnv1a64, load_checkpoint, save_checkpoint, Checkpoint, FORMAT_VERSION, MAGIC};
pub use log::{append_validated, read_log, replay, ValidatedSample};
