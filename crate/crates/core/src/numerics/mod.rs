//! Dense tensors, a reverse-mode op record, and SGD.

mod optim;
mod param;
mod record;
mod tensor;

pub use optim::{sgd_step, Sgd, DEFAULT_CLIP_NORM};
pub use param::{ParamId, ParamSet, Parameter};
pub use record::{ComputationRecord, Gradients, Var};
pub use tensor::{cross_entropy, matmul, softmax, Tensor};

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// The seeded generator used for every random draw in the crate.
pub type Rng = Xoshiro256PlusPlus;

pub fn seeded_rng(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub(crate) use tensor::log_softmax_slice;
