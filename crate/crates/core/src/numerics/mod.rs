//! Dense tensors, a reverse-mode tape, AdamW, and checkpoint I/O.

pub mod adamw;
pub mod checkpoint;
pub mod gradcheck;
pub mod params;
pub mod tape;
pub mod tensor;

pub use adamw::{AdamW, AdamWConfig};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use params::ParamStore;
pub use tape::{Gradients, Tape, Var};
pub use tensor::{Scalar, Tensor};
