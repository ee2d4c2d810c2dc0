//! Dense numeric core: tensors, a define-by-run tape, Adam, layers and checkpoints.

mod adam;
mod checkpoint;
mod layers;
mod params;
mod tape;
mod tensor;

pub use adam::AdamState;
pub use checkpoint::Checkpoint;
pub use layers::{GruCell, Linear, Mlp};
pub use params::{ParamId, ParamStore};
pub use tape::{sigmoid, Tape, Var};
pub use tensor::Tensor;
