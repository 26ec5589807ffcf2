//! Small neural-network kernel: a reverse-mode tape over dense matrices,
//! dense and GRU layers, Adam, soft target updates and text checkpoints.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tape;

pub use checkpoint::Checkpoint;
pub use layers::{dense_forward, gru_forward, Dense, Gru};
pub use optim::{adam_step, soft_update, AdamState};
pub use params::{Bound, Grads, ParamId, ParamSet};
pub use tape::{sigmoid, softmax, Graph, Matrix, Var};
