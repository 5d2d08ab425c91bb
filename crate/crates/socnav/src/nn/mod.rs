//! Differentiable building blocks: matrices, a reverse-mode tape,
//! attention/FFN/GRU layers, losses, AdamW, the cosine schedule, a
//! finite-difference gradient checker, and the checkpoint container.

pub mod checkpoint;
pub mod eig;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod mat;
pub mod params;
pub mod tape;
pub mod train;

pub use checkpoint::{load_params, read_container, save_params, write_container, Entry};
pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{CrossAttention, GruCell, LayerNorm, Linear, ResidualFfn};
pub use loss::{cosine_similarity, softmax_ce};
pub use mat::Mat;
pub use params::{cosine_lr, LrSchedule, ParamStore};
pub use tape::{GradAccumulator, Grads, NodeId, Tape};
pub use train::{default_workers, EpochStats, TrainLog};
