//! Socially compliant robot navigation at desk scale.
//!
//! The crate wires together five stages: a pair of lightweight image/text
//! encoders distilled from a caption oracle ([`context`]), a multi-hypothesis
//! trajectory planner fusing visual, LiDAR and goal embeddings through
//! cross-attention ([`planner`]), a text-conditioned trajectory selector
//! ([`selector`]), a PID tracking controller ([`controller`]), and an online
//! updater that fine-tunes the encoders from frames buffered during
//! navigation ([`lifelong`]). Everything runs against a deterministic 2D
//! pedestrian simulator ([`sim`]) so datasets, training, and evaluation are
//! reproducible from a seed.
//!
//! Start with the runnable examples (`cargo run --release --example ...`);
//! each one demonstrates a single capability end to end.

pub mod cli;
pub mod config;
pub mod context;
pub mod controller;
pub mod data;
pub mod error;
pub mod geometry;
pub mod lifelong;
pub mod nn;
pub mod pipeline;
pub mod planner;
pub mod selector;
pub mod sim;
pub mod text;

pub use error::{Error, Result};
