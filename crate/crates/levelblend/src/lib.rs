//! Level generation toolkit: train conditional VAEs on tile-based level
//! segments, generate segments conditioned on door/game labels, assemble
//! whole (optionally game-blended) levels, and evaluate the results.

pub mod assemble;
pub mod config;
pub mod corpus;
pub mod cvae;
pub mod error;
pub mod eval;
pub mod forest;
pub mod label;
pub mod layout;
pub mod metrics;
pub mod nn;
pub mod render;
pub mod rng;
pub mod tiles;

pub use config::{GameConfig, GameId};
pub use corpus::{build_corpus, load_corpus, save_corpus, Corpus, IngestOptions};
pub use cvae::{load_checkpoint, save_checkpoint, train, ModelParams, TrainConfig};
pub use error::{Error, Result};
pub use label::{ConditionLabel, DirectionalLabel, Side};
pub use layout::{generate_layout, Layout};
pub use tiles::TileGrid;
