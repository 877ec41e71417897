//! Dynamic filter trie for Hamming range search over integer sketches.
//!
//! A sketch is a fixed-length string of small integers. [`Dyft`] indexes a
//! growing and shrinking collection of them and answers "all ids within
//! Hamming distance `r` of `y`". [`DyftPlus`] splits sketches into blocks
//! and keeps one trie per block, which pays off for larger radii.

#[cfg(feature = "cli")]
pub mod cli;
pub mod cost;
pub mod database;
pub mod error;
pub mod format;
pub mod index;
pub mod leaf;
pub mod multi;
pub mod node;
pub mod pack;
pub mod sketch;
pub mod workload;

pub use database::{SketchDatabase, SketchId};
pub use error::{Error, Result};
pub use format::SketchFile;
pub use index::{Dyft, DyftConfig, IndexStats, SearchOutcome, SearchPath};
pub use multi::{BlockSpec, DyftPlus, MultiSearchOutcome};
pub use pack::{ByteSketch, PackConfig, PackTables};
pub use sketch::{hamming_distance, AlphabetConfig, BitSlicedSketch, Sketch};
