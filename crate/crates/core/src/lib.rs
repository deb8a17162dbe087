//! Neural machine translation with a chunk-structured target side.
//!
//! The decoder runs two recurrent clocks: a word-scale state updated every
//! step and a chunk-scale state updated only where a learned boundary gate
//! fires. Chunks are embedded by subtracting running word-state summaries,
//! source context is attended once per chunk, and training optimizes a joint
//! objective over words, chunk tags, and boundaries. A conventional
//! word-attention decoder is included as a baseline behind the same API.
//!
//! Everything runs on a small reverse-mode tape ([`autodiff`]) so that every
//! gradient in the system can be checked against finite differences.

pub mod autodiff;
pub mod corpus;
pub mod error;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod training;

pub use error::{Error, Result};
