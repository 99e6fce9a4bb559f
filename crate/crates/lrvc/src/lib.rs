//! Zero-shot voice conversion with a length-resampling decoder, trained on a
//! synthetic parametric-speaker corpus.
//!
//! A frozen content encoder turns 16 kHz audio into content frames, a
//! trainable speaker encoder turns 24 kHz log-mel frames into a fixed-size
//! speaker embedding, and a decoder fuses the two and resamples the sequence
//! length by a rational ratio (default 8:5) so the content and mel feature
//! rates never have to match.

pub mod audio;
pub mod cli;
pub mod compute;
pub mod content;
pub mod decoder;
pub mod eval;
pub mod losses;
pub mod model;
pub mod speaker;
pub mod synthdata;
pub mod trainer;
pub mod error;

pub use error::{Error, Result};
