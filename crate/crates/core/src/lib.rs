//! Unsupervised adversarial alignment of audio, sheet-music and lyrics
//! feature vectors in a shared embedding space.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the CLI and
//! report rendering live in the `ugaar` crate.

#![no_std]

extern crate alloc;

pub mod cca;
pub mod data;
pub mod discriminator;
pub mod error;
pub mod eval;
pub mod generator;
pub mod groundtruth;
pub mod numkit;
pub mod pipeline;
pub mod trainer;

pub use error::{Error, Result};
