//! Low-light action recognition toolkit.
//!
//! The pipeline is: frames are enhanced with per-pixel quadratic curves
//! ([`enhance`]), resampled to a fixed temporal length with one of several
//! interchangeable strategies ([`sampling`]), pooled into per-frame
//! descriptors and classified by a single-layer temporal attention head
//! ([`head`]). [`bias`] holds a synthetic experiment measuring how much clip
//! length leaks through each sampling strategy.

pub mod bias;
pub mod enhance;
pub mod error;
pub mod gradcheck;
pub mod head;
pub mod media;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
pub use media::{Config, Image, VideoClip};
pub use rng::Rng;
