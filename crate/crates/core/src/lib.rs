//! Cross-view multi-object tracking core.
//!
//! Per-view appearance tracking, cross-view identity resolution, the
//! masked-softmax training losses used to learn the two embeddings, and the
//! single-view / cross-view evaluation metrics. A deterministic multi-camera
//! scene simulator drives everything at desk scale.
//!
//! The crate is `no_std` and only needs `alloc`; file formats and the command
//! line live in the `mvtrack` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod assign;
pub mod cross_view;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod simulate;
pub mod single_view;

pub use error::{Error, Result};
pub use model::{BBox, Detection, EmbeddingVec, GlobalIdMap, Track, TrackKey, TrackStatus, ViewId};
pub use pipeline::{RunConfig, Tracker, TrackingOutput};
