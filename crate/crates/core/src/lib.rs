//! Multi-level correlation filter tracking.
//!
//! Each feature level learns its own correlation filter; per-level responses
//! are fused into one map by minimizing summed KL divergence, candidate peaks
//! in the central part of the fused map are re-detected, the scale is picked
//! from a patch pyramid and the model is updated at a rate that follows the
//! recent peak-score history.
//!
//! ```no_run
//! use mlcf::{BoundingBox, Frame, Tracker, TrackerConfig};
//!
//! let first = Frame::load("seq/img/0001.jpg")?;
//! let mut tracker = Tracker::init(&first, BoundingBox::new(10.0, 20.0, 40.0, 30.0)?, TrackerConfig::default())?;
//! let (bbox, diag) = tracker.track(&Frame::load("seq/img/0002.jpg")?)?;
//! println!("{bbox:?} score {}", diag.score);
//! # Ok::<(), mlcf::Error>(())
//! ```

pub mod adaptive;
pub mod cfcore;
pub mod cli;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod fusion;
pub mod imaging;
pub mod pipeline;
pub mod redetection;
pub mod scale;
pub mod synth;

pub use config::TrackerConfig;
pub use error::{Error, Result};
pub use features::{ExtractorSpec, FeatureExtractor, FeatureMap};
pub use imaging::Frame;
pub use pipeline::{BoundingBox, Diagnostics, Tracker};
