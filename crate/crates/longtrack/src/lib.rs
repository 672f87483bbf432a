//! Long-duration visual tracking by similarity comparison.
//!
//! The tracker matches the target patch given in the first frame against
//! candidate windows in later frames via cross-correlation of hand-crafted
//! channel features. Two mechanisms make it hold up over very long videos:
//!
//! * **Hybrid search** — a three-stage full-frame global search runs once
//!   every `T` frames on a fixed time clock, with a cheap local search in
//!   between. Global search does not depend on the previous prediction, so
//!   the tracker recovers from target disappearance, cuts and fast motion.
//! * **Self-aware updates** — the stage-2 similarity function is fine-tuned
//!   online only on global-search frames, and only when a recurrent
//!   classifier over the recent similarity maps judges the current
//!   prediction to be correct. Stages 1 and 3 are never updated.
//!
//! The crate also ships the evaluation toolkit used to study long-video
//! behaviour: a modified success-plot AUC that credits explicit absence
//! predictions, a repetitive-video constructor (forward + reversed, looped),
//! and a deterministic synthetic sequence generator.
//!
//! Batch-heavy inner loops (multi-scale probe evaluation, training) fan out
//! via rayon when the default `parallel` feature is enabled; results are
//! reduced deterministically so both paths produce identical output.

pub mod config;
pub mod data_io;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod geometry;
pub mod harness;
pub mod numerics;
pub mod par;
pub mod search;
pub mod selfeval;
pub mod similarity;
pub mod tracker;
pub mod update;

pub use error::{Error, Result};
pub use geometry::BoundingBox;
