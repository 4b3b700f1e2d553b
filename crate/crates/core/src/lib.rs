//! Evidence-based voice modulation training engine.
//!
//! The crate labels pause, volume, pitch and speed techniques in word-timed
//! speech, retrieves structurally comparable sentences from a benchmark
//! corpus, mines frequent modulation combinations over them, and drives
//! iterative practice sessions with live pitch/volume feedback.
//!
//! Batch loops run on rayon when the `parallel` feature is enabled (the
//! default); see [`exec::Execution`].

pub mod align;
pub mod analysis;
pub mod corpus;
pub mod dsp;
pub mod exec;
pub mod feedback;
pub mod labeler;
pub mod mining;
pub mod ranking;
pub mod recommend;
pub mod semsearch;

pub use exec::Execution;
