//! Local joint-to-person association for multi-person pose estimation.
//!
//! Each detected person gets a small binary program over its joint
//! candidates: keep or suppress each candidate, with unary costs from the
//! detector confidences and pairwise costs from calibrated same-person
//! classifiers. A global labelling-and-partitioning solver over the same
//! detections is included for reference, along with a synthetic scene
//! generator and an average-precision evaluator.

pub mod affinity;
pub mod error;
pub mod eval;
pub mod global;
pub mod ljpa;
pub mod model;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
