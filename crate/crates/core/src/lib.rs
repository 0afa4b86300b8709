//! Mining of noisy 2D human pose sequences from sport recordings.
//!
//! The crate is organized bottom-up:
//!
//! * [`pose`]: pose model, similarity alignment, normalized pose distance.
//! * [`cycles`]: time-continuous cycle speeds and cyclic range detection.
//! * [`saliency`]: temporal saliency and temporally striking poses.
//! * [`stability`]: pose-valued approximate clip matching and stability scores.
//! * [`phase`]: clustering-based HMM segmentation of long jump phases.
//! * [`eval`]: evaluation metrics (IoU, event AP/mAP, stroke length, ranges).
//! * [`io`]: pose files, ground-truth files, configuration and the synthetic
//!   sequence generator.
//! * [`cli`]: the `posemine` command-line front end.

pub mod cli;
pub mod cycles;
pub mod error;
pub mod eval;
pub mod io;
pub mod phase;
pub mod pose;
pub mod saliency;
pub mod stability;

pub use error::{Error, Result};
pub use pose::{
    align, mse_directed, mse_norm, pose_scale, restrict, Frame, JointSubset, Pose, PoseSequence,
    SimilarityTransform, TimedPose, DEFAULT_S_REF,
};
