//! Long jump phase segmentation: poses are discretized with k-medoids under
//! the normalized pose distance and decoded with a hidden Markov model whose
//! transitions follow a fixed phase graph.

mod hmm;
mod kmedoids;

pub use hmm::{
    decode, derive_kinematics, events_of, fit_model, viterbi, Kinematics, KinematicsConfig,
    PhaseConfig, PhaseModel, PhasePrediction, MODEL_FORMAT, MODEL_VERSION,
};
pub use kmedoids::{assign, assign_all, kmedoids, PoseCodebook};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Number of phase labels.
pub const PHASES: usize = 5;

/// Long jump phases in their fixed order (used for tie-breaking).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseLabel {
    Jump,
    Airtime,
    Landing,
    Flight,
    FinalLanding,
}

impl PhaseLabel {
    pub const ALL: [PhaseLabel; PHASES] = [
        PhaseLabel::Jump,
        PhaseLabel::Airtime,
        PhaseLabel::Landing,
        PhaseLabel::Flight,
        PhaseLabel::FinalLanding,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            PhaseLabel::Jump => "jump",
            PhaseLabel::Airtime => "airtime",
            PhaseLabel::Landing => "landing",
            PhaseLabel::Flight => "flight",
            PhaseLabel::FinalLanding => "final_landing",
        }
    }

    /// Part of the periodic run-up.
    pub fn is_runup(self) -> bool {
        matches!(self, PhaseLabel::Jump | PhaseLabel::Airtime | PhaseLabel::Landing)
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhaseLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        PhaseLabel::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown phase label {s:?}")))
    }
}

/// Whether the phase graph allows moving from `from` to `to` between frames.
pub fn allowed(from: PhaseLabel, to: PhaseLabel) -> bool {
    use PhaseLabel::*;
    from == to
        || matches!(
            (from, to),
            (Jump, Airtime)
                | (Airtime, Landing)
                | (Landing, Jump)
                | (Airtime, Flight)
                | (Landing, Flight)
                | (Flight, FinalLanding)
        )
}
