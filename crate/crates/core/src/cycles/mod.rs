//! Time-continuous cycle speeds from repeated poses.
//!
//! Every pose is compared against every other pose; the matches of each
//! anchor are clustered in time and reduced to reoccurrences, poorly localized
//! reoccurrences and short sequences are dropped, and the frame differences of
//! consecutive reoccurrences are cleaned with a local median filter and fitted
//! by smooth piecewise polynomials. The covered frames are the cyclic ranges.

mod filter;
mod fit;
mod matching;

pub use filter::{median_filter, median_filter_mask};
pub use fit::{
    cycle_rate, fit_curve, CurveSegment, CycleSpeedCurve, FitConfig, FitOutcome, SkippedRegion,
    DEGREE,
};
pub use matching::{
    build_match_lists, consolidate, consolidate_anchored, extract_differences, filter_sequences,
    DifferencePoint, MatchEntry, MatchList, Reoccurrence, ReoccurrenceSequence,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{restrict, Frame, JointSubset, PoseSequence, DEFAULT_S_REF};

/// Parameters of the cycle mining pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CycleConfig {
    pub s_ref: f64,
    /// Poses closer than this normalized distance count as matches.
    pub match_threshold: f64,
    /// Matches further apart than this many frames start a new cluster.
    pub gap_threshold: u32,
    /// Clusters must have a spread strictly below this many frames.
    pub spread_threshold: u32,
    /// Half width of the median filter window in seconds.
    pub median_window: f64,
    /// Allowed relative deviation from the local median.
    pub rel_tol: f64,
    /// Whether the anchor itself is the first element of its timeline.
    pub anchor_in_timeline: bool,
    /// Restricts poses to these joints before matching (kick rate).
    pub joints: Option<Vec<usize>>,
    pub fit: FitConfig,
}

impl Default for CycleConfig {
    fn default() -> Self {
        CycleConfig {
            s_ref: DEFAULT_S_REF,
            match_threshold: 49.0,
            gap_threshold: 3,
            spread_threshold: 10,
            median_window: 2.0,
            rel_tol: 0.1,
            anchor_in_timeline: true,
            joints: None,
            fit: FitConfig::default(),
        }
    }
}

impl CycleConfig {
    /// Defaults restricted to the joints from the hips downwards.
    pub fn kick() -> Self {
        CycleConfig {
            joints: Some(JointSubset::lower_body().indices().to_vec()),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.s_ref > 0.0) {
            return bad("s_ref must be positive");
        }
        if !(self.match_threshold > 0.0) {
            return bad("match_threshold must be positive");
        }
        if self.gap_threshold < 1 {
            return bad("gap_threshold must be at least 1");
        }
        if self.spread_threshold < 1 {
            return bad("spread_threshold must be positive");
        }
        if !(self.median_window > 0.0) {
            return bad("median_window must be positive");
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return bad("rel_tol must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Everything the pipeline produces for one sequence.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CycleMining {
    pub curve: CycleSpeedCurve,
    /// Detected cyclic ranges, inclusive.
    pub ranges: Vec<(Frame, Frame)>,
    /// Raw differences sorted by frame then value.
    pub points: Vec<DifferencePoint>,
    /// Median filter verdict per entry of `points`.
    pub kept: Vec<bool>,
    pub skipped: Vec<SkippedRegion>,
    /// Number of anchors surviving the length filter.
    pub surviving_anchors: usize,
}

impl CycleMining {
    pub fn kept_points(&self) -> Vec<DifferencePoint> {
        self.points
            .iter()
            .zip(&self.kept)
            .filter_map(|(p, &k)| k.then_some(*p))
            .collect()
    }
}

/// Runs the full pipeline on one sequence.
pub fn mine_cycles(seq: &PoseSequence, cfg: &CycleConfig) -> Result<CycleMining> {
    cfg.validate()?;
    if seq.is_empty() {
        return Err(Error::InsufficientData("empty pose sequence".into()));
    }
    let restricted;
    let seq = match &cfg.joints {
        Some(idx) => {
            let subset = JointSubset::new(idx.clone())?;
            restricted = seq.try_map_poses(|p| restrict(p, &subset))?;
            &restricted
        }
        None => seq,
    };
    let lists = build_match_lists(seq, cfg.match_threshold, cfg.s_ref);
    let sequences: Vec<ReoccurrenceSequence> = lists
        .iter()
        .map(|l| {
            if cfg.anchor_in_timeline {
                consolidate_anchored(l, cfg.gap_threshold)
            } else {
                consolidate(l, cfg.gap_threshold)
            }
        })
        .collect();
    let survivors = filter_sequences(&sequences, cfg.spread_threshold);
    let points = extract_differences(&survivors);
    let kept = median_filter_mask(&points, seq.fps(), cfg.median_window, cfg.rel_tol);
    let clean: Vec<DifferencePoint> = points
        .iter()
        .zip(&kept)
        .filter_map(|(p, &k)| k.then_some(*p))
        .collect();
    let fitted = fit_curve(&clean, seq.fps(), &cfg.fit);
    Ok(CycleMining {
        ranges: fitted.curve.ranges(),
        curve: fitted.curve,
        points,
        kept,
        skipped: fitted.skipped,
        surviving_anchors: survivors.len(),
    })
}

/// One row of the scatter/curve table: every raw difference, plus one row per
/// covered frame without data carrying only the fitted value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    pub frame: Frame,
    pub raw_diff: Option<u32>,
    pub kept_flag: Option<u8>,
    pub fitted_value: Option<f64>,
}

pub fn curve_rows(m: &CycleMining) -> Vec<CurveRow> {
    let mut rows: Vec<CurveRow> = m
        .points
        .iter()
        .zip(&m.kept)
        .map(|(p, &k)| CurveRow {
            frame: p.frame,
            raw_diff: Some(p.diff),
            kept_flag: Some(k as u8),
            fitted_value: m.curve.evaluate(p.frame),
        })
        .collect();
    for &(a, b) in &m.ranges {
        for f in a..=b {
            let i = m.points.partition_point(|p| p.frame < f);
            if m.points.get(i).is_none_or(|p| p.frame != f) {
                rows.push(CurveRow {
                    frame: f,
                    raw_diff: None,
                    kept_flag: None,
                    fitted_value: m.curve.evaluate(f),
                });
            }
        }
    }
    rows.sort_by(|a, b| a.frame.cmp(&b.frame).then(a.raw_diff.cmp(&b.raw_diff)));
    rows
}
