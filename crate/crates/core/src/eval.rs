//! Evaluation: event detection AP/mAP, stroke length error and cyclic range
//! coverage.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cycles::CycleSpeedCurve;
use crate::error::{Error, Result};
use crate::phase::{PhaseLabel, PhasePrediction, PHASES};
use crate::pose::Frame;

/// A labelled inclusive frame interval of one video.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Event {
    pub video_id: String,
    pub t1: Frame,
    pub t2: Frame,
    pub label: String,
}

impl Event {
    pub fn new(video_id: impl Into<String>, t1: Frame, t2: Frame, label: impl Into<String>) -> Self {
        assert!(t1 <= t2, "event end before start");
        Event {
            video_id: video_id.into(),
            t1,
            t2,
            label: label.into(),
        }
    }

    pub fn len(&self) -> u64 {
        (self.t2 - self.t1) as u64 + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Intersection over union in whole frames.
pub fn iou(e1: &Event, e2: &Event) -> f64 {
    let lo = e1.t1.max(e2.t1);
    let hi = e1.t2.min(e2.t2);
    if lo > hi {
        return 0.0;
    }
    let inter = (hi - lo) as f64 + 1.0;
    inter / (e1.len() as f64 + e2.len() as f64 - inter)
}

/// Average precision of one class: predictions are matched greedily in
/// descending confidence to the unmatched truth event of the same video with
/// the highest IoU above `tau`; the area under the precision envelope is
/// summed over all recall steps. `None` when the class has no truth events.
pub fn event_ap(predictions: &[(Event, f64)], truth: &[Event], class: &str, tau: f64) -> Option<f64> {
    let gts: Vec<&Event> = truth.iter().filter(|e| e.label == class).collect();
    if gts.is_empty() {
        return None;
    }
    let mut preds: Vec<&(Event, f64)> = predictions.iter().filter(|(e, _)| e.label == class).collect();
    preds.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut used = vec![false; gts.len()];
    let mut hits = Vec::with_capacity(preds.len());
    for (p, _) in preds {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if used[g] || gt.video_id != p.video_id {
                continue;
            }
            let v = iou(p, gt);
            if v > tau && best.is_none_or(|b| v > b.1) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            used[g] = true;
        }
        hits.push(best.is_some());
    }
    let total = gts.len() as f64;
    let mut tp = 0.0;
    let mut curve: Vec<(f64, f64)> = Vec::with_capacity(hits.len());
    for (i, &hit) in hits.iter().enumerate() {
        if hit {
            tp += 1.0;
        }
        curve.push((tp / total, tp / (i + 1) as f64));
    }
    let mut envelope = 0.0f64;
    let mut ap = 0.0;
    let mut next_recall = curve.last().map_or(0.0, |c| c.0);
    for &(recall, precision) in curve.iter().rev() {
        ap += (next_recall - recall) * envelope;
        envelope = envelope.max(precision);
        next_recall = recall;
    }
    ap += next_recall * envelope;
    Some(ap)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    /// AP per phase class; `None` where the class has no truth events.
    pub per_class: Vec<(String, Option<f64>)>,
    /// Mean over classes with truth events.
    pub map: f64,
    pub tau: f64,
    pub interpolation: String,
}

/// AP of every phase class and their mean.
pub fn phase_map(predictions: &[(Event, f64)], truth: &[Event], tau: f64) -> MapReport {
    let per_class: Vec<(String, Option<f64>)> = PhaseLabel::ALL
        .iter()
        .map(|l| (l.name().to_string(), event_ap(predictions, truth, l.name(), tau)))
        .collect();
    let aps: Vec<f64> = per_class.iter().filter_map(|c| c.1).collect();
    let map = if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    };
    MapReport {
        per_class,
        map,
        tau,
        interpolation: "all-point".into(),
    }
}

/// Events of a label sequence.
pub fn label_events(video_id: &str, frames: &[Frame], labels: &[PhaseLabel]) -> Vec<Event> {
    crate::phase::events_of(frames, labels)
        .into_iter()
        .map(|(a, b, l)| Event::new(video_id, a, b, l.name()))
        .collect()
}

/// Predicted events with confidence = event length over the class's median
/// training event length.
pub fn scored_events(pred: &PhasePrediction, median_length: &[f64; PHASES]) -> Vec<(Event, f64)> {
    pred.events()
        .into_iter()
        .map(|(a, b, l)| {
            let len = (b - a) as f64 + 1.0;
            let med = median_length[l.index()];
            let conf = if med > 0.0 { len / med } else { len };
            (Event::new(pred.video_id.clone(), a, b, l.name()), conf)
        })
        .collect()
}

/// One stroke length annotation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrokeTruth {
    pub video_id: String,
    pub frame: Frame,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrokeRow {
    pub video_id: String,
    pub frame: Frame,
    pub truth: f64,
    pub estimate: Option<f64>,
    pub error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrokeReport {
    /// Mean absolute error over annotations with error at most 2 frames.
    pub avg_error: Option<f64>,
    pub over_two: usize,
    pub not_detected: usize,
    pub rows: Vec<StrokeRow>,
}

/// Compares fitted cycle lengths against annotations, one curve per video.
pub fn stroke_eval(curves: &BTreeMap<String, CycleSpeedCurve>, gt: &[StrokeTruth]) -> StrokeReport {
    let mut rows: Vec<StrokeRow> = gt
        .iter()
        .map(|g| {
            let estimate = curves.get(&g.video_id).and_then(|c| c.evaluate(g.frame));
            StrokeRow {
                video_id: g.video_id.clone(),
                frame: g.frame,
                truth: g.length,
                estimate,
                error: estimate.map(|e| (e - g.length).abs()),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.video_id.cmp(&b.video_id).then(a.frame.cmp(&b.frame)));
    let small: Vec<f64> = rows.iter().filter_map(|r| r.error).filter(|&e| e <= 2.0).collect();
    StrokeReport {
        avg_error: (!small.is_empty()).then(|| small.iter().sum::<f64>() / small.len() as f64),
        over_two: rows.iter().filter(|r| r.error.is_some_and(|e| e > 2.0)).count(),
        not_detected: rows.iter().filter(|r| r.error.is_none()).count(),
        rows,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeReport {
    /// Percentage of the true range that was detected.
    pub coverage: f64,
    /// Detected frames outside the true range, as a percentage of its length.
    pub overdetect: f64,
}

fn merge(mut ranges: Vec<(Frame, Frame)>) -> Vec<(Frame, Frame)> {
    ranges.sort_unstable();
    let mut out: Vec<(Frame, Frame)> = Vec::new();
    for (a, b) in ranges {
        match out.last_mut() {
            Some(last) if a <= last.1.saturating_add(1) => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Coverage and over-detection of detected inclusive ranges against one true
/// inclusive range.
pub fn range_eval(detected: &[(Frame, Frame)], gt: (Frame, Frame)) -> Result<RangeReport> {
    if gt.0 > gt.1 {
        return Err(Error::InvalidArgument("empty ground truth range".into()));
    }
    if detected.iter().any(|r| r.0 > r.1) {
        return Err(Error::InvalidArgument("detected range ends before it starts".into()));
    }
    let merged = merge(detected.to_vec());
    let len = |a: Frame, b: Frame| (b - a) as f64 + 1.0;
    let total: f64 = merged.iter().map(|&(a, b)| len(a, b)).sum();
    let inter: f64 = merged
        .iter()
        .filter_map(|&(a, b)| {
            let lo = a.max(gt.0);
            let hi = b.min(gt.1);
            (lo <= hi).then(|| len(lo, hi))
        })
        .sum();
    let g = len(gt.0, gt.1);
    Ok(RangeReport {
        coverage: inter / g * 100.0,
        overdetect: (total - inter) / g * 100.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(t1: Frame, t2: Frame, label: &str) -> Event {
        Event::new("v", t1, t2, label)
    }

    #[test]
    fn iou_examples() {
        assert_eq!(iou(&ev(0, 10, "a"), &ev(0, 10, "a")), 1.0);
        assert_eq!(iou(&ev(0, 10, "a"), &ev(20, 30, "a")), 0.0);
        assert!((iou(&ev(0, 10, "a"), &ev(5, 15, "a")) - 0.375).abs() < 1e-12);
        assert_eq!(iou(&ev(3, 3, "a"), &ev(3, 3, "a")), 1.0);
    }

    #[test]
    fn ap_single_cases() {
        let truth = vec![ev(0, 9, "jump")];
        // IoU 0.6 vs 0.4 around the 0.5 threshold
        let hit = vec![(ev(0, 5, "jump"), 1.0)];
        let miss = vec![(ev(0, 3, "jump"), 1.0)];
        assert!((iou(&hit[0].0, &truth[0]) - 0.6).abs() < 1e-12);
        assert!((iou(&miss[0].0, &truth[0]) - 0.4).abs() < 1e-12);
        assert_eq!(event_ap(&hit, &truth, "jump", 0.5), Some(1.0));
        assert_eq!(event_ap(&miss, &truth, "jump", 0.5), Some(0.0));
        assert_eq!(event_ap(&[], &truth, "jump", 0.5), Some(0.0));
        assert_eq!(event_ap(&hit, &truth, "flight", 0.5), None);
    }

    #[test]
    fn ap_tp_fp_tp() {
        let truth = vec![ev(0, 9, "x"), ev(100, 109, "x")];
        let preds = vec![
            (ev(0, 9, "x"), 0.9),
            (ev(50, 59, "x"), 0.8),
            (ev(100, 109, "x"), 0.7),
        ];
        // precision 1, 1/2, 2/3 at recall 1/2, 1/2, 1
        let want = 0.5 * 1.0 + 0.5 * (2.0 / 3.0);
        assert!((event_ap(&preds, &truth, "x", 0.5).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn other_videos_never_match() {
        let truth = vec![Event::new("a", 0, 9, "x")];
        let preds = vec![(Event::new("b", 0, 9, "x"), 1.0)];
        assert_eq!(event_ap(&preds, &truth, "x", 0.5), Some(0.0));
    }

    #[test]
    fn range_examples() {
        let r = range_eval(&[(100, 199)], (100, 199)).unwrap();
        assert_eq!((r.coverage, r.overdetect), (100.0, 0.0));
        let r = range_eval(&[(100, 149)], (100, 199)).unwrap();
        assert_eq!((r.coverage, r.overdetect), (50.0, 0.0));
        let r = range_eval(&[(100, 205)], (100, 199)).unwrap();
        assert!((r.coverage - 100.0).abs() < 1e-12 && (r.overdetect - 6.0).abs() < 1e-12);
        let r = range_eval(&[(100, 150), (120, 160)], (100, 199)).unwrap();
        assert!((r.coverage - 61.0).abs() < 1e-12);
        assert!(range_eval(&[], (5, 4)).is_err());
    }
}
