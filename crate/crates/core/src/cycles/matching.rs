use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::pose::{Frame, PoseSequence, PreparedPose};

/// One pose matching an anchor pose.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchEntry {
    pub frame: Frame,
    pub distance: f64,
}

/// All poses of a sequence matching the pose at `anchor_frame`, by frame.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct MatchList {
    pub anchor_frame: Frame,
    pub entries: Vec<MatchEntry>,
}

/// A temporal cluster of matches reduced to its best member.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reoccurrence {
    pub frame: Frame,
    pub distance: f64,
    /// Largest frame distance of a cluster member from `frame`.
    pub spread: u32,
}

/// Consolidated reoccurrences of one anchor pose across the recording.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ReoccurrenceSequence {
    pub anchor_frame: Frame,
    pub clusters: Vec<Reoccurrence>,
}

/// A frame difference between two chronologically consecutive reoccurrences,
/// attributed to the later frame (the minuend).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DifferencePoint {
    pub frame: Frame,
    pub diff: u32,
}

/// Compares every pose against every other pose and keeps, per anchor, the
/// poses with normalized distance strictly below `threshold`. The anchor
/// itself is never part of its own list. Degenerate poses match nothing.
pub fn build_match_lists(seq: &PoseSequence, threshold: f64, s_ref: f64) -> Vec<MatchList> {
    let prepared: Vec<Option<PreparedPose>> = seq
        .poses()
        .par_iter()
        .map(|tp| PreparedPose::new(&tp.pose).ok())
        .collect();
    let frames: Vec<Frame> = seq.frames().collect();
    (0..prepared.len())
        .into_par_iter()
        .map(|i| {
            let mut list = MatchList {
                anchor_frame: frames[i],
                entries: Vec::new(),
            };
            if let Some(anchor) = &prepared[i] {
                for (j, other) in prepared.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    if let Some(other) = other {
                        let d = anchor.mse_norm(other, s_ref);
                        if d < threshold {
                            list.entries.push(MatchEntry {
                                frame: frames[j],
                                distance: d,
                            });
                        }
                    }
                }
            }
            list
        })
        .collect()
}

/// Splits the matches into temporal clusters (a new cluster starts after a
/// gap of more than `gap_threshold` frames) and reduces each cluster to its
/// minimal-distance member, ties going to the earlier frame.
pub fn consolidate(matches: &MatchList, gap_threshold: u32) -> ReoccurrenceSequence {
    consolidate_impl(matches, gap_threshold, false)
}

/// Like [`consolidate`], but the anchor takes part in its own timeline as a
/// zero-distance match: the cluster around the anchor is consolidated onto the
/// anchor frame, or the anchor forms its own cluster.
pub fn consolidate_anchored(matches: &MatchList, gap_threshold: u32) -> ReoccurrenceSequence {
    consolidate_impl(matches, gap_threshold, true)
}

fn consolidate_impl(matches: &MatchList, gap: u32, anchored: bool) -> ReoccurrenceSequence {
    let anchor = matches.anchor_frame;
    let mut out = ReoccurrenceSequence {
        anchor_frame: anchor,
        clusters: Vec::new(),
    };
    if matches.entries.is_empty() {
        return out;
    }
    let mut entries: Vec<(MatchEntry, bool)> =
        matches.entries.iter().map(|&e| (e, false)).collect();
    if anchored {
        let at = entries.partition_point(|(e, _)| e.frame < anchor);
        entries.insert(
            at,
            (
                MatchEntry {
                    frame: anchor,
                    distance: 0.0,
                },
                true,
            ),
        );
    }

    let mut start = 0;
    for i in 1..=entries.len() {
        let split = i == entries.len() || entries[i].0.frame - entries[i - 1].0.frame > gap;
        if !split {
            continue;
        }
        let cluster = &entries[start..i];
        let best = cluster
            .iter()
            .min_by(|(a, a_anchor), (b, b_anchor)| {
                b_anchor
                    .cmp(a_anchor)
                    .then(a.distance.total_cmp(&b.distance))
                    .then(a.frame.cmp(&b.frame))
            })
            .expect("non-empty cluster")
            .0;
        let spread = cluster
            .iter()
            .map(|(e, _)| e.frame.abs_diff(best.frame))
            .max()
            .unwrap_or(0);
        out.clusters.push(Reoccurrence {
            frame: best.frame,
            distance: best.distance,
            spread,
        });
        start = i;
    }
    out
}

fn median(sorted: &[usize]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    }
}

/// Drops clusters whose spread is not strictly below `spread_threshold`, then
/// keeps only the sequences at least as long as the median length over all
/// anchors (midpoint median for even counts).
pub fn filter_sequences(
    all: &[ReoccurrenceSequence],
    spread_threshold: u32,
) -> Vec<ReoccurrenceSequence> {
    let striking: Vec<ReoccurrenceSequence> = all
        .iter()
        .map(|s| ReoccurrenceSequence {
            anchor_frame: s.anchor_frame,
            clusters: s
                .clusters
                .iter()
                .copied()
                .filter(|c| c.spread < spread_threshold)
                .collect(),
        })
        .collect();
    if striking.is_empty() {
        return striking;
    }
    let mut lengths: Vec<usize> = striking.iter().map(|s| s.clusters.len()).collect();
    lengths.sort_unstable();
    let med = median(&lengths);
    striking
        .into_iter()
        .filter(|s| s.clusters.len() as f64 >= med)
        .collect()
}

/// Frame differences between chronologically consecutive reoccurrences of
/// every surviving sequence, sorted by frame then difference.
pub fn extract_differences(survivors: &[ReoccurrenceSequence]) -> Vec<DifferencePoint> {
    let mut points: Vec<DifferencePoint> = survivors
        .iter()
        .flat_map(|s| {
            s.clusters.windows(2).map(|w| DifferencePoint {
                frame: w[1].frame,
                diff: w[1].frame - w[0].frame,
            })
        })
        .collect();
    points.sort_unstable();
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{Pose, TimedPose};

    fn list(anchor: Frame, entries: &[(Frame, f64)]) -> MatchList {
        MatchList {
            anchor_frame: anchor,
            entries: entries
                .iter()
                .map(|&(frame, distance)| MatchEntry { frame, distance })
                .collect(),
        }
    }

    fn seq_of(poses: Vec<(Frame, Pose)>) -> PoseSequence {
        PoseSequence::new(
            "t",
            50.0,
            poses
                .into_iter()
                .map(|(frame, pose)| TimedPose { frame, pose })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_poses_all_match() {
        let p = Pose::new(vec![[0.0, 0.0], [10.0, 0.0], [3.0, 7.0]]).unwrap();
        let seq = seq_of(vec![(0, p.clone()), (10, p.clone()), (20, p)]);
        let lists = build_match_lists(&seq, 49.0, 100.0);
        assert_eq!(lists[0].anchor_frame, 0);
        assert_eq!(
            lists[0].entries,
            vec![
                MatchEntry { frame: 10, distance: 0.0 },
                MatchEntry { frame: 20, distance: 0.0 }
            ]
        );
    }

    #[test]
    fn very_different_poses_do_not_match() {
        let a = Pose::new(vec![[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]]).unwrap();
        let b = Pose::new(vec![[0.0, 0.0], [10.0, 0.0], [20.0, 0.0], [0.0, 30.0]]).unwrap();
        let c = Pose::new(vec![[0.0, 0.0], [0.0, 10.0], [30.0, 30.0], [0.0, 1.0]]).unwrap();
        let seq = seq_of(vec![(0, a), (1, b), (2, c)]);
        assert!(build_match_lists(&seq, 49.0, 100.0)
            .iter()
            .all(|l| l.entries.is_empty()));
    }

    #[test]
    fn consolidate_picks_minimum_and_spread() {
        let r = consolidate(&list(0, &[(58, 5.0), (59, 3.0), (60, 1.0), (61, 4.0)]), 3);
        assert_eq!(
            r.clusters,
            vec![Reoccurrence { frame: 60, distance: 1.0, spread: 2 }]
        );
        let r = consolidate(&list(0, &[(60, 2.0), (61, 2.5), (120, 1.0)]), 3);
        assert_eq!(r.clusters.len(), 2);
        assert!(r.clusters[0].spread <= 1);
        assert_eq!(r.clusters[1], Reoccurrence { frame: 120, distance: 1.0, spread: 0 });
        assert!(consolidate(&list(0, &[]), 3).clusters.is_empty());
    }

    #[test]
    fn anchored_consolidation_snaps_to_anchor() {
        let l = list(100, &[(98, 1.0), (99, 0.5), (101, 0.2), (102, 3.0), (160, 2.0)]);
        let r = consolidate_anchored(&l, 3);
        assert_eq!(r.clusters[0], Reoccurrence { frame: 100, distance: 0.0, spread: 2 });
        assert_eq!(r.clusters[1].frame, 160);
        // anchor far from any match becomes its own cluster
        let r = consolidate_anchored(&list(0, &[(60, 1.0)]), 3);
        assert_eq!(r.clusters.iter().map(|c| c.frame).collect::<Vec<_>>(), vec![0, 60]);
        assert!(consolidate_anchored(&list(5, &[]), 3).clusters.is_empty());
    }

    #[test]
    fn spread_filter_is_strict() {
        let seq = ReoccurrenceSequence {
            anchor_frame: 0,
            clusters: [0, 9, 10, 15]
                .iter()
                .enumerate()
                .map(|(i, &s)| Reoccurrence { frame: 60 * i as Frame, distance: 1.0, spread: s })
                .collect(),
        };
        let out = filter_sequences(&[seq], 10);
        let spreads: Vec<u32> = out[0].clusters.iter().map(|c| c.spread).collect();
        assert_eq!(spreads, vec![0, 9]);
    }

    #[test]
    fn length_filter_uses_midpoint_median() {
        let mk = |anchor: Frame, n: usize| ReoccurrenceSequence {
            anchor_frame: anchor,
            clusters: (0..n)
                .map(|i| Reoccurrence { frame: 60 * i as Frame, distance: 0.0, spread: 0 })
                .collect(),
        };
        let all = vec![mk(0, 1), mk(1, 2), mk(2, 3), mk(3, 4)];
        let kept: Vec<Frame> = filter_sequences(&all, 10).iter().map(|s| s.anchor_frame).collect();
        assert_eq!(kept, vec![2, 3]);
    }

    #[test]
    fn differences_attributed_to_minuend() {
        let s = ReoccurrenceSequence {
            anchor_frame: 0,
            clusters: [0, 60, 121, 180]
                .iter()
                .map(|&f| Reoccurrence { frame: f, distance: 0.0, spread: 0 })
                .collect(),
        };
        assert_eq!(
            extract_differences(&[s]),
            vec![
                DifferencePoint { frame: 60, diff: 60 },
                DifferencePoint { frame: 121, diff: 61 },
                DifferencePoint { frame: 180, diff: 59 },
            ]
        );
        assert!(extract_differences(&[]).is_empty());
    }
}
