//! Cycle stability via approximate substring matching of a reference clip
//! against long pose sequences, with pose distances as edit costs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{Frame, Pose, PoseSequence, PreparedPose, DEFAULT_S_REF};

/// Match threshold for athlete comparisons, loose enough that every
/// sequence yields comparable minima.
pub const RELAXED_TH_MATCH: f64 = 0.9;

/// Maps the normalized pose distance onto `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundedDistParams {
    /// At or below: identical (cost 0).
    pub th_same: f64,
    /// At or above: different (cost 1).
    pub th_diff: f64,
    pub s_ref: f64,
}

impl Default for BoundedDistParams {
    fn default() -> Self {
        BoundedDistParams {
            th_same: 49.0,
            th_diff: 400.0,
            s_ref: DEFAULT_S_REF,
        }
    }
}

impl BoundedDistParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.th_same >= 0.0 && self.th_same < self.th_diff) {
            return Err(Error::InvalidArgument(
                "thresholds must satisfy 0 <= th_same < th_diff".into(),
            ));
        }
        if !(self.s_ref > 0.0) {
            return Err(Error::InvalidArgument("s_ref must be positive".into()));
        }
        Ok(())
    }

    /// Bounded cost for a raw normalized distance.
    pub fn bound(&self, d: f64) -> f64 {
        if d <= self.th_same {
            0.0
        } else if d >= self.th_diff {
            1.0
        } else {
            (d - self.th_same) / (self.th_diff - self.th_same)
        }
    }
}

/// Cost model of insertions and deletions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsDelCost {
    /// Same bounded pose distance as a substitution at the current cell.
    PoseDistance,
    /// Constant cost 1.
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchParams {
    pub dist: BoundedDistParams,
    pub ins_del: InsDelCost,
    /// Score minima below this are matches.
    pub th_match: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams {
            dist: BoundedDistParams::default(),
            ins_del: InsDelCost::PoseDistance,
            th_match: 0.3,
        }
    }
}

/// Bounded pose distance in `[0, 1]`.
pub fn dist_fct(p1: &Pose, p2: &Pose, params: &BoundedDistParams) -> Result<f64> {
    Ok(params.bound(crate::pose::mse_norm(p1, p2, params.s_ref)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditOp {
    Sub,
    Ins,
    Del,
}

/// Accumulated costs, operation counts and chosen operations of the
/// substring edit distance, all of shape `(m + 1) x (n + 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EditMatrices {
    pub m: usize,
    pub n: usize,
    d: Vec<f64>,
    oplen: Vec<u32>,
    ops: Vec<Option<EditOp>>,
}

impl EditMatrices {
    fn at(&self, i: usize, j: usize) -> usize {
        i * (self.n + 1) + j
    }

    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.d[self.at(i, j)]
    }

    pub fn oplen(&self, i: usize, j: usize) -> u32 {
        self.oplen[self.at(i, j)]
    }

    pub fn op(&self, i: usize, j: usize) -> Option<EditOp> {
        self.ops[self.at(i, j)]
    }

    /// Operations of the optimal path ending at text position `j`
    /// (1-based), in path order.
    pub fn backtrack(&self, j: usize) -> Vec<AlignedPair> {
        let (mut i, mut j) = (self.m, j);
        let mut path = Vec::new();
        while i > 0 {
            let op = self.op(i, j).expect("rows below the first have an operation");
            let text = (j > 0).then(|| j - 1);
            path.push(AlignedPair { pat: i - 1, text, op });
            match op {
                EditOp::Sub => {
                    i -= 1;
                    j -= 1;
                }
                EditOp::Ins => j -= 1,
                EditOp::Del => i -= 1,
            }
        }
        path.reverse();
        path
    }
}

/// Substring edit distance of a pattern of length `m` against a text of
/// length `n`; matches may start anywhere in the text. Ties prefer
/// substitution, then insertion, then deletion.
pub fn edit_dp(
    m: usize,
    n: usize,
    sub: impl Fn(usize, usize) -> f64,
    ins: impl Fn(usize, usize) -> f64,
    del: impl Fn(usize, usize) -> f64,
) -> EditMatrices {
    let w = n + 1;
    let mut mat = EditMatrices {
        m,
        n,
        d: vec![0.0; (m + 1) * w],
        oplen: vec![0; (m + 1) * w],
        ops: vec![None; (m + 1) * w],
    };
    for i in 1..=m {
        mat.d[i * w] = i as f64;
        mat.oplen[i * w] = i as u32;
        mat.ops[i * w] = Some(EditOp::Del);
        for j in 1..=n {
            let cand = [
                (mat.d[(i - 1) * w + j - 1] + sub(i, j), (i - 1) * w + j - 1, EditOp::Sub),
                (mat.d[i * w + j - 1] + ins(i, j), i * w + j - 1, EditOp::Ins),
                (mat.d[(i - 1) * w + j] + del(i, j), (i - 1) * w + j, EditOp::Del),
            ];
            let mut best = cand[0];
            for c in &cand[1..] {
                if c.0 < best.0 {
                    best = *c;
                }
            }
            mat.d[i * w + j] = best.0;
            mat.oplen[i * w + j] = mat.oplen[best.1] + 1;
            mat.ops[i * w + j] = Some(best.2);
        }
    }
    mat
}

/// Normalized match score at every end position `j = 1..=n` (index `j - 1`).
pub fn match_scores(mat: &EditMatrices) -> Vec<f64> {
    (1..=mat.n)
        .map(|j| mat.d(mat.m, j) / mat.oplen(mat.m, j) as f64)
        .collect()
}

/// Aligns the pattern clip against the text and scores every end position.
pub fn edit_match(pat: &[Pose], text: &[Pose], params: &MatchParams) -> Result<(EditMatrices, Vec<f64>)> {
    params.dist.validate()?;
    if pat.len() < 2 {
        return Err(Error::InvalidArgument("pattern needs at least two poses".into()));
    }
    if text.is_empty() {
        return Err(Error::InvalidArgument("empty text".into()));
    }
    let joints = pat[0].len();
    if let Some(p) = pat.iter().chain(text).find(|p| p.len() != joints) {
        return Err(Error::DimensionMismatch {
            expected: joints,
            actual: p.len(),
        });
    }
    let pp: Vec<PreparedPose> = pat.iter().map(PreparedPose::new).collect::<Result<_>>()?;
    let tp: Vec<PreparedPose> = text.par_iter().map(PreparedPose::new).collect::<Result<_>>()?;
    let n = text.len();
    let cost: Vec<f64> = pp
        .par_iter()
        .flat_map_iter(|p| {
            tp.iter()
                .map(|t| params.dist.bound(p.mse_norm(t, params.dist.s_ref)))
                .collect::<Vec<_>>()
        })
        .collect();
    let c = |i: usize, j: usize| cost[(i - 1) * n + j - 1];
    let mat = match params.ins_del {
        InsDelCost::PoseDistance => edit_dp(pat.len(), n, c, c, c),
        InsDelCost::Unit => edit_dp(pat.len(), n, c, |_, _| 1.0, |_, _| 1.0),
    };
    let scores = match_scores(&mat);
    Ok((mat, scores))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub pat: usize,
    /// Text position involved in the operation; `None` for deletions before
    /// the start of the text.
    pub text: Option<usize>,
    pub op: EditOp,
}

/// One occurrence of the pattern in the text (text indices, inclusive).
#[derive(Clone, Debug, PartialEq)]
pub struct ClipMatch {
    pub start: usize,
    pub end: usize,
    pub score: f64,
    pub alignment: Vec<AlignedPair>,
}

/// Ends of matches: positions with a score below `th_match` that are the
/// minimum within `ceil(m / 2)` positions on both sides (the leftmost one on
/// a plateau), each backtracked to its start.
pub fn extract_matches(mat: &EditMatrices, scores: &[f64], th_match: f64) -> Vec<ClipMatch> {
    let half = mat.m.div_ceil(2);
    let n = scores.len();
    let mut out = Vec::new();
    for j in 0..n {
        let s = scores[j];
        if !(s < th_match) {
            continue;
        }
        let lo = j.saturating_sub(half);
        let hi = (j + half).min(n - 1);
        let minimum = (lo..=hi).all(|k| k == j || scores[k] > s || (scores[k] == s && k > j));
        if !minimum {
            continue;
        }
        let alignment = mat.backtrack(j + 1);
        let start = alignment
            .iter()
            .filter(|a| a.op != EditOp::Del)
            .filter_map(|a| a.text)
            .min()
            .unwrap_or(j);
        out.push(ClipMatch {
            start,
            end: j,
            score: s,
            alignment,
        });
    }
    out
}

/// A match reported in frames of its sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub video_id: String,
    pub start_frame: Frame,
    pub end_frame: Frame,
    pub score: f64,
}

/// Matches of the reference clip in one sequence, in frames.
pub fn find_matches(reference: &[Pose], seq: &PoseSequence, params: &MatchParams) -> Result<Vec<MatchRecord>> {
    let text = seq.pose_list();
    let frames: Vec<Frame> = seq.frames().collect();
    let (mat, scores) = edit_match(reference, &text, params)?;
    Ok(extract_matches(&mat, &scores, params.th_match)
        .into_iter()
        .map(|m| MatchRecord {
            video_id: seq.video_id().to_string(),
            start_frame: frames[m.start],
            end_frame: frames[m.end],
            score: m.score,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Mean score of all matches; lower is more stable.
    pub mean_score: f64,
    pub per_match: Vec<MatchRecord>,
}

/// Mean match score of the reference clip over all sequences.
pub fn stability_score(
    reference: &[Pose],
    sequences: &[PoseSequence],
    params: &MatchParams,
) -> Result<StabilityReport> {
    let per_seq: Vec<Vec<MatchRecord>> = sequences
        .par_iter()
        .map(|s| find_matches(reference, s, params))
        .collect::<Result<_>>()?;
    let per_match: Vec<MatchRecord> = per_seq.into_iter().flatten().collect();
    if per_match.is_empty() {
        return Err(Error::NoMatches);
    }
    let mean_score = per_match.iter().map(|m| m.score).sum::<f64>() / per_match.len() as f64;
    Ok(StabilityReport {
        mean_score,
        per_match,
    })
}

/// Ratio of the mean match score on `other_seq` to the one on `own_seq`;
/// values well above 1 suggest a different athlete.
pub fn athlete_match_ratio(
    reference: &[Pose],
    own_seq: &PoseSequence,
    other_seq: &PoseSequence,
    params: &MatchParams,
) -> Result<f64> {
    let own = stability_score(reference, std::slice::from_ref(own_seq), params)?.mean_score;
    let other = stability_score(reference, std::slice::from_ref(other_seq), params)?.mean_score;
    Ok(if own > 0.0 {
        other / own
    } else if other == 0.0 {
        1.0
    } else {
        f64::INFINITY
    })
}
