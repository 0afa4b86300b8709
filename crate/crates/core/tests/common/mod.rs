//! Independent reference implementations and generators shared by the
//! integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use posemine::eval::Event;
use posemine::phase::{allowed, PhaseLabel, PHASES};
use posemine::{Pose, SimilarityTransform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_pose(rng: &mut impl Rng, n: usize, spread: f64) -> Pose {
    let joints = (0..n)
        .map(|_| [rng.random_range(-spread..spread), rng.random_range(-spread..spread)])
        .collect();
    Pose::new(joints).unwrap()
}

pub fn random_similarity(rng: &mut impl Rng, min_scale: f64, max_scale: f64) -> SimilarityTransform {
    let s = (rng.random_range(min_scale.ln()..max_scale.ln())).exp();
    SimilarityTransform::from_parts(
        s,
        rng.random_range(-PI..PI),
        rng.random_range(-500.0..500.0),
        rng.random_range(-500.0..500.0),
    )
}

pub fn perturbed(rng: &mut impl Rng, pose: &Pose, sigma: f64) -> Pose {
    let joints = pose
        .joints()
        .iter()
        .map(|&[x, y]| [x + sigma * rng.random_range(-1.0..1.0), y + sigma * rng.random_range(-1.0..1.0)])
        .collect();
    Pose::new(joints).unwrap()
}

/// Mean squared alignment residual `1/(2N) sum |a*p + b*rot90(p) + t - r|^2`
/// evaluated directly.
pub fn residual(reference: &Pose, pose: &Pose, a: f64, b: f64, tx: f64, ty: f64) -> f64 {
    let n = pose.len() as f64;
    let sum: f64 = reference
        .joints()
        .iter()
        .zip(pose.joints())
        .map(|(r, p)| {
            let x = a * p[0] - b * p[1] + tx - r[0];
            let y = b * p[0] + a * p[1] + ty - r[1];
            x * x + y * y
        })
        .sum();
    sum / (2.0 * n)
}

fn best_translation(reference: &Pose, pose: &Pose, a: f64, b: f64) -> (f64, f64) {
    let n = pose.len() as f64;
    let (mut tx, mut ty) = (0.0, 0.0);
    for (r, p) in reference.joints().iter().zip(pose.joints()) {
        tx += r[0] - (a * p[0] - b * p[1]);
        ty += r[1] - (b * p[0] + a * p[1]);
    }
    (tx / n, ty / n)
}

/// Numerical minimizer of the alignment residual: a coarse grid over
/// rotation and log-scale followed by compass search. Returns `(a, b, tx, ty, mse)`.
pub fn numeric_align(reference: &Pose, pose: &Pose) -> (f64, f64, f64, f64, f64) {
    let eval = |a: f64, b: f64| {
        let (tx, ty) = best_translation(reference, pose, a, b);
        residual(reference, pose, a, b, tx, ty)
    };
    let mut best = (0.0, 0.0, f64::INFINITY);
    for ti in 0..360 {
        let th = ti as f64 * PI / 180.0;
        for si in 0..=80 {
            let s = (-4.0 + si as f64 * 0.1f64).exp();
            let (a, b) = (s * th.cos(), s * th.sin());
            let v = eval(a, b);
            if v < best.2 {
                best = (a, b, v);
            }
        }
    }
    // compass search over (a, b); the optimal translation for fixed (a, b)
    // is the mean residual offset
    let (mut a, mut b, mut f) = best;
    let mut step = a.hypot(b) * 0.05;
    let dirs = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]];
    while step > 1e-15 * a.hypot(b).max(1e-300) {
        let mut improved = false;
        for d in &dirs {
            for sign in [1.0, -1.0] {
                let (ca, cb) = (a + sign * d[0] * step, b + sign * d[1] * step);
                let v = eval(ca, cb);
                if v < f {
                    (a, b, f) = (ca, cb, v);
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let (tx, ty) = best_translation(reference, pose, a, b);
    (a, b, tx, ty, f)
}

/// Poses standing in for letters: distinct triangles that are pairwise not
/// similar.
pub fn letter_pose(letter: u8) -> Pose {
    let k = letter as f64;
    let th = 0.4 + 0.35 * k;
    Pose::new(vec![[0.0, 0.0], [10.0, 0.0], [(3.0 + 2.0 * k) * th.cos(), (3.0 + 2.0 * k) * th.sin()]]).unwrap()
}

pub fn levenshtein(a: &[u8], b: &[u8]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + (ca != cb) as usize).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// For every end position `j = 1..=n`, the smallest edit distance between
/// the pattern and any substring of the text ending at `j` (empty allowed).
pub fn substring_distance(pat: &[u8], text: &[u8]) -> Vec<usize> {
    (1..=text.len())
        .map(|j| (0..=j).map(|s| levenshtein(pat, &text[s..j])).min().unwrap())
        .collect()
}

/// Best net similarity over all non-empty exemplar subsets, with
/// `preference` as an exemplar's self-similarity.
pub fn best_exemplar_net_similarity(sim: &[Vec<f64>], preference: f64) -> f64 {
    let n = sim.len();
    let mut best = f64::NEG_INFINITY;
    for mask in 1u32..(1 << n) {
        let mut total = 0.0;
        for i in 0..n {
            if mask >> i & 1 == 1 {
                total += preference;
            } else {
                total += (0..n)
                    .filter(|&e| mask >> e & 1 == 1)
                    .map(|e| sim[i][e])
                    .fold(f64::NEG_INFINITY, f64::max);
            }
        }
        best = best.max(total);
    }
    best
}

/// Exhaustive most likely label path. Ties resolve to the path that is
/// lexicographically earliest in phase order.
pub fn brute_force_viterbi(
    prior: &[f64; PHASES],
    transition: &[[f64; PHASES]; PHASES],
    emission: &[Vec<f64>],
    obs: &[usize],
) -> Option<(Vec<usize>, f64)> {
    let t_len = obs.len();
    let mut path = vec![0usize; t_len];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let mut lp = prior[path[0]].ln() + emission[path[0]][obs[0]].ln();
        for t in 1..t_len {
            lp += transition[path[t - 1]][path[t]].ln() + emission[path[t]][obs[t]].ln();
        }
        if lp > f64::NEG_INFINITY && best.as_ref().is_none_or(|b| lp > b.1 + 1e-12 * b.1.abs()) {
            best = Some((path.clone(), lp));
        }
        let mut t = t_len;
        loop {
            if t == 0 {
                return best;
            }
            t -= 1;
            path[t] += 1;
            if path[t] < PHASES {
                break;
            }
            path[t] = 0;
        }
    }
}

/// Random start, transition and emission tables with add-one smoothed
/// counts and exact zeros on forbidden transitions.
pub fn random_model(rng: &mut impl Rng, clusters: usize) -> ([f64; PHASES], [[f64; PHASES]; PHASES], Vec<Vec<f64>>) {
    let norm = |v: &mut [f64]| {
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
    };
    let mut prior = [0.0; PHASES];
    for p in &mut prior {
        *p = 1.0 + rng.random_range(0..20) as f64;
    }
    norm(&mut prior);
    let mut transition = [[0.0; PHASES]; PHASES];
    for (i, row) in transition.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            if allowed(PhaseLabel::ALL[i], PhaseLabel::ALL[j]) {
                *x = 1.0 + rng.random_range(0..30) as f64;
            }
        }
        norm(row);
    }
    let emission = (0..PHASES)
        .map(|_| {
            let mut row: Vec<f64> = (0..clusters).map(|_| 1.0 + rng.random_range(0..40) as f64).collect();
            norm(&mut row);
            row
        })
        .collect();
    (prior, transition, emission)
}

/// Average precision with all-point interpolation, written from the
/// textbook definition: rank predictions by confidence, match each to the
/// unmatched truth event of highest IoU above `tau` in its video, then
/// integrate the monotone precision envelope over recall.
pub fn reference_ap(preds: &[(Event, f64)], truth: &[Event], class: &str, tau: f64) -> Option<f64> {
    let gts: Vec<&Event> = truth.iter().filter(|e| e.label == class).collect();
    if gts.is_empty() {
        return None;
    }
    let mut ps: Vec<&(Event, f64)> = preds.iter().filter(|(e, _)| e.label == class).collect();
    ps.sort_by(|a, b| b.1.total_cmp(&a.1));
    let overlap = |a: &Event, b: &Event| -> f64 {
        let lo = a.t1.max(b.t1);
        let hi = a.t2.min(b.t2);
        if lo > hi {
            return 0.0;
        }
        let inter = (hi - lo + 1) as f64;
        let union = (a.t2 - a.t1 + 1) as f64 + (b.t2 - b.t1 + 1) as f64 - inter;
        inter / union
    };
    let mut used = vec![false; gts.len()];
    let mut tp = 0usize;
    let mut curve = Vec::new();
    for (k, (p, _)) in ps.iter().enumerate() {
        let mut hit: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if used[g] || gt.video_id != p.video_id {
                continue;
            }
            let o = overlap(p, gt);
            if o > tau && hit.is_none_or(|h| o > h.1) {
                hit = Some((g, o));
            }
        }
        if let Some((g, _)) = hit {
            used[g] = true;
            tp += 1;
        }
        curve.push((tp as f64 / gts.len() as f64, tp as f64 / (k + 1) as f64));
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for i in 0..curve.len() {
        let envelope = curve[i..].iter().map(|c| c.1).fold(0.0, f64::max);
        ap += (curve[i].0 - prev_recall) * envelope;
        prev_recall = curve[i].0;
    }
    Some(ap)
}
