//! Temporal saliency of poses and the most striking poses of a cyclic motion.
//!
//! A pose is salient when its temporal neighbours differ strongly from the
//! poses slightly shifted in time, i.e. the motion around it is fast. The most
//! salient poses are grouped with affinity propagation; large groups are
//! poses that recur every cycle, while detector glitches stay isolated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{mse_directed, Frame, Pose, PoseSequence, PreparedPose, DEFAULT_S_REF};

/// Pose distance used inside the saliency windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaliencyDistance {
    /// Alignment residual towards the earlier window pose, in pixels².
    Directed,
    /// Scale-normalized symmetric distance.
    Normalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaliencyScore {
    pub frame: Frame,
    pub value: f64,
}

/// Saliency of every frame whose full window of poses exists.
pub fn saliency_profile(
    seq: &PoseSequence,
    w_l: u32,
    w_s: u32,
    distance: SaliencyDistance,
    s_ref: f64,
) -> Vec<SaliencyScore> {
    let poses = seq.poses();
    if poses.is_empty() {
        return Vec::new();
    }
    let first = poses[0].frame;
    let last = poses[poses.len() - 1].frame;
    let span = (last - first) as usize + 1;
    let mut dense: Vec<Option<&Pose>> = vec![None; span];
    for tp in poses {
        dense[(tp.frame - first) as usize] = Some(&tp.pose);
    }
    let prepared: Vec<Option<PreparedPose>> = match distance {
        SaliencyDistance::Normalized => dense
            .par_iter()
            .map(|p| p.and_then(|p| PreparedPose::new(p).ok()))
            .collect(),
        SaliencyDistance::Directed => Vec::new(),
    };
    let ws = w_s as usize;
    let wl = w_l as usize;

    // inner[i]: summed distance from pose i to its w_s neighbours, if all exist
    let inner: Vec<Option<f64>> = (0..span)
        .into_par_iter()
        .map(|i| {
            if i < ws || i + ws >= span {
                return None;
            }
            let reference = dense[i]?;
            let mut sum = 0.0;
            for j in i - ws..=i + ws {
                let other = dense[j]?;
                sum += match distance {
                    SaliencyDistance::Directed => mse_directed(reference, other).ok()?,
                    SaliencyDistance::Normalized => prepared[i]
                        .as_ref()?
                        .mse_norm(prepared[j].as_ref()?, s_ref),
                };
            }
            Some(sum)
        })
        .collect();

    let norm = ((2 * ws + 1) * (2 * wl + 1)) as f64;
    (wl..span.saturating_sub(wl))
        .filter_map(|r| {
            let mut total = 0.0;
            for i in r - wl..=r + wl {
                total += inner[i]?;
            }
            Some(SaliencyScore {
                frame: first + r as Frame,
                value: total / norm,
            })
        })
        .collect()
}

/// Affinity propagation parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApConfig {
    pub damping: f64,
    pub max_iter: usize,
    /// Iterations with an unchanged exemplar set that count as converged.
    pub convergence_iter: usize,
    /// Self-similarity; the median of all similarities when absent.
    pub preference: Option<f64>,
    /// Hill climb on the exemplar set after message passing while net
    /// similarity improves.
    pub polish: bool,
}

impl Default for ApConfig {
    fn default() -> Self {
        ApConfig {
            damping: 0.9,
            max_iter: 500,
            convergence_iter: 50,
            preference: None,
            polish: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub exemplar: usize,
    /// Sorted member indices, including the exemplar.
    pub members: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApResult {
    /// Clusters ordered by exemplar index.
    pub clusters: Vec<Cluster>,
    /// Exemplar of every item.
    pub assignment: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
    /// Preference used on the diagonal.
    pub preference: f64,
}

impl ApResult {
    /// Sum of similarities of all items to their exemplars, with the
    /// preference standing in for an exemplar's self-similarity.
    pub fn net_similarity(&self, similarity: &[Vec<f64>]) -> f64 {
        self.assignment
            .iter()
            .enumerate()
            .map(|(i, &e)| if i == e { self.preference } else { similarity[i][e] })
            .sum()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn validate(cfg: &ApConfig) -> Result<()> {
    if !(0.5..1.0).contains(&cfg.damping) {
        return Err(Error::InvalidArgument("damping must lie in [0.5, 1)".into()));
    }
    if cfg.max_iter == 0 || cfg.convergence_iter == 0 {
        return Err(Error::InvalidArgument("iteration limits must be positive".into()));
    }
    Ok(())
}

/// Affinity propagation on a square similarity matrix (diagonal ignored).
pub fn affinity_propagation(similarity: &[Vec<f64>], cfg: &ApConfig) -> Result<ApResult> {
    validate(cfg)?;
    let n = similarity.len();
    if n == 0 {
        return Err(Error::InsufficientData("no items to cluster".into()));
    }
    if similarity.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidArgument("similarity matrix must be square".into()));
    }
    let off: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).filter(move |&k| k != i).map(move |k| (i, k)))
        .map(|(i, k)| similarity[i][k])
        .collect();
    let preference = cfg.preference.unwrap_or_else(|| median(off.clone()));
    let single = |exemplar: usize, converged: bool, iterations: usize| ApResult {
        clusters: vec![Cluster {
            exemplar,
            members: (0..n).collect(),
        }],
        assignment: vec![exemplar; n],
        converged,
        iterations,
        preference,
    };
    if n == 1 || off.iter().all(|&s| s == 0.0) && preference == 0.0 {
        return Ok(single(0, true, 0));
    }

    let mut s: Vec<Vec<f64>> = similarity.to_vec();
    for (i, row) in s.iter_mut().enumerate() {
        row[i] = preference;
    }
    // tiny deterministic jitter breaks ties between equivalent exemplars
    let scale = s.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a11_1417);
    for row in s.iter_mut() {
        for v in row.iter_mut() {
            *v += scale * 1e-12 * rng.random::<f64>();
        }
    }

    let lam = cfg.damping;
    let mut r = vec![vec![0.0f64; n]; n];
    let mut a = vec![vec![0.0f64; n]; n];
    let mut exemplars: Vec<usize> = Vec::new();
    let mut stable = 0;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..cfg.max_iter {
        iterations = it + 1;
        for i in 0..n {
            let (mut first, mut second, mut arg) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0);
            for k in 0..n {
                let v = a[i][k] + s[i][k];
                if v > first {
                    second = first;
                    first = v;
                    arg = k;
                } else if v > second {
                    second = v;
                }
            }
            for k in 0..n {
                let competitor = if k == arg { second } else { first };
                r[i][k] = lam * r[i][k] + (1.0 - lam) * (s[i][k] - competitor);
            }
        }
        for k in 0..n {
            let pos: f64 = (0..n).filter(|&i| i != k).map(|i| r[i][k].max(0.0)).sum();
            for i in 0..n {
                let new = if i == k {
                    pos
                } else {
                    (r[k][k] + pos - r[i][k].max(0.0)).min(0.0)
                };
                a[i][k] = lam * a[i][k] + (1.0 - lam) * new;
            }
        }
        let current: Vec<usize> = (0..n).filter(|&k| a[k][k] + r[k][k] > 0.0).collect();
        if current == exemplars {
            stable += 1;
        } else {
            stable = 0;
            exemplars = current;
        }
        if stable >= cfg.convergence_iter && !exemplars.is_empty() {
            converged = true;
            break;
        }
    }

    if exemplars.is_empty() {
        let best = (0..n)
            .max_by(|&x, &y| {
                let sx: f64 = (0..n).filter(|&i| i != x).map(|i| similarity[i][x]).sum();
                let sy: f64 = (0..n).filter(|&i| i != y).map(|i| similarity[i][y]).sum();
                sx.total_cmp(&sy).then(y.cmp(&x))
            })
            .expect("n >= 1");
        return Ok(single(best, false, iterations));
    }

    let nearest = |i: usize, ex: &[usize]| -> usize {
        if ex.contains(&i) {
            return i;
        }
        *ex.iter()
            .max_by(|&&x, &&y| similarity[i][x].total_cmp(&similarity[i][y]).then(y.cmp(&x)))
            .expect("non-empty exemplar set")
    };
    // refine each exemplar to the member with the highest in-cluster similarity
    let labels: Vec<usize> = (0..n).map(|i| nearest(i, &exemplars)).collect();
    let mut refined: Vec<usize> = exemplars
        .iter()
        .map(|&e| {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == e).collect();
            let score = |c: usize| -> f64 {
                members
                    .iter()
                    .map(|&i| if i == c { preference } else { similarity[i][c] })
                    .sum()
            };
            *members
                .iter()
                .max_by(|&&x, &&y| score(x).total_cmp(&score(y)).then(y.cmp(&x)))
                .expect("exemplar is its own member")
        })
        .collect();
    refined.sort_unstable();
    refined.dedup();
    if cfg.polish {
        refined = polish(similarity, preference, refined);
    }
    let assignment: Vec<usize> = (0..n).map(|i| nearest(i, &refined)).collect();
    let clusters = refined
        .iter()
        .map(|&e| Cluster {
            exemplar: e,
            members: (0..n).filter(|&i| assignment[i] == e).collect(),
        })
        .collect();
    Ok(ApResult {
        clusters,
        assignment,
        converged,
        iterations,
        preference,
    })
}

fn net_similarity_of(similarity: &[Vec<f64>], preference: f64, exemplars: &[usize]) -> f64 {
    (0..similarity.len())
        .map(|i| {
            if exemplars.contains(&i) {
                preference
            } else {
                exemplars.iter().map(|&e| similarity[i][e]).fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .sum()
}

/// Hill climbing over exemplar sets. A step adds or removes an exemplar,
/// exchanges one or two, or exchanges one while adding or removing another.
fn polish(similarity: &[Vec<f64>], preference: f64, mut exemplars: Vec<usize>) -> Vec<usize> {
    let n = similarity.len();
    let mut current = net_similarity_of(similarity, preference, &exemplars);
    let eps = 1e-12 * current.abs().max(1.0);
    loop {
        let mut candidates: Vec<Vec<usize>> = Vec::new();
        let outside: Vec<usize> = (0..n).filter(|k| !exemplars.contains(k)).collect();
        for &k in &outside {
            let mut c = exemplars.clone();
            c.push(k);
            candidates.push(c);
        }
        for idx in 0..exemplars.len() {
            if exemplars.len() > 1 {
                let mut c = exemplars.clone();
                c.remove(idx);
                candidates.push(c);
            }
            for &k in &outside {
                let mut c = exemplars.clone();
                c[idx] = k;
                candidates.push(c);
            }
            for (o, &k) in outside.iter().enumerate() {
                for &k2 in &outside[o + 1..] {
                    let mut c = exemplars.clone();
                    c[idx] = k;
                    c.push(k2);
                    candidates.push(c.clone());
                    c[idx] = k2;
                    c.pop();
                    c.push(k);
                    candidates.push(c);
                }
            }
            for idx2 in (0..exemplars.len()).filter(|&i| i != idx) {
                for &k in &outside {
                    let mut c = exemplars.clone();
                    c[idx] = k;
                    c.remove(idx2);
                    candidates.push(c);
                }
            }
            for idx2 in idx + 1..exemplars.len() {
                for (o, &k) in outside.iter().enumerate() {
                    for &k2 in &outside[o + 1..] {
                        let mut c = exemplars.clone();
                        c[idx] = k;
                        c[idx2] = k2;
                        candidates.push(c);
                    }
                }
            }
        }
        let mut best: Option<(f64, Vec<usize>)> = None;
        for mut c in candidates {
            c.sort_unstable();
            let v = net_similarity_of(similarity, preference, &c);
            if v > current + eps && best.as_ref().is_none_or(|b| v > b.0) {
                best = Some((v, c));
            }
        }
        match best {
            Some((v, c)) => {
                current = v;
                exemplars = c;
            }
            None => return exemplars,
        }
    }
}

/// Negated normalized distances between all poses.
pub fn pose_similarity(items: &[Pose], s_ref: f64) -> Result<Vec<Vec<f64>>> {
    let prepared: Vec<PreparedPose> = items.iter().map(PreparedPose::new).collect::<Result<_>>()?;
    Ok(prepared
        .iter()
        .map(|p| prepared.iter().map(|q| -p.mse_norm(q, s_ref)).collect())
        .collect())
}

/// Affinity propagation over poses with similarity `-mse_norm`.
pub fn affinity_propagation_poses(items: &[Pose], s_ref: f64, cfg: &ApConfig) -> Result<ApResult> {
    affinity_propagation(&pose_similarity(items, s_ref)?, cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaliencyConfig {
    pub w_l: u32,
    pub w_s: u32,
    /// Number of most salient poses that enter clustering.
    pub top_n: usize,
    /// Number of representatives returned.
    pub k: usize,
    pub distance: SaliencyDistance,
    /// Only local maxima of the profile (within `w_s` frames) are candidates;
    /// otherwise every scored frame is.
    pub local_maxima: bool,
    pub s_ref: f64,
    pub ap: ApConfig,
}

impl Default for SaliencyConfig {
    fn default() -> Self {
        SaliencyConfig {
            w_l: 4,
            w_s: 4,
            top_n: 20,
            k: 1,
            distance: SaliencyDistance::Directed,
            local_maxima: true,
            s_ref: DEFAULT_S_REF,
            ap: ApConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Representative {
    pub frame: Frame,
    pub pose: Pose,
    pub cluster_size: usize,
    pub saliency: f64,
    /// Frames of all cluster members.
    pub members: Vec<Frame>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrikingPoseSet {
    /// Largest clusters first.
    pub representatives: Vec<Representative>,
    pub converged: bool,
    pub clusters: usize,
}

/// Candidate frames for clustering, most salient first.
pub fn salient_candidates(profile: &[SaliencyScore], cfg: &SaliencyConfig) -> Vec<SaliencyScore> {
    let radius = cfg.w_s.max(1);
    let mut cands: Vec<SaliencyScore> = profile
        .iter()
        .enumerate()
        .filter(|&(i, s)| {
            if !(s.value > 0.0) {
                return false;
            }
            if !cfg.local_maxima {
                return true;
            }
            let lo = profile[..i].partition_point(|o| o.frame + radius < s.frame);
            let hi = i + profile[i..].partition_point(|o| o.frame <= s.frame + radius);
            profile[lo..hi].iter().all(|o| {
                o.value < s.value || (o.value == s.value && o.frame >= s.frame)
            })
        })
        .map(|(_, s)| *s)
        .collect();
    cands.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.frame.cmp(&b.frame)));
    cands
}

/// Representatives of the `k` largest clusters among the `top_n` most salient
/// poses.
pub fn striking_poses(seq: &PoseSequence, cfg: &SaliencyConfig) -> Result<StrikingPoseSet> {
    if cfg.top_n == 0 || cfg.k == 0 {
        return Err(Error::InvalidArgument("top_n and k must be positive".into()));
    }
    let profile = saliency_profile(seq, cfg.w_l, cfg.w_s, cfg.distance, cfg.s_ref);
    let mut cands = salient_candidates(&profile, cfg);
    if cands.len() < cfg.top_n {
        return Err(Error::InsufficientData(format!(
            "{} salient candidate poses, need {}",
            cands.len(),
            cfg.top_n
        )));
    }
    cands.truncate(cfg.top_n);
    cands.sort_by_key(|c| c.frame);
    let poses: Vec<Pose> = cands
        .iter()
        .map(|c| seq.get(c.frame).expect("scored frame has a pose").clone())
        .collect();
    let sim = pose_similarity(&poses, cfg.s_ref)?;
    let ap = affinity_propagation(&sim, &cfg.ap)?;
    if ap.clusters.len() < cfg.k {
        return Err(Error::InsufficientData(format!(
            "{} clusters found, {} requested",
            ap.clusters.len(),
            cfg.k
        )));
    }
    let spread = |c: &Cluster| -> f64 {
        c.members.iter().map(|&m| -sim[c.exemplar][m]).sum::<f64>() / c.members.len() as f64
    };
    let mut order: Vec<&Cluster> = ap.clusters.iter().collect();
    order.sort_by(|x, y| {
        y.members
            .len()
            .cmp(&x.members.len())
            .then(spread(x).total_cmp(&spread(y)))
            .then(cands[x.exemplar].frame.cmp(&cands[y.exemplar].frame))
    });
    let representatives = order
        .into_iter()
        .take(cfg.k)
        .map(|c| Representative {
            frame: cands[c.exemplar].frame,
            pose: poses[c.exemplar].clone(),
            cluster_size: c.members.len(),
            saliency: cands[c.exemplar].value,
            members: c.members.iter().map(|&m| cands[m].frame).collect(),
        })
        .collect();
    Ok(StrikingPoseSet {
        representatives,
        converged: ap.converged,
        clusters: ap.clusters.len(),
    })
}
