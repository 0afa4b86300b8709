use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kmedoids::{assign_all, kmedoids, PoseCodebook};
use super::{allowed, PhaseLabel, PHASES};
use crate::error::{Error, Result};
use crate::pose::{Frame, Pose, PoseSequence, DEFAULT_S_REF};

pub const MODEL_FORMAT: &str = "posemine-phase-model";
pub const MODEL_VERSION: u32 = 1;

/// Training parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseConfig {
    /// Number of medoids.
    pub k: usize,
    pub seed: u64,
    /// Pseudo-count added to emission and allowed transition counts.
    pub smoothing: f64,
    /// At most this many training poses enter the medoid search; all of them
    /// are assigned afterwards.
    pub cluster_sample: usize,
    pub s_ref: f64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            k: 60,
            seed: 0,
            smoothing: 1.0,
            cluster_sample: 2000,
            s_ref: DEFAULT_S_REF,
        }
    }
}

/// Codebook plus hidden Markov model over the five phases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseModel {
    pub format: String,
    pub version: u32,
    pub codebook: PoseCodebook,
    /// Start distribution over phases.
    pub prior: [f64; PHASES],
    /// Per phase, probability of observing each cluster (rows sum to 1).
    pub emission: Vec<Vec<f64>>,
    /// Per cluster, probability of each phase (rows sum to 1).
    pub phase_given_cluster: Vec<[f64; PHASES]>,
    /// Fraction of training poses falling into each cluster.
    pub cluster_occupancy: Vec<f64>,
    /// Row `from`, column `to`.
    pub transition: [[f64; PHASES]; PHASES],
    /// Median length in frames of training events per phase.
    pub median_event_length: [f64; PHASES],
    pub smoothing: f64,
}

impl PhaseModel {
    pub fn k(&self) -> usize {
        self.codebook.k()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: PhaseModel =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model {} version {}",
                model.format, model.version
            )));
        }
        Ok(model)
    }
}

/// Maximal runs of equal labels as inclusive frame intervals.
pub fn events_of(frames: &[Frame], labels: &[PhaseLabel]) -> Vec<(Frame, Frame, PhaseLabel)> {
    let mut out: Vec<(Frame, Frame, PhaseLabel)> = Vec::new();
    for (&f, &l) in frames.iter().zip(labels) {
        match out.last_mut() {
            Some(last) if last.2 == l => last.1 = f,
            _ => out.push((f, f, l)),
        }
    }
    out
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

/// Estimates codebook, emissions, transitions and start distribution from
/// labelled sequences.
pub fn fit_model(train: &[(PoseSequence, Vec<PhaseLabel>)], cfg: &PhaseConfig) -> Result<PhaseModel> {
    if !(cfg.smoothing >= 0.0) {
        return Err(Error::InvalidArgument("smoothing must be non-negative".into()));
    }
    let mut poses: Vec<Pose> = Vec::new();
    let mut labels: Vec<PhaseLabel> = Vec::new();
    for (seq, lab) in train {
        if seq.len() != lab.len() {
            return Err(Error::InvalidArgument(format!(
                "video {}: {} poses but {} labels",
                seq.video_id(),
                seq.len(),
                lab.len()
            )));
        }
        poses.extend(seq.poses().iter().map(|tp| tp.pose.clone()));
        labels.extend_from_slice(lab);
    }
    for l in PhaseLabel::ALL {
        if !labels.contains(&l) {
            return Err(Error::EmptyPhase(l.name()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sample: Vec<Pose> = if poses.len() > cfg.cluster_sample {
        let mut idx = rand::seq::index::sample(&mut rng, poses.len(), cfg.cluster_sample).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| poses[i].clone()).collect()
    } else {
        poses.clone()
    };
    let k = cfg.k.min(sample.len());
    let codebook = kmedoids(&sample, k, rng.random(), cfg.s_ref)?;
    let clusters = assign_all(&codebook, &poses)?;

    let s = cfg.smoothing;
    let mut counts = vec![[0.0f64; PHASES]; k];
    for (&h, &l) in clusters.iter().zip(&labels) {
        counts[h][l.index()] += 1.0;
    }
    let total = poses.len() as f64;
    let occupancy: Vec<f64> = counts
        .iter()
        .map(|row| (row.iter().sum::<f64>() + s) / (total + k as f64 * s))
        .collect();
    let phase_given_cluster: Vec<[f64; PHASES]> = counts
        .iter()
        .map(|row| {
            let n: f64 = row.iter().sum();
            let denom = n + PHASES as f64 * s;
            if denom > 0.0 {
                row.map(|c| (c + s) / denom)
            } else {
                [1.0 / PHASES as f64; PHASES]
            }
        })
        .collect();
    let emission: Vec<Vec<f64>> = (0..PHASES)
        .map(|c| {
            let raw: Vec<f64> = (0..k)
                .map(|h| phase_given_cluster[h][c] * occupancy[h])
                .collect();
            let norm: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / norm).collect()
        })
        .collect();

    let mut trans = [[0.0f64; PHASES]; PHASES];
    let mut first = [0.0f64; PHASES];
    let mut lengths: Vec<Vec<f64>> = vec![Vec::new(); PHASES];
    for (seq, lab) in train {
        if let Some(l) = lab.first() {
            first[l.index()] += 1.0;
        }
        for w in lab.windows(2) {
            if allowed(w[0], w[1]) {
                trans[w[0].index()][w[1].index()] += 1.0;
            }
        }
        let frames: Vec<Frame> = seq.frames().collect();
        for (a, b, l) in events_of(&frames, lab) {
            lengths[l.index()].push((b - a + 1) as f64);
        }
    }
    for from in PhaseLabel::ALL {
        let row = &mut trans[from.index()];
        for to in PhaseLabel::ALL {
            if allowed(from, to) {
                row[to.index()] += s;
            }
        }
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            row.iter_mut().for_each(|v| *v /= sum);
        } else {
            let n = PhaseLabel::ALL.iter().filter(|&&to| allowed(from, to)).count() as f64;
            for to in PhaseLabel::ALL {
                row[to.index()] = if allowed(from, to) { 1.0 / n } else { 0.0 };
            }
        }
    }
    let first_total: f64 = first.iter().sum::<f64>() + PHASES as f64 * s;
    let prior = first.map(|c| (c + s) / first_total);

    let mut median_event_length = [0.0; PHASES];
    for (m, l) in median_event_length.iter_mut().zip(lengths) {
        *m = median(l);
    }

    Ok(PhaseModel {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        codebook,
        prior,
        emission,
        phase_given_cluster,
        cluster_occupancy: occupancy,
        transition: trans,
        median_event_length,
        smoothing: s,
    })
}

/// Most likely label sequence for the observed cluster indices, with its log
/// probability. Among equally likely sequences the lexicographically earliest
/// one (in phase order) is returned.
pub fn decode(
    prior: &[f64; PHASES],
    transition: &[[f64; PHASES]; PHASES],
    emission: &[Vec<f64>],
    obs: &[usize],
) -> Result<(Vec<PhaseLabel>, f64)> {
    let t_len = obs.len();
    if t_len == 0 {
        return Err(Error::InvalidArgument("empty observation sequence".into()));
    }
    let log_e = |c: usize, h: usize| emission[c].get(h).copied().unwrap_or(0.0).ln();
    let log_a = transition.map(|row| row.map(f64::ln));

    // best[t][c]: best log score of frames t.. given label c at t
    let mut best = vec![[f64::NEG_INFINITY; PHASES]; t_len];
    for c in 0..PHASES {
        best[t_len - 1][c] = log_e(c, obs[t_len - 1]);
    }
    for t in (0..t_len - 1).rev() {
        for c in 0..PHASES {
            let tail = (0..PHASES)
                .map(|n| log_a[c][n] + best[t + 1][n])
                .fold(f64::NEG_INFINITY, f64::max);
            best[t][c] = log_e(c, obs[t]) + tail;
        }
    }

    let pick = |scores: [f64; PHASES]| -> (usize, f64) {
        let mut arg = (0, scores[0]);
        for (c, &v) in scores.iter().enumerate().skip(1) {
            if v > arg.1 {
                arg = (c, v);
            }
        }
        arg
    };
    let mut start = [0.0; PHASES];
    for c in 0..PHASES {
        start[c] = prior[c].ln() + best[0][c];
    }
    let (mut cur, total) = pick(start);
    if total == f64::NEG_INFINITY {
        return Err(Error::ImpossibleObservation);
    }
    let mut path = Vec::with_capacity(t_len);
    path.push(cur);
    for t in 1..t_len {
        let mut scores = [0.0; PHASES];
        for n in 0..PHASES {
            scores[n] = log_a[cur][n] + best[t][n];
        }
        cur = pick(scores).0;
        path.push(cur);
    }
    let labels = path
        .into_iter()
        .map(|c| PhaseLabel::ALL[c])
        .collect();
    Ok((labels, total))
}

/// Decoded labels of one sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePrediction {
    pub video_id: String,
    pub frames: Vec<Frame>,
    pub labels: Vec<PhaseLabel>,
    pub log_likelihood: f64,
}

impl PhasePrediction {
    /// Prediction over consecutive frames starting at 0.
    pub fn from_labels(labels: Vec<PhaseLabel>) -> Self {
        PhasePrediction {
            video_id: String::new(),
            frames: (0..labels.len() as Frame).collect(),
            labels,
            log_likelihood: 0.0,
        }
    }

    pub fn events(&self) -> Vec<(Frame, Frame, PhaseLabel)> {
        events_of(&self.frames, &self.labels)
    }
}

/// Decodes the phase of every pose in `seq`.
pub fn viterbi(model: &PhaseModel, seq: &PoseSequence) -> Result<PhasePrediction> {
    if seq.is_empty() {
        return Err(Error::InvalidArgument("empty pose sequence".into()));
    }
    let obs = assign_all(&model.codebook, &seq.pose_list())?;
    let (labels, log_likelihood) = decode(&model.prior, &model.transition, &model.emission, &obs)?;
    Ok(PhasePrediction {
        video_id: seq.video_id().to_string(),
        frames: seq.frames().collect(),
        labels,
        log_likelihood,
    })
}

/// Which events count as run-up steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KinematicsConfig {
    pub step_event: PhaseLabel,
    /// Whether the last step event before flight (the take-off) is a step.
    pub include_takeoff: bool,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        KinematicsConfig {
            step_event: PhaseLabel::Jump,
            include_takeoff: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    pub step_count: u32,
    /// Seconds from the start of the first run-up event to the start of flight.
    pub runup_duration: f64,
}

/// Step count and run-up duration from a decoded jump.
pub fn derive_kinematics(pred: &PhasePrediction, fps: f64, cfg: &KinematicsConfig) -> Result<Kinematics> {
    let events = pred.events();
    let flight = events
        .iter()
        .position(|e| e.2 == PhaseLabel::Flight)
        .ok_or(Error::NoFlightPhase)?;
    let before = &events[..flight];
    let mut step_count = before.iter().filter(|e| e.2 == cfg.step_event).count() as u32;
    if !cfg.include_takeoff {
        step_count = step_count.saturating_sub(1);
    }
    let flight_start = events[flight].0;
    let runup_duration = before
        .iter()
        .find(|e| e.2.is_runup())
        .map_or(0.0, |e| (flight_start - e.0) as f64 / fps);
    Ok(Kinematics {
        step_count,
        runup_duration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::TimedPose;
    use PhaseLabel::*;

    #[test]
    fn kinematics_counting() {
        let mut labels = Vec::new();
        for _ in 0..3 {
            labels.extend([Jump; 10]);
            labels.extend([Airtime; 30]);
            labels.extend([Landing; 10]);
        }
        labels.extend([Flight; 100]);
        labels.extend([FinalLanding; 50]);
        let k = derive_kinematics(&PhasePrediction::from_labels(labels.clone()), 200.0, &KinematicsConfig::default())
            .unwrap();
        assert_eq!(k.step_count, 3);
        assert!((k.runup_duration - 0.75).abs() < 1e-12);
        let pred = PhasePrediction::from_labels(labels);
        let no_takeoff = KinematicsConfig { include_takeoff: false, ..Default::default() };
        assert_eq!(derive_kinematics(&pred, 200.0, &no_takeoff).unwrap().step_count, 2);
        let none = PhasePrediction::from_labels(vec![Jump, Airtime]);
        assert_eq!(
            derive_kinematics(&none, 200.0, &KinematicsConfig::default()),
            Err(Error::NoFlightPhase)
        );
    }

    #[test]
    fn single_frame_decode() {
        let prior = [0.2; PHASES];
        let mut trans = [[0.0; PHASES]; PHASES];
        for a in PhaseLabel::ALL {
            let n = PhaseLabel::ALL.iter().filter(|&&b| allowed(a, b)).count() as f64;
            for b in PhaseLabel::ALL {
                if allowed(a, b) {
                    trans[a.index()][b.index()] = 1.0 / n;
                }
            }
        }
        let mut emission = vec![vec![0.5, 0.5]; PHASES];
        emission[Flight.index()] = vec![0.99, 0.01];
        let (labels, _) = decode(&prior, &trans, &emission, &[0]).unwrap();
        assert_eq!(labels, vec![Flight]);
        // all labels equally likely: earliest wins
        let flat = [[0.2; PHASES]; PHASES];
        let (labels, _) = decode(&prior, &flat, &vec![vec![1.0]; PHASES], &[0, 0, 0]).unwrap();
        assert_eq!(labels, vec![Jump; 3]);
    }

    fn tiny_corpus() -> Vec<(PoseSequence, Vec<PhaseLabel>)> {
        let shape = |l: PhaseLabel| -> Pose {
            let x = 4.0 * l.index() as f64;
            Pose::new(vec![[0.0, 0.0], [10.0, 0.0], [x, 8.0], [x * 0.5, -6.0]]).unwrap()
        };
        let labels = vec![Jump, Jump, Airtime, Landing, Jump, Airtime, Flight, Flight, FinalLanding];
        let seq = PoseSequence::new(
            "v",
            200.0,
            labels
                .iter()
                .enumerate()
                .map(|(f, &l)| TimedPose { frame: f as Frame, pose: shape(l) })
                .collect(),
        )
        .unwrap();
        vec![(seq, labels)]
    }

    #[test]
    fn model_is_normalized_and_respects_graph() {
        let cfg = PhaseConfig { k: 5, ..Default::default() };
        let model = fit_model(&tiny_corpus(), &cfg).unwrap();
        assert!((model.prior.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for row in &model.emission {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for a in PhaseLabel::ALL {
            let row = model.transition[a.index()];
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for b in PhaseLabel::ALL {
                assert_eq!(row[b.index()] == 0.0, !allowed(a, b));
            }
        }
        let pred = viterbi(&model, &tiny_corpus()[0].0).unwrap();
        assert_eq!(pred.labels, tiny_corpus()[0].1);
        let back = PhaseModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back.transition, model.transition);
        assert_eq!(back.emission, model.emission);
    }

    #[test]
    fn counting_without_smoothing() {
        let cfg = PhaseConfig { k: 5, smoothing: 0.0, ..Default::default() };
        let model = fit_model(&tiny_corpus(), &cfg).unwrap();
        let jump_cluster = assign_all(&model.codebook, &[tiny_corpus()[0].0.poses()[0].pose.clone()]).unwrap()[0];
        assert_eq!(model.phase_given_cluster[jump_cluster][Jump.index()], 1.0);
    }

    #[test]
    fn missing_phase_rejected() {
        let (seq, mut labels) = tiny_corpus().remove(0);
        labels.iter_mut().for_each(|l| {
            if *l == FinalLanding {
                *l = Flight
            }
        });
        assert_eq!(
            fit_model(&[(seq, labels)], &PhaseConfig::default()),
            Err(Error::EmptyPhase("final_landing"))
        );
    }
}
