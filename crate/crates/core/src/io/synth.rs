//! Synthetic pose sequences with known ground truth.
//!
//! Two kinds are generated. `Cyclic` drives limb-angle oscillators over a
//! 14-joint side-view swimmer whose stroke period can vary slowly over time;
//! the cycle position can be warped so that each stroke contains one or more
//! short fast transitions (temporally striking poses). `LongJump` chains
//! run-up steps (jump, airtime, landing) with a flight phase and a final
//! landing, all seen by a panning camera.
//!
//! Everything is a deterministic function of the `SynthSpec` and the seed. The
//! athlete's body proportions and movement style depend only on
//! `athlete_seed`, so two recordings of the same athlete differ only in noise.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::PhaseLabel;
use crate::pose::{pose_scale, Frame, Pose, PoseSequence, TimedPose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Cyclic,
    Longjump,
}

/// Stroke length over time: `base + amplitude * sin(2 pi t / period + phase)`
/// frames per cycle, `t` in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CycleProfile {
    pub base: f64,
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
}

impl Default for CycleProfile {
    fn default() -> Self {
        Self {
            base: 60.0,
            amplitude: 0.0,
            period: 20.0,
            phase: 0.0,
        }
    }
}

/// Mean phase durations (frames) and step count of a long jump trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LongJumpProfile {
    pub steps: u32,
    pub jump: f64,
    pub airtime: f64,
    pub landing: f64,
    pub flight: f64,
    pub final_landing: f64,
    /// Relative per-phase duration jitter.
    pub jitter: f64,
    /// Camera tracking error, pixels per frame (random walk step).
    pub pan_jitter: f64,
}

impl Default for LongJumpProfile {
    fn default() -> Self {
        Self {
            steps: 12,
            jump: 18.0,
            airtime: 22.0,
            landing: 12.0,
            flight: 150.0,
            final_landing: 80.0,
            jitter: 0.15,
            pan_jitter: 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub kind: SynthKind,
    /// Recording length in seconds (cyclic kind).
    pub duration: f64,
    pub fps: f64,
    pub cycle: CycleProfile,
    /// Per-coordinate Gaussian joint noise, pixels.
    pub noise: f64,
    pub dropout: f64,
    pub outlier: f64,
    pub athlete_seed: u64,
    /// Mean pose scale (mean joint distance to the center of mass), pixels.
    pub pose_scale: f64,
    /// Frames `[start, end]` with cyclic motion; idle drifting elsewhere.
    pub cyclic_window: Option<(Frame, Frame)>,
    /// Fast transitions per stroke cycle.
    pub transitions: u32,
    /// Strength of the cycle-position warp in `[0, 1)`.
    pub transition_strength: f64,
    pub longjump: LongJumpProfile,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            kind: SynthKind::Cyclic,
            duration: 30.0,
            fps: 50.0,
            cycle: CycleProfile::default(),
            noise: 2.0,
            dropout: 0.0,
            outlier: 0.0,
            athlete_seed: 1,
            pose_scale: 100.0,
            cyclic_window: None,
            transitions: 1,
            transition_strength: 0.5,
            longjump: LongJumpProfile::default(),
        }
    }
}

impl SynthSpec {
    pub fn cyclic() -> Self {
        Self::default()
    }

    pub fn longjump() -> Self {
        Self {
            kind: SynthKind::Longjump,
            fps: 200.0,
            pose_scale: 80.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{name} must be in [0, 1], got {p}")))
            }
        };
        prob("dropout", self.dropout)?;
        prob("outlier", self.outlier)?;
        if !(self.fps > 0.0) || !(self.duration > 0.0) {
            return Err(Error::InvalidSpec("fps and duration must be positive".into()));
        }
        if !(self.noise >= 0.0) || !(self.pose_scale > 0.0) {
            return Err(Error::InvalidSpec("noise must be >= 0 and pose_scale > 0".into()));
        }
        if !(0.0..1.0).contains(&self.transition_strength) {
            return Err(Error::InvalidSpec("transition_strength must be in [0, 1)".into()));
        }
        match self.kind {
            SynthKind::Cyclic => {
                let c = &self.cycle;
                if !(c.base >= 4.0) || !(c.amplitude.abs() < c.base - 4.0 || c.amplitude == 0.0) {
                    return Err(Error::InvalidSpec(
                        "base cycle length must be >= 4 frames at all times".into(),
                    ));
                }
                if c.amplitude != 0.0 && !(c.period > 0.0) {
                    return Err(Error::InvalidSpec("modulation period must be positive".into()));
                }
                if let Some((s, e)) = self.cyclic_window {
                    if s > e {
                        return Err(Error::InvalidSpec("cyclic window start after end".into()));
                    }
                }
            }
            SynthKind::Longjump => {
                let l = &self.longjump;
                let all = [l.jump, l.airtime, l.landing, l.flight, l.final_landing];
                if all.iter().any(|d| !(*d >= 2.0)) {
                    return Err(Error::InvalidSpec("phase durations must be >= 2 frames".into()));
                }
                if !(0.0..0.5).contains(&l.jitter) {
                    return Err(Error::InvalidSpec("jitter must be in [0, 0.5)".into()));
                }
                if l.steps == 0 {
                    return Err(Error::InvalidSpec("a run-up needs at least one step".into()));
                }
            }
        }
        Ok(())
    }
}

/// Ground truth accompanying a cyclic sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct CyclicTruth {
    /// Frames per cycle measured backwards from each frame, where one full
    /// cycle of cyclic motion precedes it. Indexed by frame.
    pub cycle_length: Vec<Option<f64>>,
    /// Frames with cyclic motion (inclusive).
    pub cyclic_range: (Frame, Frame),
}

impl CyclicTruth {
    pub fn at(&self, frame: Frame) -> Option<f64> {
        self.cycle_length.get(frame as usize).copied().flatten()
    }
}

/// Ground truth accompanying a long jump sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct LongJumpTruth {
    /// Phase label of every frame (indexed by frame, dropped frames included).
    pub labels: Vec<PhaseLabel>,
    pub step_count: u32,
    pub runup_duration: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SynthTruth {
    Cyclic(CyclicTruth),
    LongJump(LongJumpTruth),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthOutput {
    pub sequence: PoseSequence,
    pub truth: SynthTruth,
    /// Frames at the center of each fast transition (cyclic kind).
    pub striking_frames: Vec<Frame>,
    /// Frames that were generated but dropped.
    pub dropped: Vec<Frame>,
}

impl SynthOutput {
    pub fn cyclic_truth(&self) -> Option<&CyclicTruth> {
        match &self.truth {
            SynthTruth::Cyclic(t) => Some(t),
            SynthTruth::LongJump(_) => None,
        }
    }

    pub fn longjump_truth(&self) -> Option<&LongJumpTruth> {
        match &self.truth {
            SynthTruth::LongJump(t) => Some(t),
            SynthTruth::Cyclic(_) => None,
        }
    }
}

/// Generates a synthetic recording; deterministic in `(spec, seed)`.
pub fn synth(spec: &SynthSpec, seed: u64) -> Result<SynthOutput> {
    spec.validate()?;
    let video_id = match spec.kind {
        SynthKind::Cyclic => format!("synth-cyclic-{seed}"),
        SynthKind::Longjump => format!("synth-longjump-{seed}"),
    };
    match spec.kind {
        SynthKind::Cyclic => synth_cyclic(spec, seed, video_id),
        SynthKind::Longjump => synth_longjump(spec, seed, video_id),
    }
}

/// Athlete-specific body proportions and movement style.
#[derive(Clone, Debug)]
pub struct Signature {
    torso: f64,
    neck: f64,
    head: f64,
    upper_arm: f64,
    forearm: f64,
    thigh: f64,
    shin: f64,
    hip_width: f64,
    arm_offset: f64,
    elbow_base: f64,
    elbow_amp: f64,
    elbow_phase: f64,
    kick_amp: f64,
    kick_beats: f64,
    kick_phase: f64,
    knee_base: f64,
    roll_amp: f64,
    head_amp: f64,
    warp_origin: f64,
    lean: f64,
}

impl Signature {
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a7a1_e7e);
        let mut vary = |base: f64, rel: f64| base * (1.0 + rng.random_range(-rel..rel));
        let torso = vary(170.0, 0.12);
        let neck = vary(22.0, 0.2);
        let head = vary(48.0, 0.15);
        let upper_arm = vary(70.0, 0.15);
        let forearm = vary(65.0, 0.15);
        let thigh = vary(105.0, 0.12);
        let shin = vary(95.0, 0.12);
        let hip_width = vary(12.0, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0x51_6e);
        Self {
            torso,
            neck,
            head,
            upper_arm,
            forearm,
            thigh,
            shin,
            hip_width,
            arm_offset: PI + rng.random_range(-0.7..0.7),
            elbow_base: rng.random_range(0.15..0.7),
            elbow_amp: rng.random_range(0.1..0.7),
            elbow_phase: rng.random_range(0.0..TAU),
            kick_amp: rng.random_range(0.3..0.6),
            kick_beats: if rng.random_bool(0.5) { 2.0 } else { 3.0 },
            kick_phase: rng.random_range(0.0..TAU),
            knee_base: rng.random_range(0.15..0.5),
            roll_amp: rng.random_range(4.0..14.0),
            head_amp: rng.random_range(0.05..0.35),
            warp_origin: rng.random_range(0.0..1.0),
            lean: rng.random_range(-0.12..0.12),
        }
    }
}

/// Unit direction at angle `a` in image coordinates (y down); 0 points along -x.
fn dir(a: f64) -> [f64; 2] {
    [-a.cos(), a.sin()]
}

fn add(p: [f64; 2], d: [f64; 2], len: f64) -> [f64; 2] {
    [p[0] + d[0] * len, p[1] + d[1] * len]
}

/// Limb configuration of a horizontal swimmer in body units.
struct SwimAngles {
    r_arm: f64,
    l_arm: f64,
    r_elbow: f64,
    l_elbow: f64,
    r_hip: f64,
    l_hip: f64,
    r_knee: f64,
    l_knee: f64,
    roll: f64,
    head: f64,
}

fn swimmer_angles(sig: &Signature, psi: f64) -> SwimAngles {
    let kick = sig.kick_beats * psi + sig.kick_phase;
    SwimAngles {
        r_arm: psi,
        l_arm: psi + sig.arm_offset,
        r_elbow: sig.elbow_base + sig.elbow_amp * (psi + sig.elbow_phase).sin(),
        l_elbow: sig.elbow_base + sig.elbow_amp * (psi + sig.arm_offset + sig.elbow_phase).sin(),
        r_hip: PI + sig.kick_amp * kick.sin(),
        l_hip: PI - sig.kick_amp * kick.sin(),
        r_knee: sig.knee_base + 0.5 * sig.kick_amp * (1.0 + (kick - 0.8).sin()),
        l_knee: sig.knee_base + 0.5 * sig.kick_amp * (1.0 - (kick - 0.8).sin()),
        roll: sig.roll_amp * psi.sin(),
        head: sig.head_amp * (psi + 0.5).sin(),
    }
}

fn swimmer_joints(sig: &Signature, a: &SwimAngles) -> Vec<[f64; 2]> {
    let torso_dir = dir(sig.lean);
    let hip_c = [0.0, 0.0];
    let shoulder_c = add(hip_c, torso_dir, sig.torso);
    let neck = add(shoulder_c, dir(sig.lean - 0.25), sig.neck);
    let head = add(neck, dir(sig.lean - 0.2 + a.head), sig.head);
    let r_sh = [shoulder_c[0], shoulder_c[1] - a.roll];
    let l_sh = [shoulder_c[0], shoulder_c[1] + a.roll];
    let r_el = add(r_sh, dir(a.r_arm), sig.upper_arm);
    let r_wr = add(r_el, dir(a.r_arm + a.r_elbow), sig.forearm);
    let l_el = add(l_sh, dir(a.l_arm), sig.upper_arm);
    let l_wr = add(l_el, dir(a.l_arm + a.l_elbow), sig.forearm);
    let r_hip = [hip_c[0], hip_c[1] - sig.hip_width * 0.5 - 0.4 * a.roll];
    let l_hip = [hip_c[0], hip_c[1] + sig.hip_width * 0.5 + 0.4 * a.roll];
    let r_kn = add(r_hip, dir(a.r_hip), sig.thigh);
    let r_an = add(r_kn, dir(a.r_hip - a.r_knee), sig.shin);
    let l_kn = add(l_hip, dir(a.l_hip), sig.thigh);
    let l_an = add(l_kn, dir(a.l_hip - a.l_knee), sig.shin);
    vec![
        head, neck, r_sh, r_el, r_wr, l_sh, l_el, l_wr, r_hip, r_kn, r_an, l_hip, l_kn, l_an,
    ]
}

/// Idle, non-periodic drifting: arms forward, slow mean-reverting limb motion.
fn idle_angles(state: &[f64; 6]) -> SwimAngles {
    SwimAngles {
        r_arm: 0.1 + state[0],
        l_arm: 0.15 + state[1],
        r_elbow: 0.2 + state[2].abs(),
        l_elbow: 0.2 + state[3].abs(),
        r_hip: PI + state[4],
        l_hip: PI + state[5],
        r_knee: 0.2 + state[4].abs(),
        l_knee: 0.2 + state[5].abs(),
        roll: 6.0 * state[2],
        head: 0.3 * state[3],
    }
}

fn scale_to(joints: &mut [[f64; 2]], factor: f64, offset: [f64; 2]) {
    for j in joints.iter_mut() {
        j[0] = j[0] * factor + offset[0];
        j[1] = j[1] * factor + offset[1];
    }
}

/// Cycle position warp `u -> w(u)`, monotone; fastest at `origin + (2k+1)/(2T)`.
fn warp(u: f64, transitions: u32, strength: f64, origin: f64) -> f64 {
    if transitions == 0 || strength == 0.0 {
        return u;
    }
    let t = transitions as f64;
    u - strength / (TAU * t) * (TAU * t * (u - origin)).sin()
}

struct Corruptor {
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
    dropout: f64,
    outlier: f64,
    outlier_size: f64,
}

impl Corruptor {
    fn new(seed: u64, spec: &SynthSpec) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise: (spec.noise > 0.0).then(|| Normal::new(0.0, spec.noise).expect("sigma > 0")),
            dropout: spec.dropout,
            outlier: spec.outlier,
            outlier_size: spec.pose_scale,
        }
    }

    /// Returns `None` for a dropped frame.
    fn corrupt(&mut self, mut joints: Vec<[f64; 2]>) -> Option<Vec<[f64; 2]>> {
        let dropped = self.dropout > 0.0 && self.rng.random_bool(self.dropout);
        if let Some(noise) = &self.noise {
            for j in joints.iter_mut() {
                j[0] += noise.sample(&mut self.rng);
                j[1] += noise.sample(&mut self.rng);
            }
        }
        if self.outlier > 0.0 && self.rng.random_bool(self.outlier) {
            let count = self.rng.random_range(1..=3);
            for _ in 0..count {
                let k = self.rng.random_range(0..joints.len());
                let ang = self.rng.random_range(0.0..TAU);
                let mag = self.outlier_size * self.rng.random_range(0.3..0.6);
                joints[k][0] += mag * ang.cos();
                joints[k][1] += mag * ang.sin();
            }
        }
        (!dropped).then_some(joints)
    }
}

fn synth_cyclic(spec: &SynthSpec, seed: u64, video_id: String) -> Result<SynthOutput> {
    let sig = Signature::from_seed(spec.athlete_seed);
    let total = (spec.duration * spec.fps).round() as usize;
    let (win_start, win_end) = spec
        .cyclic_window
        .map(|(s, e)| (s as usize, (e as usize).min(total.saturating_sub(1))))
        .unwrap_or((0, total.saturating_sub(1)));

    // Body-unit to pixel factor so that the mean pose scale is `pose_scale`.
    let mean_scale = (0..64)
        .map(|i| {
            let a = swimmer_angles(&sig, TAU * i as f64 / 64.0);
            pose_scale(&Pose::new(swimmer_joints(&sig, &a)).expect("finite")).scale
        })
        .sum::<f64>()
        / 64.0;
    let factor = spec.pose_scale / mean_scale;
    let offset = [640.0, 360.0];

    // Cumulative cycles since the start of cyclic motion.
    let c = &spec.cycle;
    let period_at = |f: f64| c.base + c.amplitude * (TAU * f / spec.fps / c.period + c.phase).sin();
    let constant = c.amplitude == 0.0;
    let mut cycles = vec![0.0f64; total];
    for f in win_start + 1..=win_end.min(total.saturating_sub(1)) {
        cycles[f] = if constant {
            (f - win_start) as f64 / c.base
        } else {
            cycles[f - 1] + 1.0 / period_at(f as f64 - 0.5)
        };
    }
    let position = |f: usize| -> f64 {
        if constant {
            ((f - win_start) as f64 % c.base) / c.base
        } else {
            cycles[f] - cycles[f].floor()
        }
    };

    let mut cycle_length = vec![None; total];
    for f in win_start..=win_end.min(total.saturating_sub(1)) {
        let target = cycles[f] - 1.0;
        if target < 0.0 {
            continue;
        }
        if constant {
            cycle_length[f] = Some(c.base);
            continue;
        }
        // last frame g with cycles[g] <= target, then interpolate
        let g = cycles[win_start..=f].partition_point(|&v| v <= target) + win_start - 1;
        let frac = (target - cycles[g]) / (cycles[g + 1] - cycles[g]);
        cycle_length[f] = Some(f as f64 - (g as f64 + frac));
    }

    let mut striking = Vec::new();
    if spec.transitions > 0 && spec.transition_strength > 0.0 && win_end > win_start {
        let t = spec.transitions as f64;
        let last = cycles[win_end];
        let offsets: Vec<f64> = (0..spec.transitions)
            .map(|k| {
                let u = sig.warp_origin + (2.0 * k as f64 + 1.0) / (2.0 * t);
                u - u.floor()
            })
            .collect();
        let mut marks: Vec<f64> = (0..=last.floor() as usize)
            .flat_map(|n| offsets.iter().map(move |u| n as f64 + u))
            .filter(|&m| m <= last)
            .collect();
        marks.sort_by(f64::total_cmp);
        for mark in marks {
            let g = cycles[win_start..=win_end].partition_point(|&v| v < mark) + win_start;
            if g > win_end {
                continue;
            }
            let frame = if g > win_start && (mark - cycles[g - 1]) < (cycles[g] - mark) {
                g - 1
            } else {
                g
            };
            striking.push(frame as Frame);
        }
        striking.dedup();
    }

    let mut corruptor = Corruptor::new(seed, spec);
    let mut idle_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1d1e);
    let idle_step = Normal::new(0.0, 0.03).expect("sigma > 0");
    let mut idle = [0.0f64; 6];
    let mut poses = Vec::with_capacity(total);
    let mut dropped = Vec::new();
    for f in 0..total {
        let angles = if f >= win_start && f <= win_end {
            let u = position(f);
            let psi = TAU * warp(u, spec.transitions, spec.transition_strength, sig.warp_origin);
            swimmer_angles(&sig, psi)
        } else {
            for s in idle.iter_mut() {
                // Ornstein-Uhlenbeck step with about one second reversion time
                *s += -*s / spec.fps + idle_step.sample(&mut idle_rng);
            }
            idle_angles(&idle)
        };
        let mut joints = swimmer_joints(&sig, &angles);
        scale_to(&mut joints, factor, offset);
        match corruptor.corrupt(joints) {
            Some(j) => poses.push(TimedPose {
                frame: f as Frame,
                pose: Pose::new(j)?,
            }),
            None => dropped.push(f as Frame),
        }
    }

    Ok(SynthOutput {
        sequence: PoseSequence::new(video_id, spec.fps, poses)?,
        truth: SynthTruth::Cyclic(CyclicTruth {
            cycle_length,
            cyclic_range: (win_start as Frame, win_end as Frame),
        }),
        striking_frames: striking,
        dropped,
    })
}

/// Leg/arm/torso configuration of an upright runner.
#[derive(Clone, Copy, Debug)]
struct RunAngles {
    /// Hip angles from vertical, positive forward. Index 0 right, 1 left.
    hip: [f64; 2],
    knee: [f64; 2],
    shoulder: [f64; 2],
    elbow: [f64; 2],
    lean: f64,
}

impl RunAngles {
    fn lerp(&self, other: &Self, s: f64) -> Self {
        let e = 0.5 - 0.5 * (PI * s).cos();
        let l = |a: f64, b: f64| a + (b - a) * e;
        let l2 = |a: [f64; 2], b: [f64; 2]| [l(a[0], b[0]), l(a[1], b[1])];
        Self {
            hip: l2(self.hip, other.hip),
            knee: l2(self.knee, other.knee),
            shoulder: l2(self.shoulder, other.shoulder),
            elbow: l2(self.elbow, other.elbow),
            lean: l(self.lean, other.lean),
        }
    }

    fn swapped(&self) -> Self {
        Self {
            hip: [self.hip[1], self.hip[0]],
            knee: [self.knee[1], self.knee[0]],
            shoulder: [self.shoulder[1], self.shoulder[0]],
            elbow: [self.elbow[1], self.elbow[0]],
            lean: self.lean,
        }
    }
}

/// Direction at angle `a` from straight down, positive towards +x.
fn down(a: f64) -> [f64; 2] {
    [a.sin(), a.cos()]
}

fn runner_joints(sig: &Signature, a: &RunAngles) -> Vec<[f64; 2]> {
    let hip_c = [0.0, 0.0];
    let up = [a.lean.sin(), -a.lean.cos()];
    let sh_c = add(hip_c, up, sig.torso * 0.9);
    let neck = add(sh_c, up, sig.neck);
    let head = add(neck, [up[0] + 0.15, up[1]], sig.head);
    let mut out = vec![head, neck];
    for side in 0..2 {
        let sh = [sh_c[0] + (side as f64 - 0.5) * 4.0, sh_c[1]];
        let el = add(sh, down(a.shoulder[side]), sig.upper_arm);
        let wr = add(el, down(a.shoulder[side] + a.elbow[side]), sig.forearm);
        out.extend([sh, el, wr]);
    }
    let mut legs = Vec::new();
    for side in 0..2 {
        let hip = [hip_c[0] + (side as f64 - 0.5) * sig.hip_width * 0.5, hip_c[1]];
        let kn = add(hip, down(a.hip[side]), sig.thigh);
        let an = add(kn, down(a.hip[side] - a.knee[side]), sig.shin);
        legs.extend([hip, kn, an]);
    }
    // storage order: r_shoulder r_elbow r_wrist l_shoulder l_elbow l_wrist, then hips
    out.extend(legs);
    out
}

/// Key configurations of one run-up step with the right leg pushing off.
fn step_keys(sig: &Signature) -> [RunAngles; 4] {
    let st = sig.lean * 0.5;
    let arm = |r: f64| [-0.8 * r, 0.8 * r];
    let jump_start = RunAngles {
        hip: [-0.1, -0.3],
        knee: [0.35, 1.2],
        shoulder: arm(0.1),
        elbow: [-1.4, -1.4],
        lean: 0.18 + st,
    };
    let jump_end = RunAngles {
        hip: [-0.55, 0.6],
        knee: [0.05, 1.4],
        shoulder: arm(-0.55),
        elbow: [-1.3, -1.5],
        lean: 0.2 + st,
    };
    let air_end = RunAngles {
        hip: [-0.3, 0.35],
        knee: [1.2, 0.3],
        shoulder: arm(-0.35),
        elbow: [-1.5, -1.2],
        lean: 0.16 + st,
    };
    let land_end = RunAngles {
        hip: [-0.3, -0.1],
        knee: [1.2, 0.35],
        shoulder: arm(0.1),
        elbow: [-1.4, -1.4],
        lean: 0.18 + st,
    };
    [jump_start, jump_end, air_end, land_end]
}

fn synth_longjump(spec: &SynthSpec, seed: u64, video_id: String) -> Result<SynthOutput> {
    let sig = Signature::from_seed(spec.athlete_seed);
    let lj = &spec.longjump;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x10_9e);
    let mut dur = |mean: f64| -> usize {
        let j = if lj.jitter > 0.0 {
            rng.random_range(-lj.jitter..lj.jitter)
        } else {
            0.0
        };
        ((mean * (1.0 + j)).round() as usize).max(2)
    };

    let keys = step_keys(&sig);
    // (label, start config, end config, frames)
    let mut segments: Vec<(PhaseLabel, RunAngles, RunAngles, usize)> = Vec::new();
    for step in 0..lj.steps {
        let k: Vec<RunAngles> = if step % 2 == 0 {
            keys.to_vec()
        } else {
            keys.iter().map(RunAngles::swapped).collect()
        };
        segments.push((PhaseLabel::Jump, k[0], k[1], dur(lj.jump)));
        segments.push((PhaseLabel::Airtime, k[1], k[2], dur(lj.airtime)));
        // landing ends in the next step's start configuration (legs swapped)
        let next_start = if step % 2 == 0 { keys[0].swapped() } else { keys[0] };
        let land_end = RunAngles {
            hip: next_start.hip,
            knee: next_start.knee,
            ..k[3]
        };
        segments.push((PhaseLabel::Landing, k[2], land_end, dur(lj.landing)));
    }
    let takeoff = RunAngles {
        hip: [-0.45, 0.7],
        knee: [0.1, 1.3],
        shoulder: [-2.6, -2.4],
        elbow: [-0.3, -0.3],
        lean: 0.05,
    };
    let sail = RunAngles {
        hip: [0.9, 1.0],
        knee: [0.9, 0.7],
        shoulder: [-3.0, -2.9],
        elbow: [-0.2, -0.2],
        lean: -0.2,
    };
    let reach = RunAngles {
        hip: [1.45, 1.45],
        knee: [0.15, 0.15],
        shoulder: [1.3, 1.2],
        elbow: [-0.2, -0.2],
        lean: 0.55,
    };
    let flight = dur(lj.flight);
    let first_half = flight / 2;
    segments.push((PhaseLabel::Flight, takeoff, sail, first_half));
    segments.push((PhaseLabel::Flight, sail, reach, flight - first_half));
    let sit = RunAngles {
        hip: [1.3, 1.3],
        knee: [1.9, 1.9],
        shoulder: [0.9, 0.8],
        elbow: [-0.6, -0.6],
        lean: 0.9,
    };
    segments.push((PhaseLabel::FinalLanding, reach, sit, dur(lj.final_landing)));

    // Trim a random part of the first jump so trials do not all start alike.
    let trim = rng.random_range(0..=segments[0].3 / 2);

    let mut labels = Vec::new();
    let mut configs = Vec::new();
    for (label, a, b, n) in &segments {
        for i in 0..*n {
            configs.push(a.lerp(b, i as f64 / *n as f64));
            labels.push(*label);
        }
    }
    let labels: Vec<PhaseLabel> = labels.split_off(trim);
    let configs: Vec<RunAngles> = configs.split_off(trim);

    let mean_scale = configs
        .iter()
        .step_by(7)
        .map(|a| pose_scale(&Pose::new(runner_joints(&sig, a)).expect("finite")).scale)
        .sum::<f64>()
        / configs.iter().step_by(7).count() as f64;
    let factor = spec.pose_scale / mean_scale;

    let mut corruptor = Corruptor::new(seed, spec);
    let pan = Normal::new(0.0, lj.pan_jitter.max(1e-9)).expect("sigma > 0");
    let mut cam = [640.0, 400.0];
    let mut zoom = 1.0;
    let mut poses = Vec::new();
    let mut dropped = Vec::new();
    for (f, a) in configs.iter().enumerate() {
        if lj.pan_jitter > 0.0 {
            cam[0] += pan.sample(&mut rng);
            cam[1] += 0.3 * pan.sample(&mut rng);
        }
        zoom *= 1.0 + 2e-4 * rng.random_range(-1.0..1.0);
        let mut joints = runner_joints(&sig, a);
        scale_to(&mut joints, factor * zoom, cam);
        match corruptor.corrupt(joints) {
            Some(j) => poses.push(TimedPose {
                frame: f as Frame,
                pose: Pose::new(j)?,
            }),
            None => dropped.push(f as Frame),
        }
    }

    let flight_start = labels
        .iter()
        .position(|&l| l == PhaseLabel::Flight)
        .expect("flight segment present");
    let step_count = labels[..flight_start]
        .iter()
        .enumerate()
        .filter(|&(i, &l)| l == PhaseLabel::Jump && (i == 0 || labels[i - 1] != PhaseLabel::Jump))
        .count() as u32;

    Ok(SynthOutput {
        sequence: PoseSequence::new(video_id, spec.fps, poses)?,
        truth: SynthTruth::LongJump(LongJumpTruth {
            runup_duration: flight_start as f64 / spec.fps,
            labels,
            step_count,
        }),
        striking_frames: Vec::new(),
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_constant_period_repeats_exactly() {
        let spec = SynthSpec {
            noise: 0.0,
            duration: 6.0,
            ..SynthSpec::cyclic()
        };
        let out = synth(&spec, 3).unwrap();
        let seq = &out.sequence;
        assert_eq!(seq.len(), 300);
        for f in 0..240u32 {
            assert_eq!(seq.get(f), seq.get(f + 60), "frame {f}");
        }
        let truth = out.cyclic_truth().unwrap();
        assert_eq!(truth.at(59), None);
        assert_eq!(truth.at(60), Some(60.0));
    }

    #[test]
    fn dropout_rate_is_binomial() {
        let spec = SynthSpec {
            dropout: 0.1,
            duration: 60.0,
            ..SynthSpec::cyclic()
        };
        let out = synth(&spec, 11).unwrap();
        let n = 3000.0;
        let missing = out.dropped.len() as f64;
        // 4 sigma binomial band
        let sd = (n * 0.1 * 0.9f64).sqrt();
        assert!((missing - 300.0).abs() < 4.0 * sd, "missing {missing}");
        assert_eq!(out.sequence.len() + out.dropped.len(), 3000);
    }

    #[test]
    fn longjump_truth_counts() {
        let spec = SynthSpec::longjump();
        let out = synth(&spec, 5).unwrap();
        let t = out.longjump_truth().unwrap();
        assert_eq!(t.step_count, 12);
        let runs = |label: PhaseLabel| {
            t.labels
                .iter()
                .enumerate()
                .filter(|&(i, &l)| l == label && (i == 0 || t.labels[i - 1] != label))
                .count()
        };
        assert_eq!(runs(PhaseLabel::Flight), 1);
        assert_eq!(runs(PhaseLabel::FinalLanding), 1);
        assert_eq!(t.labels.len(), out.sequence.len());
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = SynthSpec {
            dropout: 0.05,
            outlier: 0.02,
            ..SynthSpec::cyclic()
        };
        assert_eq!(synth(&spec, 9).unwrap(), synth(&spec, 9).unwrap());
        assert_ne!(synth(&spec, 9).unwrap().sequence, synth(&spec, 10).unwrap().sequence);
    }

    #[test]
    fn modulated_truth_tracks_profile() {
        let spec = SynthSpec {
            cycle: CycleProfile {
                base: 62.0,
                amplitude: 4.0,
                period: 10.0,
                phase: 0.0,
            },
            ..SynthSpec::cyclic()
        };
        let out = synth(&spec, 1).unwrap();
        let t = out.cyclic_truth().unwrap();
        for f in (100..1500).step_by(50) {
            let len = t.at(f).unwrap();
            assert!((57.9..=66.1).contains(&len), "frame {f}: {len}");
        }
    }

    #[test]
    fn invalid_specs() {
        let bad = SynthSpec {
            dropout: 1.5,
            ..SynthSpec::cyclic()
        };
        assert!(matches!(synth(&bad, 0), Err(Error::InvalidSpec(_))));
        let bad = SynthSpec {
            cycle: CycleProfile {
                base: 3.0,
                ..CycleProfile::default()
            },
            ..SynthSpec::cyclic()
        };
        assert!(synth(&bad, 0).is_err());
    }
}
