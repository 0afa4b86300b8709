//! The `posemine` command-line front end.
//!
//! Exit codes: 0 on success, 2 on input or usage errors, 3 when an algorithm
//! cannot produce a result (no matches, uncovered frame, ...).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::cycles::{curve_rows, cycle_rate, mine_cycles, CycleMining};
use crate::error::{Error, Result};
use crate::eval::{
    label_events, phase_map, range_eval, scored_events, stroke_eval, Event, MapReport,
};
use crate::io::config::Config;
use crate::io::gt::{format_csv, labels_from_events, range_of, read_events, read_folds, read_stroke_truth};
use crate::io::posefile::{format_poses, read_pose_file, PoseHeader};
use crate::io::synth::{synth, CycleProfile, SynthKind, SynthSpec, SynthTruth};
use crate::io::write_atomic;
use crate::phase::{
    derive_kinematics, fit_model, viterbi, PhaseLabel, PhaseModel, PhasePrediction,
};
use crate::pose::{Frame, Pose, PoseSequence, TimedPose};
use crate::saliency::{saliency_profile, striking_poses};
use crate::stability::{edit_match, extract_matches, stability_score, MatchParams};

#[derive(Parser, Debug)]
#[command(name = "posemine", version, about = "Mining of noisy 2D pose sequences")]
struct Cli {
    /// Reference pose scale for normalized distances.
    #[arg(long, global = true)]
    s_ref: Option<f64>,
    /// Overrides the frame rate stored in pose files.
    #[arg(long, global = true)]
    fps: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving all artifacts.
    #[arg(long, global = true, default_value = "posemine-out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cycle lengths and cyclic ranges of pose files.
    Cycles {
        /// Pose files; `-` reads standard input.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Use only the joints from the hips downwards (kick rate).
        #[arg(long)]
        kick: bool,
    },
    /// Cycles per minute at one frame.
    Rate {
        input: PathBuf,
        #[arg(long)]
        frame: Frame,
        #[arg(long)]
        kick: bool,
    },
    /// Saliency profile and temporally striking poses.
    Salient {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        top_n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Stability score of a reference clip over pose files.
    Stability {
        #[command(flatten)]
        reference: ReferenceArgs,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        th_match: Option<f64>,
    },
    /// Compares a reference clip on an athlete's own and another recording.
    Identify {
        #[command(flatten)]
        reference: ReferenceArgs,
        #[arg(long)]
        own: PathBuf,
        #[arg(long)]
        other: PathBuf,
    },
    /// Long jump phase model lifecycle.
    Phase {
        #[command(subcommand)]
        action: PhaseAction,
    },
    /// Stroke length, cyclic range and event evaluation.
    Eval(EvalArgs),
    /// Writes a synthetic pose sequence and its ground truth.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct ReferenceArgs {
    /// Pose file holding the reference clip.
    #[arg(long)]
    reference: PathBuf,
    /// First frame of the clip within the reference file.
    #[arg(long)]
    ref_start: Option<Frame>,
    /// Last frame of the clip within the reference file.
    #[arg(long)]
    ref_end: Option<Frame>,
}

#[derive(Subcommand, Debug)]
enum PhaseAction {
    /// Fits a phase model on labelled pose files.
    Train {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Events CSV labelling every frame of the inputs.
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        /// Output model file (inside the output directory when relative).
        #[arg(long, default_value = "phase_model.json")]
        model: PathBuf,
    },
    /// Decodes phases, events and run-up kinematics.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Cross-validated event AP and kinematics.
    Eval {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        events: PathBuf,
        /// `video_id,fold` CSV; without it each video is its own fold.
        #[arg(long)]
        folds: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Pose files whose cycle curves are evaluated.
    #[arg(long, num_args = 1..)]
    poses: Vec<PathBuf>,
    /// `video_id,frame,length` stroke annotations.
    #[arg(long)]
    strokes: Option<PathBuf>,
    /// Events CSV with the true cyclic range of each video.
    #[arg(long)]
    ranges: Option<PathBuf>,
    /// Label of the cyclic range events.
    #[arg(long, default_value = "cyclic")]
    range_label: String,
    /// Predicted events CSV.
    #[arg(long)]
    pred_events: Option<PathBuf>,
    /// True events CSV.
    #[arg(long)]
    truth_events: Option<PathBuf>,
    #[arg(long)]
    kick: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Cyclic,
    Longjump,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "cyclic")]
    kind: KindArg,
    /// Seconds of recording (cyclic).
    #[arg(long)]
    duration: Option<f64>,
    /// Base cycle length in frames.
    #[arg(long)]
    base: Option<f64>,
    /// Cycle length modulation amplitude in frames.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Modulation period in seconds.
    #[arg(long)]
    period: Option<f64>,
    /// Joint noise in pixels.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    outlier: Option<f64>,
    #[arg(long)]
    athlete: Option<u64>,
    /// Run-up steps (long jump).
    #[arg(long)]
    steps: Option<u32>,
    /// Cyclic motion only within these frames.
    #[arg(long, num_args = 2, value_names = ["START", "END"])]
    window: Option<Vec<Frame>>,
    /// TOML file with a full generator spec.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Pose file destination; `-` writes standard output.
    #[arg(long, default_value = "-")]
    output: PathBuf,
    /// Ground truth destination (CSV).
    #[arg(long)]
    truth: Option<PathBuf>,
}

/// Maps an error onto the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. }
        | Error::Schema(_)
        | Error::Io(_)
        | Error::InvalidArgument(_)
        | Error::InvalidSubset(_)
        | Error::IndexOutOfRange { .. }
        | Error::DimensionMismatch { .. }
        | Error::InvalidPose(_)
        | Error::InvalidSpec(_)
        | Error::EmptyPhase(_) => 2,
        Error::DegeneratePose
        | Error::InsufficientData(_)
        | Error::OutOfRange(_)
        | Error::NoMatches
        | Error::ImpossibleObservation
        | Error::NoFlightPhase => 3,
    }
}

/// Runs the command line taken from the process arguments.
pub fn main() -> i32 {
    run(std::env::args_os())
}

/// Runs a command line and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Ctx {
    out_dir: PathBuf,
    cfg: Config,
    fps: Option<f64>,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        self.write_path(&self.path(name), text)
    }

    fn write_path(&self, path: &Path, text: &str) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        write_atomic(path, text.as_bytes())
    }

    fn echo_config(&self) -> Result<()> {
        self.write("config.toml", &self.cfg.to_toml()?)
    }

    fn read(&self, path: &Path) -> Result<PoseSequence> {
        let seq = read_pose_file(path)?.sequence;
        match self.fps {
            Some(fps) => PoseSequence::new(seq.video_id(), fps, seq.poses().to_vec()),
            None => Ok(seq),
        }
    }

    /// Reads pose files in parallel; empty files are input errors.
    fn read_all(&self, paths: &[PathBuf]) -> Result<Vec<PoseSequence>> {
        let seqs: Vec<PoseSequence> = paths.par_iter().map(|p| self.read(p)).collect::<Result<_>>()?;
        if let Some((p, _)) = paths.iter().zip(&seqs).find(|(_, s)| s.is_empty()) {
            return Err(Error::InvalidArgument(format!("{} contains no poses", p.display())));
        }
        let mut ids: Vec<&str> = seqs.iter().map(|s| s.video_id()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate video ids among inputs".into()));
        }
        Ok(seqs)
    }
}

fn file_stem(video_id: &str) -> String {
    video_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.s_ref {
        if !(s > 0.0) {
            return Err(Error::InvalidArgument("--s-ref must be positive".into()));
        }
        cfg.s_ref = s;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(fps) = cli.fps {
        cfg.fps = Some(fps);
    }
    cfg.propagate();
    let ctx = Ctx {
        out_dir: cli.out_dir,
        fps: cfg.fps,
        cfg,
    };
    match cli.command {
        Command::Cycles { inputs, kick } => cmd_cycles(ctx, &inputs, kick),
        Command::Rate { input, frame, kick } => cmd_rate(ctx, &input, frame, kick),
        Command::Salient { inputs, top_n, k } => cmd_salient(ctx, &inputs, top_n, k),
        Command::Stability { reference, inputs, th_match } => {
            cmd_stability(ctx, &reference, &inputs, th_match)
        }
        Command::Identify { reference, own, other } => cmd_identify(ctx, &reference, &own, &other),
        Command::Phase { action } => match action {
            PhaseAction::Train { inputs, events, k, model } => cmd_train(ctx, &inputs, &events, k, &model),
            PhaseAction::Predict { model, inputs } => cmd_predict(ctx, &model, &inputs),
            PhaseAction::Eval { inputs, events, folds, k } => {
                cmd_phase_eval(ctx, &inputs, &events, folds.as_deref(), k)
            }
        },
        Command::Eval(args) => cmd_eval(ctx, &args),
        Command::Synth(args) => cmd_synth(ctx, &args),
    }
}

fn cycle_config(ctx: &Ctx, kick: bool) -> crate::cycles::CycleConfig {
    let mut c = ctx.cfg.cycles.clone();
    if kick && c.joints.is_none() {
        c.joints = crate::cycles::CycleConfig::kick().joints;
    }
    c
}

fn mine_all(ctx: &Ctx, seqs: &[PoseSequence], kick: bool) -> Result<Vec<CycleMining>> {
    let cfg = cycle_config(ctx, kick);
    seqs.par_iter().map(|s| mine_cycles(s, &cfg)).collect()
}

#[derive(Serialize)]
struct RangeRow<'a> {
    video_id: &'a str,
    start: Frame,
    end: Frame,
}

fn cmd_cycles(ctx: Ctx, inputs: &[PathBuf], kick: bool) -> Result<()> {
    let seqs = ctx.read_all(inputs)?;
    let mined = mine_all(&ctx, &seqs, kick)?;
    let mut ranges = Vec::new();
    for (seq, m) in seqs.iter().zip(&mined) {
        let stem = file_stem(seq.video_id());
        ctx.write(&format!("{stem}.curve.csv"), &format_csv(&curve_rows(m))?)?;
        for s in &m.skipped {
            eprintln!(
                "{}: skipped frames {}..={} ({} points): {}",
                seq.video_id(),
                s.start,
                s.end,
                s.points,
                s.reason
            );
        }
        ranges.extend(m.ranges.iter().map(|&(start, end)| RangeRow {
            video_id: seq.video_id(),
            start,
            end,
        }));
        println!(
            "{}: {} cyclic range(s), {} covered frames",
            seq.video_id(),
            m.ranges.len(),
            m.curve.covered_frames()
        );
    }
    ctx.write("ranges.csv", &format_csv(&ranges)?)?;
    ctx.echo_config()
}

fn cmd_rate(ctx: Ctx, input: &Path, frame: Frame, kick: bool) -> Result<()> {
    let seq = ctx.read_all(&[input.to_path_buf()])?.remove(0);
    let m = mine_cycles(&seq, &cycle_config(&ctx, kick))?;
    let rate = cycle_rate(&m.curve, frame)?;
    println!("{rate}");
    Ok(())
}

#[derive(Serialize)]
struct StrikingRow {
    rank: usize,
    frame: Frame,
    cluster_size: usize,
    saliency: f64,
}

fn cmd_salient(ctx: Ctx, inputs: &[PathBuf], top_n: Option<usize>, k: Option<usize>) -> Result<()> {
    let mut cfg = ctx.cfg.saliency.clone();
    if let Some(n) = top_n {
        cfg.top_n = n;
    }
    if let Some(k) = k {
        cfg.k = k;
    }
    let seqs = ctx.read_all(inputs)?;
    let results: Vec<_> = seqs
        .par_iter()
        .map(|s| {
            let profile = saliency_profile(s, cfg.w_l, cfg.w_s, cfg.distance, cfg.s_ref);
            striking_poses(s, &cfg).map(|set| (profile, set))
        })
        .collect::<Result<_>>()?;
    for (seq, (profile, set)) in seqs.iter().zip(results) {
        let stem = file_stem(seq.video_id());
        ctx.write(&format!("{stem}.saliency.csv"), &format_csv(&profile)?)?;
        let rows: Vec<StrikingRow> = set
            .representatives
            .iter()
            .enumerate()
            .map(|(i, r)| StrikingRow {
                rank: i + 1,
                frame: r.frame,
                cluster_size: r.cluster_size,
                saliency: r.saliency,
            })
            .collect();
        ctx.write(&format!("{stem}.striking.csv"), &format_csv(&rows)?)?;
        let mut reps: Vec<TimedPose> = set
            .representatives
            .iter()
            .map(|r| TimedPose { frame: r.frame, pose: r.pose.clone() })
            .collect();
        reps.sort_by_key(|t| t.frame);
        let rep_seq = PoseSequence::new(format!("{}-striking", seq.video_id()), seq.fps(), reps)?;
        let header = PoseHeader::for_sequence(&rep_seq, &format!("striking-poses-of:{}", seq.video_id()));
        ctx.write(&format!("{stem}.striking.poses"), &format_poses(&rep_seq, &header))?;
        if !set.converged {
            eprintln!("{}: affinity propagation did not converge", seq.video_id());
        }
        for (i, r) in set.representatives.iter().enumerate() {
            println!(
                "{}: #{} frame {} cluster size {}",
                seq.video_id(),
                i + 1,
                r.frame,
                r.cluster_size
            );
        }
    }
    ctx.echo_config()
}

fn reference_clip(ctx: &Ctx, r: &ReferenceArgs) -> Result<Vec<Pose>> {
    let seq = ctx.read_all(std::slice::from_ref(&r.reference))?.remove(0);
    let start = r.ref_start.unwrap_or(0);
    let end = r.ref_end.unwrap_or(Frame::MAX);
    if start > end {
        return Err(Error::InvalidArgument("--ref-start after --ref-end".into()));
    }
    let clip: Vec<Pose> = seq
        .poses()
        .iter()
        .filter(|t| t.frame >= start && t.frame <= end)
        .map(|t| t.pose.clone())
        .collect();
    if clip.len() < 2 {
        return Err(Error::InvalidArgument("reference clip needs at least two poses".into()));
    }
    Ok(clip)
}

#[derive(Serialize)]
struct ScoreRow {
    frame: Frame,
    score: f64,
}

#[derive(Serialize)]
struct AlignmentRow {
    match_index: usize,
    pat_index: usize,
    text_frame: Option<Frame>,
    op: crate::stability::EditOp,
}

fn cmd_stability(ctx: Ctx, reference: &ReferenceArgs, inputs: &[PathBuf], th_match: Option<f64>) -> Result<()> {
    let mut params: MatchParams = ctx.cfg.stability;
    if let Some(t) = th_match {
        params.th_match = t;
    }
    let clip = reference_clip(&ctx, reference)?;
    let seqs = ctx.read_all(inputs)?;
    let report = stability_score(&clip, &seqs, &params)?;
    for seq in &seqs {
        let stem = file_stem(seq.video_id());
        let frames: Vec<Frame> = seq.frames().collect();
        let (mat, scores) = edit_match(&clip, &seq.pose_list(), &params)?;
        let rows: Vec<ScoreRow> = frames
            .iter()
            .zip(&scores)
            .map(|(&frame, &score)| ScoreRow { frame, score })
            .collect();
        ctx.write(&format!("{stem}.scores.csv"), &format_csv(&rows)?)?;
        let align: Vec<AlignmentRow> = extract_matches(&mat, &scores, params.th_match)
            .iter()
            .enumerate()
            .flat_map(|(i, m)| {
                m.alignment.iter().map(move |a| (i, *a))
            })
            .map(|(i, a)| AlignmentRow {
                match_index: i,
                pat_index: a.pat,
                text_frame: a.text.map(|t| frames[t]),
                op: a.op,
            })
            .collect();
        ctx.write(&format!("{stem}.alignment.csv"), &format_csv(&align)?)?;
    }
    ctx.write("stability.csv", &format_csv(&report.per_match)?)?;
    println!("mean score {} over {} matches", report.mean_score, report.per_match.len());
    ctx.echo_config()
}

#[derive(Serialize)]
struct IdentifyRow<'a> {
    own: &'a str,
    other: &'a str,
    own_score: f64,
    other_score: f64,
    ratio: f64,
    different_athlete: bool,
}

fn cmd_identify(ctx: Ctx, reference: &ReferenceArgs, own: &Path, other: &Path) -> Result<()> {
    let params = MatchParams {
        th_match: ctx.cfg.identify.th_match,
        ..ctx.cfg.stability
    };
    let clip = reference_clip(&ctx, reference)?;
    let seqs = ctx.read_all(&[own.to_path_buf(), other.to_path_buf()])?;
    let own_score = stability_score(&clip, &seqs[..1], &params)?.mean_score;
    let other_score = stability_score(&clip, &seqs[1..], &params)?.mean_score;
    let ratio = if own_score > 0.0 {
        other_score / own_score
    } else if other_score == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    let row = IdentifyRow {
        own: seqs[0].video_id(),
        other: seqs[1].video_id(),
        own_score,
        other_score,
        ratio,
        different_athlete: ratio > ctx.cfg.identify.decision_threshold,
    };
    println!(
        "ratio {} ({})",
        ratio,
        if row.different_athlete { "different athlete" } else { "same athlete" }
    );
    ctx.write("identify.csv", &format_csv(&[row])?)?;
    ctx.echo_config()
}

fn labelled(ctx: &Ctx, inputs: &[PathBuf], events: &Path) -> Result<Vec<(PoseSequence, Vec<PhaseLabel>)>> {
    let seqs = ctx.read_all(inputs)?;
    let events = read_events(events)?;
    seqs.into_iter()
        .map(|s| {
            let l = labels_from_events(&s, &events)?;
            Ok((s, l))
        })
        .collect()
}

fn cmd_train(ctx: Ctx, inputs: &[PathBuf], events: &Path, k: Option<usize>, model_path: &Path) -> Result<()> {
    let mut cfg = ctx.cfg.phase.clone();
    if let Some(k) = k {
        cfg.k = k;
    }
    let train = labelled(&ctx, inputs, events)?;
    let model = fit_model(&train, &cfg)?;
    let path = if model_path.is_absolute() {
        model_path.to_path_buf()
    } else {
        ctx.path(&model_path.to_string_lossy())
    };
    ctx.write_path(&path, &model.to_json()?)?;
    println!("trained {} clusters on {} videos", model.k(), train.len());
    ctx.echo_config()
}

#[derive(Serialize)]
struct KinematicsRow {
    video_id: String,
    step_count: Option<u32>,
    runup_duration: Option<f64>,
}

fn kinematics_row(ctx: &Ctx, pred: &PhasePrediction, fps: f64) -> Result<KinematicsRow> {
    match derive_kinematics(pred, fps, &ctx.cfg.kinematics) {
        Ok(k) => Ok(KinematicsRow {
            video_id: pred.video_id.clone(),
            step_count: Some(k.step_count),
            runup_duration: Some(k.runup_duration),
        }),
        Err(Error::NoFlightPhase) => Ok(KinematicsRow {
            video_id: pred.video_id.clone(),
            step_count: None,
            runup_duration: None,
        }),
        Err(e) => Err(e),
    }
}

fn cmd_predict(ctx: Ctx, model_path: &Path, inputs: &[PathBuf]) -> Result<()> {
    let model = PhaseModel::from_json(&std::fs::read_to_string(model_path)?)?;
    let seqs = ctx.read_all(inputs)?;
    let preds: Vec<PhasePrediction> = seqs.par_iter().map(|s| viterbi(&model, s)).collect::<Result<_>>()?;
    let mut kin = Vec::new();
    for (seq, pred) in seqs.iter().zip(&preds) {
        let events = label_events(&pred.video_id, &pred.frames, &pred.labels);
        ctx.write(&format!("{}.phases.csv", file_stem(seq.video_id())), &format_csv(&events)?)?;
        kin.push(kinematics_row(&ctx, pred, seq.fps())?);
    }
    ctx.write("kinematics.csv", &format_csv(&kin)?)?;
    ctx.echo_config()
}

#[derive(Serialize)]
struct ApRow {
    class: String,
    ap: Option<f64>,
}

fn map_rows(r: &MapReport) -> Vec<ApRow> {
    let mut rows: Vec<ApRow> = r
        .per_class
        .iter()
        .map(|(c, ap)| ApRow { class: c.clone(), ap: *ap })
        .collect();
    rows.push(ApRow { class: "mAP".into(), ap: Some(r.map) });
    rows
}

#[derive(Serialize)]
struct KinematicsEvalRow {
    video_id: String,
    fold: u32,
    true_steps: u32,
    predicted_steps: Option<u32>,
    true_runup: f64,
    predicted_runup: Option<f64>,
}

fn cmd_phase_eval(ctx: Ctx, inputs: &[PathBuf], events: &Path, folds: Option<&Path>, k: Option<usize>) -> Result<()> {
    let mut cfg = ctx.cfg.phase.clone();
    if let Some(k) = k {
        cfg.k = k;
    }
    let data = labelled(&ctx, inputs, events)?;
    let fold_of: BTreeMap<String, u32> = match folds {
        Some(p) => read_folds(p)?.into_iter().map(|f| (f.video_id, f.fold)).collect(),
        None => data
            .iter()
            .enumerate()
            .map(|(i, (s, _))| (s.video_id().to_string(), i as u32))
            .collect(),
    };
    let folds_of_data: Vec<u32> = data
        .iter()
        .map(|(s, _)| {
            fold_of
                .get(s.video_id())
                .copied()
                .ok_or_else(|| Error::Schema(format!("video {} has no fold", s.video_id())))
        })
        .collect::<Result<_>>()?;
    let mut fold_ids = folds_of_data.clone();
    fold_ids.sort_unstable();
    fold_ids.dedup();
    if fold_ids.len() < 2 {
        return Err(Error::InvalidArgument("cross-validation needs at least two folds".into()));
    }

    let mut preds: Vec<(Event, f64)> = Vec::new();
    let mut truth: Vec<Event> = Vec::new();
    let mut kin = Vec::new();
    for &fold in &fold_ids {
        let train: Vec<(PoseSequence, Vec<PhaseLabel>)> = data
            .iter()
            .zip(&folds_of_data)
            .filter(|(_, &f)| f != fold)
            .map(|(d, _)| d.clone())
            .collect();
        let model = fit_model(&train, &cfg)?;
        for ((seq, labels), _) in data.iter().zip(&folds_of_data).filter(|(_, &f)| f == fold) {
            let pred = viterbi(&model, seq)?;
            let frames: Vec<Frame> = seq.frames().collect();
            truth.extend(label_events(seq.video_id(), &frames, labels));
            preds.extend(scored_events(&pred, &model.median_event_length));
            let gt = PhasePrediction {
                video_id: seq.video_id().to_string(),
                frames,
                labels: labels.clone(),
                log_likelihood: 0.0,
            };
            let true_k = derive_kinematics(&gt, seq.fps(), &ctx.cfg.kinematics)?;
            let row = kinematics_row(&ctx, &pred, seq.fps())?;
            kin.push(KinematicsEvalRow {
                video_id: seq.video_id().to_string(),
                fold,
                true_steps: true_k.step_count,
                predicted_steps: row.step_count,
                true_runup: true_k.runup_duration,
                predicted_runup: row.runup_duration,
            });
        }
    }
    let report = phase_map(&preds, &truth, ctx.cfg.eval.tau);
    ctx.write("phase_ap.csv", &format_csv(&map_rows(&report))?)?;
    ctx.write("phase_kinematics.csv", &format_csv(&kin)?)?;
    let exact = kin.iter().filter(|r| r.predicted_steps == Some(r.true_steps)).count();
    let runup: Vec<f64> = kin
        .iter()
        .filter_map(|r| r.predicted_runup.map(|p| (p - r.true_runup).abs()))
        .collect();
    println!("mAP {} at IoU > {}", report.map, report.tau);
    println!("step count exact in {exact}/{} videos", kin.len());
    if !runup.is_empty() {
        println!("run-up duration mean abs error {} s", runup.iter().sum::<f64>() / runup.len() as f64);
    }
    ctx.echo_config()
}

#[derive(Serialize)]
struct RangeEvalRow {
    video_id: String,
    coverage: f64,
    overdetect: f64,
}

fn cmd_eval(ctx: Ctx, args: &EvalArgs) -> Result<()> {
    let wants_curves = args.strokes.is_some() || args.ranges.is_some();
    if wants_curves && args.poses.is_empty() {
        return Err(Error::InvalidArgument("--strokes/--ranges need --poses".into()));
    }
    if args.pred_events.is_some() != args.truth_events.is_some() {
        return Err(Error::InvalidArgument("--pred-events and --truth-events go together".into()));
    }
    if !wants_curves && args.pred_events.is_none() {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    let strokes = args.strokes.as_deref().map(read_stroke_truth).transpose()?;
    let range_events = args.ranges.as_deref().map(read_events).transpose()?;
    let event_files = match (&args.pred_events, &args.truth_events) {
        (Some(p), Some(t)) => Some((read_events(p)?, read_events(t)?)),
        _ => None,
    };
    let mut wrote = false;
    if wants_curves {
        let seqs = ctx.read_all(&args.poses)?;
        let mined = mine_all(&ctx, &seqs, args.kick)?;
        let curves: BTreeMap<String, _> = seqs
            .iter()
            .zip(&mined)
            .map(|(s, m)| (s.video_id().to_string(), m.curve.clone()))
            .collect();
        if let Some(gt) = &strokes {
            let report = stroke_eval(&curves, gt);
            ctx.write("stroke_eval.csv", &format_csv(&report.rows)?)?;
            match report.avg_error {
                Some(a) => println!("stroke length: avg error {a} frames"),
                None => println!("stroke length: no estimate within 2 frames"),
            }
            println!("stroke length: {} above 2 frames, {} not detected", report.over_two, report.not_detected);
            wrote = true;
        }
        if let Some(events) = &range_events {
            let mut rows = Vec::new();
            for (s, m) in seqs.iter().zip(&mined) {
                let Some(gt) = range_of(events, s.video_id(), &args.range_label) else {
                    continue;
                };
                let r = range_eval(&m.ranges, gt)?;
                rows.push(RangeEvalRow {
                    video_id: s.video_id().to_string(),
                    coverage: r.coverage,
                    overdetect: r.overdetect,
                });
            }
            if rows.is_empty() {
                return Err(Error::InvalidArgument("no cyclic range annotations for the inputs".into()));
            }
            let n = rows.len() as f64;
            println!(
                "cyclic range: coverage {}%, over-detection {}%",
                rows.iter().map(|r| r.coverage).sum::<f64>() / n,
                rows.iter().map(|r| r.overdetect).sum::<f64>() / n
            );
            ctx.write("range_eval.csv", &format_csv(&rows)?)?;
            wrote = true;
        }
    }
    if let Some((pred, truth)) = event_files {
        let scored: Vec<(Event, f64)> = pred.into_iter().map(|e| {
            let c = e.len() as f64;
            (e, c)
        }).collect();
        let report = phase_map(&scored, &truth, ctx.cfg.eval.tau);
        ctx.write("event_ap.csv", &format_csv(&map_rows(&report))?)?;
        println!("mAP {} at IoU > {}", report.map, report.tau);
        wrote = true;
    }
    if wrote {
        ctx.echo_config()?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CycleTruthRow<'a> {
    video_id: &'a str,
    frame: Frame,
    length: Option<f64>,
    striking: u8,
}

fn cmd_synth(ctx: Ctx, args: &SynthArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(p) => toml::from_str::<SynthSpec>(&std::fs::read_to_string(p)?)
            .map_err(|e| Error::InvalidSpec(e.to_string()))?,
        None => match args.kind {
            KindArg::Cyclic => SynthSpec::cyclic(),
            KindArg::Longjump => SynthSpec::longjump(),
        },
    };
    if args.spec.is_none() || matches!(args.kind, KindArg::Longjump) {
        spec.kind = match args.kind {
            KindArg::Cyclic => SynthKind::Cyclic,
            KindArg::Longjump => SynthKind::Longjump,
        };
    }
    let c = &mut spec.cycle;
    *c = CycleProfile {
        base: args.base.unwrap_or(c.base),
        amplitude: args.amplitude.unwrap_or(c.amplitude),
        period: args.period.unwrap_or(c.period),
        phase: c.phase,
    };
    if let Some(v) = args.duration {
        spec.duration = v;
    }
    if let Some(v) = args.noise {
        spec.noise = v;
    }
    if let Some(v) = args.dropout {
        spec.dropout = v;
    }
    if let Some(v) = args.outlier {
        spec.outlier = v;
    }
    if let Some(v) = args.athlete {
        spec.athlete_seed = v;
    }
    if let Some(v) = args.steps {
        spec.longjump.steps = v;
    }
    if let Some(fps) = ctx.fps {
        spec.fps = fps;
    }
    if let Some(w) = &args.window {
        spec.cyclic_window = Some((w[0], w[1]));
    }
    let out = synth(&spec, ctx.cfg.seed)?;
    let header = PoseHeader::for_sequence(&out.sequence, "synthetic");
    let text = format_poses(&out.sequence, &header);
    if args.output.as_os_str() == "-" {
        print!("{text}");
    } else {
        ctx.write_path(&args.output, &text)?;
    }
    if let Some(path) = &args.truth {
        let csv = match &out.truth {
            SynthTruth::Cyclic(t) => {
                let rows: Vec<CycleTruthRow> = out
                    .sequence
                    .frames()
                    .map(|f| CycleTruthRow {
                        video_id: out.sequence.video_id(),
                        frame: f,
                        length: t.at(f),
                        striking: out.striking_frames.binary_search(&f).is_ok() as u8,
                    })
                    .collect();
                format_csv(&rows)?
            }
            SynthTruth::LongJump(t) => {
                let frames: Vec<Frame> = (0..t.labels.len() as Frame).collect();
                format_csv(&label_events(out.sequence.video_id(), &frames, &t.labels))?
            }
        };
        ctx.write_path(path, &csv)?;
    }
    Ok(())
}
