use std::path::Path;
use std::process::{Command, Output};

use posemine::io::config::Config;
use posemine::io::posefile::{format_poses, parse_poses, PoseHeader};
use posemine::io::synth::{synth, SynthSpec};
use posemine::{Pose, PoseSequence, TimedPose};
use proptest::prelude::*;

fn posemine(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posemine"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn write_synth(dir: &Path, name: &str, extra: &[&str]) {
    let mut args = vec!["synth", "--duration", "12", "--output", name];
    args.extend_from_slice(extra);
    let out = posemine(dir, &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pose_files_round_trip_exactly(
        frames in prop::collection::btree_set(0u32..100_000, 1..20),
        coords in prop::collection::vec(prop::array::uniform2(-1e12f64..1e12), 60),
        joints in 2usize..4,
    ) {
        let poses: Vec<TimedPose> = frames
            .iter()
            .enumerate()
            .map(|(i, &frame)| {
                let j: Vec<[f64; 2]> = (0..joints).map(|k| coords[(i * joints + k) % coords.len()]).collect();
                TimedPose { frame, pose: Pose::new(j).unwrap() }
            })
            .collect();
        let seq = PoseSequence::new("clip", 29.97, poses).unwrap();
        let header = PoseHeader::for_sequence(&seq, "test");
        let back = parse_poses(&format_poses(&seq, &header)).unwrap();
        prop_assert_eq!(back.sequence, seq);
    }
}

#[test]
fn generator_truth_is_consistent_with_poses() {
    let spec = SynthSpec { dropout: 0.1, duration: 10.0, ..SynthSpec::cyclic() };
    let out = synth(&spec, 3).unwrap();
    let truth = out.cyclic_truth().unwrap();
    let total = truth.cycle_length.len() as u32;
    let mut all: Vec<u32> = out.sequence.frames().chain(out.dropped.iter().copied()).collect();
    all.sort_unstable();
    assert_eq!(all, (0..total).collect::<Vec<_>>());
    assert_eq!(synth(&spec, 3).unwrap().sequence, out.sequence);

    let lj = synth(&SynthSpec::longjump(), 4).unwrap();
    let t = lj.longjump_truth().unwrap();
    assert!(lj.sequence.frames().all(|f| (f as usize) < t.labels.len()));
}

#[test]
fn config_file_and_flags_compose() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_synth(d, "a.poses", &[]);
    std::fs::write(d.join("cfg.toml"), "s_ref = 50.0\n[cycles]\ngap_threshold = 4\n").unwrap();

    let out = posemine(d, &["--config", "cfg.toml", "--out-dir", "o1", "cycles", "a.poses"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let echoed = Config::from_toml(&std::fs::read_to_string(d.join("o1/config.toml")).unwrap()).unwrap();
    assert_eq!(echoed.s_ref, 50.0);
    assert_eq!(echoed.cycles.s_ref, 50.0);
    assert_eq!(echoed.cycles.gap_threshold, 4);

    let out = posemine(d, &["--config", "cfg.toml", "--s-ref", "80", "--out-dir", "o2", "cycles", "a.poses"]);
    assert!(out.status.success());
    let echoed = Config::from_toml(&std::fs::read_to_string(d.join("o2/config.toml")).unwrap()).unwrap();
    assert_eq!(echoed.s_ref, 80.0);
    assert_eq!(echoed.stability.dist.s_ref, 80.0);
    assert_eq!(echoed.cycles.gap_threshold, 4);
}

#[test]
fn exit_codes_separate_input_and_algorithm_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_synth(d, "a.poses", &[]);
    std::fs::write(d.join("empty.poses"), "").unwrap();
    std::fs::write(
        d.join("nodata.poses"),
        "posemine-poses 1\nvideo_id e\nfps 50\njoint_count 2\njoint_names a b\ndetector x\ndata\n",
    )
    .unwrap();

    for file in ["empty.poses", "nodata.poses", "missing.poses"] {
        let out = posemine(d, &["--out-dir", "bad", "cycles", file]);
        assert_eq!(out.status.code(), Some(2), "{file}");
    }
    assert!(!d.join("bad").exists());
    assert_eq!(posemine(d, &["cycles"]).status.code(), Some(2));
    assert_eq!(posemine(d, &["--s-ref", "-1", "cycles", "a.poses"]).status.code(), Some(2));

    let out = posemine(d, &["rate", "a.poses", "--frame", "0"]);
    assert_eq!(out.status.code(), Some(3));
    let out = posemine(d, &["rate", "a.poses", "--frame", "400"]);
    assert!(out.status.success());
    let rate: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!((rate - 50.0).abs() < 2.0, "{rate}");

    // a clip of a different athlete standing still does not occur anywhere
    write_synth(d, "still.poses", &["--athlete", "77", "--amplitude", "0", "--window", "5000", "6000"]);
    let out = posemine(d, &["--out-dir", "st", "stability", "--reference", "still.poses", "--ref-start", "0", "--ref-end", "40", "a.poses"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_pipes_into_cycles() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let poses = posemine(d, &["synth", "--duration", "12"]);
    assert!(poses.status.success());
    let mut child = Command::new(env!("CARGO_BIN_EXE_posemine"))
        .current_dir(d)
        .args(["--out-dir", "o", "cycles", "-"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write;
    child.stdin.take().unwrap().write_all(&poses.stdout).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let ranges = std::fs::read_to_string(d.join("o/ranges.csv")).unwrap();
    assert!(ranges.starts_with("video_id,start,end\nsynth-cyclic-0,"));
    let curve = std::fs::read_to_string(d.join("o/synth-cyclic-0.curve.csv")).unwrap();
    assert!(curve.starts_with("frame,raw_diff,kept_flag,fitted_value\n"));
}
