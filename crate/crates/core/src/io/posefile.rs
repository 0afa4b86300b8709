//! Line-oriented pose files.
//!
//! ```text
//! posemine-poses 1
//! video_id swim_001
//! fps 50
//! joint_count 14
//! joint_names head_top neck ...
//! detector synthetic
//! data
//! 0 x0 y0 x1 y1 ...
//! 1 ...
//! ```
//!
//! Records whose coordinates are not all finite (e.g. `nan` for a missing
//! joint) are partial detections and are skipped when reading.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pose::{Frame, Pose, PoseSequence, TimedPose, JOINT_NAMES};

pub const MAGIC: &str = "posemine-poses";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct PoseHeader {
    pub video_id: String,
    pub fps: f64,
    pub joint_count: usize,
    pub joint_names: Vec<String>,
    pub detector: String,
}

impl PoseHeader {
    /// Header for `seq` with the standard joint names when they fit.
    pub fn for_sequence(seq: &PoseSequence, detector: &str) -> Self {
        let n = seq.joint_count().unwrap_or(JOINT_NAMES.len());
        let joint_names = if n == JOINT_NAMES.len() {
            JOINT_NAMES.iter().map(|s| s.to_string()).collect()
        } else {
            (0..n).map(|i| format!("j{i}")).collect()
        };
        PoseHeader {
            video_id: seq.video_id().to_string(),
            fps: seq.fps(),
            joint_count: n,
            joint_names,
            detector: detector.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoseFile {
    pub header: PoseHeader,
    pub sequence: PoseSequence,
    /// Records dropped as partial detections.
    pub skipped: usize,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses the text of a pose file.
pub fn parse_poses(text: &str) -> Result<PoseFile> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next_field = |key: &str| -> Result<(usize, String)> {
        let (no, line) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("missing header field {key}")))?;
        let rest = line
            .strip_prefix(key)
            .filter(|r| r.is_empty() || r.starts_with(' '))
            .ok_or_else(|| parse_err(no, format!("expected {key}")))?;
        Ok((no, rest.trim().to_string()))
    };
    let (no, version) = next_field(MAGIC)?;
    if version.parse::<u32>().ok() != Some(VERSION) {
        return Err(parse_err(no, format!("unsupported version {version:?}")));
    }
    let (_, video_id) = next_field("video_id")?;
    let (no, fps) = next_field("fps")?;
    let fps: f64 = fps.parse().map_err(|_| parse_err(no, "invalid fps"))?;
    let (no, n) = next_field("joint_count")?;
    let joint_count: usize = n.parse().map_err(|_| parse_err(no, "invalid joint_count"))?;
    let (no, names) = next_field("joint_names")?;
    let joint_names: Vec<String> = names.split_whitespace().map(String::from).collect();
    if joint_names.len() != joint_count {
        return Err(Error::Schema(format!(
            "line {no}: {} joint names for joint_count {joint_count}",
            joint_names.len()
        )));
    }
    let (_, detector) = next_field("detector")?;
    next_field("data")?;

    let mut poses = Vec::new();
    let mut skipped = 0;
    let mut last: Option<Frame> = None;
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let frame: Frame = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(no, "invalid frame index"))?;
        let coords: Vec<f64> = tokens
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(no, format!("invalid number {t:?}"))))
            .collect::<Result<_>>()?;
        if coords.len() != 2 * joint_count {
            return Err(parse_err(
                no,
                format!("expected {} coordinates, found {}", 2 * joint_count, coords.len()),
            ));
        }
        if last.is_some_and(|l| frame <= l) {
            return Err(Error::Schema(format!(
                "line {no}: frame {frame} does not increase"
            )));
        }
        last = Some(frame);
        if coords.iter().any(|c| !c.is_finite()) {
            skipped += 1;
            continue;
        }
        let pose = Pose::from_flat(&coords).map_err(|e| parse_err(no, e.to_string()))?;
        poses.push(TimedPose { frame, pose });
    }
    let sequence = PoseSequence::new(video_id.clone(), fps, poses)
        .map_err(|e| Error::Schema(e.to_string()))?;
    Ok(PoseFile {
        header: PoseHeader {
            video_id,
            fps,
            joint_count,
            joint_names,
            detector,
        },
        sequence,
        skipped,
    })
}

/// Renders a pose file; coordinates use the shortest exact decimal form.
pub fn format_poses(seq: &PoseSequence, header: &PoseHeader) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "video_id {}", header.video_id);
    let _ = writeln!(out, "fps {}", header.fps);
    let _ = writeln!(out, "joint_count {}", header.joint_count);
    let _ = writeln!(out, "joint_names {}", header.joint_names.join(" "));
    let _ = writeln!(out, "detector {}", header.detector);
    out.push_str("data\n");
    for tp in seq.poses() {
        let _ = write!(out, "{}", tp.frame);
        for [x, y] in tp.pose.joints() {
            let _ = write!(out, " {x} {y}");
        }
        out.push('\n');
    }
    out
}

/// Reads a pose file; `-` reads standard input.
pub fn read_pose_file(path: &Path) -> Result<PoseFile> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else {
        std::fs::read_to_string(path)?
    };
    parse_poses(&text)
}

pub fn read_poses(path: &Path) -> Result<PoseSequence> {
    Ok(read_pose_file(path)?.sequence)
}

/// Writes `seq` atomically with a default header.
pub fn write_poses(seq: &PoseSequence, path: &Path) -> Result<()> {
    let header = PoseHeader::for_sequence(seq, "unknown");
    super::write_atomic(path, format_poses(seq, &header).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PoseSequence {
        let pose = |k: f64| {
            Pose::new(vec![[0.1 + k, 1.0 / 3.0], [1e-7, -2.5e10], [k.sqrt(), 7.0]]).unwrap()
        };
        PoseSequence::new(
            "clip one",
            50.0,
            vec![
                TimedPose { frame: 3, pose: pose(1.0) },
                TimedPose { frame: 7, pose: pose(2.0) },
            ],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let seq = sample();
        let header = PoseHeader::for_sequence(&seq, "test");
        let back = parse_poses(&format_poses(&seq, &header)).unwrap();
        assert_eq!(back.sequence, seq);
        assert_eq!(back.header, header);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.poses");
        write_poses(&seq, &path).unwrap();
        assert_eq!(read_poses(&path).unwrap(), seq);
    }

    #[test]
    fn short_record_reports_line() {
        let seq = sample();
        let mut text = format_poses(&seq, &PoseHeader::for_sequence(&seq, "t"));
        text.push_str("9 1 2 3 4 5\n");
        assert_eq!(
            parse_poses(&text).unwrap_err(),
            Error::Parse { line: 10, message: "expected 6 coordinates, found 5".into() }
        );
    }

    #[test]
    fn out_of_order_is_schema_error() {
        let seq = sample();
        let mut text = format_poses(&seq, &PoseHeader::for_sequence(&seq, "t"));
        text.push_str("5 1 2 3 4 5 6\n");
        assert!(matches!(parse_poses(&text), Err(Error::Schema(_))));
    }

    #[test]
    fn partial_records_skipped_and_names_checked() {
        let seq = sample();
        let mut text = format_poses(&seq, &PoseHeader::for_sequence(&seq, "t"));
        text.push_str("9 1 2 nan nan 5 6\n");
        let f = parse_poses(&text).unwrap();
        assert_eq!((f.sequence.len(), f.skipped), (2, 1));
        let bad = text.replace("joint_count 3", "joint_count 4");
        assert!(matches!(parse_poses(&bad), Err(Error::Schema(_))));
        assert!(matches!(parse_poses(""), Err(Error::Parse { .. })));
    }
}
