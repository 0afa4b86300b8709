//! CSV annotation files: events (`video_id,t1,t2,label`), stroke lengths
//! (`video_id,frame,length`) and cross-validation folds (`video_id,fold`).

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Event, StrokeTruth};
use crate::phase::PhaseLabel;
use crate::pose::{Frame, PoseSequence};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FoldEntry {
    pub video_id: String,
    pub fold: u32,
}

fn csv_err(e: csv::Error) -> Error {
    match e.position() {
        Some(p) => Error::Parse {
            line: p.line() as usize,
            message: e.to_string(),
        },
        None => Error::Parse {
            line: 0,
            message: e.to_string(),
        },
    }
}

/// Parses CSV text with a header row into records.
pub fn parse_csv<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    rdr.deserialize().map(|r| r.map_err(csv_err)).collect()
}

/// Renders records as CSV with a header row.
pub fn format_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    parse_csv(&std::fs::read_to_string(path)?)
}

pub fn read_events(path: &Path) -> Result<Vec<Event>> {
    let events: Vec<Event> = read_csv(path)?;
    if let Some(e) = events.iter().find(|e| e.t1 > e.t2) {
        return Err(Error::Schema(format!(
            "event {} {}..{} ends before it starts",
            e.video_id, e.t1, e.t2
        )));
    }
    Ok(events)
}

#[derive(Deserialize)]
struct StrokeRecord {
    video_id: String,
    frame: Frame,
    length: Option<f64>,
}

/// Stroke annotations; rows with an empty `length` are skipped and extra
/// columns are ignored.
pub fn read_stroke_truth(path: &Path) -> Result<Vec<StrokeTruth>> {
    let rows: Vec<StrokeRecord> = read_csv(path)?;
    Ok(rows
        .into_iter()
        .filter_map(|r| {
            r.length.map(|length| StrokeTruth {
                video_id: r.video_id,
                frame: r.frame,
                length,
            })
        })
        .collect())
}

pub fn read_folds(path: &Path) -> Result<Vec<FoldEntry>> {
    read_csv(path)
}

/// Per-pose phase labels of `seq` taken from the events of its video.
pub fn labels_from_events(seq: &PoseSequence, events: &[Event]) -> Result<Vec<PhaseLabel>> {
    let mine: Vec<(&Event, PhaseLabel)> = events
        .iter()
        .filter(|e| e.video_id == seq.video_id())
        .map(|e| Ok((e, e.label.parse::<PhaseLabel>()?)))
        .collect::<Result<_>>()?;
    seq.frames()
        .map(|f| {
            mine.iter()
                .find(|(e, _)| e.t1 <= f && f <= e.t2)
                .map(|&(_, l)| l)
                .ok_or_else(|| {
                    Error::Schema(format!("video {} frame {f} has no phase label", seq.video_id()))
                })
        })
        .collect()
}

/// The inclusive range of the first event of `video_id` with `label`.
pub fn range_of(events: &[Event], video_id: &str, label: &str) -> Option<(Frame, Frame)> {
    events
        .iter()
        .find(|e| e.video_id == video_id && e.label == label)
        .map(|e| (e.t1, e.t2))
}
