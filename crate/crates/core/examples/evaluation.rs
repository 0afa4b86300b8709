//! Evaluation metrics: event AP at an IoU threshold, stroke length errors and
//! cyclic range coverage.

use std::collections::BTreeMap;

use posemine::cycles::{mine_cycles, CycleConfig};
use posemine::eval::{event_ap, iou, range_eval, stroke_eval, Event, StrokeTruth};
use posemine::io::synth::{synth, SynthSpec};

fn main() -> posemine::Result<()> {
    let truth = vec![Event::new("v", 0, 9, "flight"), Event::new("v", 20, 29, "flight")];
    let preds = vec![(Event::new("v", 1, 10, "flight"), 0.9), (Event::new("v", 40, 45, "flight"), 0.4)];
    println!("iou {:.3}", iou(&preds[0].0, &truth[0]));
    println!("AP at 0.5: {:?}", event_ap(&preds, &truth, "flight", 0.5));

    let spec = SynthSpec { duration: 30.0, cyclic_window: Some((200, 1300)), ..SynthSpec::cyclic() };
    let out = synth(&spec, 2)?;
    let truth = out.cyclic_truth().expect("cyclic truth");
    let mined = mine_cycles(&out.sequence, &CycleConfig::default())?;
    let id = out.sequence.video_id().to_string();
    let gt: Vec<StrokeTruth> = (300..1300)
        .step_by(100)
        .filter_map(|f| truth.at(f).map(|length| StrokeTruth { video_id: id.clone(), frame: f, length }))
        .collect();
    let curves = BTreeMap::from([(id, mined.curve.clone())]);
    let report = stroke_eval(&curves, &gt);
    println!(
        "stroke length: mean abs error {:?}, {} off by more than 2 frames, {} not covered",
        report.avg_error, report.over_two, report.not_detected
    );

    let ranges = range_eval(&mined.ranges, truth.cyclic_range)?;
    println!("range coverage {:.1}%, over-detection {:.1}%", ranges.coverage, ranges.overdetect);
    Ok(())
}
