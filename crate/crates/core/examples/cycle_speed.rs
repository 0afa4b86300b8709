//! Recovers a slowly varying stroke length from a noisy synthetic swimmer and
//! prints it next to the ground truth.

use posemine::cycles::{mine_cycles, CycleConfig};
use posemine::io::synth::{synth, CycleProfile, SynthSpec};

fn main() -> posemine::Result<()> {
    let spec = SynthSpec {
        duration: 40.0,
        cycle: CycleProfile { base: 62.0, amplitude: 4.0, period: 25.0, phase: 0.0 },
        noise: 2.0,
        dropout: 0.05,
        outlier: 0.02,
        cyclic_window: Some((250, 1750)),
        ..SynthSpec::cyclic()
    };
    let out = synth(&spec, 7)?;
    let truth = out.cyclic_truth().expect("cyclic truth");
    let mined = mine_cycles(&out.sequence, &CycleConfig::default())?;

    println!("cyclic ranges {:?} (true {:?})", mined.ranges, truth.cyclic_range);
    println!("{} of {} differences kept", mined.kept.iter().filter(|&&k| k).count(), mined.points.len());
    println!("{:>6} {:>9} {:>9} {:>9}", "frame", "fitted", "truth", "strokes/min");
    for frame in (0..2000).step_by(125) {
        if let Some(len) = mined.curve.evaluate(frame) {
            let t = truth.at(frame).map_or("-".into(), |t| format!("{t:.2}"));
            println!("{frame:>6} {len:>9.2} {t:>9} {:>9.1}", 60.0 * out.sequence.fps() / len);
        }
    }
    Ok(())
}
