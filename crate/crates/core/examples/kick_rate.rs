//! Leg kick rate from lower-body joints only, next to the arm stroke rate.
//! Kicks are two or three beats per stroke cycle depending on the athlete.

use posemine::cycles::{mine_cycles, CycleConfig};
use posemine::io::synth::{synth, CycleProfile, SynthSpec};

fn main() -> posemine::Result<()> {
    for athlete in 1..=6 {
        let spec = SynthSpec {
            duration: 30.0,
            cycle: CycleProfile { base: 66.0, ..Default::default() },
            noise: 1.5,
            athlete_seed: athlete,
            transitions: 0,
            ..SynthSpec::cyclic()
        };
        let seq = synth(&spec, 1)?.sequence;
        let per_minute = |m: &posemine::cycles::CycleMining| m.curve.evaluate(750).map(|len| 60.0 * seq.fps() / len);
        let strokes = per_minute(&mine_cycles(&seq, &CycleConfig::default())?);
        let kicks = per_minute(&mine_cycles(&seq, &CycleConfig::kick())?);
        match (strokes, kicks) {
            (Some(s), Some(k)) => println!("athlete {athlete}: {s:5.1} strokes/min, {k:6.1} kicks/min ({:.2} per stroke)", k / s),
            _ => println!("athlete {athlete}: frame 750 not covered"),
        }
    }
    Ok(())
}
