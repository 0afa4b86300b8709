//! Matches one reference stroke cycle against a clean and a tired swimmer and
//! compares the mean match scores (lower is more stable).

use posemine::io::synth::{synth, SynthSpec};
use posemine::stability::{find_matches, stability_score, MatchParams};
use posemine::Pose;

fn main() -> posemine::Result<()> {
    let clean_spec = SynthSpec { duration: 3.0, noise: 0.0, athlete_seed: 3, ..SynthSpec::cyclic() };
    let reference: Vec<Pose> = synth(&clean_spec, 0)?.sequence.poses()[..60].iter().map(|t| t.pose.clone()).collect();

    let params = MatchParams::default();
    for (name, noise) in [("steady", 1.0), ("sloppy", 6.0)] {
        let spec = SynthSpec { duration: 12.0, noise, athlete_seed: 3, ..SynthSpec::cyclic() };
        let seq = synth(&spec, 11)?.sequence;
        let matches = find_matches(&reference, &seq, &params)?;
        let report = stability_score(&reference, &[seq], &params)?;
        let starts: Vec<u32> = matches.iter().map(|m| m.start_frame).collect();
        println!("{name}: {} matches starting at {starts:?}, mean score {:.4}", matches.len(), report.mean_score);
    }
    Ok(())
}
