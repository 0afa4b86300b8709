//! Tells whether a recording shows the athlete a reference clip was taken from.

use posemine::io::synth::{synth, SynthSpec};
use posemine::stability::{athlete_match_ratio, stability_score, MatchParams, RELAXED_TH_MATCH};
use posemine::{Pose, PoseSequence};

fn swimmer(athlete: u64, noise: f64, seed: u64) -> posemine::Result<PoseSequence> {
    let spec = SynthSpec { duration: 12.0, noise, athlete_seed: athlete, ..SynthSpec::cyclic() };
    Ok(synth(&spec, seed)?.sequence)
}

fn main() -> posemine::Result<()> {
    let reference: Vec<Pose> = swimmer(1, 0.0, 0)?.poses()[..60].iter().map(|t| t.pose.clone()).collect();
    let params = MatchParams { th_match: RELAXED_TH_MATCH, ..MatchParams::default() };
    let own = swimmer(1, 4.0, 20)?;
    for other_athlete in [2, 3, 4] {
        let other = swimmer(other_athlete, 4.0, 21)?;
        let own_score = stability_score(&reference, std::slice::from_ref(&own), &params)?.mean_score;
        let other_score = stability_score(&reference, std::slice::from_ref(&other), &params)?.mean_score;
        let ratio = athlete_match_ratio(&reference, &own, &other, &params)?;
        println!("athlete 1 vs {other_athlete}: scores {own_score:.4} / {other_score:.4}, ratio {ratio:.2}");
    }
    Ok(())
}
