//! Trains the phase model on synthetic long jumps, decodes a held-out trial
//! and derives step count and run-up duration.

use posemine::io::synth::{synth, SynthOutput, SynthSpec};
use posemine::phase::{derive_kinematics, events_of, fit_model, viterbi, KinematicsConfig, PhaseConfig, PhaseLabel};

fn labels(t: &SynthOutput) -> Vec<PhaseLabel> {
    let truth = t.longjump_truth().expect("long jump truth");
    t.sequence.frames().map(|f| truth.labels[f as usize]).collect()
}

fn main() -> posemine::Result<()> {
    let trials: Vec<SynthOutput> = (0..11u64)
        .map(|i| synth(&SynthSpec { athlete_seed: 50 + i % 4, ..SynthSpec::longjump() }, 300 + i))
        .collect::<posemine::Result<_>>()?;
    let (test, train) = trials.split_last().expect("trials");
    let train: Vec<_> = train.iter().map(|t| (t.sequence.clone(), labels(t))).collect();
    let model = fit_model(&train, &PhaseConfig::default())?;

    let pred = viterbi(&model, &test.sequence)?;
    let correct = pred.labels.iter().zip(labels(test)).filter(|(a, b)| **a == *b).count();
    println!("frame accuracy {:.3}", correct as f64 / pred.labels.len() as f64);
    for (t1, t2, label) in events_of(&pred.frames, &pred.labels).iter().rev().take(4).rev() {
        println!("  {:>13} {t1:5}..{t2:5}", label.name());
    }

    let k = derive_kinematics(&pred, test.sequence.fps(), &KinematicsConfig::default())?;
    let truth = test.longjump_truth().expect("truth");
    println!("steps {} (true {}), run-up {:.3} s (true {:.3} s)", k.step_count, truth.step_count, k.runup_duration, truth.runup_duration);
    Ok(())
}
