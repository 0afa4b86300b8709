//! Saliency profile and the most temporally striking poses of a swimmer.

use posemine::io::synth::{synth, SynthSpec};
use posemine::saliency::{saliency_profile, striking_poses, SaliencyConfig, SaliencyDistance};

fn main() -> posemine::Result<()> {
    let spec = SynthSpec { duration: 30.0, transitions: 2, noise: 1.0, ..SynthSpec::cyclic() };
    let out = synth(&spec, 5)?;
    let seq = &out.sequence;

    let profile = saliency_profile(seq, 4, 4, SaliencyDistance::Directed, 100.0);
    let peak = profile.iter().max_by(|a, b| a.value.total_cmp(&b.value)).expect("long enough");
    println!("{} scored frames, peak {:.1} at frame {}", profile.len(), peak.value, peak.frame);

    let set = striking_poses(seq, &SaliencyConfig { k: 2, ..SaliencyConfig::default() })?;
    println!("{} clusters among the top candidates", set.clusters);
    for r in &set.representatives {
        println!(
            "frame {:5}  cluster size {:2}  saliency {:7.1}  members {:?}",
            r.frame, r.cluster_size, r.saliency, r.members
        );
    }
    println!("fast transitions generated around frames {:?}", &out.striking_frames[..6]);
    Ok(())
}
