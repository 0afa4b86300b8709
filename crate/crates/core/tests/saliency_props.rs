mod common;

use posemine::io::synth::{synth, CycleProfile, SynthSpec};
use posemine::saliency::{
    affinity_propagation, saliency_profile, striking_poses, ApConfig, SaliencyConfig, SaliencyDistance,
};
use posemine::SimilarityTransform;
use proptest::prelude::*;

fn similarity_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::array::uniform2(-10.0f64..10.0), 2..=8).prop_map(|pts| {
        pts.iter()
            .map(|a| pts.iter().map(|b| -((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))).collect())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn clusters_partition_the_items(sim in similarity_matrix()) {
        let r = affinity_propagation(&sim, &ApConfig::default()).unwrap();
        let n = sim.len();
        let mut seen = vec![0; n];
        for c in &r.clusters {
            prop_assert!(c.members.contains(&c.exemplar));
            for &m in &c.members {
                seen[m] += 1;
                prop_assert_eq!(r.assignment[m], c.exemplar);
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn net_similarity_is_near_the_exhaustive_optimum(sim in similarity_matrix()) {
        let r = affinity_propagation(&sim, &ApConfig::default()).unwrap();
        let opt = common::best_exemplar_net_similarity(&sim, r.preference);
        let got = r.net_similarity(&sim);
        prop_assert!(got <= opt + 1e-9);
        prop_assert!(got >= opt - 0.05 * opt.abs(), "{} vs optimum {}", got, opt);
    }
}

fn swimmer(seed: u64, duration: f64) -> posemine::PoseSequence {
    let spec = SynthSpec {
        duration,
        cycle: CycleProfile { base: 60.0, ..Default::default() },
        noise: 1.0,
        athlete_seed: seed,
        ..SynthSpec::cyclic()
    };
    synth(&spec, seed).unwrap().sequence
}

#[test]
fn profile_follows_rigid_and_scaling_transforms() {
    let seq = swimmer(3, 6.0);
    let base = saliency_profile(&seq, 4, 4, SaliencyDistance::Directed, 100.0);
    for (s, rot) in [(1.0, 0.7), (2.5, -2.0), (0.4, 3.0)] {
        let t = SimilarityTransform::from_parts(s, rot, 120.0, -40.0);
        let moved = seq.try_map_poses(|p| Ok(p.transformed(&t))).unwrap();
        let prof = saliency_profile(&moved, 4, 4, SaliencyDistance::Directed, 100.0);
        assert_eq!(prof.len(), base.len());
        for (a, b) in base.iter().zip(&prof) {
            assert_eq!(a.frame, b.frame);
            assert!(a.value >= 0.0);
            let want = s * s * a.value;
            assert!((b.value - want).abs() <= 1e-6 * want.abs().max(1e-9), "{} vs {}", b.value, want);
        }
        let norm = saliency_profile(&moved, 4, 4, SaliencyDistance::Normalized, 100.0);
        let norm_base = saliency_profile(&seq, 4, 4, SaliencyDistance::Normalized, 100.0);
        for (a, b) in norm_base.iter().zip(&norm) {
            assert!((a.value - b.value).abs() <= 1e-6 * a.value.abs().max(1e-9));
        }
    }
}

#[test]
fn profile_needs_the_full_window() {
    let seq = swimmer(4, 6.0);
    let prof = saliency_profile(&seq, 4, 4, SaliencyDistance::Directed, 100.0);
    let frames: Vec<u32> = seq.frames().collect();
    assert_eq!(prof.first().unwrap().frame, frames[8]);
    assert_eq!(prof.last().unwrap().frame, frames[frames.len() - 9]);
}

#[test]
fn representatives_are_distinct_input_poses() {
    for seed in 0..4 {
        let seq = swimmer(seed + 10, 30.0);
        let available = striking_poses(&seq, &SaliencyConfig::default()).unwrap().clusters;
        let k = available.min(3);
        let cfg = SaliencyConfig { k, ..SaliencyConfig::default() };
        let set = striking_poses(&seq, &cfg).unwrap();
        assert_eq!(set.representatives.len(), k);
        let too_many = SaliencyConfig { k: available + 1, ..SaliencyConfig::default() };
        assert!(striking_poses(&seq, &too_many).is_err());
        let mut frames: Vec<u32> = set.representatives.iter().map(|r| r.frame).collect();
        for r in &set.representatives {
            assert_eq!(seq.get(r.frame), Some(&r.pose));
            assert!(r.members.contains(&r.frame));
        }
        frames.sort_unstable();
        frames.dedup();
        assert_eq!(frames.len(), k);
        let sizes: Vec<usize> = set.representatives.iter().map(|r| r.cluster_size).collect();
        assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
    }
}
