use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{Pose, PreparedPose};

const MAX_ITER: usize = 100;

/// Medoid poses discretizing the pose space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseCodebook {
    pub medoids: Vec<Pose>,
    pub s_ref: f64,
    /// Positions of the medoids in the clustered set.
    #[serde(default)]
    pub medoid_indices: Vec<usize>,
    /// Total within-cluster cost after initialization and every iteration.
    #[serde(skip)]
    pub cost_history: Vec<f64>,
}

impl PoseCodebook {
    pub fn k(&self) -> usize {
        self.medoids.len()
    }

    fn prepared(&self) -> Result<Vec<PreparedPose>> {
        self.medoids.iter().map(PreparedPose::new).collect()
    }
}

fn nearest(medoids: &[PreparedPose], p: &PreparedPose, s_ref: f64) -> Result<usize> {
    let mut best = (0, f64::INFINITY);
    for (i, m) in medoids.iter().enumerate() {
        if m.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: m.len(),
                actual: p.len(),
            });
        }
        let d = m.mse_norm(p, s_ref);
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best.0)
}

/// Index of the closest medoid; ties go to the lowest index.
pub fn assign(codebook: &PoseCodebook, pose: &Pose) -> Result<usize> {
    let p = PreparedPose::new(pose)?;
    nearest(&codebook.prepared()?, &p, codebook.s_ref)
}

/// [`assign`] for many poses.
pub fn assign_all(codebook: &PoseCodebook, poses: &[Pose]) -> Result<Vec<usize>> {
    let medoids = codebook.prepared()?;
    poses
        .par_iter()
        .map(|pose| nearest(&medoids, &PreparedPose::new(pose)?, codebook.s_ref))
        .collect()
}

/// Alternating k-medoids under the normalized pose distance, seeded by
/// farthest-point initialization from a random first medoid.
pub fn kmedoids(train: &[Pose], k: usize, seed: u64, s_ref: f64) -> Result<PoseCodebook> {
    let n = train.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in 1..={n}"
        )));
    }
    let prepared: Vec<PreparedPose> = train.iter().map(PreparedPose::new).collect::<Result<_>>()?;
    let dims = prepared[0].len();
    if let Some(p) = prepared.iter().find(|p| p.len() != dims) {
        return Err(Error::DimensionMismatch {
            expected: dims,
            actual: p.len(),
        });
    }
    let dist: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| prepared[i].mse_norm(&prepared[j], s_ref)).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut medoids = vec![rng.random_range(0..n)];
    let mut chosen = vec![false; n];
    chosen[medoids[0]] = true;
    let mut closest: Vec<f64> = dist[medoids[0]].clone();
    while medoids.len() < k {
        let mut best: Option<usize> = None;
        for i in (0..n).filter(|&i| !chosen[i]) {
            if best.is_none_or(|b| closest[i] > closest[b]) {
                best = Some(i);
            }
        }
        let m = best.expect("k <= n");
        chosen[m] = true;
        medoids.push(m);
        for i in 0..n {
            closest[i] = closest[i].min(dist[m][i]);
        }
    }

    let assign_to = |medoids: &[usize]| -> (Vec<usize>, f64) {
        let mut labels = vec![0; n];
        let mut cost = 0.0;
        for i in 0..n {
            let mut best = (0, f64::INFINITY);
            for (c, &m) in medoids.iter().enumerate() {
                if dist[m][i] < best.1 {
                    best = (c, dist[m][i]);
                }
            }
            labels[i] = best.0;
            cost += best.1;
        }
        (labels, cost)
    };

    let (mut labels, cost) = assign_to(&medoids);
    let mut history = vec![cost];
    for _ in 0..MAX_ITER {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &c) in labels.iter().enumerate() {
            members[c].push(i);
        }
        let mut changed = false;
        for c in 0..k {
            let within = |cand: usize| members[c].iter().map(|&j| dist[cand][j]).sum::<f64>();
            let mut best = (medoids[c], within(medoids[c]));
            for &cand in &members[c] {
                let cost = within(cand);
                if cost < best.1 {
                    best = (cand, cost);
                }
            }
            if best.0 != medoids[c] {
                medoids[c] = best.0;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let (l, cost) = assign_to(&medoids);
        labels = l;
        history.push(cost);
    }

    Ok(PoseCodebook {
        medoids: medoids.iter().map(|&i| train[i].clone()).collect(),
        s_ref,
        medoid_indices: medoids,
        cost_history: history,
    })
}
