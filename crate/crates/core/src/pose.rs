//! Pose data model, similarity alignment and the normalized pose distance.
//!
//! A [`Pose`] is an ordered list of `N` image-plane joint locations. Two poses
//! are compared by aligning one onto the other with the least-squares
//! similarity transform (scale, rotation, translation) and measuring the
//! remaining mean squared error. That directed error is neither symmetric nor
//! scale free, so [`mse_norm`] combines both directions, each rescaled to a
//! common reference scale, into a symmetric similarity-invariant distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frame index within a recording.
pub type Frame = u32;

/// Working scale used to calibrate all normalized distances.
pub const DEFAULT_S_REF: f64 = 100.0;

/// Joint names of the 14-joint model, in storage order.
pub const JOINT_NAMES: [&str; 14] = [
    "head_top",
    "neck",
    "r_shoulder",
    "r_elbow",
    "r_wrist",
    "l_shoulder",
    "l_elbow",
    "l_wrist",
    "r_hip",
    "r_knee",
    "r_ankle",
    "l_hip",
    "l_knee",
    "l_ankle",
];

/// Index constants for the 14-joint model.
pub mod joint {
    pub const HEAD_TOP: usize = 0;
    pub const NECK: usize = 1;
    pub const R_SHOULDER: usize = 2;
    pub const R_ELBOW: usize = 3;
    pub const R_WRIST: usize = 4;
    pub const L_SHOULDER: usize = 5;
    pub const L_ELBOW: usize = 6;
    pub const L_WRIST: usize = 7;
    pub const R_HIP: usize = 8;
    pub const R_KNEE: usize = 9;
    pub const R_ANKLE: usize = 10;
    pub const L_HIP: usize = 11;
    pub const L_KNEE: usize = 12;
    pub const L_ANKLE: usize = 13;
}

/// A single-frame 2D pose: `N >= 2` finite joint coordinates in pixels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Pose {
    joints: Vec<[f64; 2]>,
}

impl Pose {
    pub fn new(joints: Vec<[f64; 2]>) -> Result<Self> {
        if joints.len() < 2 {
            return Err(Error::InvalidPose(format!(
                "a pose needs at least 2 joints, got {}",
                joints.len()
            )));
        }
        if let Some(k) = joints.iter().position(|j| !j[0].is_finite() || !j[1].is_finite()) {
            return Err(Error::InvalidPose(format!("joint {k} is not finite")));
        }
        Ok(Self { joints })
    }

    /// Builds a pose from interleaved `x0 y0 x1 y1 ...` coordinates.
    pub fn from_flat(coords: &[f64]) -> Result<Self> {
        if coords.len() % 2 != 0 {
            return Err(Error::InvalidPose(format!(
                "odd number of coordinates ({})",
                coords.len()
            )));
        }
        Self::new(coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
    }

    pub fn joints(&self) -> &[[f64; 2]] {
        &self.joints
    }

    /// Number of joints `N`.
    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    /// Applies a similarity transform to every joint.
    pub fn transformed(&self, t: &SimilarityTransform) -> Pose {
        Pose {
            joints: self.joints.iter().map(|&j| t.apply(j)).collect(),
        }
    }

    /// Centroid of the joints.
    pub fn center(&self) -> [f64; 2] {
        let n = self.joints.len() as f64;
        let (sx, sy) = self
            .joints
            .iter()
            .fold((0.0, 0.0), |(sx, sy), j| (sx + j[0], sy + j[1]));
        [sx / n, sy / n]
    }
}

impl TryFrom<Vec<[f64; 2]>> for Pose {
    type Error = Error;

    fn try_from(joints: Vec<[f64; 2]>) -> Result<Self> {
        Pose::new(joints)
    }
}

impl From<Pose> for Vec<[f64; 2]> {
    fn from(p: Pose) -> Self {
        p.joints
    }
}

/// A pose detected in a given frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedPose {
    pub frame: Frame,
    pub pose: Pose,
}

/// Frame-ordered, possibly gapped poses of one recording at constant frame rate.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseSequence {
    video_id: String,
    fps: f64,
    poses: Vec<TimedPose>,
}

impl PoseSequence {
    pub fn new(video_id: impl Into<String>, fps: f64, poses: Vec<TimedPose>) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::InvalidArgument(format!("fps must be positive, got {fps}")));
        }
        for w in poses.windows(2) {
            if w[1].frame <= w[0].frame {
                return Err(Error::Schema(format!(
                    "frames must be strictly increasing ({} after {})",
                    w[1].frame, w[0].frame
                )));
            }
        }
        if let Some(first) = poses.first() {
            let n = first.pose.len();
            if let Some(bad) = poses.iter().find(|p| p.pose.len() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: bad.pose.len(),
                });
            }
        }
        Ok(Self {
            video_id: video_id.into(),
            fps,
            poses,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn poses(&self) -> &[TimedPose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Joint count shared by all poses, if any pose exists.
    pub fn joint_count(&self) -> Option<usize> {
        self.poses.first().map(|p| p.pose.len())
    }

    pub fn frames(&self) -> impl Iterator<Item = Frame> + '_ {
        self.poses.iter().map(|p| p.frame)
    }

    /// The pose detected at `frame`, if any.
    pub fn get(&self, frame: Frame) -> Option<&Pose> {
        self.poses
            .binary_search_by_key(&frame, |p| p.frame)
            .ok()
            .map(|i| &self.poses[i].pose)
    }

    /// Just the poses, in frame order.
    pub fn pose_list(&self) -> Vec<Pose> {
        self.poses.iter().map(|p| p.pose.clone()).collect()
    }

    /// Copy with every frame index moved by `delta`.
    pub fn shifted(&self, delta: Frame) -> Self {
        Self {
            video_id: self.video_id.clone(),
            fps: self.fps,
            poses: self
                .poses
                .iter()
                .map(|p| TimedPose {
                    frame: p.frame + delta,
                    pose: p.pose.clone(),
                })
                .collect(),
        }
    }

    /// Copy with `f` applied to every pose.
    pub fn try_map_poses<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&Pose) -> Result<Pose>,
    {
        let poses = self
            .poses
            .iter()
            .map(|p| {
                Ok(TimedPose {
                    frame: p.frame,
                    pose: f(&p.pose)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.video_id.clone(), self.fps, poses)
    }

    /// Frames in `[start, end]` (inclusive).
    pub fn slice_frames(&self, start: Frame, end: Frame) -> Self {
        Self {
            video_id: self.video_id.clone(),
            fps: self.fps,
            poses: self
                .poses
                .iter()
                .filter(|p| p.frame >= start && p.frame <= end)
                .cloned()
                .collect(),
        }
    }
}

/// `x' = a x - b y + tx`, `y' = b x + a y + ty`: uniform scale `sqrt(a^2 + b^2)`,
/// rotation `atan2(b, a)`, translation `(tx, ty)`. Reflections are not representable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub a: f64,
    pub b: f64,
    pub tx: f64,
    pub ty: f64,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            tx: 0.0,
            ty: 0.0,
        }
    }

    pub fn from_parts(scale: f64, rotation: f64, tx: f64, ty: f64) -> Self {
        Self {
            a: scale * rotation.cos(),
            b: scale * rotation.sin(),
            tx,
            ty,
        }
    }

    pub fn scale(&self) -> f64 {
        self.a.hypot(self.b)
    }

    /// Rotation angle in radians.
    pub fn rotation(&self) -> f64 {
        self.b.atan2(self.a)
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [
            self.a * p[0] - self.b * p[1] + self.tx,
            self.b * p[0] + self.a * p[1] + self.ty,
        ]
    }
}

/// Strictly increasing joint indices selecting a sub-skeleton.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointSubset {
    indices: Vec<usize>,
}

impl JointSubset {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.len() < 2 {
            return Err(Error::InvalidSubset(format!(
                "need at least 2 joints, got {}",
                indices.len()
            )));
        }
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSubset("indices must be strictly increasing".into()));
        }
        Ok(Self { indices })
    }

    /// Hips, knees and ankles of the 14-joint model.
    pub fn lower_body() -> Self {
        Self {
            indices: (joint::R_HIP..=joint::L_ANKLE).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

/// Result of aligning a pose onto a reference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Alignment {
    pub transform: SimilarityTransform,
    /// Residual mean squared error, `1/(2N)` times the squared residual norm.
    pub mse: f64,
}

/// Center of mass and mean joint distance to it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseScale {
    pub scale: f64,
    pub center: [f64; 2],
}

fn check_dims(a: &Pose, b: &Pose) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

/// Least-squares similarity transform mapping `pose` onto `reference`.
///
/// This is the closed-form solution of the normal equations
/// `(A^T A) t = A^T p_ref` for `t = (a, b, tx, ty)`. After centering both
/// poses the 4x4 system becomes block diagonal and its inverse is explicit;
/// `A^T A` is singular exactly when every joint of `pose` coincides.
pub fn align(reference: &Pose, pose: &Pose) -> Result<Alignment> {
    check_dims(reference, pose)?;
    let cr = reference.center();
    let cp = pose.center();

    let mut den = 0.0;
    let mut raw = 0.0;
    let mut num_a = 0.0;
    let mut num_b = 0.0;
    for (r, p) in reference.joints().iter().zip(pose.joints()) {
        let (xr, yr) = (r[0] - cr[0], r[1] - cr[1]);
        let (x, y) = (p[0] - cp[0], p[1] - cp[1]);
        den += x * x + y * y;
        raw += p[0] * p[0] + p[1] * p[1];
        num_a += x * xr + y * yr;
        num_b += x * yr - y * xr;
    }
    if !(den > 1e-24 * raw.max(1.0)) {
        return Err(Error::DegeneratePose);
    }
    let a = num_a / den;
    let b = num_b / den;
    let transform = SimilarityTransform {
        a,
        b,
        tx: cr[0] - (a * cp[0] - b * cp[1]),
        ty: cr[1] - (b * cp[0] + a * cp[1]),
    };

    let n = pose.len() as f64;
    let sq: f64 = reference
        .joints()
        .iter()
        .zip(pose.joints())
        .map(|(r, &p)| {
            let q = transform.apply(p);
            let (dx, dy) = (r[0] - q[0], r[1] - q[1]);
            dx * dx + dy * dy
        })
        .sum();
    Ok(Alignment {
        transform,
        mse: sq / (2.0 * n),
    })
}

/// Alignment residual of `pose` fitted to `reference`. Not symmetric; scales
/// with the square of the reference's size.
pub fn mse_directed(reference: &Pose, pose: &Pose) -> Result<f64> {
    align(reference, pose).map(|a| a.mse)
}

/// Mean distance of the joints from their center of mass. Zero for a fully
/// collapsed pose.
pub fn pose_scale(pose: &Pose) -> PoseScale {
    let center = pose.center();
    let total: f64 = pose
        .joints()
        .iter()
        .map(|j| (j[0] - center[0]).hypot(j[1] - center[1]))
        .sum();
    PoseScale {
        scale: total / pose.len() as f64,
        center,
    }
}

/// Symmetric, similarity-invariant distance between two poses at reference
/// scale `s_ref`:
///
/// `s_ref^2 / (2 s1^2) * MSE(p1, p2) + s_ref^2 / (2 s2^2) * MSE(p2, p1)`
///
/// A distance measure, not a metric: the triangle inequality is not guaranteed.
pub fn mse_norm(p1: &Pose, p2: &Pose, s_ref: f64) -> Result<f64> {
    check_dims(p1, p2)?;
    let a = PreparedPose::new(p1)?;
    let b = PreparedPose::new(p2)?;
    Ok(a.mse_norm(&b, s_ref))
}

/// Sub-pose made of the joints in `subset`, in subset order.
pub fn restrict(pose: &Pose, subset: &JointSubset) -> Result<Pose> {
    let joints = subset
        .indices()
        .iter()
        .map(|&i| {
            pose.joints().get(i).copied().ok_or(Error::IndexOutOfRange {
                index: i,
                joints: pose.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Pose::new(joints)
}

/// Pose preprocessed for repeated [`mse_norm`] evaluations.
///
/// Keeps the centered joints, their squared norm and the pose scale so that a
/// pairwise distance costs one pass over the joints. Uses the Procrustes
/// residual identity `MSE(r, p) = (|r|^2 |p|^2 - P^2 - Q^2) / (2N |p|^2)` with
/// `P`, `Q` the in-phase and quadrature cross terms of the centered poses.
#[derive(Clone, Debug)]
pub struct PreparedPose {
    centered: Vec<[f64; 2]>,
    norm2: f64,
    scale: f64,
}

impl PreparedPose {
    pub fn new(pose: &Pose) -> Result<Self> {
        let PoseScale { scale, center } = pose_scale(pose);
        let centered: Vec<[f64; 2]> = pose
            .joints()
            .iter()
            .map(|j| [j[0] - center[0], j[1] - center[1]])
            .collect();
        let norm2: f64 = centered.iter().map(|c| c[0] * c[0] + c[1] * c[1]).sum();
        let raw: f64 = pose.joints().iter().map(|j| j[0] * j[0] + j[1] * j[1]).sum();
        if !(scale > 0.0) || !(norm2 > 1e-24 * raw.max(1.0)) {
            return Err(Error::DegeneratePose);
        }
        Ok(Self {
            centered,
            norm2,
            scale,
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.centered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centered.is_empty()
    }

    /// Normalized distance to `other`; both must have the same joint count.
    pub fn mse_norm(&self, other: &PreparedPose, s_ref: f64) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        let mut p = 0.0;
        let mut q = 0.0;
        for (u, v) in self.centered.iter().zip(&other.centered) {
            p += u[0] * v[0] + u[1] * v[1];
            q += v[0] * u[1] - v[1] * u[0];
        }
        let num = (self.norm2 * other.norm2 - p * p - q * q).max(0.0);
        let two_n = 2.0 * self.len() as f64;
        let mse_self_ref = num / (two_n * other.norm2);
        let mse_other_ref = num / (two_n * self.norm2);
        let s2 = s_ref * s_ref;
        s2 / (2.0 * self.scale * self.scale) * mse_self_ref
            + s2 / (2.0 * other.scale * other.scale) * mse_other_ref
    }
}

/// Prepares every pose of a list, failing on the first degenerate one.
pub fn prepare_all(poses: &[Pose]) -> Result<Vec<PreparedPose>> {
    poses.iter().map(PreparedPose::new).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose(pts: &[(f64, f64)]) -> Pose {
        Pose::new(pts.iter().map(|&(x, y)| [x, y]).collect()).unwrap()
    }

    #[test]
    fn align_recovers_exact_similarity() {
        let r = pose(&[(0.0, 0.0), (2.0, 0.0), (0.0, 2.0)]);
        let p = pose(&[(0.0, 0.0), (0.0, 4.0), (-4.0, 0.0)]);
        let al = align(&r, &p).unwrap();
        assert!(al.mse.abs() < 1e-12);
        assert!((al.transform.scale() - 0.5).abs() < 1e-12);
        assert!((al.transform.rotation().to_degrees() + 90.0).abs() < 1e-9);
    }

    #[test]
    fn align_identity() {
        let r = pose(&[(3.0, 1.0), (7.5, -2.0), (0.25, 9.0), (4.0, 4.0)]);
        let al = align(&r, &r).unwrap();
        assert!(al.mse < 1e-20);
        let t = al.transform;
        assert!((t.a - 1.0).abs() < 1e-12 && t.b.abs() < 1e-12);
        assert!(t.tx.abs() < 1e-12 && t.ty.abs() < 1e-12);
    }

    #[test]
    fn align_errors() {
        let r = pose(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        let collapsed = pose(&[(5.0, 5.0), (5.0, 5.0), (5.0, 5.0)]);
        assert_eq!(align(&r, &collapsed), Err(Error::DegeneratePose));
        let two = pose(&[(0.0, 0.0), (1.0, 0.0)]);
        assert!(matches!(align(&r, &two), Err(Error::DimensionMismatch { .. })));
        // a collapsed reference is fine: the pose is shrunk onto it
        assert!(align(&collapsed, &r).unwrap().mse < 1e-12);
    }

    #[test]
    fn pose_scale_examples() {
        let sq = pose(&[(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)]);
        let s = pose_scale(&sq);
        assert_eq!(s.center, [1.0, 1.0]);
        assert!((s.scale - 2f64.sqrt()).abs() < 1e-15);
        let collapsed = pose(&[(1.0, 1.0), (1.0, 1.0)]);
        assert_eq!(pose_scale(&collapsed).scale, 0.0);
    }

    #[test]
    fn mse_norm_self_is_zero_and_rejects_degenerate() {
        let p = pose(&[(3.0, 1.0), (7.5, -2.0), (0.25, 9.0), (4.0, 4.0)]);
        assert_eq!(mse_norm(&p, &p, DEFAULT_S_REF).unwrap(), 0.0);
        let collapsed = pose(&[(1.0, 1.0); 4]);
        assert_eq!(mse_norm(&p, &collapsed, 100.0), Err(Error::DegeneratePose));
    }

    #[test]
    fn mse_norm_matches_directed_route() {
        let p1 = pose(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        let p2 = pose(&[(0.0, 0.0), (2.0, 0.0), (0.0, 1.0)]);
        let s1 = pose_scale(&p1).scale;
        let s2 = pose_scale(&p2).scale;
        let expect = 1e4 / (2.0 * s1 * s1) * mse_directed(&p1, &p2).unwrap()
            + 1e4 / (2.0 * s2 * s2) * mse_directed(&p2, &p1).unwrap();
        let got = mse_norm(&p1, &p2, 100.0).unwrap();
        assert!((got - expect).abs() <= 1e-12 * expect.max(1.0));
    }

    #[test]
    fn restrict_examples() {
        let p = Pose::new((0..14).map(|k| [k as f64, (k * k) as f64]).collect()).unwrap();
        let all = JointSubset::new((0..14).collect()).unwrap();
        assert_eq!(restrict(&p, &all).unwrap(), p);
        let lower = restrict(&p, &JointSubset::lower_body()).unwrap();
        assert_eq!(lower.joints(), &p.joints()[8..14]);
        let bad = JointSubset::new(vec![2, 20]).unwrap();
        assert_eq!(
            restrict(&p, &bad),
            Err(Error::IndexOutOfRange { index: 20, joints: 14 })
        );
    }

    #[test]
    fn invalid_construction() {
        assert!(Pose::new(vec![[0.0, 0.0]]).is_err());
        assert!(Pose::new(vec![[0.0, 0.0], [f64::NAN, 1.0]]).is_err());
        assert!(JointSubset::new(vec![3]).is_err());
        assert!(JointSubset::new(vec![3, 3]).is_err());
        let p = pose(&[(0.0, 0.0), (1.0, 1.0)]);
        let tp = |f| TimedPose { frame: f, pose: p.clone() };
        assert!(PoseSequence::new("v", 50.0, vec![tp(3), tp(2)]).is_err());
        assert!(PoseSequence::new("v", 0.0, vec![tp(1)]).is_err());
    }
}
