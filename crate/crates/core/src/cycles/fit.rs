use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::matching::DifferencePoint;
use crate::error::{Error, Result};
use crate::pose::Frame;

/// Polynomial degree of every curve piece.
pub const DEGREE: usize = 5;
const NCOEF: usize = DEGREE + 1;

/// Fitting parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Regions with fewer difference points are skipped.
    pub min_points: usize,
    /// Target piece length in multiples of the region's median cycle length.
    pub segment_cycles: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            min_points: 12,
            segment_cycles: 3.0,
        }
    }
}

/// One polynomial piece over the inclusive frame interval `[start, end]`,
/// expressed in the local variable `u = (frame - origin) / half_width`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSegment {
    pub start: Frame,
    pub end: Frame,
    pub origin: f64,
    pub half_width: f64,
    pub coeffs: [f64; NCOEF],
}

impl CurveSegment {
    fn local(&self, x: f64) -> f64 {
        (x - self.origin) / self.half_width
    }

    /// Value at a (possibly fractional) frame position.
    pub fn value_at(&self, x: f64) -> f64 {
        let u = self.local(x);
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    /// Derivative with respect to frame at `x`.
    pub fn slope_at(&self, x: f64) -> f64 {
        let u = self.local(x);
        let mut acc = 0.0;
        for k in (1..NCOEF).rev() {
            acc = acc * u + k as f64 * self.coeffs[k];
        }
        acc / self.half_width
    }
}

/// Per-frame cycle length (frames per cycle) over the covered frame ranges.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct CycleSpeedCurve {
    pub fps: f64,
    pub segments: Vec<CurveSegment>,
}

impl CycleSpeedCurve {
    fn segment(&self, frame: Frame) -> Option<&CurveSegment> {
        let i = self.segments.partition_point(|s| s.end < frame);
        self.segments.get(i).filter(|s| s.start <= frame)
    }

    pub fn covers(&self, frame: Frame) -> bool {
        self.segment(frame).is_some()
    }

    /// Cycle length at `frame`, or `None` outside the covered ranges.
    pub fn evaluate(&self, frame: Frame) -> Option<f64> {
        self.segment(frame).map(|s| s.value_at(frame as f64))
    }

    /// Covered frame ranges (inclusive), merging touching pieces.
    pub fn ranges(&self) -> Vec<(Frame, Frame)> {
        let mut out: Vec<(Frame, Frame)> = Vec::new();
        for s in &self.segments {
            match out.last_mut() {
                Some(last) if last.1 + 1 == s.start => last.1 = s.end,
                _ => out.push((s.start, s.end)),
            }
        }
        out
    }

    pub fn covered_frames(&self) -> u64 {
        self.segments
            .iter()
            .map(|s| (s.end - s.start) as u64 + 1)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Same curve with every frame moved by `delta`.
    pub fn shifted(&self, delta: Frame) -> Self {
        CycleSpeedCurve {
            fps: self.fps,
            segments: self
                .segments
                .iter()
                .map(|s| CurveSegment {
                    start: s.start + delta,
                    end: s.end + delta,
                    origin: s.origin + delta as f64,
                    ..s.clone()
                })
                .collect(),
        }
    }
}

/// Cycles per minute at `frame`.
pub fn cycle_rate(curve: &CycleSpeedCurve, frame: Frame) -> Result<f64> {
    let len = curve.evaluate(frame).ok_or(Error::OutOfRange(frame))?;
    Ok(curve.fps * 60.0 / len)
}

/// A data region that could not be fitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedRegion {
    pub start: Frame,
    pub end: Frame,
    pub points: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct FitOutcome {
    pub curve: CycleSpeedCurve,
    pub skipped: Vec<SkippedRegion>,
}

fn median_u32(mut v: Vec<u32>) -> f64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

/// Splits frame-sorted points into regions wherever two consecutive data
/// frames are further apart than the cycle length observed at the gap.
fn split_regions(points: &[DifferencePoint]) -> Vec<&[DifferencePoint]> {
    let mut regions = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < points.len() {
        let f = points[i].frame;
        let mut end = i;
        while end < points.len() && points[end].frame == f {
            end += 1;
        }
        if end < points.len() {
            let g = points[end].frame;
            let mut next_end = end;
            while next_end < points.len() && points[next_end].frame == g {
                next_end += 1;
            }
            let local: Vec<u32> = points[i..next_end].iter().map(|p| p.diff).collect();
            if (g - f) as f64 > median_u32(local) {
                regions.push(&points[start..end]);
                start = end;
            }
        }
        i = end;
    }
    if start < points.len() {
        regions.push(&points[start..]);
    }
    regions
}

fn fit_region(points: &[DifferencePoint], cfg: &FitConfig) -> Result<Vec<CurveSegment>> {
    let first = points[0].frame;
    let last = points[points.len() - 1].frame;
    if points.len() < cfg.min_points {
        return Err(Error::InsufficientData(format!(
            "{} difference points in frames {first}..={last}, need {}",
            points.len(),
            cfg.min_points
        )));
    }
    let med = median_u32(points.iter().map(|p| p.diff).collect());
    let span = (last - first) as f64;
    let pieces = ((span / (cfg.segment_cycles * med)).round() as usize).clamp(1, (last - first) as usize + 1);
    let bounds: Vec<Frame> = (0..=pieces)
        .map(|k| first + (k as f64 * span / pieces as f64).round() as Frame)
        .collect();
    let mut segments: Vec<CurveSegment> = (0..pieces)
        .map(|k| {
            let start = bounds[k];
            let end = if k + 1 == pieces { last } else { bounds[k + 1] - 1 };
            let origin = (start as f64 + end as f64) / 2.0;
            let half_width = ((end - start) as f64 / 2.0).max(1.0);
            CurveSegment {
                start,
                end,
                origin,
                half_width,
                coeffs: [0.0; NCOEF],
            }
        })
        .collect();

    let nvar = pieces * NCOEF;
    let ncon = 2 * (pieces - 1);
    let mut kkt = DMatrix::<f64>::zeros(nvar + ncon, nvar + ncon);
    let mut rhs = DVector::<f64>::zeros(nvar + ncon);
    let mut seg = 0;
    for p in points {
        while segments[seg].end < p.frame {
            seg += 1;
        }
        let u = segments[seg].local(p.frame as f64);
        let mut basis = [1.0; NCOEF];
        for k in 1..NCOEF {
            basis[k] = basis[k - 1] * u;
        }
        let off = seg * NCOEF;
        for a in 0..NCOEF {
            rhs[off + a] += basis[a] * p.diff as f64;
            for b in 0..NCOEF {
                kkt[(off + a, off + b)] += basis[a] * basis[b];
            }
        }
    }
    // value and slope continuity where piece k ends and piece k+1 starts
    for k in 0..pieces - 1 {
        let x = segments[k + 1].start as f64;
        for (row, order) in [(nvar + 2 * k, 0), (nvar + 2 * k + 1, 1)] {
            for (s, sign) in [(k, 1.0), (k + 1, -1.0)] {
                let u = segments[s].local(x);
                let hw = segments[s].half_width;
                for c in 0..NCOEF {
                    let v = if order == 0 {
                        u.powi(c as i32)
                    } else if c == 0 {
                        0.0
                    } else {
                        c as f64 * u.powi(c as i32 - 1) / hw
                    };
                    kkt[(row, s * NCOEF + c)] += sign * v;
                    kkt[(s * NCOEF + c, row)] += sign * v;
                }
            }
        }
    }
    let svd = kkt.svd(true, true);
    let tol = svd.singular_values.max() * 1e-13;
    let sol = svd
        .solve(&rhs, tol)
        .map_err(|e| Error::InsufficientData(format!("fit failed: {e}")))?;
    for (k, s) in segments.iter_mut().enumerate() {
        for c in 0..NCOEF {
            s.coeffs[c] = sol[k * NCOEF + c];
        }
    }
    for s in &segments {
        if (s.start..=s.end).any(|f| !(s.value_at(f as f64) > 0.0)) {
            return Err(Error::InsufficientData(format!(
                "fitted cycle length not positive in frames {}..={}",
                s.start, s.end
            )));
        }
    }
    Ok(segments)
}

/// Piecewise degree-5 least-squares fit of the difference points with value
/// and slope continuity between pieces. Regions without enough data are
/// reported in `skipped` and left uncovered.
pub fn fit_curve(points: &[DifferencePoint], fps: f64, cfg: &FitConfig) -> FitOutcome {
    let mut sorted = points.to_vec();
    sorted.sort_unstable();
    let mut out = FitOutcome {
        curve: CycleSpeedCurve {
            fps,
            segments: Vec::new(),
        },
        skipped: Vec::new(),
    };
    for region in split_regions(&sorted) {
        match fit_region(region, cfg) {
            Ok(segs) => out.curve.segments.extend(segs),
            Err(e) => out.skipped.push(SkippedRegion {
                start: region[0].frame,
                end: region[region.len() - 1].frame,
                points: region.len(),
                reason: e.to_string(),
            }),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: impl IntoIterator<Item = (u32, u32)>) -> Vec<DifferencePoint> {
        v.into_iter().map(|(frame, diff)| DifferencePoint { frame, diff }).collect()
    }

    #[test]
    fn constant_reproduced() {
        let p = pts((100..1600).map(|f| (f, 60)));
        let out = fit_curve(&p, 50.0, &FitConfig::default());
        assert!(out.skipped.is_empty());
        assert!(out.curve.segments.len() > 1);
        assert_eq!(out.curve.ranges(), vec![(100, 1599)]);
        for f in 100..1600 {
            assert!((out.curve.evaluate(f).unwrap() - 60.0).abs() < 1e-6);
        }
    }

    #[test]
    fn linear_ramp_reproduced() {
        // slope 0.1 per frame; data every 10 frames keeps the region contiguous
        let p = pts((0..=100).map(|k| (10 * k, 600 + k)));
        let out = fit_curve(&p, 50.0, &FitConfig::default());
        assert_eq!(out.curve.segments.len(), 1);
        for f in 0..=1000 {
            let want = 600.0 + f as f64 / 10.0;
            assert!((out.curve.evaluate(f).unwrap() - want).abs() < 1e-6, "{f}");
        }
    }

    #[test]
    fn continuity_at_boundaries() {
        let p = pts((0..3000).map(|f| (f, 55 + ((f as f64 / 300.0).sin() * 5.0).round() as u32)));
        let out = fit_curve(&p, 50.0, &FitConfig::default());
        let segs = &out.curve.segments;
        assert!(segs.len() > 5);
        for w in segs.windows(2) {
            let x = w[1].start as f64;
            let scale = w[0].value_at(x).abs().max(1.0);
            assert!((w[0].value_at(x) - w[1].value_at(x)).abs() < 1e-8 * scale);
            assert!((w[0].slope_at(x) - w[1].slope_at(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn regions_split_and_small_regions_skipped() {
        let mut p = pts((0..500).map(|f| (f, 60)));
        p.extend(pts((700..705).map(|f| (f, 60))));
        p.extend(pts((1000..1400).map(|f| (f, 60))));
        let out = fit_curve(&p, 50.0, &FitConfig::default());
        assert_eq!(out.curve.ranges(), vec![(0, 499), (1000, 1399)]);
        assert_eq!(out.skipped.len(), 1);
        assert_eq!((out.skipped[0].start, out.skipped[0].end), (700, 704));
    }

    #[test]
    fn rate_arithmetic() {
        let p = pts((0..200).map(|f| (f, 60)));
        let curve = fit_curve(&p, 50.0, &FitConfig::default()).curve;
        assert!((cycle_rate(&curve, 100).unwrap() - 50.0).abs() < 1e-9);
        assert_eq!(cycle_rate(&curve, 500), Err(Error::OutOfRange(500)));
        let p = pts((0..200).map(|f| (f, 67)));
        let curve = fit_curve(&p, 50.0, &FitConfig::default()).curve;
        assert!((cycle_rate(&curve, 10).unwrap() - 3000.0 / 67.0).abs() < 1e-9);
    }
}
