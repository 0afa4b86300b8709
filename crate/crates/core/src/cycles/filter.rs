use super::matching::DifferencePoint;

fn median_of(buf: &mut [u32]) -> f64 {
    let n = buf.len();
    let (_, hi, _) = buf.select_nth_unstable(n / 2);
    let hi = *hi as f64;
    if n % 2 == 1 {
        hi
    } else {
        let lo = *buf[..n / 2].iter().max().expect("even count >= 2");
        (lo as f64 + hi) / 2.0
    }
}

/// One pass of the local median filter over `points` (sorted by frame).
/// Returns the keep mask.
fn filter_pass(points: &[DifferencePoint], half_width: f64, rel_tol: f64) -> Vec<bool> {
    let mut keep = vec![true; points.len()];
    let mut buf = Vec::new();
    let (mut lo, mut hi) = (0usize, 0usize);
    let mut i = 0;
    while i < points.len() {
        let f = points[i].frame;
        let mut end = i;
        while end < points.len() && points[end].frame == f {
            end += 1;
        }
        let f = f as f64;
        while (points[lo].frame as f64) < f - half_width {
            lo += 1;
        }
        while hi < points.len() && points[hi].frame as f64 <= f + half_width {
            hi += 1;
        }
        buf.clear();
        buf.extend(points[lo..hi].iter().map(|p| p.diff));
        let med = median_of(&mut buf);
        for (k, p) in points[i..end].iter().enumerate() {
            if (p.diff as f64 - med).abs() > rel_tol * med {
                keep[i + k] = false;
            }
        }
        i = end;
    }
    keep
}

/// Keep mask of the local median filter, aligned with `points`.
///
/// Around every frame carrying data, the median of all differences whose
/// frame lies within `window_s` seconds is computed; differences deviating from
/// it by more than `rel_tol` times the median are dropped. The pass repeats on
/// the survivors until nothing changes.
pub fn median_filter_mask(
    points: &[DifferencePoint],
    fps: f64,
    window_s: f64,
    rel_tol: f64,
) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by_key(|&i| points[i]);
    let half_width = window_s * fps;
    let mut alive = order;
    loop {
        let current: Vec<DifferencePoint> = alive.iter().map(|&i| points[i]).collect();
        let keep = filter_pass(&current, half_width, rel_tol);
        if keep.iter().all(|&k| k) {
            break;
        }
        alive = alive
            .into_iter()
            .zip(keep)
            .filter_map(|(i, k)| k.then_some(i))
            .collect();
    }
    let mut mask = vec![false; points.len()];
    for i in alive {
        mask[i] = true;
    }
    mask
}

/// Removes differences deviating from their local median; output sorted by
/// frame then difference.
pub fn median_filter(
    points: &[DifferencePoint],
    fps: f64,
    window_s: f64,
    rel_tol: f64,
) -> Vec<DifferencePoint> {
    let mask = median_filter_mask(points, fps, window_s, rel_tol);
    let mut out: Vec<DifferencePoint> = points
        .iter()
        .zip(mask)
        .filter_map(|(p, k)| k.then_some(*p))
        .collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(u32, u32)]) -> Vec<DifferencePoint> {
        v.iter().map(|&(frame, diff)| DifferencePoint { frame, diff }).collect()
    }

    #[test]
    fn corridor_around_sixty() {
        let mut v: Vec<(u32, u32)> = (0..50).map(|f| (f, 60)).collect();
        v.extend([(10, 53), (11, 54), (12, 66), (13, 67)]);
        let out = median_filter(&pts(&v), 50.0, 2.0, 0.1);
        let diffs: Vec<u32> = out.iter().map(|p| p.diff).filter(|&d| d != 60).collect();
        assert_eq!(diffs, vec![54, 66]);
    }

    #[test]
    fn constant_input_unchanged() {
        let p = pts(&(0..100).map(|f| (f * 3, 60)).collect::<Vec<_>>());
        assert_eq!(median_filter(&p, 50.0, 2.0, 0.1), p);
    }

    #[test]
    fn missed_cycles_removed() {
        let mut v: Vec<(u32, u32)> = Vec::new();
        for f in 0..1000u32 {
            v.push((f, if f % 10 == 0 { 120 } else { 60 }));
        }
        let out = median_filter(&pts(&v), 50.0, 2.0, 0.1);
        assert!(out.iter().all(|p| p.diff == 60));
        assert_eq!(out.len(), 900);
    }

    #[test]
    fn empty_and_window_edges() {
        assert!(median_filter(&[], 50.0, 2.0, 0.1).is_empty());
        // far-apart groups do not influence each other
        let p = pts(&[(0, 60), (0, 60), (1000, 90), (1000, 90)]);
        assert_eq!(median_filter(&p, 50.0, 2.0, 0.1), p);
    }
}
