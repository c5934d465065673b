//! Pareto filtering and the exact hypervolume indicator for two and three
//! objectives.

use crate::error::{check_len, Error, Result};
use crate::solver::IterationRecord;

/// Reference point used for the synthetic benchmarks.
pub const SYNTHETIC_REF: [f64; 2] = [1.1, 1.1];

/// `a` dominates `b`: no worse everywhere, strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

/// Maximal mutually nondominated subset; duplicates collapse to one copy.
/// Input order is preserved.
pub fn nondominated(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if points[..i].iter().any(|q| q == p) {
            continue;
        }
        if points.iter().any(|q| dominates(q, p)) {
            continue;
        }
        out.push(p.clone());
    }
    out
}

/// A point set together with its hypervolume reference point.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontSample {
    pub points: Vec<Vec<f64>>,
    pub ref_point: Vec<f64>,
}

impl FrontSample {
    pub fn new(points: Vec<Vec<f64>>, ref_point: Vec<f64>) -> Self {
        FrontSample { points, ref_point }
    }

    pub fn hypervolume(&self) -> Result<f64> {
        hypervolume(&self.points, &self.ref_point)
    }
}

/// Exact hypervolume dominated by `points` and bounded by `ref_point`.
///
/// Only points strictly below the reference in every coordinate contribute.
/// Supports one, two and three objectives.
pub fn hypervolume(points: &[Vec<f64>], ref_point: &[f64]) -> Result<f64> {
    let m = ref_point.len();
    for p in points {
        check_len("hypervolume point", m, p.len())?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract(format!("non-finite point {p:?}")));
        }
    }
    let inside: Vec<Vec<f64>> = points
        .iter()
        .filter(|p| p.iter().zip(ref_point).all(|(v, r)| v < r))
        .cloned()
        .collect();
    let front = nondominated(&inside);
    if front.is_empty() {
        return Ok(0.0);
    }
    match m {
        1 => Ok(ref_point[0] - front[0][0]),
        2 => {
            let pts: Vec<[f64; 2]> = front.iter().map(|p| [p[0], p[1]]).collect();
            Ok(sweep_2d(pts, [ref_point[0], ref_point[1]]))
        }
        3 => Ok(slice_3d(&front, ref_point)),
        _ => Err(Error::contract(format!(
            "exact hypervolume supports m <= 3, got {m}"
        ))),
    }
}

// Sort by first objective, accumulate rectangles against the running best
// second objective.
fn sweep_2d(mut pts: Vec<[f64; 2]>, r: [f64; 2]) -> f64 {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut ceiling = r[1];
    for p in pts {
        if p[1] < ceiling {
            area += (r[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    area
}

// Slices along the third objective: between consecutive z-levels, the
// dominated cross-section is the 2D hypervolume of every point at or below
// the lower level.
fn slice_3d(front: &[Vec<f64>], r: &[f64]) -> f64 {
    let mut pts: Vec<&Vec<f64>> = front.iter().collect();
    pts.sort_by(|a, b| a[2].total_cmp(&b[2]));
    let mut volume = 0.0;
    for k in 0..pts.len() {
        let top = if k + 1 < pts.len() {
            pts[k + 1][2]
        } else {
            r[2]
        };
        let depth = top - pts[k][2];
        if depth <= 0.0 {
            continue;
        }
        let slice: Vec<[f64; 2]> = pts[..=k].iter().map(|p| [p[0], p[1]]).collect();
        volume += depth * sweep_2d(slice, [r[0], r[1]]);
    }
    volume
}

/// Hypervolume of the recorded loss vectors at each iteration.
pub fn hv_trajectory(history: &[IterationRecord], ref_point: &[f64]) -> Result<Vec<f64>> {
    history
        .iter()
        .map(|rec| hypervolume(&rec.losses, ref_point))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nondominated_examples() {
        let both = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert_eq!(nondominated(&both), both);
        assert_eq!(
            nondominated(&[vec![1.0, 1.0], vec![2.0, 2.0]]),
            vec![vec![1.0, 1.0]]
        );
        assert_eq!(
            nondominated(&[vec![1.0, 1.0], vec![1.0, 1.0]]),
            vec![vec![1.0, 1.0]]
        );
    }

    #[test]
    fn single_rectangle() {
        let hv = hypervolume(&[vec![0.5, 0.5]], &[1.1, 1.1]).unwrap();
        assert!((hv - 0.36).abs() < 1e-15);
    }

    #[test]
    fn two_point_staircase() {
        let hv = hypervolume(&[vec![0.25, 0.75], vec![0.75, 0.25]], &[1.1, 1.1]).unwrap();
        // 0.85·0.35 + 0.35·0.85 − 0.35·0.35
        assert!((hv - 0.4725).abs() < 1e-12);
    }

    #[test]
    fn outside_point_contributes_nothing() {
        assert_eq!(hypervolume(&[vec![2.0, 2.0]], &[1.1, 1.1]).unwrap(), 0.0);
        assert_eq!(hypervolume(&[vec![1.1, 0.0]], &[1.1, 1.1]).unwrap(), 0.0);
        assert_eq!(hypervolume(&[], &[1.1, 1.1]).unwrap(), 0.0);
    }

    #[test]
    fn cube_in_three_objectives() {
        let hv = hypervolume(&[vec![0.0, 0.0, 0.0]], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(hv, 6.0);
        // two boxes with overlap 1·1·1
        let hv = hypervolume(
            &[vec![0.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]],
            &[2.0, 2.0, 2.0],
        )
        .unwrap();
        assert!((hv - (4.0 + 2.0 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_four_objectives() {
        assert!(hypervolume(&[vec![0.0; 4]], &[1.0; 4]).is_err());
        assert!(hypervolume(&[vec![0.0; 3]], &[1.0; 2]).is_err());
    }

    #[test]
    fn constant_history_gives_constant_series() {
        let rec = |it| IterationRecord {
            iteration: it,
            losses: vec![vec![0.2, 0.8], vec![0.6, 0.3]],
            scalarized: vec![0.0, 0.0],
        };
        let series = hv_trajectory(&[rec(1), rec(2), rec(3)], &SYNTHETIC_REF).unwrap();
        assert!(series.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn shrinking_front_increases_series() {
        let history: Vec<IterationRecord> = (0..5)
            .map(|k| {
                let s = 1.0 - 0.15 * k as f64;
                IterationRecord {
                    iteration: k + 1,
                    losses: vec![vec![0.2 * s, 0.9 * s], vec![0.9 * s, 0.2 * s]],
                    scalarized: vec![0.0; 2],
                }
            })
            .collect();
        let series = hv_trajectory(&history, &SYNTHETIC_REF).unwrap();
        assert!(series.windows(2).all(|w| w[1] > w[0]));
    }
}
