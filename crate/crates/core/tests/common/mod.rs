//! Test-side oracles, written independently of the library code paths.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central finite difference of a scalar function.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            let h = 1e-6 * x[k].abs().max(1.0);
            probe[k] = x[k] + h;
            let up = f(&probe);
            probe[k] = x[k] - h;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(floor)
}

/// Monte-Carlo hypervolume over the box `[lo, ref]`: `(estimate, standard
/// error)`.
pub fn mc_hypervolume(
    points: &[Vec<f64>],
    ref_point: &[f64],
    lo: &[f64],
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = ref_point.len();
    let volume: f64 = lo.iter().zip(ref_point).map(|(a, b)| b - a).product();
    let mut sample = vec![0.0; m];
    let mut hits = 0usize;
    for _ in 0..samples {
        for k in 0..m {
            sample[k] = rng.gen_range(lo[k]..ref_point[k]);
        }
        if points
            .iter()
            .any(|p| p.iter().zip(&sample).all(|(pi, si)| pi <= si))
        {
            hits += 1;
        }
    }
    let frac = hits as f64 / samples as f64;
    (
        volume * frac,
        volume * (frac * (1.0 - frac) / samples as f64).sqrt(),
    )
}

/// Pairwise dominance check with a tolerance: no point beats another by
/// more than `tol` in every coordinate.
pub fn approx_nondominated(points: &[Vec<f64>], tol: f64) -> bool {
    for (i, a) in points.iter().enumerate() {
        for (j, b) in points.iter().enumerate() {
            if i != j && a.iter().zip(b).all(|(x, y)| *x < *y - tol) {
                return false;
            }
        }
    }
    true
}
