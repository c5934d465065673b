//! Inter-subproblem transfer matrices.
//!
//! A [`TransferPlan`] holds the coefficients `Mᵢⱼ,ₖ` mixing parameter vectors
//! between subproblems: `θᵢ ← Σⱼ Mᵢⱼ θⱼ`. Coefficients are either one scalar
//! per pair (the same for every coordinate) or one value per pair and
//! coordinate. After the cutoff iteration `t0` the plan acts as the identity.
//!
//! Plans built by [`build_coeffs`] are nonnegative, row-stochastic, symmetric
//! and have diagonals of at least one half.

use std::fmt::Write as _;

use crate::error::{check_len, Error, Result};
use crate::scalarize::WeightVector;

/// Tolerance used by [`TransferPlan::validate`] for sums and symmetry.
pub const PLAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    /// Row-major `N × N`.
    Uniform(Vec<f64>),
    /// Index `(i * N + j) * dim + k`.
    PerCoordinate { dim: usize, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferPlan {
    n: usize,
    coeffs: Coefficients,
    t0: usize,
    neighborhood_size: usize,
}

/// Per-condition offenders found by [`TransferPlan::validate`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidityReport {
    /// `(i, j, k)` with a negative coefficient.
    pub negative: Vec<(usize, usize, usize)>,
    /// `(i, k)` whose row sum differs from one.
    pub row_sum: Vec<(usize, usize)>,
    /// `(i, j, k)` with `Mᵢⱼ,ₖ ≠ Mⱼᵢ,ₖ`.
    pub asymmetric: Vec<(usize, usize, usize)>,
    /// `(i, k)` whose diagonal is below one half.
    pub small_diagonal: Vec<(usize, usize)>,
}

impl ValidityReport {
    pub fn nonnegative(&self) -> bool {
        self.negative.is_empty()
    }

    pub fn row_stochastic(&self) -> bool {
        self.row_sum.is_empty()
    }

    pub fn symmetric(&self) -> bool {
        self.asymmetric.is_empty()
    }

    pub fn diagonal_dominant(&self) -> bool {
        self.small_diagonal.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        self.nonnegative() && self.row_stochastic() && self.symmetric() && self.diagonal_dominant()
    }
}

impl TransferPlan {
    pub fn identity(n: usize) -> Self {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0;
        }
        TransferPlan {
            n,
            coeffs: Coefficients::Uniform(m),
            t0: 0,
            neighborhood_size: 1,
        }
    }

    /// Wraps an explicit row-major `N × N` matrix without validating it.
    pub fn from_matrix(
        n: usize,
        matrix: Vec<f64>,
        t0: usize,
        neighborhood_size: usize,
    ) -> Result<Self> {
        check_len("transfer matrix", n * n, matrix.len())?;
        Ok(TransferPlan {
            n,
            coeffs: Coefficients::Uniform(matrix),
            t0,
            neighborhood_size,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn t0(&self) -> usize {
        self.t0
    }

    pub fn neighborhood_size(&self) -> usize {
        self.neighborhood_size
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn with_t0(mut self, t0: usize) -> Self {
        self.t0 = t0;
        self
    }

    /// Coordinate dimension of per-coordinate plans.
    pub fn coordinate_dim(&self) -> Option<usize> {
        match &self.coeffs {
            Coefficients::Uniform(_) => None,
            Coefficients::PerCoordinate { dim, .. } => Some(*dim),
        }
    }

    /// `Mᵢⱼ,ₖ`; `k` is ignored for uniform plans.
    pub fn coefficient(&self, i: usize, j: usize, k: usize) -> f64 {
        match &self.coeffs {
            Coefficients::Uniform(m) => m[i * self.n + j],
            Coefficients::PerCoordinate { dim, values } => values[(i * self.n + j) * dim + k],
        }
    }

    /// Scalar coefficient matrix; per-coordinate plans must be uniform across
    /// coordinates for this to be meaningful, so coordinate 0 is returned.
    pub fn scalar_matrix(&self) -> Vec<f64> {
        (0..self.n * self.n)
            .map(|idx| self.coefficient(idx / self.n, idx % self.n, 0))
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        let kdim = self.coordinate_dim().unwrap_or(1);
        (0..self.n).all(|i| {
            (0..self.n).all(|j| {
                let want = if i == j { 1.0 } else { 0.0 };
                (0..kdim).all(|k| self.coefficient(i, j, k) == want)
            })
        })
    }

    /// Restricts transfer to the coordinates where `mask` is true. Masked-out
    /// coordinates get `Mᵢᵢ,ₖ = 1` and no off-diagonal mass.
    pub fn with_coordinate_mask(&self, mask: &[bool]) -> Result<Self> {
        let dim = mask.len();
        if let Some(d) = self.coordinate_dim() {
            check_len("coordinate mask", d, dim)?;
        }
        let n = self.n;
        let mut values = vec![0.0; n * n * dim];
        for i in 0..n {
            for j in 0..n {
                for (k, &on) in mask.iter().enumerate() {
                    values[(i * n + j) * dim + k] = match (on, i == j) {
                        (true, _) => self.coefficient(i, j, k),
                        (false, true) => 1.0,
                        (false, false) => 0.0,
                    };
                }
            }
        }
        Ok(TransferPlan {
            n,
            coeffs: Coefficients::PerCoordinate { dim, values },
            t0: self.t0,
            neighborhood_size: self.neighborhood_size,
        })
    }

    /// Checks nonnegativity, row-stochasticity, symmetry and the diagonal
    /// lower bound of one half, per coordinate, each within [`PLAN_TOL`].
    pub fn validate(&self) -> ValidityReport {
        let n = self.n;
        let kdim = self.coordinate_dim().unwrap_or(1);
        let mut report = ValidityReport::default();
        for k in 0..kdim {
            for i in 0..n {
                let mut row = 0.0;
                for j in 0..n {
                    let c = self.coefficient(i, j, k);
                    row += c;
                    if !(c >= 0.0) {
                        report.negative.push((i, j, k));
                    }
                    if j > i && (c - self.coefficient(j, i, k)).abs() > PLAN_TOL {
                        report.asymmetric.push((i, j, k));
                    }
                }
                if !((row - 1.0).abs() <= PLAN_TOL) {
                    report.row_sum.push((i, k));
                }
                if !(self.coefficient(i, i, k) >= 0.5 - PLAN_TOL) {
                    report.small_diagonal.push((i, k));
                }
            }
        }
        report
    }

    /// Mixing term `Σⱼ Mᵢⱼ θⱼ` for iteration `t`. Returns the input unchanged
    /// once `t > t0`.
    pub fn apply<P: AsRef<[f64]>>(&self, params: &[P], t: usize) -> Result<Vec<Vec<f64>>> {
        check_len("apply_transfer", self.n, params.len())?;
        let d = params.first().map_or(0, |p| p.as_ref().len());
        for p in params {
            check_len("apply_transfer", d, p.as_ref().len())?;
        }
        if let Some(kd) = self.coordinate_dim() {
            check_len("apply_transfer coordinates", kd, d)?;
        }
        if t > self.t0 {
            return Ok(params.iter().map(|p| p.as_ref().to_vec()).collect());
        }
        let n = self.n;
        let mut out = vec![vec![0.0; d]; n];
        match &self.coeffs {
            Coefficients::Uniform(m) => {
                for (i, row) in out.iter_mut().enumerate() {
                    for (j, p) in params.iter().enumerate() {
                        let c = m[i * n + j];
                        if c != 0.0 {
                            for (o, x) in row.iter_mut().zip(p.as_ref()) {
                                *o += c * x;
                            }
                        }
                    }
                }
            }
            Coefficients::PerCoordinate { dim, values } => {
                for (i, row) in out.iter_mut().enumerate() {
                    for (j, p) in params.iter().enumerate() {
                        let base = (i * n + j) * dim;
                        let cs = &values[base..base + dim];
                        for ((o, x), c) in row.iter_mut().zip(p.as_ref()).zip(cs) {
                            *o += c * x;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Text form: `key = value` lines with one `coeff = i j value` (or
    /// `coeff = i j k value` for per-coordinate plans) per nonzero entry.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "t0 = {}", self.t0);
        let _ = writeln!(s, "neighborhood_size = {}", self.neighborhood_size);
        match &self.coeffs {
            Coefficients::Uniform(m) => {
                for i in 0..self.n {
                    for j in 0..self.n {
                        let c = m[i * self.n + j];
                        if c != 0.0 {
                            let _ = writeln!(s, "coeff = {i} {j} {c}");
                        }
                    }
                }
            }
            Coefficients::PerCoordinate { dim, values } => {
                let _ = writeln!(s, "dim = {dim}");
                for i in 0..self.n {
                    for j in 0..self.n {
                        for k in 0..*dim {
                            let c = values[(i * self.n + j) * dim + k];
                            if c != 0.0 {
                                let _ = writeln!(s, "coeff = {i} {j} {k} {c}");
                            }
                        }
                    }
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut n = None;
        let mut t0 = None;
        let mut nb = None;
        let mut dim = None;
        let mut entries: Vec<(usize, usize, Option<usize>, f64)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}", lineno + 1), "expected `key = value`")
            })?;
            let (key, value) = (key.trim(), value.trim());
            let parse_usize = |v: &str| {
                v.parse::<usize>()
                    .map_err(|e| Error::config(key, format!("line {}: {e}", lineno + 1)))
            };
            match key {
                "n" => n = Some(parse_usize(value)?),
                "t0" => t0 = Some(parse_usize(value)?),
                "neighborhood_size" => nb = Some(parse_usize(value)?),
                "dim" => dim = Some(parse_usize(value)?),
                "coeff" => {
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    let bad = || {
                        Error::config(
                            "coeff",
                            format!("line {}: malformed entry `{value}`", lineno + 1),
                        )
                    };
                    let c = parts
                        .last()
                        .ok_or_else(bad)?
                        .parse::<f64>()
                        .map_err(|_| bad())?;
                    match parts.len() {
                        3 => {
                            entries.push((parse_usize(parts[0])?, parse_usize(parts[1])?, None, c))
                        }
                        4 => entries.push((
                            parse_usize(parts[0])?,
                            parse_usize(parts[1])?,
                            Some(parse_usize(parts[2])?),
                            c,
                        )),
                        _ => return Err(bad()),
                    }
                }
                other => return Err(Error::config(other, "unknown plan key")),
            }
        }
        let n = n.ok_or_else(|| Error::config("n", "missing"))?;
        let t0 = t0.ok_or_else(|| Error::config("t0", "missing"))?;
        let nb = nb.ok_or_else(|| Error::config("neighborhood_size", "missing"))?;
        let coeffs = match dim {
            None => {
                let mut m = vec![0.0; n * n];
                for (i, j, k, c) in entries {
                    if i >= n || j >= n || k.is_some() {
                        return Err(Error::config(
                            "coeff",
                            format!("entry ({i}, {j}) out of range"),
                        ));
                    }
                    m[i * n + j] = c;
                }
                Coefficients::Uniform(m)
            }
            Some(dim) => {
                let mut values = vec![0.0; n * n * dim];
                for (i, j, k, c) in entries {
                    let k = k.ok_or_else(|| {
                        Error::config("coeff", "per-coordinate plan needs `i j k value`")
                    })?;
                    if i >= n || j >= n || k >= dim {
                        return Err(Error::config(
                            "coeff",
                            format!("entry ({i}, {j}, {k}) out of range"),
                        ));
                    }
                    values[(i * n + j) * dim + k] = c;
                }
                Coefficients::PerCoordinate { dim, values }
            }
        };
        Ok(TransferPlan {
            n,
            coeffs,
            t0,
            neighborhood_size: nb,
        })
    }
}

/// For each subproblem the `J` closest subproblems by weight-vector distance,
/// itself first, ties broken by ascending index.
pub fn neighbor_ranks(weights: &[WeightVector], j: usize) -> Result<Vec<Vec<usize>>> {
    let n = weights.len();
    if let Some(first) = weights.first() {
        for w in weights {
            check_len("neighbor_ranks", first.len(), w.len())?;
        }
    }
    let mut dist = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            dist[a * n + b] = weights[a].distance(&weights[b]);
        }
    }
    neighbor_ranks_from_distances(n, &dist, j)
}

/// [`neighbor_ranks`] over a precomputed row-major `N × N` distance matrix.
pub fn neighbor_ranks_from_distances(n: usize, dist: &[f64], j: usize) -> Result<Vec<Vec<usize>>> {
    check_len("distance matrix", n * n, dist.len())?;
    if j == 0 || j > n {
        return Err(Error::contract(format!(
            "neighborhood size must be in 1..={n}, got {j}"
        )));
    }
    Ok((0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&b| b != i).collect();
            others.sort_by(|&a, &b| dist[i * n + a].total_cmp(&dist[i * n + b]).then(a.cmp(&b)));
            std::iter::once(i).chain(others).take(j).collect()
        })
        .collect())
}

/// Rank-weighted neighbor coefficients, then symmetrized.
///
/// With `S = 1 + … + J`, the `r`-th closest neighbor (`r = 1` is the
/// subproblem itself) receives `(J − r + 1)/(2S)`, and the subproblem itself
/// an extra `1/2`. Off-diagonals are then averaged with their transpose. If
/// some row's off-diagonal mass exceeds one half (a subproblem many others
/// rank as nearest), all off-diagonals are scaled by one common factor so the
/// heaviest row has exactly one half. Each diagonal is finally reset to
/// `1 − Σⱼ≠ᵢ Mᵢⱼ`, so rows are stochastic and diagonals at least one half.
pub fn build_coeffs(weights: &[WeightVector], j: usize, t0: usize) -> Result<TransferPlan> {
    let n = weights.len();
    let ranks = neighbor_ranks(weights, j)?;
    TransferPlan::from_matrix(n, symmetrize(n, &raw_coeffs(n, &ranks, j)), t0, j)
}

/// [`build_coeffs`] with a precomputed distance matrix.
pub fn build_coeffs_from_distances(
    n: usize,
    dist: &[f64],
    j: usize,
    t0: usize,
) -> Result<TransferPlan> {
    let ranks = neighbor_ranks_from_distances(n, dist, j)?;
    TransferPlan::from_matrix(n, symmetrize(n, &raw_coeffs(n, &ranks, j)), t0, j)
}

/// Unsymmetrized rank coefficients.
pub fn raw_coeffs(n: usize, ranks: &[Vec<usize>], j: usize) -> Vec<f64> {
    let s = (j * (j + 1) / 2) as f64;
    let mut m = vec![0.0; n * n];
    for (i, nbrs) in ranks.iter().enumerate() {
        for (r, &k) in nbrs.iter().enumerate() {
            m[i * n + k] = (j - r) as f64 / (2.0 * s);
        }
        m[i * n + i] += 0.5;
    }
    m
}

fn symmetrize(n: usize, raw: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            if i != k {
                m[i * n + k] = 0.5 * (raw[i * n + k] + raw[k * n + i]);
            }
        }
    }
    // a subproblem that is the nearest neighbor of many others collects more
    // than 1/2 off-diagonal mass; one common factor restores the bound
    // without breaking symmetry
    let heaviest = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&k| k != i)
                .map(|k| m[i * n + k])
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    if heaviest > 0.5 {
        let scale = 0.5 / heaviest;
        for i in 0..n {
            for k in 0..n {
                if i != k {
                    m[i * n + k] *= scale;
                }
            }
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&k| k != i).map(|k| m[i * n + k]).sum();
        m[i * n + i] = 1.0 - off;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::even_weights;

    fn wv(c: &[f64]) -> WeightVector {
        WeightVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn middle_vector_ties_break_by_index() {
        let w = vec![wv(&[1.0, 0.0]), wv(&[0.5, 0.5]), wv(&[0.0, 1.0])];
        let r = neighbor_ranks(&w, 2).unwrap();
        assert_eq!(r[1], vec![1, 0]);
    }

    #[test]
    fn j_one_is_self_only() {
        let w = even_weights(2, 4).unwrap();
        let r = neighbor_ranks(&w, 1).unwrap();
        assert_eq!(r, vec![vec![0], vec![1], vec![2], vec![3]]);
        assert!(build_coeffs(&w, 1, 10).unwrap().is_identity());
    }

    #[test]
    fn ten_even_vectors_j2_brute_force() {
        let w = even_weights(2, 10).unwrap();
        let r = neighbor_ranks(&w, 2).unwrap();
        // brute force: full sort of (distance, index) pairs
        for i in 0..10 {
            let mut pairs: Vec<(f64, usize)> = (0..10)
                .filter(|&k| k != i)
                .map(|k| (w[i].distance(&w[k]), k))
                .collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            assert_eq!(r[i], vec![i, pairs[0].1]);
        }
        assert_eq!(r[0], vec![0, 1]);
    }

    #[test]
    fn oversize_neighborhood_rejected() {
        let w = even_weights(2, 3).unwrap();
        assert!(neighbor_ranks(&w, 4).is_err());
        assert!(neighbor_ranks(&w, 0).is_err());
    }

    #[test]
    fn raw_coefficients_match_rank_formula() {
        let w = even_weights(2, 10).unwrap();
        let r2 = neighbor_ranks(&w, 2).unwrap();
        let m2 = raw_coeffs(10, &r2, 2);
        assert!((m2[0] - (2.0 / 6.0 + 0.5)).abs() < 1e-15);
        assert!((m2[0] - 0.8333).abs() < 1e-4);
        assert!((m2[1] - 1.0 / 6.0).abs() < 1e-15);

        let r3 = neighbor_ranks(&w, 3).unwrap();
        let m3 = raw_coeffs(10, &r3, 3);
        let row: Vec<f64> = r3[4].iter().map(|&k| m3[4 * 10 + k]).collect();
        assert!((row[0] - 0.75).abs() < 1e-15);
        assert!((row[1] - 2.0 / 12.0).abs() < 1e-15);
        assert!((row[2] - 1.0 / 12.0).abs() < 1e-15);
        assert!(((0..10).map(|k| m3[40 + k]).sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn built_plan_validates() {
        let w = even_weights(2, 10).unwrap();
        let plan = build_coeffs(&w, 2, 10).unwrap();
        assert!(plan.validate().is_valid());
        assert!(TransferPlan::identity(5).validate().is_valid());
    }

    #[test]
    fn validate_reports_bad_row() {
        let plan = TransferPlan::from_matrix(2, vec![0.6, 0.3, 0.3, 0.7], 5, 2).unwrap();
        let rep = plan.validate();
        assert!(!rep.row_stochastic());
        assert_eq!(rep.row_sum, vec![(0, 0)]);
        assert!(rep.symmetric() && rep.nonnegative() && rep.diagonal_dominant());
    }

    #[test]
    fn validate_reports_every_condition() {
        let plan = TransferPlan::from_matrix(2, vec![0.4, 0.6, -0.2, 1.2], 5, 2).unwrap();
        let rep = plan.validate();
        assert_eq!(rep.negative, vec![(1, 0, 0)]);
        assert_eq!(rep.asymmetric, vec![(0, 1, 0)]);
        assert_eq!(rep.small_diagonal, vec![(0, 0)]);
        assert!(!rep.is_valid());
    }

    #[test]
    fn apply_examples() {
        let params = vec![vec![1.0, 1.0], vec![-1.0, -1.0]];
        let id = TransferPlan::identity(2);
        assert_eq!(id.apply(&params, 0).unwrap(), params);

        let plan = TransferPlan::from_matrix(2, vec![0.75, 0.25, 0.25, 0.75], 3, 2).unwrap();
        let out = plan.apply(&params, 0).unwrap();
        assert_eq!(out, vec![vec![0.5, 0.5], vec![-0.5, -0.5]]);
        assert_eq!(plan.apply(&params, 3).unwrap(), out);
        assert_eq!(plan.apply(&params, 4).unwrap(), params);
    }

    #[test]
    fn apply_rejects_ragged_params() {
        let plan = TransferPlan::identity(2);
        assert!(plan.apply(&[vec![1.0], vec![1.0, 2.0]], 0).is_err());
        assert!(plan.apply(&[vec![1.0]], 0).is_err());
    }

    #[test]
    fn mask_freezes_coordinates() {
        let plan = TransferPlan::from_matrix(2, vec![0.75, 0.25, 0.25, 0.75], 3, 2).unwrap();
        let masked = plan.with_coordinate_mask(&[true, false]).unwrap();
        assert!(masked.validate().is_valid());
        let out = masked
            .apply(&[vec![1.0, 1.0], vec![-1.0, -1.0]], 0)
            .unwrap();
        assert_eq!(out, vec![vec![0.5, 1.0], vec![-0.5, -1.0]]);
    }

    #[test]
    fn text_round_trip() {
        let w = even_weights(2, 6).unwrap();
        let plan = build_coeffs(&w, 3, 7).unwrap();
        assert_eq!(TransferPlan::from_text(&plan.to_text()).unwrap(), plan);
        let masked = plan.with_coordinate_mask(&[true, false, true]).unwrap();
        assert_eq!(TransferPlan::from_text(&masked.to_text()).unwrap(), masked);
        assert!(TransferPlan::from_text("n = 2\nt0 = 1\nbogus = 3").is_err());
    }
}
