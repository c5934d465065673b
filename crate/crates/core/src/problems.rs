//! Benchmark objective sets with analytic values and gradients.
//!
//! Every problem implements [`ObjectiveSet`]: `m` task losses over a shared
//! parameter vector `θ ∈ ℝᵈ`, with a gradient oracle returning one length-`d`
//! gradient per task. The quadratic ensemble is different in that each
//! subproblem owns its own single-task objective, so the solver talks to
//! problems through [`ProblemFamily`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalarize::WeightVector;

/// Axis-aligned box `lower ≤ θ ≤ upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                context: "bounds",
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        if let Some(k) = (0..lower.len()).find(|&k| !(lower[k] <= upper[k])) {
            return Err(Error::contract(format!(
                "bounds coordinate {k}: lower {} > upper {}",
                lower[k], upper[k]
            )));
        }
        Ok(Bounds { lower, upper })
    }

    pub fn uniform(d: usize, lower: f64, upper: f64) -> Result<Self> {
        Bounds::new(vec![lower; d], vec![upper; d])
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn project(&self, theta: &mut [f64]) {
        for ((x, lo), hi) in theta.iter_mut().zip(&self.lower).zip(&self.upper) {
            *x = x.clamp(*lo, *hi);
        }
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta
            .iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((x, lo), hi)| *lo <= *x && *x <= *hi)
    }
}

/// Loss values and per-task gradients at one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub losses: Vec<f64>,
    pub grads: Vec<Vec<f64>>,
}

/// `m` task losses over a shared parameter vector.
pub trait ObjectiveSet: Sync {
    fn num_objectives(&self) -> usize;

    fn dim(&self) -> usize;

    fn bounds(&self) -> Option<&Bounds> {
        None
    }

    /// Analytic ideal point `z*`, when known.
    fn ideal_point(&self) -> Option<Vec<f64>> {
        None
    }

    fn eval(&self, theta: &[f64]) -> Vec<f64>;

    fn grad(&self, theta: &[f64]) -> Vec<Vec<f64>>;

    fn eval_grad(&self, theta: &[f64]) -> Evaluation {
        Evaluation {
            losses: self.eval(theta),
            grads: self.grad(theta),
        }
    }
}

/// What the solver sees: one objective set per subproblem.
///
/// Every [`ObjectiveSet`] is a family where all subproblems share the same
/// task losses.
pub trait ProblemFamily: Sync {
    fn subproblem(&self, i: usize) -> &dyn ObjectiveSet;

    fn family_dim(&self) -> usize {
        self.subproblem(0).dim()
    }

    fn family_objectives(&self) -> usize {
        self.subproblem(0).num_objectives()
    }

    fn family_bounds(&self) -> Option<&Bounds> {
        self.subproblem(0).bounds()
    }
}

impl<T: ObjectiveSet> ProblemFamily for T {
    fn subproblem(&self, _i: usize) -> &dyn ObjectiveSet {
        self
    }
}

/// Two Gaussian-well objectives with a concave Pareto front:
/// `L¹ = 1 − exp(−‖θ − c‖²)`, `L² = 1 − exp(−‖θ + c‖²)` with `c = 1/√d · 1`.
#[derive(Debug, Clone)]
pub struct P1 {
    d: usize,
    offset: f64,
}

impl P1 {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::contract("P1 needs d >= 1"));
        }
        Ok(P1 {
            d,
            offset: 1.0 / (d as f64).sqrt(),
        })
    }

    fn wells(&self, theta: &[f64]) -> (f64, f64) {
        let (mut a, mut b) = (0.0, 0.0);
        for x in theta {
            a += (x - self.offset) * (x - self.offset);
            b += (x + self.offset) * (x + self.offset);
        }
        ((-a).exp(), (-b).exp())
    }
}

impl Default for P1 {
    fn default() -> Self {
        P1::new(20).expect("d = 20")
    }
}

impl ObjectiveSet for P1 {
    fn num_objectives(&self) -> usize {
        2
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn ideal_point(&self) -> Option<Vec<f64>> {
        Some(vec![0.0, 0.0])
    }

    fn eval(&self, theta: &[f64]) -> Vec<f64> {
        let (ea, eb) = self.wells(theta);
        vec![1.0 - ea, 1.0 - eb]
    }

    fn grad(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        self.eval_grad(theta).grads
    }

    fn eval_grad(&self, theta: &[f64]) -> Evaluation {
        let (ea, eb) = self.wells(theta);
        let g1 = theta.iter().map(|x| 2.0 * ea * (x - self.offset)).collect();
        let g2 = theta.iter().map(|x| 2.0 * eb * (x + self.offset)).collect();
        Evaluation {
            losses: vec![1.0 - ea, 1.0 - eb],
            grads: vec![g1, g2],
        }
    }
}

/// Lower clamp on `θ₁` inside the ZDT1 gradient, where `∂√θ₁` diverges.
pub const ZDT_SQRT_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZdtKind {
    /// Convex front `L² = g(1 − √(θ₁/g))`.
    Zdt1,
    /// Concave front `L² = g(1 − (θ₁/g)²)`.
    Zdt2,
}

/// ZDT1 / ZDT2 on `[0, 1]ᵈ` with `g = 1 + 9/(d−1) Σᵢ₌₂ θᵢ`.
#[derive(Debug, Clone)]
pub struct Zdt {
    kind: ZdtKind,
    bounds: Bounds,
}

impl Zdt {
    pub fn new(kind: ZdtKind, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::contract("ZDT needs d >= 2"));
        }
        Ok(Zdt {
            kind,
            bounds: Bounds::uniform(d, 0.0, 1.0)?,
        })
    }

    pub fn zdt1(d: usize) -> Result<Self> {
        Zdt::new(ZdtKind::Zdt1, d)
    }

    pub fn zdt2(d: usize) -> Result<Self> {
        Zdt::new(ZdtKind::Zdt2, d)
    }

    pub fn kind(&self) -> ZdtKind {
        self.kind
    }

    fn g_slope(&self) -> f64 {
        9.0 / (self.dim() - 1) as f64
    }

    fn g(&self, theta: &[f64]) -> f64 {
        1.0 + self.g_slope() * theta[1..].iter().sum::<f64>()
    }
}

impl ObjectiveSet for Zdt {
    fn num_objectives(&self) -> usize {
        2
    }

    fn dim(&self) -> usize {
        self.bounds.dim()
    }

    fn bounds(&self) -> Option<&Bounds> {
        Some(&self.bounds)
    }

    fn ideal_point(&self) -> Option<Vec<f64>> {
        Some(vec![0.0, 0.0])
    }

    fn eval(&self, theta: &[f64]) -> Vec<f64> {
        let g = self.g(theta);
        let t1 = theta[0];
        let l2 = match self.kind {
            ZdtKind::Zdt1 => g * (1.0 - (t1 / g).sqrt()),
            ZdtKind::Zdt2 => g * (1.0 - (t1 / g) * (t1 / g)),
        };
        vec![t1, l2]
    }

    fn grad(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        let d = self.dim();
        let g = self.g(theta);
        let slope = self.g_slope();
        let t1 = theta[0];
        let mut g1 = vec![0.0; d];
        g1[0] = 1.0;
        let mut g2 = vec![0.0; d];
        match self.kind {
            ZdtKind::Zdt1 => {
                // L² = g − √(θ₁ g)
                let t1c = t1.max(ZDT_SQRT_GUARD);
                g2[0] = -0.5 * (g / t1c).sqrt();
                let dg = slope * (1.0 - 0.5 * (t1c / g).sqrt());
                g2[1..].iter_mut().for_each(|v| *v = dg);
            }
            ZdtKind::Zdt2 => {
                // L² = g − θ₁²/g
                g2[0] = -2.0 * t1 / g;
                let dg = slope * (1.0 + (t1 / g) * (t1 / g));
                g2[1..].iter_mut().for_each(|v| *v = dg);
            }
        }
        vec![g1, g2]
    }
}

/// Hessian storage of a quadratic task.
#[derive(Debug, Clone, PartialEq)]
pub enum Hessian {
    /// Row-major `d × d` symmetric positive-definite matrix.
    Dense(Vec<f64>),
    Diagonal(Vec<f64>),
}

impl Hessian {
    pub fn dim(&self) -> usize {
        match self {
            Hessian::Dense(q) => (q.len() as f64).sqrt().round() as usize,
            Hessian::Diagonal(q) => q.len(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Hessian::Dense(q) => {
                let d = x.len();
                (0..d)
                    .map(|r| {
                        q[r * d..(r + 1) * d]
                            .iter()
                            .zip(x)
                            .map(|(a, b)| a * b)
                            .sum()
                    })
                    .collect()
            }
            Hessian::Diagonal(q) => q.iter().zip(x).map(|(a, b)| a * b).collect(),
        }
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            Hessian::Dense(q) => q.clone(),
            Hessian::Diagonal(q) => {
                let d = q.len();
                let mut out = vec![0.0; d * d];
                for (k, v) in q.iter().enumerate() {
                    out[k * d + k] = *v;
                }
                out
            }
        }
    }
}

/// `f(θ) = ½ (θ − c)ᵀ Q (θ − c)`, a single-task objective set.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticTask {
    pub center: Vec<f64>,
    pub hessian: Hessian,
}

impl ObjectiveSet for QuadraticTask {
    fn num_objectives(&self) -> usize {
        1
    }

    fn dim(&self) -> usize {
        self.center.len()
    }

    fn ideal_point(&self) -> Option<Vec<f64>> {
        Some(vec![0.0])
    }

    fn eval(&self, theta: &[f64]) -> Vec<f64> {
        let diff: Vec<f64> = theta.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let qd = self.hessian.apply(&diff);
        vec![0.5 * diff.iter().zip(&qd).map(|(a, b)| a * b).sum::<f64>()]
    }

    fn grad(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        let diff: Vec<f64> = theta.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        vec![self.hessian.apply(&diff)]
    }

    fn eval_grad(&self, theta: &[f64]) -> Evaluation {
        let diff: Vec<f64> = theta.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let g = self.hessian.apply(&diff);
        let loss = 0.5 * diff.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        Evaluation {
            losses: vec![loss],
            grads: vec![g],
        }
    }
}

/// Eigenvalue range `[xi, l_bar]` of ensemble Hessians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianSpread {
    pub xi: f64,
    pub l_bar: f64,
}

impl HessianSpread {
    pub fn new(xi: f64, l_bar: f64) -> Result<Self> {
        if !(xi > 0.0 && xi <= l_bar && l_bar.is_finite()) {
            return Err(Error::contract(format!(
                "hessian spread needs 0 < xi <= l_bar, got [{xi}, {l_bar}]"
            )));
        }
        Ok(HessianSpread { xi, l_bar })
    }
}

/// `N` strongly convex quadratic tasks, one per subproblem, with known optima.
#[derive(Debug, Clone)]
pub struct QuadraticEnsemble {
    tasks: Vec<QuadraticTask>,
    spread: HessianSpread,
}

impl QuadraticEnsemble {
    /// Builds an ensemble from explicit centers and Hessians.
    pub fn from_tasks(tasks: Vec<QuadraticTask>, spread: HessianSpread) -> Result<Self> {
        let Some(first) = tasks.first() else {
            return Err(Error::contract("ensemble needs at least one task"));
        };
        let d = first.dim();
        for t in &tasks {
            if t.dim() != d || t.hessian.dim() != d {
                return Err(Error::DimensionMismatch {
                    context: "quadratic ensemble",
                    expected: d,
                    actual: t.dim(),
                });
            }
        }
        Ok(QuadraticEnsemble { tasks, spread })
    }

    pub fn tasks(&self) -> &[QuadraticTask] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn spread(&self) -> HessianSpread {
        self.spread
    }

    /// Exact minimizers `cᵢ`.
    pub fn optima(&self) -> Vec<Vec<f64>> {
        self.tasks.iter().map(|t| t.center.clone()).collect()
    }

    /// `b₀ = maxᵢⱼ ‖cᵢ − cⱼ‖`.
    pub fn b0(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in self.tasks.iter().enumerate() {
            for b in &self.tasks[i + 1..] {
                let dist = a
                    .center
                    .iter()
                    .zip(&b.center)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                best = best.max(dist);
            }
        }
        best
    }

    /// Whether at least two Hessians differ.
    pub fn has_distinct_hessians(&self) -> bool {
        self.tasks
            .windows(2)
            .any(|w| w[0].hessian.to_dense() != w[1].hessian.to_dense())
    }
}

impl ProblemFamily for QuadraticEnsemble {
    fn subproblem(&self, i: usize) -> &dyn ObjectiveSet {
        &self.tasks[i]
    }
}

/// Random ensemble with dense Hessians `R diag(eigs) Rᵀ`, `R` a seeded random
/// rotation and eigenvalues uniform in `[xi, l_bar]`. Centers are standard
/// normal.
pub fn quadratic_ensemble(
    n: usize,
    d: usize,
    spread: HessianSpread,
    seed: u64,
) -> Result<QuadraticEnsemble> {
    build_ensemble(n, d, spread, seed, true)
}

/// Like [`quadratic_ensemble`] but with diagonal Hessians, so gradients cost
/// `O(d)` instead of `O(d²)`.
pub fn axis_aligned_ensemble(
    n: usize,
    d: usize,
    spread: HessianSpread,
    seed: u64,
) -> Result<QuadraticEnsemble> {
    build_ensemble(n, d, spread, seed, false)
}

fn build_ensemble(
    n: usize,
    d: usize,
    spread: HessianSpread,
    seed: u64,
    rotate: bool,
) -> Result<QuadraticEnsemble> {
    if n == 0 || d == 0 {
        return Err(Error::contract("ensemble needs n >= 1 and d >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tasks = Vec::with_capacity(n);
    for _ in 0..n {
        let eigs: Vec<f64> = (0..d)
            .map(|_| rng.gen_range(spread.xi..=spread.l_bar))
            .collect();
        let hessian = if rotate {
            let r = random_rotation(d, &mut rng);
            let mut q = vec![0.0; d * d];
            for a in 0..d {
                for b in 0..d {
                    q[a * d + b] = (0..d).map(|k| r[a * d + k] * eigs[k] * r[b * d + k]).sum();
                }
            }
            // exact symmetry
            for a in 0..d {
                for b in a + 1..d {
                    let avg = 0.5 * (q[a * d + b] + q[b * d + a]);
                    q[a * d + b] = avg;
                    q[b * d + a] = avg;
                }
            }
            Hessian::Dense(q)
        } else {
            Hessian::Diagonal(eigs)
        };
        let center = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        tasks.push(QuadraticTask { center, hessian });
    }
    QuadraticEnsemble::from_tasks(tasks, spread)
}

// Orthogonalized Gaussian matrix (modified Gram-Schmidt on columns), row-major.
fn random_rotation(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut cols: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let mut ok = true;
        for j in 0..d {
            for k in 0..j {
                let dot: f64 = cols[j].iter().zip(&cols[k]).map(|(a, b)| a * b).sum();
                let (head, tail) = cols.split_at_mut(j);
                for (x, y) in tail[0].iter_mut().zip(&head[k]) {
                    *x -= dot * y;
                }
            }
            let norm = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            cols[j].iter_mut().for_each(|x| *x /= norm);
        }
        if ok {
            let mut r = vec![0.0; d * d];
            for (j, col) in cols.iter().enumerate() {
                for (i, v) in col.iter().enumerate() {
                    r[i * d + j] = *v;
                }
            }
            return r;
        }
    }
}

/// Evenly spread weight vectors on the `m`-simplex.
///
/// For `m = 2` the vectors are `(i/(N−1), 1 − i/(N−1))`, endpoints included
/// (`N = 1` yields the centroid). For `m = 3` the Das-Dennis lattice with the
/// smallest gap `H` giving at least `N` points is enumerated in descending
/// lexicographic order and truncated to `N`.
pub fn even_weights(m: usize, n: usize) -> Result<Vec<WeightVector>> {
    if n == 0 {
        return Err(Error::contract("need at least one weight vector"));
    }
    match m {
        2 => {
            if n == 1 {
                return Ok(vec![WeightVector::new(vec![0.5, 0.5])?]);
            }
            (0..n)
                .map(|i| {
                    let a = i as f64 / (n - 1) as f64;
                    WeightVector::new(vec![a, 1.0 - a])
                })
                .collect()
        }
        3 => {
            let mut h = 1usize;
            while (h + 1) * (h + 2) / 2 < n {
                h += 1;
            }
            let mut out = Vec::with_capacity(n);
            'outer: for a in (0..=h).rev() {
                for b in (0..=h - a).rev() {
                    let c = h - a - b;
                    let hf = h as f64;
                    out.push(WeightVector::new(vec![
                        a as f64 / hf,
                        b as f64 / hf,
                        c as f64 / hf,
                    ])?);
                    if out.len() == n {
                        break 'outer;
                    }
                }
            }
            Ok(out)
        }
        _ => Err(Error::contract(format!(
            "even weight generation supports m in {{2, 3}}, got {m}; pass explicit vectors"
        ))),
    }
}

/// Two-objective weights `((i+1)/(N+1), 1 − (i+1)/(N+1))` that exclude the
/// simplex vertices.
pub fn interior_weights(n: usize) -> Result<Vec<WeightVector>> {
    if n == 0 {
        return Err(Error::contract("need at least one weight vector"));
    }
    (0..n)
        .map(|i| {
            let a = (i + 1) as f64 / (n + 1) as f64;
            WeightVector::new(vec![a, 1.0 - a])
        })
        .collect()
}
