//! Spectral checks of transfer-accelerated convergence on quadratic
//! ensembles.
//!
//! For quadratic subproblems the joint iteration is affine in the
//! concatenated parameter vector `θ ∈ ℝᵈᴺ`:
//!
//! ```text
//! θᵗ⁺¹ − θ* = (𝓜 − αH)(θᵗ − θ*) + (𝓜 − I)θ*
//! ```
//!
//! where `𝓜` expands each coefficient `Mᵢⱼ` to a `d × d` diagonal block and
//! `H` is block diagonal in the task Hessians. Transfer helps when
//! `ρ(𝓜 − αH) < ρ(I − αH)`; this module computes both radii, evaluates the
//! sufficient condition on the cutoff `T₀`, and runs paired trajectories to
//! observe the effect.

use crate::error::{check_len, Error, Result};
use crate::problems::{ObjectiveSet, QuadraticEnsemble};
use crate::scalarize::{Scalarization, WeightVector};
use crate::solver::{step, ReferenceMode, SolverConfig, SolverState, SubproblemSpec, Telemetry};
use crate::transfer::TransferPlan;

/// Symmetry tolerance accepted by [`spectral_radius`].
pub const SYMMETRY_TOL: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        check_len("square matrix", n * n, data.len())?;
        Ok(Matrix { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n + c] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                self.data[r * self.n..(r + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n {
            for c in r + 1..self.n {
                worst = worst.max((self.get(r, c) - self.get(c, r)).abs());
            }
        }
        worst
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(matrix: &Matrix) -> Result<Vec<f64>> {
    let asym = matrix.max_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::contract(format!(
            "eigensolver needs a symmetric matrix, max asymmetry {asym:e}"
        )));
    }
    let n = matrix.order();
    let mut a = matrix.data.clone();
    // symmetrize the working copy so rotations stay exact
    for r in 0..n {
        for c in r + 1..n {
            let v = 0.5 * (a[r * n + c] + a[c * n + r]);
            a[r * n + c] = v;
            a[c * n + r] = v;
        }
    }
    let scale = a
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| a[r * n + c] * a[r * n + c])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off < 1e-300 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|k| a[k * n + k]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_radius(matrix: &Matrix) -> Result<f64> {
    Ok(symmetric_eigenvalues(matrix)?
        .into_iter()
        .fold(0.0, |acc, v| acc.max(v.abs())))
}

/// The `dN × dN` expansion of a transfer plan: block `(i, j)` is
/// `diag(Mᵢⱼ,₁ … Mᵢⱼ,ₔ)`.
pub fn expand_plan(plan: &TransferPlan, d: usize) -> Result<Matrix> {
    if let Some(kd) = plan.coordinate_dim() {
        check_len("plan expansion", kd, d)?;
    }
    let n = plan.len();
    let mut m = Matrix::zeros(n * d);
    for i in 0..n {
        for j in 0..n {
            for k in 0..d {
                m.set(i * d + k, j * d + k, plan.coefficient(i, j, k));
            }
        }
    }
    Ok(m)
}

/// `(Aₘ, Aₛ) = (𝓜 − αH, I − αH)` for a quadratic ensemble.
pub fn build_concatenated(
    ensemble: &QuadraticEnsemble,
    plan: &TransferPlan,
    alpha: f64,
) -> Result<(Matrix, Matrix)> {
    let n = ensemble.len();
    check_len("transfer plan", n, plan.len())?;
    let d = ensemble.tasks()[0].dim();
    let mut am = expand_plan(plan, d)?;
    let mut as_ = Matrix::identity(n * d);
    for (i, task) in ensemble.tasks().iter().enumerate() {
        let q = task.hessian.to_dense();
        for r in 0..d {
            for c in 0..d {
                let (row, col) = (i * d + r, i * d + c);
                let h = alpha * q[r * d + c];
                am.set(row, col, am.get(row, col) - h);
                as_.set(row, col, as_.get(row, col) - h);
            }
        }
    }
    Ok((am, as_))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub rho_am: f64,
    pub rho_as: f64,
    /// Max over iterations of `ρ(Aₘᵗ)`; constant plans make this `rho_am`.
    pub eta1: f64,
    pub eta2: f64,
    /// `1 / (2 L̄)`.
    pub alpha_bound: f64,
    pub b0: f64,
    /// `‖∇f(θ⁰)‖` over the concatenated gradient.
    pub grad_norm0: f64,
    pub t0: usize,
    pub eq10_satisfied: bool,
}

/// Which premises of the acceleration result hold.
#[derive(Debug, Clone, PartialEq)]
pub struct Premises {
    pub plan_valid: bool,
    pub step_below_bound: bool,
    pub distinct_hessians: bool,
}

impl Premises {
    pub fn all(&self) -> bool {
        self.plan_valid && self.step_below_bound && self.distinct_hessians
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Report {
    pub spectral: SpectralReport,
    pub premises: Premises,
    /// `‖θᵗ − θ*‖` with transfer, `t = 0..=horizon`.
    pub errors_with: Vec<f64>,
    /// Same for the identity plan.
    pub errors_without: Vec<f64>,
    /// Whether `‖θᵗ⁺¹ − θ*‖ ≤ ρ(Aₘ)‖θᵗ − θ*‖ + ‖(𝓜 − I)θ*‖` held for every
    /// transfer iteration.
    pub error_bound_holds: bool,
}

impl Theorem1Report {
    pub fn err_t0_with(&self) -> f64 {
        self.errors_with[self.spectral.t0.min(self.errors_with.len() - 1)]
    }

    pub fn err_t0_without(&self) -> f64 {
        self.errors_without[self.spectral.t0.min(self.errors_without.len() - 1)]
    }
}

/// Left side minus right side of the sufficient condition on `T₀`; negative
/// means satisfied.
pub fn eq10_margin(eta1: f64, eta2: f64, grad_norm0: f64, l_bar: f64, b0: f64, t0: usize) -> f64 {
    let e1 = eta1.powi(t0 as i32);
    let e2 = eta2.powi(t0 as i32);
    let scaled = grad_norm0 / l_bar;
    e1 * scaled + (1.0 - e1) / (1.0 + eta1) * b0 - e2 * scaled
}

fn concat_distance(thetas: &[Vec<f64>], optima: &[Vec<f64>]) -> f64 {
    thetas
        .iter()
        .zip(optima)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)))
        .sum::<f64>()
        .sqrt()
}

/// Spectral comparison, the `T₀` condition, and paired trajectories from
/// `theta0` run for `horizon` iterations.
///
/// Premise violations are reported in [`Premises`] rather than rejected.
pub fn verify_theorem1(
    ensemble: &QuadraticEnsemble,
    plan: &TransferPlan,
    alpha: f64,
    theta0: &[Vec<f64>],
    horizon: usize,
) -> Result<Theorem1Report> {
    let n = ensemble.len();
    check_len("initial parameters", n, theta0.len())?;
    let t0 = plan.t0();
    let l_bar = ensemble.spread().l_bar;
    let (am, as_) = build_concatenated(ensemble, plan, alpha)?;
    let rho_am = spectral_radius(&am)?;
    let rho_as = spectral_radius(&as_)?;

    let grad_norm0 = ensemble
        .tasks()
        .iter()
        .zip(theta0)
        .flat_map(|(task, th)| task.grad(th).remove(0))
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    let b0 = ensemble.b0();
    let eq10 = eq10_margin(rho_am, rho_as, grad_norm0, l_bar, b0, t0) < 0.0;

    let spectral = SpectralReport {
        rho_am,
        rho_as,
        eta1: rho_am,
        eta2: rho_as,
        alpha_bound: 1.0 / (2.0 * l_bar),
        b0,
        grad_norm0,
        t0,
        eq10_satisfied: eq10,
    };
    let premises = Premises {
        plan_valid: plan.validate().is_valid(),
        step_below_bound: alpha > 0.0 && alpha < spectral.alpha_bound,
        distinct_hessians: ensemble.has_distinct_hessians(),
    };

    let optima = ensemble.optima();
    let specs: Vec<SubproblemSpec> = (0..n)
        .map(|_| {
            SubproblemSpec::new(
                WeightVector::new(vec![1.0]).expect("unit weight"),
                Scalarization::WeightedSum,
                ReferenceMode::Analytic,
            )
        })
        .collect();

    let trajectory = |p: &TransferPlan| -> Result<Vec<Vec<Vec<f64>>>> {
        let mut config = SolverConfig::new(alpha, horizon, p.clone());
        config.telemetry = Telemetry::Off;
        let mut state = SolverState::from_thetas(theta0.to_vec())?;
        let mut path = vec![state.thetas.clone()];
        for _ in 0..horizon {
            step(&mut state, &specs, &config, ensemble)?;
            path.push(state.thetas.clone());
        }
        Ok(path)
    };
    let path_with = trajectory(plan)?;
    let path_without = trajectory(&TransferPlan::identity(n))?;

    // ‖(𝓜 − I)θ*‖
    let d = optima[0].len();
    let m_exp = expand_plan(plan, d)?;
    let flat_opt: Vec<f64> = optima.iter().flatten().copied().collect();
    let mixed = m_exp.mul_vec(&flat_opt);
    let drift = mixed
        .iter()
        .zip(&flat_opt)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();

    let errors_with: Vec<f64> = path_with
        .iter()
        .map(|th| concat_distance(th, &optima))
        .collect();
    let errors_without: Vec<f64> = path_without
        .iter()
        .map(|th| concat_distance(th, &optima))
        .collect();
    let error_bound_holds = errors_with
        .windows(2)
        .take(t0.saturating_add(1).min(horizon))
        .all(|w| w[1] <= rho_am * w[0] + drift + 1e-12 * (1.0 + w[0]));

    Ok(Theorem1Report {
        spectral,
        premises,
        errors_with,
        errors_without,
        error_bound_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Hessian, HessianSpread, QuadraticTask};

    fn hand_ensemble() -> QuadraticEnsemble {
        QuadraticEnsemble::from_tasks(
            vec![
                QuadraticTask {
                    center: vec![1.0],
                    hessian: Hessian::Diagonal(vec![1.0]),
                },
                QuadraticTask {
                    center: vec![-1.0],
                    hessian: Hessian::Diagonal(vec![2.0]),
                },
            ],
            HessianSpread::new(1.0, 2.0).unwrap(),
        )
        .unwrap()
    }

    fn hand_plan() -> TransferPlan {
        TransferPlan::from_matrix(2, vec![0.75, 0.25, 0.25, 0.75], 10, 2).unwrap()
    }

    #[test]
    fn radius_examples() {
        assert_eq!(spectral_radius(&Matrix::identity(3)).unwrap(), 1.0);
        let d = Matrix::new(2, vec![0.8, 0.0, 0.0, 0.6]).unwrap();
        assert_eq!(spectral_radius(&d).unwrap(), 0.8);
        let m = Matrix::new(2, vec![0.55, 0.25, 0.25, 0.35]).unwrap();
        let closed = (0.9 + 0.29f64.sqrt()) / 2.0;
        assert!((spectral_radius(&m).unwrap() - closed).abs() < 1e-12);
        assert!((closed - 0.71926).abs() < 1e-5);
    }

    #[test]
    fn radius_picks_negative_eigenvalue() {
        let m = Matrix::new(2, vec![-3.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(spectral_radius(&m).unwrap(), 3.0);
    }

    #[test]
    fn asymmetric_rejected() {
        let m = Matrix::new(2, vec![1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!(spectral_radius(&m).is_err());
    }

    #[test]
    fn hand_concatenated_matrices() {
        let (am, as_) = build_concatenated(&hand_ensemble(), &hand_plan(), 0.2).unwrap();
        let want_am = [0.55, 0.25, 0.25, 0.35];
        for (a, b) in am.data().iter().zip(want_am) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((as_.get(0, 0) - 0.8).abs() < 1e-15);
        assert!((as_.get(1, 1) - 0.6).abs() < 1e-15);
        assert_eq!(as_.get(0, 1), 0.0);
    }

    #[test]
    fn identity_plan_gives_equal_matrices() {
        let (am, as_) =
            build_concatenated(&hand_ensemble(), &TransferPlan::identity(2), 0.2).unwrap();
        assert_eq!(am, as_);
    }

    #[test]
    fn zero_step_radius_is_one() {
        let (am, _) = build_concatenated(&hand_ensemble(), &hand_plan(), 0.0).unwrap();
        assert!((spectral_radius(&am).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hand_instance_report() {
        let rep = verify_theorem1(
            &hand_ensemble(),
            &hand_plan(),
            0.2,
            &[vec![3.0], vec![3.0]],
            40,
        )
        .unwrap();
        assert!((rep.spectral.rho_am - 0.719258240356725).abs() < 1e-9);
        assert!((rep.spectral.rho_as - 0.8).abs() < 1e-12);
        assert_eq!(rep.spectral.alpha_bound, 0.25);
        assert!(rep.premises.all());
        assert!(rep.error_bound_holds);
        assert_eq!(rep.errors_with.len(), 41);
    }

    #[test]
    fn identity_plan_radii_coincide() {
        let rep = verify_theorem1(
            &hand_ensemble(),
            &TransferPlan::identity(2),
            0.2,
            &[vec![0.0], vec![0.0]],
            5,
        )
        .unwrap();
        assert_eq!(rep.spectral.rho_am, rep.spectral.rho_as);
        assert_eq!(rep.errors_with, rep.errors_without);
    }

    #[test]
    fn premise_violations_are_reported() {
        let rep = verify_theorem1(
            &hand_ensemble(),
            &hand_plan(),
            0.3,
            &[vec![0.0], vec![0.0]],
            3,
        )
        .unwrap();
        assert!(!rep.premises.step_below_bound);
        assert!(rep.premises.plan_valid);
    }

    #[test]
    fn eq10_degenerates_without_spread_of_optima() {
        // b0 = 0 leaves η₁^T₀ < η₂^T₀
        assert!(eq10_margin(0.7, 0.8, 1.0, 2.0, 0.0, 5) < 0.0);
        assert!(eq10_margin(0.7, 0.8, 1.0, 2.0, 10.0, 5) > 0.0);
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        // tridiagonal (2, −1) has eigenvalues 2 − 2cos(kπ/(n+1))
        let n = 6;
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m.set(i, i, 2.0);
            if i + 1 < n {
                m.set(i, i + 1, -1.0);
                m.set(i + 1, i, -1.0);
            }
        }
        let eig = symmetric_eigenvalues(&m).unwrap();
        for (k, e) in eig.iter().enumerate() {
            let want = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((e - want).abs() < 1e-12);
        }
    }
}
