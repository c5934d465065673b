//! Decomposition of a loss vector into a single subproblem objective.
//!
//! Two scalarizations are provided. The weighted sum `Σ λʲ Lʲ` is linear and
//! only reaches the convex parts of a Pareto front. The smoothed Tchebycheff
//! function replaces the max in `maxⱼ λʲ|Lʲ − zʲ*|` by an `α`-softmax and the
//! absolute value by `√(x² + ε)`, which keeps it differentiable while still
//! reaching concave parts of the front.
//!
//! All functions here are pure and operate on slices: a loss vector is a
//! `&[f64]` of length `m`, task gradients are `m` slices of length `d`.

use crate::error::{check_len, Error, Result};

/// Tolerance on the component sum of a stored weight vector.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Preference weights on the probability simplex.
///
/// Components are normalized to sum to one on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::contract("weight vector must be non-empty"));
        }
        if components.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::contract(format!(
                "weight components must be finite and nonnegative, got {components:?}"
            )));
        }
        let total: f64 = components.iter().sum();
        if total <= 0.0 {
            return Err(Error::contract("weight vector must have positive mass"));
        }
        Ok(WeightVector(
            components.into_iter().map(|w| w / total).collect(),
        ))
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn distance(&self, other: &WeightVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl AsRef<[f64]> for WeightVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Softmax sharpness `alpha_s` and absolute-value smoothing `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    pub alpha_s: f64,
    pub epsilon: f64,
}

impl SmoothingParams {
    pub fn new(alpha_s: f64, epsilon: f64) -> Result<Self> {
        if !(alpha_s > 0.0 && alpha_s.is_finite()) {
            return Err(Error::contract(format!(
                "alpha_s must be > 0, got {alpha_s}"
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::contract(format!(
                "epsilon must be > 0, got {epsilon}"
            )));
        }
        Ok(SmoothingParams { alpha_s, epsilon })
    }
}

impl Default for SmoothingParams {
    fn default() -> Self {
        SmoothingParams {
            alpha_s: 5.0,
            epsilon: 0.05,
        }
    }
}

/// Scalarization choice for one subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scalarization {
    WeightedSum,
    SmoothedTchebycheff(SmoothingParams),
}

impl Scalarization {
    /// Scalar objective value. `ideal` is ignored by the weighted sum.
    pub fn value(&self, losses: &[f64], w: &WeightVector, ideal: &[f64]) -> Result<f64> {
        match self {
            Scalarization::WeightedSum => weighted_sum(losses, w),
            Scalarization::SmoothedTchebycheff(s) => smoothed_tchebycheff(losses, w, ideal, s),
        }
    }

    pub fn gradient<G: AsRef<[f64]>>(
        &self,
        losses: &[f64],
        task_grads: &[G],
        w: &WeightVector,
        ideal: &[f64],
    ) -> Result<Vec<f64>> {
        match self {
            Scalarization::WeightedSum => weighted_sum_grad(task_grads, w),
            Scalarization::SmoothedTchebycheff(s) => {
                smoothed_tchebycheff_grad(losses, task_grads, w, ideal, s)
            }
        }
    }
}

pub fn weighted_sum(losses: &[f64], w: &WeightVector) -> Result<f64> {
    check_len("weighted_sum", w.len(), losses.len())?;
    Ok(losses
        .iter()
        .zip(w.components())
        .map(|(l, lam)| lam * l)
        .sum())
}

pub fn weighted_sum_grad<G: AsRef<[f64]>>(task_grads: &[G], w: &WeightVector) -> Result<Vec<f64>> {
    check_len("weighted_sum_grad", w.len(), task_grads.len())?;
    let d = task_grads[0].as_ref().len();
    let mut out = vec![0.0; d];
    for (g, &lam) in task_grads.iter().zip(w.components()) {
        let g = g.as_ref();
        check_len("weighted_sum_grad", d, g.len())?;
        for (o, gi) in out.iter_mut().zip(g) {
            *o += lam * gi;
        }
    }
    Ok(out)
}

/// Exact Tchebycheff value `maxⱼ λʲ|Lʲ − zʲ*|`.
pub fn exact_tchebycheff(losses: &[f64], w: &WeightVector, ideal: &[f64]) -> Result<f64> {
    check_len("exact_tchebycheff", w.len(), losses.len())?;
    check_len("exact_tchebycheff", w.len(), ideal.len())?;
    Ok(losses
        .iter()
        .zip(ideal)
        .zip(w.components())
        .map(|((l, z), lam)| lam * (l - z).abs())
        .fold(0.0, f64::max))
}

/// Smoothed terms `uⱼ = λʲ √((Lʲ − zʲ*)² + ε)`.
pub fn smoothed_terms(
    losses: &[f64],
    w: &WeightVector,
    ideal: &[f64],
    s: &SmoothingParams,
) -> Result<Vec<f64>> {
    check_len("smoothed_tchebycheff", w.len(), losses.len())?;
    check_len("smoothed_tchebycheff", w.len(), ideal.len())?;
    Ok(losses
        .iter()
        .zip(ideal)
        .zip(w.components())
        .map(|((l, z), lam)| lam * ((l - z) * (l - z) + s.epsilon).sqrt())
        .collect())
}

// Softmax weights of `alpha * u`, shifted by the max exponent.
fn softmax(u: &[f64], alpha: f64) -> Vec<f64> {
    let top = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut e: Vec<f64> = u.iter().map(|x| (alpha * (x - top)).exp()).collect();
    let total: f64 = e.iter().sum();
    for v in &mut e {
        *v /= total;
    }
    e
}

pub fn smoothed_tchebycheff(
    losses: &[f64],
    w: &WeightVector,
    ideal: &[f64],
    s: &SmoothingParams,
) -> Result<f64> {
    let u = smoothed_terms(losses, w, ideal, s)?;
    let p = softmax(&u, s.alpha_s);
    Ok(p.iter().zip(&u).map(|(pi, ui)| pi * ui).sum())
}

/// Analytic gradient of [`smoothed_tchebycheff`] with respect to the parameters.
///
/// With softmax weights `pₖ` and value `f = Σ pₖ uₖ`, the partial derivative
/// is `∂f/∂uₖ = pₖ (1 + α (uₖ − f))`, chained through
/// `∂uₖ/∂Lₖ = λₖ (Lₖ − zₖ) / √((Lₖ − zₖ)² + ε)`.
pub fn smoothed_tchebycheff_grad<G: AsRef<[f64]>>(
    losses: &[f64],
    task_grads: &[G],
    w: &WeightVector,
    ideal: &[f64],
    s: &SmoothingParams,
) -> Result<Vec<f64>> {
    check_len("smoothed_tchebycheff_grad", w.len(), task_grads.len())?;
    let u = smoothed_terms(losses, w, ideal, s)?;
    let p = softmax(&u, s.alpha_s);
    let f: f64 = p.iter().zip(&u).map(|(pi, ui)| pi * ui).sum();

    let d = task_grads[0].as_ref().len();
    let mut out = vec![0.0; d];
    for k in 0..losses.len() {
        let diff = losses[k] - ideal[k];
        let du_dl = w.components()[k] * diff / (diff * diff + s.epsilon).sqrt();
        let coef = p[k] * (1.0 + s.alpha_s * (u[k] - f)) * du_dl;
        let g = task_grads[k].as_ref();
        check_len("smoothed_tchebycheff_grad", d, g.len())?;
        if coef != 0.0 {
            for (o, gi) in out.iter_mut().zip(g) {
                *o += coef * gi;
            }
        }
    }
    Ok(out)
}
