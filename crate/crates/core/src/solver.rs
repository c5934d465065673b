//! Joint gradient descent over `N` scalarized subproblems with transfer.
//!
//! One iteration mixes the current parameter vectors through the transfer
//! plan and subtracts each subproblem's own gradient, evaluated at its
//! pre-transfer iterate:
//!
//! ```text
//! θᵢᵗ⁺¹ = Σⱼ Mᵢⱼᵗ θⱼᵗ − α ∇fᵢ(θᵢᵗ)
//! ```
//!
//! followed by an optional projection onto a box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};
use crate::problems::{Bounds, ProblemFamily};
use crate::scalarize::{Scalarization, WeightVector};
use crate::transfer::TransferPlan;

/// Offset subtracted from the running minimum when tracking the ideal point.
pub const RUNNING_MIN_OFFSET: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMode {
    /// Ideal point supplied by the problem.
    Analytic,
    /// Componentwise minimum of all losses observed so far, minus
    /// [`RUNNING_MIN_OFFSET`].
    RunningMin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSpec {
    pub weight: WeightVector,
    pub scalarization: Scalarization,
    pub ref_mode: ReferenceMode,
}

impl SubproblemSpec {
    pub fn new(
        weight: WeightVector,
        scalarization: Scalarization,
        ref_mode: ReferenceMode,
    ) -> Self {
        SubproblemSpec {
            weight,
            scalarization,
            ref_mode,
        }
    }

    /// One spec per weight vector, all sharing the scalarization.
    pub fn family(
        weights: &[WeightVector],
        scalarization: Scalarization,
        ref_mode: ReferenceMode,
    ) -> Vec<SubproblemSpec> {
        weights
            .iter()
            .map(|w| SubproblemSpec::new(w.clone(), scalarization, ref_mode))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitMode {
    /// Points along the main diagonal of the box at fractions `i/(N−1)`.
    EvenSpread,
    /// Uniform in the box, or standard normal for unbounded problems.
    Random,
    /// Normal with the given standard deviation, ignoring bounds.
    Gaussian { std: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Telemetry {
    EveryIteration,
    Stride(usize),
    Off,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub step_size: f64,
    pub max_iters: usize,
    pub plan: TransferPlan,
    pub projection: Option<Bounds>,
    pub seed: u64,
    pub init: InitMode,
    pub telemetry: Telemetry,
}

impl SolverConfig {
    pub fn new(step_size: f64, max_iters: usize, plan: TransferPlan) -> Self {
        SolverConfig {
            step_size,
            max_iters,
            plan,
            projection: None,
            seed: 0,
            init: InitMode::Random,
            telemetry: Telemetry::EveryIteration,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::contract(format!(
                "step size must be > 0, got {}",
                self.step_size
            )));
        }
        if let InitMode::Gaussian { std } = self.init {
            if !(std > 0.0 && std.is_finite()) {
                return Err(Error::contract(format!("init std must be > 0, got {std}")));
            }
        }
        if let Telemetry::Stride(0) = self.telemetry {
            return Err(Error::contract("telemetry stride must be >= 1"));
        }
        Ok(())
    }
}

/// Telemetry for one completed iteration, taken after the update.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Iteration count after the update (1-based).
    pub iteration: usize,
    /// `N × m` loss vectors.
    pub losses: Vec<Vec<f64>>,
    /// Scalarized objective per subproblem.
    pub scalarized: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub thetas: Vec<Vec<f64>>,
    pub iteration: usize,
    /// Tracked ideal point for [`ReferenceMode::RunningMin`].
    pub running_ideal: Option<Vec<f64>>,
    /// With [`Telemetry::EveryIteration`], `history.len() == iteration`.
    pub history: Vec<IterationRecord>,
}

impl SolverState {
    pub fn from_thetas(thetas: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(first) = thetas.first() {
            for t in &thetas {
                check_len("solver state", first.len(), t.len())?;
            }
        }
        Ok(SolverState {
            thetas,
            iteration: 0,
            running_ideal: None,
            history: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }
}

/// Initial parameter vectors for `n` subproblems.
pub fn init_states<P: ProblemFamily + ?Sized>(
    problem: &P,
    n: usize,
    mode: InitMode,
    seed: u64,
) -> Result<SolverState> {
    let d = problem.family_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let thetas = match mode {
        InitMode::EvenSpread => {
            let b = problem
                .family_bounds()
                .ok_or_else(|| Error::contract("even_spread init requires box bounds"))?;
            (0..n)
                .map(|i| {
                    let frac = if n > 1 {
                        i as f64 / (n - 1) as f64
                    } else {
                        0.5
                    };
                    b.lower()
                        .iter()
                        .zip(b.upper())
                        .map(|(lo, hi)| lo + frac * (hi - lo))
                        .collect()
                })
                .collect()
        }
        InitMode::Random => match problem.family_bounds() {
            Some(b) => (0..n)
                .map(|_| {
                    b.lower()
                        .iter()
                        .zip(b.upper())
                        .map(|(lo, hi)| {
                            if lo < hi {
                                rng.gen_range(*lo..*hi)
                            } else {
                                *lo
                            }
                        })
                        .collect()
                })
                .collect(),
            None => (0..n)
                .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
                .collect(),
        },
        InitMode::Gaussian { std } => (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| std * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect(),
    };
    SolverState::from_thetas(thetas)
}

fn ideal_for<P: ProblemFamily + ?Sized>(
    problem: &P,
    spec: &SubproblemSpec,
    i: usize,
    running: Option<&Vec<f64>>,
) -> Result<Vec<f64>> {
    match spec.scalarization {
        Scalarization::WeightedSum => Ok(vec![0.0; spec.weight.len()]),
        Scalarization::SmoothedTchebycheff(_) => match spec.ref_mode {
            ReferenceMode::Analytic => problem.subproblem(i).ideal_point().ok_or_else(|| {
                Error::contract("analytic reference mode needs a problem with a known ideal point")
            }),
            ReferenceMode::RunningMin => running
                .cloned()
                .ok_or_else(|| Error::contract("running ideal point not initialized")),
        },
    }
}

fn update_running_min(running: &mut Option<Vec<f64>>, losses: &[Vec<f64>]) {
    for l in losses {
        match running {
            None => *running = Some(l.iter().map(|v| v - RUNNING_MIN_OFFSET).collect()),
            Some(z) => {
                for (zi, li) in z.iter_mut().zip(l) {
                    *zi = zi.min(li - RUNNING_MIN_OFFSET);
                }
            }
        }
    }
}

fn check_consistent<P: ProblemFamily + ?Sized>(
    state: &SolverState,
    specs: &[SubproblemSpec],
    config: &SolverConfig,
    problem: &P,
) -> Result<()> {
    let n = state.len();
    check_len("subproblem specs", n, specs.len())?;
    check_len("transfer plan", n, config.plan.len())?;
    let d = problem.family_dim();
    let m = problem.family_objectives();
    for t in &state.thetas {
        check_len("parameter vector", d, t.len())?;
    }
    for s in specs {
        check_len("weight vector", m, s.weight.len())?;
    }
    if let Some(b) = &config.projection {
        check_len("projection bounds", d, b.dim())?;
    }
    Ok(())
}

/// One joint iteration. On error the state is left untouched.
pub fn step<P: ProblemFamily + ?Sized>(
    state: &mut SolverState,
    specs: &[SubproblemSpec],
    config: &SolverConfig,
    problem: &P,
) -> Result<()> {
    check_consistent(state, specs, config, problem)?;
    let t = state.iteration;

    let evals: Vec<_> = state
        .thetas
        .iter()
        .enumerate()
        .map(|(i, th)| problem.subproblem(i).eval_grad(th))
        .collect();

    let mut running = state.running_ideal.clone();
    if specs
        .iter()
        .any(|s| s.ref_mode == ReferenceMode::RunningMin)
    {
        let losses: Vec<Vec<f64>> = evals.iter().map(|e| e.losses.clone()).collect();
        update_running_min(&mut running, &losses);
    }

    let mut grads = Vec::with_capacity(state.len());
    for (i, (spec, ev)) in specs.iter().zip(&evals).enumerate() {
        let z = ideal_for(problem, spec, i, running.as_ref())?;
        let g = spec
            .scalarization
            .gradient(&ev.losses, &ev.grads, &spec.weight, &z)?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient {
                subproblem: i,
                iteration: t,
            });
        }
        grads.push(g);
    }

    let mut next = config.plan.apply(&state.thetas, t)?;
    for (th, g) in next.iter_mut().zip(&grads) {
        for (x, gi) in th.iter_mut().zip(g) {
            *x -= config.step_size * gi;
        }
        if let Some(b) = &config.projection {
            b.project(th);
        }
    }

    let record = match config.telemetry {
        Telemetry::EveryIteration => true,
        Telemetry::Stride(k) => (t + 1).is_multiple_of(k),
        Telemetry::Off => false,
    };
    if record
        || specs
            .iter()
            .any(|s| s.ref_mode == ReferenceMode::RunningMin)
    {
        let losses: Vec<Vec<f64>> = next
            .iter()
            .enumerate()
            .map(|(i, th)| problem.subproblem(i).eval(th))
            .collect();
        if specs
            .iter()
            .any(|s| s.ref_mode == ReferenceMode::RunningMin)
        {
            update_running_min(&mut running, &losses);
        }
        if record {
            let scalarized = specs
                .iter()
                .zip(&losses)
                .enumerate()
                .map(|(i, (spec, l))| {
                    let z = ideal_for(problem, spec, i, running.as_ref())?;
                    spec.scalarization.value(l, &spec.weight, &z)
                })
                .collect::<Result<Vec<f64>>>()?;
            state.history.push(IterationRecord {
                iteration: t + 1,
                losses,
                scalarized,
            });
        }
    }

    state.thetas = next;
    state.running_ideal = running;
    state.iteration = t + 1;
    Ok(())
}

/// Final state of a run; its parameter vectors are the solution set.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub state: SolverState,
    /// Loss vectors of the final parameter vectors.
    pub final_losses: Vec<Vec<f64>>,
}

/// Initializes from `config.init` and `config.seed`, then iterates until
/// `max_iters`.
pub fn run<P: ProblemFamily + ?Sized>(
    problem: &P,
    specs: &[SubproblemSpec],
    config: &SolverConfig,
) -> Result<RunOutput> {
    config.validate()?;
    let state = init_states(problem, specs.len(), config.init, config.seed)?;
    run_from(state, problem, specs, config)
}

/// Iterates an existing state until `config.max_iters`.
pub fn run_from<P: ProblemFamily + ?Sized>(
    mut state: SolverState,
    problem: &P,
    specs: &[SubproblemSpec],
    config: &SolverConfig,
) -> Result<RunOutput> {
    config.validate()?;
    check_consistent(&state, specs, config, problem)?;
    while state.iteration < config.max_iters {
        step(&mut state, specs, config, problem)?;
    }
    let final_losses = state
        .thetas
        .iter()
        .enumerate()
        .map(|(i, th)| problem.subproblem(i).eval(th))
        .collect();
    Ok(RunOutput {
        state,
        final_losses,
    })
}
