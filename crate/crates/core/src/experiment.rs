//! Experiment runner behind the `mtgd` binary: flat `key = value` configs,
//! multi-seed runs, and CSV/SVG artifacts.
//!
//! Config schema (one `key = value` per line, `#` starts a comment):
//!
//! | key | values |
//! |---|---|
//! | `problem` | `p1`, `zdt1`, `zdt2` |
//! | `d`, `n` | decision dimension, number of subproblems |
//! | `weights` | `even`, `interior`, or an explicit list `[[0.2, 0.8], [0.5, 0.5]]` |
//! | `scalarization` | `weighted_sum`, `tchebycheff` |
//! | `alpha_s`, `epsilon` | smoothing of the Tchebycheff scalarization |
//! | `reference` | `analytic`, `running_min` |
//! | `transfer` | `neighbors`, `identity` |
//! | `j`, `t0` | neighborhood size and transfer horizon |
//! | `plan_file` | path to a saved plan, overrides `transfer`/`j`/`t0` |
//! | `step_size`, `max_iters` | gradient step and iteration count |
//! | `seeds` | `[0, 1, 5]` or a half-open range `0..30` |
//! | `ref_point` | `[1.1, 1.1]` |
//! | `init`, `init_std` | `even`, `random`, `gaussian` |
//! | `project` | `true`, `false` |
//! | `out`, `svg` | output directory and whether to draw SVGs |
//! | `eig_min`, `eig_max`, `theta0_std`, `dense` | quadratic ensembles (`theory`) |
//! | `samples`, `noise`, `angle`, `hidden`, `activation`, `epochs`, `batch_size`, `scope`, `loss` | network training (`mtl`) |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{hv_trajectory, hypervolume};
use crate::mtlnet::{
    save_network, train_pareto, Activation, DatasetSpec, MtlNetwork, MtlTrainConfig, NetworkShape,
    SyntheticMtlDataset, TaskLoss, TransferScope,
};
use crate::problems::{
    axis_aligned_ensemble, even_weights, interior_weights, quadratic_ensemble, Bounds,
    HessianSpread, ObjectiveSet, Zdt, P1,
};
use crate::scalarize::{Scalarization, SmoothingParams, WeightVector};
use crate::solver::{
    init_states, run_from, InitMode, ReferenceMode, SolverConfig, SubproblemSpec, Telemetry,
};
use crate::theory::verify_theorem1;
use crate::transfer::{build_coeffs, TransferPlan};

/// Iterations reported by the ablation table.
pub const ABLATION_ITERATIONS: [usize; 4] = [1, 10, 30, 50];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Ablate,
    Theory,
    Mtl,
    Hv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemId {
    P1,
    Zdt1,
    Zdt2,
}

impl ProblemId {
    pub fn name(self) -> &'static str {
        match self {
            ProblemId::P1 => "p1",
            ProblemId::Zdt1 => "zdt1",
            ProblemId::Zdt2 => "zdt2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    Even,
    Interior,
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferMode {
    Neighbors,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemId,
    pub d: usize,
    pub n: usize,
    pub weights: WeightSource,
    pub scalarization: Scalarization,
    pub reference: ReferenceMode,
    pub transfer: TransferMode,
    pub j: usize,
    pub t0: usize,
    pub plan_file: Option<PathBuf>,
    pub step_size: f64,
    pub max_iters: usize,
    pub seeds: Vec<u64>,
    pub ref_point: Vec<f64>,
    pub init: InitMode,
    pub project: bool,
    pub out: PathBuf,
    pub svg: bool,
    // quadratic ensembles
    pub eig_min: f64,
    pub eig_max: f64,
    pub theta0_std: f64,
    pub dense: bool,
    // network training
    pub samples: usize,
    pub noise: f64,
    pub angle: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub scope: TransferScope,
    pub loss: TaskLoss,
}

impl ExperimentConfig {
    /// Synthetic benchmark protocol: ten interior weights, smoothed
    /// Tchebycheff against the known ideal point, `J = 2`, `T₀ = 10`, fifty
    /// iterations, thirty seeds.
    pub fn synthetic(problem: ProblemId) -> Self {
        let (step_size, init, project) = match problem {
            ProblemId::P1 => (1.0, InitMode::Gaussian { std: 0.46 }, false),
            ProblemId::Zdt1 | ProblemId::Zdt2 => (0.3, InitMode::Random, true),
        };
        ExperimentConfig {
            problem,
            d: 20,
            n: 10,
            weights: WeightSource::Interior,
            scalarization: Scalarization::SmoothedTchebycheff(SmoothingParams::default()),
            reference: ReferenceMode::Analytic,
            transfer: TransferMode::Neighbors,
            j: 2,
            t0: 10,
            plan_file: None,
            step_size,
            max_iters: 50,
            seeds: (0..30).collect(),
            ref_point: vec![1.1, 1.1],
            init,
            project,
            out: PathBuf::from("out"),
            svg: true,
            eig_min: 0.5,
            eig_max: 2.0,
            theta0_std: 10.0,
            dense: true,
            samples: 256,
            noise: 0.1,
            angle: 90.0,
            hidden: vec![1],
            activation: Activation::Identity,
            epochs: 40,
            batch_size: 32,
            scope: TransferScope::All,
            loss: TaskLoss::Mse,
        }
    }

    /// Defaults for a command before any file or override is applied.
    pub fn preset(command: Command) -> Self {
        let mut cfg = ExperimentConfig::synthetic(ProblemId::P1);
        match command {
            Command::Theory => {
                cfg.n = 5;
                cfg.d = 4;
                cfg.weights = WeightSource::Even;
                cfg.step_size = 0.2;
                cfg.seeds = (0..100).collect();
                cfg.max_iters = 10;
            }
            Command::Mtl => {
                cfg.n = 5;
                cfg.d = 10;
                cfg.weights = WeightSource::Even;
                cfg.scalarization = Scalarization::WeightedSum;
                cfg.reference = ReferenceMode::RunningMin;
                cfg.j = 2;
                cfg.t0 = 30;
                cfg.step_size = 0.05;
                cfg.seeds = vec![0];
                cfg.ref_point = vec![2.0, 2.0];
            }
            _ => {}
        }
        cfg
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    format!("line {}", lineno + 1),
                    format!("expected `key = value`, got `{line}`"),
                )
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |msg: &str| Error::config(key, format!("{msg}, got `{value}`"));
        match key {
            "problem" => {
                self.problem = match value {
                    "p1" => ProblemId::P1,
                    "zdt1" => ProblemId::Zdt1,
                    "zdt2" => ProblemId::Zdt2,
                    _ => return Err(bad("expected p1, zdt1 or zdt2")),
                }
            }
            "d" => self.d = parse_usize(key, value)?,
            "n" => self.n = parse_usize(key, value)?,
            "weights" => {
                self.weights = match value {
                    "even" => WeightSource::Even,
                    "interior" => WeightSource::Interior,
                    _ => WeightSource::Explicit(parse_matrix(key, value)?),
                }
            }
            "scalarization" => {
                self.scalarization = match value {
                    "weighted_sum" => Scalarization::WeightedSum,
                    "tchebycheff" => Scalarization::SmoothedTchebycheff(self.smoothing()),
                    _ => return Err(bad("expected weighted_sum or tchebycheff")),
                }
            }
            "alpha_s" | "epsilon" => {
                let v = parse_f64(key, value)?;
                let mut s = self.smoothing();
                if key == "alpha_s" {
                    s.alpha_s = v;
                } else {
                    s.epsilon = v;
                }
                if let Scalarization::SmoothedTchebycheff(p) = &mut self.scalarization {
                    *p = s;
                }
                SmoothingParams::new(s.alpha_s, s.epsilon)
                    .map_err(|e| Error::config(key, e.to_string()))?;
            }
            "reference" => {
                self.reference = match value {
                    "analytic" => ReferenceMode::Analytic,
                    "running_min" => ReferenceMode::RunningMin,
                    _ => return Err(bad("expected analytic or running_min")),
                }
            }
            "transfer" => {
                self.transfer = match value {
                    "neighbors" => TransferMode::Neighbors,
                    "identity" => TransferMode::Identity,
                    _ => return Err(bad("expected neighbors or identity")),
                }
            }
            "j" => self.j = parse_usize(key, value)?,
            "t0" => self.t0 = parse_usize(key, value)?,
            "plan_file" => self.plan_file = Some(PathBuf::from(value)),
            "step_size" => self.step_size = parse_f64(key, value)?,
            "max_iters" => self.max_iters = parse_usize(key, value)?,
            "seeds" => self.seeds = parse_seeds(key, value)?,
            "ref_point" => self.ref_point = parse_list(key, value)?,
            "init" => {
                self.init = match value {
                    "even" => InitMode::EvenSpread,
                    "random" => InitMode::Random,
                    "gaussian" => InitMode::Gaussian {
                        std: self.init_std(),
                    },
                    _ => return Err(bad("expected even, random or gaussian")),
                }
            }
            "init_std" => {
                let std = parse_f64(key, value)?;
                if let InitMode::Gaussian { std: s } = &mut self.init {
                    *s = std;
                } else {
                    self.init = InitMode::Gaussian { std };
                }
            }
            "project" => self.project = parse_bool(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "svg" => self.svg = parse_bool(key, value)?,
            "eig_min" => self.eig_min = parse_f64(key, value)?,
            "eig_max" => self.eig_max = parse_f64(key, value)?,
            "theta0_std" => self.theta0_std = parse_f64(key, value)?,
            "dense" => self.dense = parse_bool(key, value)?,
            "samples" => self.samples = parse_usize(key, value)?,
            "noise" => self.noise = parse_f64(key, value)?,
            "angle" => self.angle = parse_f64(key, value)?,
            "hidden" => {
                self.hidden = parse_list(key, value)?
                    .into_iter()
                    .map(|v| {
                        if v >= 1.0 && v.fract() == 0.0 {
                            Ok(v as usize)
                        } else {
                            Err(bad("expected positive integers"))
                        }
                    })
                    .collect::<Result<_>>()?
            }
            "activation" => {
                self.activation = match value {
                    "identity" => Activation::Identity,
                    "relu" => Activation::Relu,
                    "tanh" => Activation::Tanh,
                    _ => return Err(bad("expected identity, relu or tanh")),
                }
            }
            "epochs" => self.epochs = parse_usize(key, value)?,
            "batch_size" => self.batch_size = parse_usize(key, value)?,
            "scope" => {
                self.scope = match value {
                    "all" => TransferScope::All,
                    "trunk" => TransferScope::TrunkOnly,
                    "none" => TransferScope::None,
                    _ => return Err(bad("expected all, trunk or none")),
                }
            }
            "loss" => {
                self.loss = match value {
                    "mse" => TaskLoss::Mse,
                    "cross_entropy" => TaskLoss::CrossEntropy,
                    _ => return Err(bad("expected mse or cross_entropy")),
                }
            }
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    fn smoothing(&self) -> SmoothingParams {
        match self.scalarization {
            Scalarization::SmoothedTchebycheff(p) => p,
            Scalarization::WeightedSum => SmoothingParams::default(),
        }
    }

    fn init_std(&self) -> f64 {
        match self.init {
            InitMode::Gaussian { std } => std,
            _ => 1.0,
        }
    }

    /// Checks every field that can be checked without touching the disk.
    pub fn validate(&self, command: Command) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(
                    key,
                    format!("must be a positive finite number, got {v}"),
                ))
            }
        };
        if self.n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        if self.d == 0 {
            return Err(Error::config("d", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        positive("step_size", self.step_size)?;
        if self.transfer == TransferMode::Neighbors
            && self.plan_file.is_none()
            && (self.j == 0 || self.j > self.n)
        {
            return Err(Error::config(
                "j",
                format!("must be in 1..={}, got {}", self.n, self.j),
            ));
        }
        if let InitMode::Gaussian { std } = self.init {
            positive("init_std", std)?;
        }
        if let WeightSource::Explicit(rows) = &self.weights {
            if rows.len() != self.n {
                return Err(Error::config(
                    "weights",
                    format!("{} vectors given but n = {}", rows.len(), self.n),
                ));
            }
        }
        match command {
            Command::Synth | Command::Ablate => {
                if self.ref_point.len() != 2 {
                    return Err(Error::config(
                        "ref_point",
                        "synthetic problems have two objectives",
                    ));
                }
                if self.problem != ProblemId::P1 && self.d < 2 {
                    return Err(Error::config("d", "ZDT problems need d >= 2"));
                }
                if let WeightSource::Explicit(rows) = &self.weights {
                    if rows.iter().any(|r| r.len() != 2) {
                        return Err(Error::config(
                            "weights",
                            "synthetic problems need two-component vectors",
                        ));
                    }
                }
            }
            Command::Theory => {
                positive("eig_min", self.eig_min)?;
                positive("theta0_std", self.theta0_std)?;
                if self.eig_max < self.eig_min {
                    return Err(Error::config("eig_max", "must be >= eig_min"));
                }
            }
            Command::Mtl => {
                if self.samples == 0 || self.batch_size == 0 {
                    return Err(Error::config(
                        "samples",
                        "samples and batch_size must be positive",
                    ));
                }
                if self.d < 2 {
                    return Err(Error::config("d", "network inputs need d >= 2"));
                }
                if self.hidden.is_empty() {
                    return Err(Error::config("hidden", "need at least one trunk layer"));
                }
            }
            Command::Hv => {}
        }
        self.weight_vectors(2).map(|_| ())
    }

    pub fn weight_vectors(&self, m: usize) -> Result<Vec<WeightVector>> {
        let w = match &self.weights {
            WeightSource::Even => even_weights(m, self.n),
            WeightSource::Interior => interior_weights(self.n),
            WeightSource::Explicit(rows) => {
                rows.iter().map(|r| WeightVector::new(r.clone())).collect()
            }
        };
        w.map_err(|e| Error::config("weights", e.to_string()))
    }

    /// The transfer plan for this config.
    pub fn plan(&self, weights: &[WeightVector]) -> Result<TransferPlan> {
        if let Some(path) = &self.plan_file {
            let text = std::fs::read_to_string(path)?;
            let plan = TransferPlan::from_text(&text)
                .map_err(|e| Error::config("plan_file", e.to_string()))?;
            if plan.len() != weights.len() {
                return Err(Error::config(
                    "plan_file",
                    format!("plan has {} rows, n = {}", plan.len(), weights.len()),
                ));
            }
            return Ok(plan);
        }
        match self.transfer {
            TransferMode::Identity => Ok(TransferPlan::identity(weights.len())),
            TransferMode::Neighbors => build_coeffs(weights, self.j, self.t0)
                .map_err(|e| Error::config("j", e.to_string())),
        }
    }
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value.parse().map_err(|_| {
        Error::config(
            key,
            format!("expected a non-negative integer, got `{value}`"),
        )
    })
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::config(
            key,
            format!("expected a finite number, got `{value}`"),
        )),
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(
            key,
            format!("expected true or false, got `{value}`"),
        )),
    }
}

/// `[a, b, c]` or bare `a, b, c`.
pub fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    let inner = value.trim().trim_start_matches('[').trim_end_matches(']');
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(|s| parse_f64(key, s.trim())).collect()
}

/// `[[a, b], [c, d]]`.
pub fn parse_matrix(key: &str, value: &str) -> Result<Vec<Vec<f64>>> {
    let v = value.trim();
    if !(v.starts_with("[[") && v.ends_with("]]")) {
        return Err(Error::config(
            key,
            format!("expected a list of vectors like [[0.5, 0.5]], got `{value}`"),
        ));
    }
    v[1..v.len() - 1]
        .split(']')
        .map(|chunk| chunk.trim().trim_start_matches(',').trim())
        .filter(|chunk| !chunk.is_empty())
        .map(|chunk| parse_list(key, chunk))
        .collect()
}

/// `0..30`, `[0, 3, 7]` or `0,3,7`.
pub fn parse_seeds(key: &str, value: &str) -> Result<Vec<u64>> {
    let bad = || {
        Error::config(
            key,
            format!("expected a range `a..b` or a list of integers, got `{value}`"),
        )
    };
    if let Some((a, b)) = value.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        return Ok((a..b).collect());
    }
    let inner = value.trim().trim_start_matches('[').trim_end_matches(']');
    inner
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect()
}

/// Loads `path` (if any) over the command preset, then applies `key=value`
/// overrides in order.
pub fn load_config(
    command: Command,
    path: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig> {
    let text = path.map(std::fs::read_to_string).transpose()?;
    let mut cfg = ExperimentConfig::preset(command);
    if matches!(command, Command::Synth | Command::Ablate) {
        // the problem picks the defaults everything else is layered on
        let from_file = text.iter().flat_map(|t| t.lines()).filter_map(|l| {
            let (k, v) = l.split('#').next()?.split_once('=')?;
            (k.trim() == "problem").then(|| v.trim().to_string())
        });
        let from_flags = overrides
            .iter()
            .filter(|(k, _)| k == "problem")
            .map(|(_, v)| v.clone());
        if let Some(problem) = from_file.chain(from_flags).last() {
            cfg.set("problem", &problem)?;
            cfg = ExperimentConfig::synthetic(cfg.problem);
        }
    }
    if let Some(t) = &text {
        cfg.apply_text(t)?;
    }
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    cfg.validate(command)?;
    Ok(cfg)
}

enum SynthProblem {
    P1(P1),
    Zdt(Zdt),
}

fn build_problem(cfg: &ExperimentConfig) -> Result<SynthProblem> {
    Ok(match cfg.problem {
        ProblemId::P1 => SynthProblem::P1(P1::new(cfg.d)?),
        ProblemId::Zdt1 => SynthProblem::Zdt(Zdt::zdt1(cfg.d)?),
        ProblemId::Zdt2 => SynthProblem::Zdt(Zdt::zdt2(cfg.d)?),
    })
}

/// Final loss vectors and per-iteration hypervolume of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub final_losses: Vec<Vec<f64>>,
    pub hv: Vec<f64>,
}

fn run_one<P: ObjectiveSet>(
    problem: &P,
    cfg: &ExperimentConfig,
    plan: &TransferPlan,
    seed: u64,
) -> Result<SeedRun> {
    let weights = cfg.weight_vectors(2)?;
    let specs = SubproblemSpec::family(&weights, cfg.scalarization, cfg.reference);
    let mut solver = SolverConfig::new(cfg.step_size, cfg.max_iters, plan.clone());
    solver.seed = seed;
    solver.init = cfg.init;
    solver.telemetry = Telemetry::EveryIteration;
    if cfg.project {
        solver.projection = problem.bounds().cloned();
    }
    let state = init_states(problem, weights.len(), cfg.init, seed)?;
    let out = run_from(state, problem, &specs, &solver)?;
    let hv = hv_trajectory(&out.state.history, &cfg.ref_point)?;
    Ok(SeedRun {
        seed,
        final_losses: out.final_losses,
        hv,
    })
}

/// Runs every seed of `cfg` with `plan`; results come back in seed order.
pub fn run_seeds(cfg: &ExperimentConfig, plan: &TransferPlan) -> Result<Vec<SeedRun>> {
    let problem = build_problem(cfg)?;
    cfg.seeds
        .par_iter()
        .map(|&seed| match &problem {
            SynthProblem::P1(p) => run_one(p, cfg, plan, seed),
            SynthProblem::Zdt(p) => run_one(p, cfg, plan, seed),
        })
        .collect()
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `(mean, std)` of the hypervolume at each iteration across runs.
pub fn hv_curve(runs: &[SeedRun]) -> Vec<(f64, f64)> {
    let len = runs.iter().map(|r| r.hv.len()).min().unwrap_or(0);
    (0..len)
        .map(|k| mean_std(&runs.iter().map(|r| r.hv[k]).collect::<Vec<_>>()))
        .collect()
}

/// Two-sided Wilcoxon rank-sum test with the normal approximation and a
/// tie-corrected variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSum {
    /// Sum of the first sample's ranks.
    pub w: f64,
    pub z: f64,
    pub p_value: f64,
}

pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> RankSum {
    let n1 = a.len() as f64;
    let n2 = b.len() as f64;
    let mut all: Vec<(f64, bool)> = a
        .iter()
        .map(|v| (*v, true))
        .chain(b.iter().map(|v| (*v, false)))
        .collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut w = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut k = i;
        while k + 1 < all.len() && all[k + 1].0 == all[i].0 {
            k += 1;
        }
        let avg_rank = (i + k) as f64 / 2.0 + 1.0;
        w += all[i..=k].iter().filter(|x| x.1).count() as f64 * avg_rank;
        let t = (k - i + 1) as f64;
        tie_term += t * t * t - t;
        i = k + 1;
    }
    let total = n1 + n2;
    let mean = n1 * (total + 1.0) / 2.0;
    let var = n1 * n2 / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    if !(var > 0.0) {
        return RankSum {
            w,
            z: 0.0,
            p_value: 1.0,
        };
    }
    let z = (w - mean) / var.sqrt();
    RankSum {
        w,
        z,
        p_value: libm::erfc(z.abs() / std::f64::consts::SQRT_2),
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric CSV. A first row that does not parse as numbers is taken
/// as a header and skipped. Errors carry 1-based row and column.
pub fn read_numeric_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            row: 0,
            column: 0,
            message: e.to_string(),
        })?;
    let mut rows = Vec::new();
    let mut width = None;
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let rec = rec.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            row,
            column: 0,
            message: e.to_string(),
        })?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if row == 1 && rec.iter().all(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let mut values = Vec::with_capacity(rec.len());
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Csv {
                path: path.to_path_buf(),
                row,
                column: c + 1,
                message: format!("`{field}` is not a number"),
            })?;
            values.push(v);
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Csv {
                    path: path.to_path_buf(),
                    row,
                    column: values.len().min(w) + 1,
                    message: format!("expected {w} columns, found {}", values.len()),
                })
            }
            _ => {}
        }
        rows.push(values);
    }
    Ok(rows)
}

/// Paths of the files a command wrote.
pub type Written = Vec<PathBuf>;

/// Multi-seed run: `front.csv`, `hv_curve.csv`, and optionally `front.svg`
/// (first seed) and `hv.svg`.
pub fn cmd_synth(cfg: &ExperimentConfig) -> Result<Written> {
    cfg.validate(Command::Synth)?;
    std::fs::create_dir_all(&cfg.out)?;
    let weights = cfg.weight_vectors(2)?;
    let plan = cfg.plan(&weights)?;
    let runs = run_seeds(cfg, &plan)?;
    let mut written = Vec::new();

    let front_rows: Vec<Vec<String>> =
        runs.iter()
            .flat_map(|r| {
                r.final_losses.iter().enumerate().map(move |(i, l)| {
                    vec![r.seed.to_string(), i.to_string(), fmt(l[0]), fmt(l[1])]
                })
            })
            .collect();
    let front = cfg.out.join("front.csv");
    write_csv(&front, &["seed", "subproblem", "f1", "f2"], &front_rows)?;
    written.push(front);

    let curve = hv_curve(&runs);
    let curve_rows: Vec<Vec<String>> = curve
        .iter()
        .enumerate()
        .map(|(k, (m, s))| vec![(k + 1).to_string(), fmt(*m), fmt(*s)])
        .collect();
    let hv_path = cfg.out.join("hv_curve.csv");
    write_csv(&hv_path, &["iteration", "mean_hv", "std_hv"], &curve_rows)?;
    written.push(hv_path);

    if cfg.svg {
        let p = cfg.out.join("front.svg");
        std::fs::write(&p, scatter_svg(&runs[0].final_losses, "f1", "f2"))?;
        written.push(p);
        let p = cfg.out.join("hv.svg");
        let series: Vec<(f64, f64)> = curve
            .iter()
            .enumerate()
            .map(|(k, (m, _))| ((k + 1) as f64, *m))
            .collect();
        std::fs::write(&p, line_svg(&[series], "iteration", "HV"))?;
        written.push(p);
    }
    Ok(written)
}

/// Result of a paired with/without-transfer comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Ablation {
    pub with_transfer: Vec<SeedRun>,
    pub without_transfer: Vec<SeedRun>,
    pub test: RankSum,
}

impl Ablation {
    pub fn mean_at(&self, transfer: bool, iteration: usize) -> f64 {
        let runs = if transfer {
            &self.with_transfer
        } else {
            &self.without_transfer
        };
        mean_std(&runs.iter().map(|r| r.hv[iteration - 1]).collect::<Vec<_>>()).0
    }

    pub fn final_hvs(&self, transfer: bool) -> Vec<f64> {
        let runs = if transfer {
            &self.with_transfer
        } else {
            &self.without_transfer
        };
        runs.iter().map(|r| *r.hv.last().unwrap_or(&0.0)).collect()
    }
}

/// Runs the built plan and the identity plan on the same seeds.
pub fn ablation(cfg: &ExperimentConfig) -> Result<Ablation> {
    let weights = cfg.weight_vectors(2)?;
    let plan = cfg.plan(&weights)?;
    let with_transfer = run_seeds(cfg, &plan)?;
    let without_transfer = run_seeds(cfg, &TransferPlan::identity(weights.len()))?;
    let mut ab = Ablation {
        with_transfer,
        without_transfer,
        test: RankSum {
            w: 0.0,
            z: 0.0,
            p_value: 1.0,
        },
    };
    ab.test = wilcoxon_rank_sum(&ab.final_hvs(true), &ab.final_hvs(false));
    Ok(ab)
}

/// `ablation.csv` with mean HV at the reported iterations, and
/// `wilcoxon.csv` with the rank-sum test on final HVs.
pub fn cmd_ablate(cfg: &ExperimentConfig) -> Result<(Written, Ablation)> {
    cfg.validate(Command::Ablate)?;
    std::fs::create_dir_all(&cfg.out)?;
    let ab = ablation(cfg)?;
    let mut rows = Vec::new();
    for transfer in [true, false] {
        for it in ABLATION_ITERATIONS
            .iter()
            .copied()
            .filter(|&it| it <= cfg.max_iters)
        {
            rows.push(vec![
                cfg.problem.name().to_string(),
                transfer.to_string(),
                it.to_string(),
                fmt(ab.mean_at(transfer, it)),
            ]);
        }
    }
    let path = cfg.out.join("ablation.csv");
    write_csv(
        &path,
        &["problem", "transfer", "iteration", "mean_hv"],
        &rows,
    )?;
    let test_path = cfg.out.join("wilcoxon.csv");
    write_csv(
        &test_path,
        &["problem", "rank_sum_with", "z", "p_value", "significant_95"],
        &[vec![
            cfg.problem.name().to_string(),
            fmt(ab.test.w),
            fmt(ab.test.z),
            fmt(ab.test.p_value),
            (ab.test.p_value < 0.05).to_string(),
        ]],
    )?;
    Ok((vec![path, test_path], ab))
}

/// One row of the `theory` sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryRow {
    pub seed: u64,
    pub rho_am: f64,
    pub rho_as: f64,
    pub eq10: bool,
    pub err_t0_with: f64,
    pub err_t0_without: f64,
}

/// Random quadratic ensembles with a shared neighbor plan, compared with and
/// without transfer from the same far-away start.
pub fn theory_sweep(cfg: &ExperimentConfig) -> Result<Vec<TheoryRow>> {
    let weights = cfg.weight_vectors(2)?;
    let plan = cfg.plan(&weights)?;
    let spread = HessianSpread::new(cfg.eig_min, cfg.eig_max)?;
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let ens = if cfg.dense {
                quadratic_ensemble(cfg.n, cfg.d, spread, seed)?
            } else {
                axis_aligned_ensemble(cfg.n, cfg.d, spread, seed)?
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005E_ED0F_7E7A);
            let normal = Normal::new(0.0, cfg.theta0_std)
                .map_err(|e| Error::config("theta0_std", e.to_string()))?;
            let theta0: Vec<Vec<f64>> = (0..cfg.n)
                .map(|_| (0..cfg.d).map(|_| normal.sample(&mut rng)).collect())
                .collect();
            let horizon = plan.t0().max(cfg.max_iters);
            let rep = verify_theorem1(&ens, &plan, cfg.step_size, &theta0, horizon)?;
            Ok(TheoryRow {
                seed,
                rho_am: rep.spectral.rho_am,
                rho_as: rep.spectral.rho_as,
                eq10: rep.spectral.eq10_satisfied,
                err_t0_with: rep.err_t0_with(),
                err_t0_without: rep.err_t0_without(),
            })
        })
        .collect()
}

/// `theory.csv` with one row per seed.
pub fn cmd_theory(cfg: &ExperimentConfig) -> Result<(Written, Vec<TheoryRow>)> {
    cfg.validate(Command::Theory)?;
    std::fs::create_dir_all(&cfg.out)?;
    let rows = theory_sweep(cfg)?;
    let path = cfg.out.join("theory.csv");
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.seed.to_string(),
                fmt(r.rho_am),
                fmt(r.rho_as),
                r.eq10.to_string(),
                fmt(r.err_t0_with),
                fmt(r.err_t0_without),
            ]
        })
        .collect();
    write_csv(
        &path,
        &[
            "seed",
            "rho_am",
            "rho_as",
            "eq10",
            "err_T0_with",
            "err_T0_without",
        ],
        &table,
    )?;
    Ok((vec![path], rows))
}

/// Two-task network trained per weight vector: `mtl_losses.csv` with
/// full-dataset losses after every epoch, and `net_<i>.bin` per subproblem.
pub fn cmd_mtl(cfg: &ExperimentConfig) -> Result<Written> {
    cfg.validate(Command::Mtl)?;
    std::fs::create_dir_all(&cfg.out)?;
    let seed = cfg.seeds[0];
    let data = SyntheticMtlDataset::generate(DatasetSpec {
        samples: cfg.samples,
        input_dim: cfg.d,
        noise: cfg.noise,
        angle_deg: cfg.angle,
        seed,
    })?;
    let shape = NetworkShape::new(cfg.d, cfg.hidden.clone(), vec![vec![1], vec![1]])?;
    let template = MtlNetwork::init(shape, cfg.activation, seed);
    let weights = cfg.weight_vectors(2)?;
    let train = MtlTrainConfig {
        learning_rate: cfg.step_size,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        t0: cfg.t0,
        neighborhood_size: cfg.j,
        scope: if cfg.transfer == TransferMode::Identity {
            TransferScope::None
        } else {
            cfg.scope
        },
        scalarization: cfg.scalarization,
        losses: vec![cfg.loss; 2],
        seed,
    };
    let out = train_pareto(&template, &data, &weights, &train)?;
    let mut written = Vec::new();
    let rows: Vec<Vec<String>> = out
        .epoch_losses
        .iter()
        .enumerate()
        .flat_map(|(e, subs)| {
            subs.iter()
                .enumerate()
                .map(move |(i, l)| vec![(e + 1).to_string(), i.to_string(), fmt(l[0]), fmt(l[1])])
        })
        .collect();
    let path = cfg.out.join("mtl_losses.csv");
    write_csv(&path, &["epoch", "subproblem", "task1", "task2"], &rows)?;
    written.push(path);
    for (i, net) in out.networks.iter().enumerate() {
        let p = cfg.out.join(format!("net_{i}.bin"));
        save_network(&p, net, out.networks.len(), i)?;
        written.push(p);
    }
    if cfg.svg {
        if let Some(last) = out.epoch_losses.last() {
            let p = cfg.out.join("mtl_front.svg");
            std::fs::write(&p, scatter_svg(last, "task1", "task2"))?;
            written.push(p);
        }
    }
    Ok(written)
}

/// Fixed-point decimal with at least `digits` significant digits.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:.prec$}", prec = digits);
    }
    let magnitude = v.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Hypervolume of the points in a CSV file.
pub fn cmd_hv(points_csv: &Path, ref_point: &[f64]) -> Result<f64> {
    let points = read_numeric_csv(points_csv)?;
    if let Some((row, p)) = points
        .iter()
        .enumerate()
        .find(|(_, p)| p.len() != ref_point.len())
    {
        return Err(Error::Csv {
            path: points_csv.to_path_buf(),
            row: row + 1,
            column: p.len().min(ref_point.len()) + 1,
            message: format!(
                "point has {} coordinates, reference point has {}",
                p.len(),
                ref_point.len()
            ),
        });
    }
    hypervolume(&points, ref_point)
}

const SVG_W: f64 = 480.0;
const SVG_H: f64 = 360.0;
const SVG_PAD: f64 = 48.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn around(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut f = Frame {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
        };
        for (x, y) in points.filter(|(x, y)| x.is_finite() && y.is_finite()) {
            f.x0 = f.x0.min(x);
            f.x1 = f.x1.max(x);
            f.y0 = f.y0.min(y);
            f.y1 = f.y1.max(y);
        }
        if !f.x0.is_finite() {
            f = Frame {
                x0: 0.0,
                x1: 1.0,
                y0: 0.0,
                y1: 1.0,
            };
        }
        if f.x1 - f.x0 < 1e-12 {
            f.x1 = f.x0 + 1.0;
        }
        if f.y1 - f.y0 < 1e-12 {
            f.y1 = f.y0 + 1.0;
        }
        f
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let u = SVG_PAD + (x - self.x0) / (self.x1 - self.x0) * (SVG_W - 2.0 * SVG_PAD);
        let v = SVG_H - SVG_PAD - (y - self.y0) / (self.y1 - self.y0) * (SVG_H - 2.0 * SVG_PAD);
        (u, v)
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let (l, b) = (SVG_PAD, SVG_H - SVG_PAD);
        let _ = writeln!(
            out,
            r#"<line x1="{l}" y1="{b}" x2="{}" y2="{b}" stroke="black"/>"#,
            SVG_W - SVG_PAD
        );
        let _ = writeln!(
            out,
            r#"<line x1="{l}" y1="{b}" x2="{l}" y2="{SVG_PAD}" stroke="black"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#,
            SVG_W / 2.0,
            SVG_H - 12.0
        );
        let _ = writeln!(
            out,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{ylabel}</text>"#,
            SVG_H / 2.0,
            SVG_H / 2.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{l}" y="{}" font-size="10">{:.3}</text>"#,
            b + 14.0,
            self.x0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.3}</text>"#,
            SVG_W - SVG_PAD,
            b + 14.0,
            self.x1
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{b}" font-size="10" text-anchor="end">{:.3}</text>"#,
            l - 4.0,
            self.y0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{SVG_PAD}" font-size="10" text-anchor="end">{:.3}</text>"#,
            l - 4.0,
            self.y1
        );
    }
}

fn svg_open() -> String {
    format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#
    ) + "\n"
}

/// Scatter plot of two-objective points.
pub fn scatter_svg(points: &[Vec<f64>], xlabel: &str, ylabel: &str) -> String {
    let frame = Frame::around(points.iter().map(|p| (p[0], p[1])));
    let mut out = svg_open();
    frame.axes(&mut out, xlabel, ylabel);
    for p in points {
        let (u, v) = frame.px(p[0], p[1]);
        let _ = writeln!(
            out,
            r#"<circle cx="{u:.2}" cy="{v:.2}" r="3" fill="steelblue"/>"#
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Line chart with one polyline per series.
pub fn line_svg(series: &[Vec<(f64, f64)>], xlabel: &str, ylabel: &str) -> String {
    let frame = Frame::around(series.iter().flatten().copied());
    let mut out = svg_open();
    frame.axes(&mut out, xlabel, ylabel);
    let colors = ["steelblue", "darkorange", "seagreen", "crimson"];
    for (s, pts) in series.iter().enumerate() {
        let coords: Vec<String> = pts
            .iter()
            .map(|(x, y)| {
                let (u, v) = frame.px(*x, *y);
                format!("{u:.2},{v:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}"/>"#,
            coords.join(" "),
            colors[s % colors.len()]
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Parses `key=value` override strings.
pub fn parse_overrides(items: &[String]) -> Result<Vec<(String, String)>> {
    items
        .iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::config(s.clone(), "override must look like key=value"))
        })
        .collect()
}

/// Builds the projection box for a config without running anything.
pub fn problem_bounds(cfg: &ExperimentConfig) -> Result<Option<Bounds>> {
    Ok(match build_problem(cfg)? {
        SynthProblem::P1(p) => p.bounds().cloned(),
        SynthProblem::Zdt(p) => p.bounds().cloned(),
    })
}

/// Summary lines printed by the binary, keyed for stable ordering.
pub fn summarize(values: &[(&str, f64)]) -> BTreeMap<String, String> {
    values
        .iter()
        .map(|(k, v)| (k.to_string(), fmt(*v)))
        .collect()
}
