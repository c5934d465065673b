//! Desk-scale multi-task network trained as a multi-objective problem.
//!
//! A [`MtlNetwork`] has a shared trunk feeding one head per task. Parameters
//! live in a single flat vector (trunk layers first, then each head in task
//! order; within a layer the `out × in` weights row-major, then the biases),
//! so the solver can mix whole networks across subproblems. Task `t`'s
//! gradient is taken over the full parameter vector and is zero in the other
//! heads' slots.

use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};
use crate::problems::ObjectiveSet;
use crate::scalarize::{Scalarization, WeightVector};
use crate::solver::{step, ReferenceMode, SolverConfig, SolverState, SubproblemSpec, Telemetry};
use crate::transfer::{build_coeffs, TransferPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    // derivative expressed through the pre-activation
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }

    fn code(self) -> u32 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
        }
    }

    fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::Relu),
            2 => Ok(Activation::Tanh),
            other => Err(Error::NetworkFormat(format!(
                "unknown activation code {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerRole {
    Trunk,
    Head(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub role: LayerRole,
    pub inputs: usize,
    pub outputs: usize,
    /// Offset of the weights in the flat parameter vector.
    pub offset: usize,
}

impl LayerSpec {
    pub fn weight_range(&self) -> Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    pub fn bias_range(&self) -> Range<usize> {
        let w = self.offset + self.inputs * self.outputs;
        w..w + self.outputs
    }

    pub fn param_count(&self) -> usize {
        self.outputs * (self.inputs + 1)
    }
}

/// Layer widths: `input → trunk[0] → … → trunk[last]`, then for each task
/// `trunk[last] → heads[t][0] → … → heads[t][last]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkShape {
    pub input: usize,
    pub trunk: Vec<usize>,
    pub heads: Vec<Vec<usize>>,
}

impl NetworkShape {
    pub fn new(input: usize, trunk: Vec<usize>, heads: Vec<Vec<usize>>) -> Result<Self> {
        if input == 0 || trunk.iter().chain(heads.iter().flatten()).any(|w| *w == 0) {
            return Err(Error::contract("layer widths must be positive"));
        }
        if heads.is_empty() || heads.iter().any(|h| h.is_empty()) {
            return Err(Error::contract(
                "every task needs a head with at least one layer",
            ));
        }
        Ok(NetworkShape {
            input,
            trunk,
            heads,
        })
    }

    pub fn num_tasks(&self) -> usize {
        self.heads.len()
    }

    pub fn trunk_output(&self) -> usize {
        self.trunk.last().copied().unwrap_or(self.input)
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        let mut out = Vec::new();
        let mut offset = 0;
        let mut prev = self.input;
        for &w in &self.trunk {
            out.push(LayerSpec {
                role: LayerRole::Trunk,
                inputs: prev,
                outputs: w,
                offset,
            });
            offset += w * (prev + 1);
            prev = w;
        }
        let shared = prev;
        for (t, head) in self.heads.iter().enumerate() {
            let mut prev = shared;
            for &w in head {
                out.push(LayerSpec {
                    role: LayerRole::Head(t),
                    inputs: prev,
                    outputs: w,
                    offset,
                });
                offset += w * (prev + 1);
                prev = w;
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(LayerSpec::param_count).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MtlNetwork {
    shape: NetworkShape,
    layers: Vec<LayerSpec>,
    activation: Activation,
    params: Vec<f64>,
}

impl MtlNetwork {
    pub fn zeros(shape: NetworkShape, activation: Activation) -> Self {
        let layers = shape.layers();
        let n = shape.param_count();
        MtlNetwork {
            shape,
            layers,
            activation,
            params: vec![0.0; n],
        }
    }

    /// Gaussian weights scaled by `1/√fan_in`, zero biases.
    pub fn init(shape: NetworkShape, activation: Activation, seed: u64) -> Self {
        let mut net = MtlNetwork::zeros(shape, activation);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in net.layers.clone() {
            let scale = 1.0 / (layer.inputs as f64).sqrt();
            for w in &mut net.params[layer.weight_range()] {
                *w = scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
        net
    }

    pub fn from_flat(
        shape: NetworkShape,
        activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut net = MtlNetwork::zeros(shape, activation);
        check_len("network parameters", net.params.len(), params.len())?;
        net.params = params;
        Ok(net)
    }

    pub fn shape(&self) -> &NetworkShape {
        &self.shape
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layer_specs(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.params.clone()
    }

    pub fn unflatten(&mut self, params: &[f64]) -> Result<()> {
        check_len("network parameters", self.params.len(), params.len())?;
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `(weights, biases)` of the `idx`-th layer.
    pub fn layer(&self, idx: usize) -> (&[f64], &[f64]) {
        let l = &self.layers[idx];
        (&self.params[l.weight_range()], &self.params[l.bias_range()])
    }

    /// Parameter slots owned by the trunk.
    pub fn trunk_range(&self) -> Range<usize> {
        let end = self
            .layers
            .iter()
            .filter(|l| l.role == LayerRole::Trunk)
            .map(|l| l.offset + l.param_count())
            .max()
            .unwrap_or(0);
        0..end
    }

    /// Parameter slots owned by task `t`'s head.
    pub fn head_range(&self, t: usize) -> Range<usize> {
        let mut it = self.layers.iter().filter(|l| l.role == LayerRole::Head(t));
        let first = it.next().expect("task head exists");
        let last = it.next_back().unwrap_or(first);
        first.offset..last.offset + last.param_count()
    }

    fn dense(&self, layer: &LayerSpec, x: &[f64]) -> Vec<f64> {
        let w = &self.params[layer.weight_range()];
        let b = &self.params[layer.bias_range()];
        (0..layer.outputs)
            .map(|o| {
                b[o] + w[o * layer.inputs..(o + 1) * layer.inputs]
                    .iter()
                    .zip(x)
                    .map(|(a, v)| a * v)
                    .sum::<f64>()
            })
            .collect()
    }

    /// Per-task predictions for each input row: `out[t][row]`.
    pub fn forward(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<Vec<f64>>>> {
        let m = self.shape.num_tasks();
        let mut out = vec![Vec::with_capacity(inputs.len()); m];
        for x in inputs {
            check_len("network input", self.shape.input, x.len())?;
            let mut a = x.clone();
            for layer in self.layers.iter().filter(|l| l.role == LayerRole::Trunk) {
                a = self
                    .dense(layer, &a)
                    .into_iter()
                    .map(|z| self.activation.apply(z))
                    .collect();
            }
            for (t, preds) in out.iter_mut().enumerate() {
                let head: Vec<&LayerSpec> = self
                    .layers
                    .iter()
                    .filter(|l| l.role == LayerRole::Head(t))
                    .collect();
                let mut h = a.clone();
                for (k, layer) in head.iter().enumerate() {
                    let z = self.dense(layer, &h);
                    h = if k + 1 == head.len() {
                        z
                    } else {
                        z.into_iter().map(|v| self.activation.apply(v)).collect()
                    };
                }
                preds.push(h);
            }
        }
        Ok(out)
    }

    /// Task losses over a batch and per-task gradients over all parameters.
    pub fn backward(
        &self,
        inputs: &[Vec<f64>],
        targets: &[Vec<Vec<f64>>],
        losses: &[TaskLoss],
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let m = self.shape.num_tasks();
        check_len("task targets", m, targets.len())?;
        check_len("task losses", m, losses.len())?;
        let b = inputs.len();
        if b == 0 {
            return Err(Error::contract("empty batch"));
        }
        for t in targets {
            check_len("target rows", b, t.len())?;
        }
        let trunk: Vec<&LayerSpec> = self
            .layers
            .iter()
            .filter(|l| l.role == LayerRole::Trunk)
            .collect();
        let heads: Vec<Vec<&LayerSpec>> = (0..m)
            .map(|t| {
                self.layers
                    .iter()
                    .filter(|l| l.role == LayerRole::Head(t))
                    .collect()
            })
            .collect();

        let mut values = vec![0.0; m];
        let mut grads = vec![vec![0.0; self.params.len()]; m];

        for (row, x) in inputs.iter().enumerate() {
            check_len("network input", self.shape.input, x.len())?;
            // trunk activations a[0..=L] and pre-activations z[0..L]
            let mut acts = vec![x.clone()];
            let mut pres = Vec::with_capacity(trunk.len());
            for layer in &trunk {
                let z = self.dense(layer, acts.last().unwrap());
                acts.push(z.iter().map(|v| self.activation.apply(*v)).collect());
                pres.push(z);
            }
            let shared = acts.last().unwrap().clone();

            for t in 0..m {
                let head = &heads[t];
                let mut hacts = vec![shared.clone()];
                let mut hpres = Vec::with_capacity(head.len());
                for (k, layer) in head.iter().enumerate() {
                    let z = self.dense(layer, hacts.last().unwrap());
                    let h = if k + 1 == head.len() {
                        z.clone()
                    } else {
                        z.iter().map(|v| self.activation.apply(*v)).collect()
                    };
                    hpres.push(z);
                    hacts.push(h);
                }
                let pred = hacts.last().unwrap();
                let target = &targets[t][row];
                check_len("target width", pred.len(), target.len())?;
                let (value, mut delta) = losses[t].sample(pred, target, b);
                values[t] += value;

                let g = &mut grads[t];
                for k in (0..head.len()).rev() {
                    let layer = head[k];
                    if k + 1 < head.len() {
                        for (dv, z) in delta.iter_mut().zip(&hpres[k]) {
                            *dv *= self.activation.derivative(*z);
                        }
                    }
                    delta = accumulate_layer(&self.params, g, layer, &hacts[k], &delta);
                }
                for k in (0..trunk.len()).rev() {
                    let layer = trunk[k];
                    for (dv, z) in delta.iter_mut().zip(&pres[k]) {
                        *dv *= self.activation.derivative(*z);
                    }
                    delta = accumulate_layer(&self.params, g, layer, &acts[k], &delta);
                }
            }
        }
        Ok((values, grads))
    }
}

// Adds δ·inputᵀ and δ to the layer's gradient slots, returns Wᵀδ.
fn accumulate_layer(
    params: &[f64],
    grad: &mut [f64],
    layer: &LayerSpec,
    input: &[f64],
    delta: &[f64],
) -> Vec<f64> {
    let w = &params[layer.weight_range()];
    let wr = layer.weight_range();
    let br = layer.bias_range();
    let mut back = vec![0.0; layer.inputs];
    for o in 0..layer.outputs {
        let d = delta[o];
        if d == 0.0 {
            continue;
        }
        let row = o * layer.inputs;
        for i in 0..layer.inputs {
            grad[wr.start + row + i] += d * input[i];
            back[i] += w[row + i] * d;
        }
        grad[br.start + o] += d;
    }
    back
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskLoss {
    /// Mean over batch rows and outputs of the squared error.
    Mse,
    /// Softmax cross entropy against probability targets, mean over rows.
    CrossEntropy,
}

impl TaskLoss {
    // Sample contribution to the batch-mean loss and its gradient wrt the
    // prediction.
    fn sample(self, pred: &[f64], target: &[f64], batch: usize) -> (f64, Vec<f64>) {
        let b = batch as f64;
        match self {
            TaskLoss::Mse => {
                let scale = b * pred.len() as f64;
                let value = pred
                    .iter()
                    .zip(target)
                    .map(|(p, y)| (p - y) * (p - y))
                    .sum::<f64>()
                    / scale;
                let grad = pred
                    .iter()
                    .zip(target)
                    .map(|(p, y)| 2.0 * (p - y) / scale)
                    .collect();
                (value, grad)
            }
            TaskLoss::CrossEntropy => {
                let top = pred.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = top + pred.iter().map(|z| (z - top).exp()).sum::<f64>().ln();
                let mass: f64 = target.iter().sum();
                let value = target
                    .iter()
                    .zip(pred)
                    .map(|(y, z)| -y * (z - lse))
                    .sum::<f64>()
                    / b;
                let grad = pred
                    .iter()
                    .zip(target)
                    .map(|(z, y)| ((z - lse).exp() * mass - y) / b)
                    .collect();
                (value, grad)
            }
        }
    }
}

/// Inputs and per-task targets: `targets[t][row]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMtlDataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<Vec<f64>>>,
    pub spec: DatasetSpec,
}

/// Two linear regression tasks `yᵗ = wₜᵀx + noise` whose weight vectors are
/// unit vectors `angle_deg` apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSpec {
    pub samples: usize,
    pub input_dim: usize,
    pub noise: f64,
    pub angle_deg: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            samples: 256,
            input_dim: 10,
            noise: 0.1,
            angle_deg: 90.0,
            seed: 0,
        }
    }
}

impl SyntheticMtlDataset {
    pub fn generate(spec: DatasetSpec) -> Result<Self> {
        if spec.input_dim < 2 || spec.samples == 0 {
            return Err(Error::contract(
                "dataset needs input_dim >= 2 and samples >= 1",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let phi = spec.angle_deg.to_radians();
        let mut w1 = vec![0.0; spec.input_dim];
        w1[0] = 1.0;
        let mut w2 = vec![0.0; spec.input_dim];
        w2[0] = phi.cos();
        w2[1] = phi.sin();
        let mut inputs = Vec::with_capacity(spec.samples);
        let mut y1 = Vec::with_capacity(spec.samples);
        let mut y2 = Vec::with_capacity(spec.samples);
        for _ in 0..spec.samples {
            let x: Vec<f64> = (0..spec.input_dim)
                .map(|_| rng.sample(StandardNormal))
                .collect();
            let dot = |w: &[f64]| w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            let n1: f64 = rng.sample(StandardNormal);
            let n2: f64 = rng.sample(StandardNormal);
            y1.push(vec![dot(&w1) + spec.noise * n1]);
            y2.push(vec![dot(&w2) + spec.noise * n2]);
            inputs.push(x);
        }
        Ok(SyntheticMtlDataset {
            inputs,
            targets: vec![y1, y2],
            spec,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn batch(&self, rows: &[usize]) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
        let x = rows.iter().map(|&r| self.inputs[r].clone()).collect();
        let y = self
            .targets
            .iter()
            .map(|t| rows.iter().map(|&r| t[r].clone()).collect())
            .collect();
        (x, y)
    }
}

/// A network architecture evaluated on one fixed batch, seen as an
/// [`ObjectiveSet`] over the flat parameters.
pub struct BatchObjectives<'a> {
    pub template: &'a MtlNetwork,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<Vec<f64>>>,
    pub losses: &'a [TaskLoss],
}

impl BatchObjectives<'_> {
    fn with_params(&self, theta: &[f64]) -> MtlNetwork {
        let mut net = self.template.clone();
        net.params.copy_from_slice(theta);
        net
    }
}

impl ObjectiveSet for BatchObjectives<'_> {
    fn num_objectives(&self) -> usize {
        self.template.shape.num_tasks()
    }

    fn dim(&self) -> usize {
        self.template.param_count()
    }

    fn eval(&self, theta: &[f64]) -> Vec<f64> {
        self.eval_grad(theta).losses
    }

    fn grad(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        self.eval_grad(theta).grads
    }

    fn eval_grad(&self, theta: &[f64]) -> crate::problems::Evaluation {
        let net = self.with_params(theta);
        let (losses, grads) = net
            .backward(&self.inputs, &self.targets, self.losses)
            .expect("batch shapes validated at construction");
        crate::problems::Evaluation { losses, grads }
    }
}

/// Which parameters take part in transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferScope {
    All,
    TrunkOnly,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MtlTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub t0: usize,
    pub neighborhood_size: usize,
    pub scope: TransferScope,
    pub scalarization: Scalarization,
    pub losses: Vec<TaskLoss>,
    pub seed: u64,
}

impl MtlTrainConfig {
    /// Learning rate 1e-3, `T₀ = 30`, `J = m`.
    pub fn defaults(num_tasks: usize) -> Self {
        MtlTrainConfig {
            learning_rate: 1e-3,
            epochs: 10,
            batch_size: 32,
            t0: 30,
            neighborhood_size: num_tasks.max(2),
            scope: TransferScope::All,
            scalarization: Scalarization::WeightedSum,
            losses: vec![TaskLoss::Mse; num_tasks],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub networks: Vec<MtlNetwork>,
    /// Full-dataset loss vectors after each epoch: `[epoch][subproblem][task]`.
    pub epoch_losses: Vec<Vec<Vec<f64>>>,
    pub plan: TransferPlan,
}

/// Mini-batch order for one epoch; every subproblem sees the same sequence.
pub fn epoch_batches(
    samples: usize,
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..samples).collect();
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    order.shuffle(&mut rng);
    order
        .chunks(batch_size.max(1))
        .map(|c| c.to_vec())
        .collect()
}

/// Full-dataset task losses of a network.
pub fn dataset_losses(
    net: &MtlNetwork,
    data: &SyntheticMtlDataset,
    losses: &[TaskLoss],
) -> Result<Vec<f64>> {
    Ok(net.backward(&data.inputs, &data.targets, losses)?.0)
}

/// Trains one network per weight vector jointly, starting every subproblem
/// from the same copy of `template`.
pub fn train_pareto(
    template: &MtlNetwork,
    data: &SyntheticMtlDataset,
    weights: &[WeightVector],
    config: &MtlTrainConfig,
) -> Result<TrainOutput> {
    let n = weights.len();
    let m = template.shape.num_tasks();
    check_len("task losses", m, config.losses.len())?;
    check_len("dataset tasks", m, data.targets.len())?;
    let base = match config.scope {
        TransferScope::None => TransferPlan::identity(n),
        _ => build_coeffs(weights, config.neighborhood_size.min(n), config.t0)?,
    };
    let plan = match config.scope {
        TransferScope::TrunkOnly => {
            let trunk = template.trunk_range();
            let mask: Vec<bool> = (0..template.param_count())
                .map(|k| trunk.contains(&k))
                .collect();
            base.with_coordinate_mask(&mask)?
        }
        _ => base,
    };
    let ref_mode = match config.scalarization {
        Scalarization::WeightedSum => ReferenceMode::Analytic,
        Scalarization::SmoothedTchebycheff(_) => ReferenceMode::RunningMin,
    };
    let specs = SubproblemSpec::family(weights, config.scalarization, ref_mode);
    let mut solver = SolverConfig::new(config.learning_rate, usize::MAX, plan.clone());
    solver.telemetry = Telemetry::Off;
    solver.seed = config.seed;
    let mut state = SolverState::from_thetas(vec![template.flatten(); n])?;

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        for rows in epoch_batches(data.len(), config.batch_size, config.seed, epoch) {
            let (inputs, targets) = data.batch(&rows);
            let objectives = BatchObjectives {
                template,
                inputs,
                targets,
                losses: &config.losses,
            };
            step(&mut state, &specs, &solver, &objectives)?;
        }
        let mut per_sub = Vec::with_capacity(n);
        for th in &state.thetas {
            let net =
                MtlNetwork::from_flat(template.shape.clone(), template.activation, th.clone())?;
            per_sub.push(dataset_losses(&net, data, &config.losses)?);
        }
        epoch_losses.push(per_sub);
    }
    let networks = state
        .thetas
        .into_iter()
        .map(|th| MtlNetwork::from_flat(template.shape.clone(), template.activation, th))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainOutput {
        networks,
        epoch_losses,
        plan,
    })
}

/// File magic of exported networks.
pub const NETWORK_MAGIC: &[u8; 8] = b"MTGDNET\0";
pub const NETWORK_FORMAT_VERSION: u32 = 1;

/// Header of an exported network file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkHeader {
    pub d: u64,
    pub m: u64,
    pub n_subproblems: u64,
    pub index: u64,
    pub input_dim: u64,
    pub activation: u32,
    /// `(role, inputs, outputs)` with role 0 for trunk and `t + 1` for head `t`.
    pub layers: Vec<(u64, u64, u64)>,
}

/// Writes a network as
///
/// ```text
/// magic "MTGDNET\0" | u32 version | u32 activation
/// u64 d | u64 m | u64 n_subproblems | u64 index | u64 input_dim
/// u64 n_layers | n_layers × (u64 role, u64 inputs, u64 outputs)
/// d × f64 parameters
/// ```
///
/// All integers and reals little-endian.
pub fn write_network<W: Write>(
    mut w: W,
    net: &MtlNetwork,
    n_subproblems: usize,
    index: usize,
) -> Result<()> {
    w.write_all(NETWORK_MAGIC)?;
    w.write_all(&NETWORK_FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&net.activation.code().to_le_bytes())?;
    for v in [
        net.param_count() as u64,
        net.shape.num_tasks() as u64,
        n_subproblems as u64,
        index as u64,
        net.shape.input as u64,
        net.layers.len() as u64,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    for l in &net.layers {
        let role = match l.role {
            LayerRole::Trunk => 0,
            LayerRole::Head(t) => t as u64 + 1,
        };
        for v in [role, l.inputs as u64, l.outputs as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    for p in &net.params {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn save_network(
    path: &Path,
    net: &MtlNetwork,
    n_subproblems: usize,
    index: usize,
) -> Result<()> {
    let mut buf = Vec::new();
    write_network(&mut buf, net, n_subproblems, index)?;
    std::fs::write(path, buf)?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|e| Error::NetworkFormat(format!("truncated header: {e}")))?;
    Ok(u64::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| Error::NetworkFormat(format!("truncated header: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

/// Reads a file written by [`write_network`].
pub fn read_network<R: Read>(mut r: R) -> Result<(NetworkHeader, MtlNetwork)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|e| Error::NetworkFormat(format!("missing magic: {e}")))?;
    if &magic != NETWORK_MAGIC {
        return Err(Error::NetworkFormat("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != NETWORK_FORMAT_VERSION {
        return Err(Error::NetworkFormat(format!(
            "unsupported version {version}"
        )));
    }
    let activation = read_u32(&mut r)?;
    let d = read_u64(&mut r)?;
    let m = read_u64(&mut r)?;
    let n_subproblems = read_u64(&mut r)?;
    let index = read_u64(&mut r)?;
    let input_dim = read_u64(&mut r)?;
    let n_layers = read_u64(&mut r)?;
    let mut layers = Vec::new();
    for _ in 0..n_layers {
        layers.push((read_u64(&mut r)?, read_u64(&mut r)?, read_u64(&mut r)?));
    }
    let header = NetworkHeader {
        d,
        m,
        n_subproblems,
        index,
        input_dim,
        activation,
        layers,
    };

    let trunk: Vec<usize> = header
        .layers
        .iter()
        .filter(|l| l.0 == 0)
        .map(|l| l.2 as usize)
        .collect();
    let heads: Vec<Vec<usize>> = (1..=m)
        .map(|role| {
            header
                .layers
                .iter()
                .filter(|l| l.0 == role)
                .map(|l| l.2 as usize)
                .collect()
        })
        .collect();
    let shape = NetworkShape::new(input_dim as usize, trunk, heads)?;
    if shape.param_count() as u64 != d {
        return Err(Error::NetworkFormat(format!(
            "layer shapes imply {} parameters, header says {d}",
            shape.param_count()
        )));
    }
    let mut params = Vec::with_capacity(d as usize);
    let mut b = [0u8; 8];
    for _ in 0..d {
        r.read_exact(&mut b)
            .map_err(|e| Error::NetworkFormat(format!("truncated parameters: {e}")))?;
        params.push(f64::from_le_bytes(b));
    }
    let net = MtlNetwork::from_flat(shape, Activation::from_code(activation)?, params)?;
    Ok((header, net))
}

pub fn load_network(path: &Path) -> Result<(NetworkHeader, MtlNetwork)> {
    read_network(std::io::Cursor::new(std::fs::read(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_shape() -> NetworkShape {
        NetworkShape::new(3, vec![4, 2], vec![vec![3, 1], vec![2]]).unwrap()
    }

    #[test]
    fn zero_network_predicts_zero() {
        let net = MtlNetwork::zeros(small_shape(), Activation::Relu);
        let out = net.forward(&[vec![1.0, -2.0, 3.0]]).unwrap();
        assert!(out.iter().flatten().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn identity_layers_pass_inputs_through() {
        let shape = NetworkShape::new(2, vec![2], vec![vec![2], vec![2]]).unwrap();
        let mut net = MtlNetwork::zeros(shape, Activation::Identity);
        for idx in 0..net.layer_specs().len() {
            let wr = net.layer_specs()[idx].weight_range();
            net.params[wr.start] = 1.0;
            net.params[wr.start + 3] = 1.0;
        }
        let x = vec![vec![0.3, -1.2], vec![2.0, 0.5]];
        let out = net.forward(&x).unwrap();
        assert_eq!(out[0], x);
        assert_eq!(out[1], x);
    }

    #[test]
    fn batch_forward_matches_rowwise() {
        let net = MtlNetwork::init(small_shape(), Activation::Tanh, 3);
        let rows = vec![
            vec![0.1, 0.2, 0.3],
            vec![-1.0, 0.5, 2.0],
            vec![0.0, 0.0, 1.0],
        ];
        let all = net.forward(&rows).unwrap();
        for (r, x) in rows.iter().enumerate() {
            let one = net.forward(std::slice::from_ref(x)).unwrap();
            for t in 0..2 {
                assert_eq!(one[t][0], all[t][r]);
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = MtlNetwork::zeros(small_shape(), Activation::Relu);
        assert!(net.forward(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn task_gradient_is_zero_in_other_head() {
        let net = MtlNetwork::init(small_shape(), Activation::Tanh, 1);
        let x = vec![vec![0.4, -0.3, 1.0], vec![1.5, 0.2, -0.7]];
        let y = vec![
            vec![vec![1.0], vec![0.0]],
            vec![vec![-1.0, 0.5], vec![0.2, 0.3]],
        ];
        let (_, g) = net
            .backward(&x, &y, &[TaskLoss::Mse, TaskLoss::Mse])
            .unwrap();
        assert!(g[0][net.head_range(1)].iter().all(|v| *v == 0.0));
        assert!(g[1][net.head_range(0)].iter().all(|v| *v == 0.0));
        assert!(g[0][net.trunk_range()].iter().any(|v| *v != 0.0));
    }

    #[test]
    fn perfect_predictions_have_zero_mse() {
        let net = MtlNetwork::init(small_shape(), Activation::Relu, 5);
        let x = vec![vec![0.4, -0.3, 1.0]];
        let preds = net.forward(&x).unwrap();
        let (loss, g) = net
            .backward(&x, &preds, &[TaskLoss::Mse, TaskLoss::Mse])
            .unwrap();
        assert_eq!(loss, vec![0.0, 0.0]);
        assert!(g.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn flatten_round_trip() {
        let net = MtlNetwork::init(small_shape(), Activation::Tanh, 8);
        let mut other = MtlNetwork::zeros(small_shape(), Activation::Tanh);
        other.unflatten(&net.flatten()).unwrap();
        assert_eq!(other, net);
        assert_eq!(net.param_count(), 4 * 4 + 2 * 5 + 3 * 3 + 4 + 2 * 3);
    }

    #[test]
    fn binary_round_trip() {
        let net = MtlNetwork::init(small_shape(), Activation::Relu, 2);
        let mut buf = Vec::new();
        write_network(&mut buf, &net, 5, 3).unwrap();
        let (header, back) = read_network(buf.as_slice()).unwrap();
        assert_eq!(back, net);
        assert_eq!(
            (header.d, header.m, header.n_subproblems, header.index),
            (net.param_count() as u64, 2, 5, 3)
        );
        assert!(read_network(&buf[..20]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_network(bad.as_slice()).is_err());
    }

    #[test]
    fn epoch_batches_cover_all_rows() {
        let b = epoch_batches(10, 3, 1, 0);
        assert_eq!(b.len(), 4);
        let mut all: Vec<usize> = b.concat();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(b, epoch_batches(10, 3, 1, 0));
        assert_ne!(b, epoch_batches(10, 3, 1, 1));
    }

    #[test]
    fn dataset_is_seeded() {
        let spec = DatasetSpec {
            samples: 20,
            ..Default::default()
        };
        assert_eq!(
            SyntheticMtlDataset::generate(spec).unwrap(),
            SyntheticMtlDataset::generate(spec).unwrap()
        );
    }
}
