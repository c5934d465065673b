//! Without transfer and with weighted sums, the joint solver is exactly N
//! independent gradient-descent runs.
//!
//! ```bash
//! cargo run --example linear_scalarization
//! ```

use mtgd::problems::{interior_weights, Zdt};
use mtgd::scalarize::weighted_sum_grad;
use mtgd::solver::{init_states, InitMode, ReferenceMode};
use mtgd::{run, ObjectiveSet, Scalarization, SolverConfig, SubproblemSpec, TransferPlan};

pub fn run_example() -> mtgd::Result<()> {
    let problem = Zdt::zdt1(10)?;
    let weights = interior_weights(6)?;
    let specs = SubproblemSpec::family(
        &weights,
        Scalarization::WeightedSum,
        ReferenceMode::Analytic,
    );
    let mut config = SolverConfig::new(0.1, 30, TransferPlan::identity(6));
    config.init = InitMode::Random;
    config.projection = problem.bounds().cloned();
    config.seed = 3;
    let joint = run(&problem, &specs, &config)?;

    // the same thing by hand
    let start = init_states(&problem, 6, InitMode::Random, 3)?;
    for (i, (w, mut theta)) in weights.iter().zip(start.thetas).enumerate() {
        for _ in 0..30 {
            let g = weighted_sum_grad(&problem.grad(&theta), w)?;
            for (t, gk) in theta.iter_mut().zip(&g) {
                *t -= 0.1 * gk;
            }
            problem.bounds().unwrap().project(&mut theta);
        }
        let same = theta == joint.state.thetas[i];
        println!("subproblem {i}: bit-identical = {same}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> mtgd::Result<()> {
    run_example()
}
