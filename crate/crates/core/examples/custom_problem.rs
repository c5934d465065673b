//! Plug in your own objectives: three quadratic bowls in the plane, solved
//! with a Das-Dennis weight lattice and running-minimum ideal point.
//!
//! ```bash
//! cargo run --example custom_problem
//! ```

use mtgd::metrics::nondominated;
use mtgd::problems::even_weights;
use mtgd::solver::ReferenceMode;
use mtgd::{
    build_coeffs, hypervolume, run, ObjectiveSet, Scalarization, SmoothingParams, SolverConfig,
    SubproblemSpec,
};

struct ThreeBowls {
    centers: [[f64; 2]; 3],
}

impl ObjectiveSet for ThreeBowls {
    fn num_objectives(&self) -> usize {
        3
    }

    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, theta: &[f64]) -> Vec<f64> {
        self.centers
            .iter()
            .map(|c| (theta[0] - c[0]).powi(2) + (theta[1] - c[1]).powi(2))
            .collect()
    }

    fn grad(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        self.centers
            .iter()
            .map(|c| vec![2.0 * (theta[0] - c[0]), 2.0 * (theta[1] - c[1])])
            .collect()
    }
}

pub fn run_example() -> mtgd::Result<()> {
    let problem = ThreeBowls {
        centers: [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
    };
    let weights = even_weights(3, 10)?;
    let specs = SubproblemSpec::family(
        &weights,
        Scalarization::SmoothedTchebycheff(SmoothingParams::default()),
        ReferenceMode::RunningMin,
    );
    let mut config = SolverConfig::new(0.1, 200, build_coeffs(&weights, 3, 20)?);
    config.seed = 1;
    let out = run(&problem, &specs, &config)?;

    for (w, th) in weights.iter().zip(&out.state.thetas) {
        println!(
            "λ = {:.2?} -> θ = ({:.3}, {:.3})",
            w.components(),
            th[0],
            th[1]
        );
    }
    println!(
        "{} nondominated of {}",
        nondominated(&out.final_losses).len(),
        out.final_losses.len()
    );
    println!(
        "HV wrt (2,2,2): {:.4}",
        hypervolume(&out.final_losses, &[2.0, 2.0, 2.0])?
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> mtgd::Result<()> {
    run_example()
}
