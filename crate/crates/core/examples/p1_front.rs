//! Approximate the concave front of P1 with ten smoothed-Tchebycheff
//! subproblems and neighbor transfer.
//!
//! ```bash
//! cargo run --example p1_front
//! ```

use mtgd::metrics::{hv_trajectory, nondominated, SYNTHETIC_REF};
use mtgd::problems::{interior_weights, P1};
use mtgd::solver::{InitMode, ReferenceMode};
use mtgd::{
    build_coeffs, hypervolume, run, Scalarization, SmoothingParams, SolverConfig, SubproblemSpec,
};

pub fn run_example() -> mtgd::Result<()> {
    let problem = P1::new(20)?;
    let weights = interior_weights(10)?;
    let specs = SubproblemSpec::family(
        &weights,
        Scalarization::SmoothedTchebycheff(SmoothingParams::default()),
        ReferenceMode::Analytic,
    );
    let mut config = SolverConfig::new(1.0, 50, build_coeffs(&weights, 2, 10)?);
    config.init = InitMode::Gaussian { std: 0.46 };
    config.seed = 7;

    let out = run(&problem, &specs, &config)?;
    println!("{:>8} {:>10} {:>10}", "λ1", "L1", "L2");
    for (w, l) in weights.iter().zip(&out.final_losses) {
        println!("{:>8.3} {:>10.5} {:>10.5}", w.components()[0], l[0], l[1]);
    }
    let front = nondominated(&out.final_losses);
    println!(
        "{} of {} points nondominated",
        front.len(),
        out.final_losses.len()
    );

    let hv = hv_trajectory(&out.state.history, &SYNTHETIC_REF)?;
    for it in [1, 10, 30, 50] {
        println!("HV after {it:>2} iterations: {:.4}", hv[it - 1]);
    }
    println!(
        "final HV {:.4}",
        hypervolume(&out.final_losses, &SYNTHETIC_REF)?
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> mtgd::Result<()> {
    run_example()
}
