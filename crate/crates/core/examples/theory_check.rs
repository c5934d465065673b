//! Spectral-radius comparison and paired trajectories on quadratic
//! ensembles, starting from a two-task instance small enough to do by hand.
//!
//! ```bash
//! cargo run --example theory_check
//! ```

use mtgd::problems::{
    even_weights, quadratic_ensemble, Hessian, HessianSpread, QuadraticEnsemble, QuadraticTask,
};
use mtgd::theory::verify_theorem1;
use mtgd::{build_coeffs, TransferPlan};

pub fn run_example() -> mtgd::Result<()> {
    // f1 = ½(θ−1)², f2 = (θ+1)², plan [[¾,¼],[¼,¾]], step 0.2
    let hand = QuadraticEnsemble::from_tasks(
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
        HessianSpread::new(1.0, 2.0)?,
    )?;
    let plan = TransferPlan::from_matrix(2, vec![0.75, 0.25, 0.25, 0.75], 10, 2)?;
    let rep = verify_theorem1(&hand, &plan, 0.2, &[vec![3.0], vec![3.0]], 10)?;
    println!(
        "hand instance: rho(A_m) = {:.6}, rho(A_s) = {:.6}",
        rep.spectral.rho_am, rep.spectral.rho_as
    );

    let spread = HessianSpread::new(0.5, 2.0)?;
    let plan = build_coeffs(&even_weights(2, 5)?, 2, 10)?;
    println!(
        "{:>4} {:>8} {:>8} {:>6} {:>10} {:>10}",
        "seed", "rho_am", "rho_as", "eq10", "err_with", "err_none"
    );
    for seed in 0..5 {
        let ens = quadratic_ensemble(5, 4, spread, seed)?;
        // start far from the optima so the early transfer phase pays off
        let theta0: Vec<Vec<f64>> = (0..5)
            .map(|i| {
                (0..4)
                    .map(|k| 10.0 * (1.0 + i as f64 + k as f64).sin())
                    .collect()
            })
            .collect();
        let rep = verify_theorem1(&ens, &plan, 0.2, &theta0, 10)?;
        println!(
            "{:>4} {:>8.4} {:>8.4} {:>6} {:>10.4} {:>10.4}",
            seed,
            rep.spectral.rho_am,
            rep.spectral.rho_as,
            rep.spectral.eq10_satisfied,
            rep.err_t0_with(),
            rep.err_t0_without()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> mtgd::Result<()> {
    run_example()
}
