//! Weighted-sum and smoothed Tchebycheff scalarizations side by side.
//!
//! ```bash
//! cargo run --example scalarize
//! ```

use mtgd::scalarize::{
    exact_tchebycheff, smoothed_tchebycheff, smoothed_tchebycheff_grad, weighted_sum,
};
use mtgd::{Scalarization, SmoothingParams, WeightVector};

pub fn run_example() -> mtgd::Result<()> {
    let w = WeightVector::new(vec![0.5, 0.5])?;
    let ideal = [0.0, 0.0];
    let losses = [0.2, 0.6];

    println!("losses {losses:?}, weights {:?}", w.components());
    println!("weighted sum       {:.6}", weighted_sum(&losses, &w)?);
    println!(
        "exact tchebycheff  {:.6}",
        exact_tchebycheff(&losses, &w, &ideal)?
    );

    // sharper softmax and smaller ε approach the exact max
    for (alpha_s, eps) in [(1.0, 0.1), (5.0, 0.05), (50.0, 1e-4)] {
        let p = SmoothingParams::new(alpha_s, eps)?;
        println!(
            "smoothed α_s={alpha_s:<5} ε={eps:<7} {:.6}",
            smoothed_tchebycheff(&losses, &w, &ideal, &p)?
        );
    }

    // chain rule through two task gradients in a 3-dim parameter space
    let task_grads = vec![vec![1.0, 0.0, 0.5], vec![0.0, 1.0, -0.5]];
    let g = smoothed_tchebycheff_grad(
        &losses,
        &task_grads,
        &w,
        &ideal,
        &SmoothingParams::default(),
    )?;
    println!("smoothed gradient  {g:.4?}");

    let s = Scalarization::SmoothedTchebycheff(SmoothingParams::default());
    println!("via enum           {:.6}", s.value(&losses, &w, &ideal)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> mtgd::Result<()> {
    run_example()
}
