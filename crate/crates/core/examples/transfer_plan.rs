//! Build a neighbor transfer plan, check it, mix parameters, save it.
//!
//! ```bash
//! cargo run --example transfer_plan
//! ```

use mtgd::problems::even_weights;
use mtgd::{build_coeffs, TransferPlan};

pub fn run_example() -> mtgd::Result<()> {
    let weights = even_weights(2, 5)?;
    let plan = build_coeffs(&weights, 2, 10)?;

    let n = plan.len();
    let m = plan.scalar_matrix();
    println!(
        "coefficients (J = {}, T0 = {}):",
        plan.neighborhood_size(),
        plan.t0()
    );
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{:.4}", m[i * n + j])).collect();
        println!("  {}", row.join("  "));
    }
    let report = plan.validate();
    println!("valid: {}", report.is_valid());

    // one scalar parameter per subproblem; transfer pulls neighbors together
    let params: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
    let mixed = plan.apply(&params, 1)?;
    let before: f64 = params.iter().map(|p| p[0]).sum();
    let after: f64 = mixed.iter().map(|p| p[0]).sum();
    println!("mixed {:?}", mixed.iter().map(|p| p[0]).collect::<Vec<_>>());
    println!("sum before {before}, after {after:.12}");
    // past T0 the plan does nothing
    assert_eq!(plan.apply(&params, 11)?, params);

    let text = plan.to_text();
    let back = TransferPlan::from_text(&text)?;
    assert_eq!(back.scalar_matrix(), plan.scalar_matrix());
    println!("saved plan is {} lines", text.lines().count());
    Ok(())
}

#[allow(dead_code)]
fn main() -> mtgd::Result<()> {
    run_example()
}
