//! With- vs without-transfer on ZDT1 and ZDT2, a few seeds each.
//!
//! ```bash
//! cargo run --release --example zdt_ablation
//! ```

use mtgd::experiment::{ablation, ExperimentConfig, ProblemId, ABLATION_ITERATIONS};

pub fn run_example() -> mtgd::Result<()> {
    for problem in [ProblemId::Zdt1, ProblemId::Zdt2] {
        let mut cfg = ExperimentConfig::synthetic(problem);
        cfg.seeds = (0..8).collect();
        let ab = ablation(&cfg)?;
        println!("{} over {} seeds", problem.name(), cfg.seeds.len());
        println!("  {:>9} {:>10} {:>10}", "iteration", "transfer", "none");
        for it in ABLATION_ITERATIONS {
            println!(
                "  {:>9} {:>10.4} {:>10.4}",
                it,
                ab.mean_at(true, it),
                ab.mean_at(false, it)
            );
        }
        println!(
            "  rank-sum z = {:.3}, p = {:.3}",
            ab.test.z, ab.test.p_value
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> mtgd::Result<()> {
    run_example()
}
