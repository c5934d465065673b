//! Exact hypervolume in two and three objectives.
//!
//! ```bash
//! cargo run --example hypervolume
//! ```

use mtgd::metrics::{dominates, nondominated};
use mtgd::{hypervolume, FrontSample};

pub fn run_example() -> mtgd::Result<()> {
    let single = FrontSample::new(vec![vec![0.5, 0.5]], vec![1.1, 1.1]);
    println!("one point:        {}", single.hypervolume()?);

    let stair = vec![vec![0.25, 0.75], vec![0.75, 0.25]];
    println!("two-step stair:   {}", hypervolume(&stair, &[1.1, 1.1])?);

    // dominated and out-of-box points add nothing
    let noisy = vec![
        vec![0.25, 0.75],
        vec![0.75, 0.25],
        vec![0.8, 0.8],
        vec![1.5, 0.1],
    ];
    println!("with extras:      {}", hypervolume(&noisy, &[1.1, 1.1])?);
    println!("nondominated:     {:?}", nondominated(&noisy));
    println!(
        "(0.25,0.75) dominates (0.8,0.8): {}",
        dominates(&noisy[0], &noisy[2])
    );

    let cube = vec![vec![0.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
    println!(
        "3D, two boxes:    {}",
        hypervolume(&cube, &[2.0, 2.0, 2.0])?
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> mtgd::Result<()> {
    run_example()
}
