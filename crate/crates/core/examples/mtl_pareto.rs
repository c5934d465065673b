//! Five trade-off networks for two conflicting regression tasks, trained
//! jointly, then exported and read back.
//!
//! ```bash
//! cargo run --release --example mtl_pareto
//! ```

use mtgd::metrics::nondominated;
use mtgd::mtlnet::{
    read_network, train_pareto, write_network, Activation, DatasetSpec, MtlNetwork, MtlTrainConfig,
    NetworkShape, SyntheticMtlDataset,
};
use mtgd::problems::even_weights;

pub fn run_example() -> mtgd::Result<()> {
    // tasks 90° apart, so a width-1 trunk cannot serve both
    let data = SyntheticMtlDataset::generate(DatasetSpec {
        samples: 256,
        angle_deg: 90.0,
        ..Default::default()
    })?;
    let shape = NetworkShape::new(10, vec![1], vec![vec![1], vec![1]])?;
    let template = MtlNetwork::init(shape, Activation::Identity, 0);

    let weights = even_weights(2, 5)?;
    let mut config = MtlTrainConfig::defaults(2);
    config.learning_rate = 0.05;
    config.epochs = 40;
    config.neighborhood_size = 2;
    let out = train_pareto(&template, &data, &weights, &config)?;

    let last = out.epoch_losses.last().expect("at least one epoch");
    for (w, l) in weights.iter().zip(last) {
        println!(
            "λ1 = {:.2}: task1 {:.4}, task2 {:.4}",
            w.components()[0],
            l[0],
            l[1]
        );
    }
    println!(
        "{} of {} nondominated",
        nondominated(last).len(),
        last.len()
    );

    let mut buf = Vec::new();
    write_network(&mut buf, &out.networks[2], out.networks.len(), 2)?;
    let (header, back) = read_network(buf.as_slice())?;
    assert_eq!(back, out.networks[2]);
    println!(
        "exported {} bytes, {} parameters, subproblem {}/{}",
        buf.len(),
        header.d,
        header.index,
        header.n_subproblems
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> mtgd::Result<()> {
    run_example()
}
