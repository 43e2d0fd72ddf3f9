//! Compare the four penalties on the same regression problem: how many
//! parameters survive as lambda grows.
//!
//!     cargo run --release --example penalties_sparsity

use snl::losses::TaskKind;
use snl::net::Architecture;
use snl::optim::{multi_restart_train, TrainConfig};
use snl::penalties::PenaltyKind;
use snl::synthetic::{gen_regression, make_ground_truth, ClassTag, FeatureSampler};

fn main() -> snl::Result<()> {
    let gt = make_ground_truth(ClassTag::Analytic, 2, 1, 2.0, 11)?;
    let data = gen_regression(&gt, FeatureSampler::uniform(2, 12).sample(400), 0.3, 13)?;
    let arch = Architecture::uniform(2, 10, 3, 1, true)?;
    let cfg = TrainConfig {
        max_iters: 800,
        accelerated: true,
        seed: 14,
        ..TrainConfig::default()
    };
    println!("{} parameters in {:?}", arch.num_params(), arch.dims());
    println!(
        "{:>8} {:>8} {:>8} {:>8} {:>8}",
        "lambda", "l1", "node", "layer", "sparse"
    );
    for lambda in [0.001, 0.004, 0.016, 0.064] {
        let mut counts = Vec::new();
        for name in ["l1", "group_node", "group_layer", "sparse_group"] {
            let kind = PenaltyKind::from_name(name, lambda, 0.5)?;
            let (_, rep) = multi_restart_train(&arch, &data, TaskKind::Regression, kind, &cfg)?;
            counts.push(rep.nonzero_params);
        }
        println!(
            "{lambda:>8} {:>8} {:>8} {:>8} {:>8}",
            counts[0], counts[1], counts[2], counts[3]
        );
    }
    Ok(())
}
