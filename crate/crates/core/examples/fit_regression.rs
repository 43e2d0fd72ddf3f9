//! Fit one l1-regularized deep ReLU network to noisy samples of a smooth
//! one-dimensional function and report its L2 risk.
//!
//!     cargo run --release --example fit_regression -- 1024

use snl::evaluation::mc_l2_risk;
use snl::losses::TaskKind;
use snl::net::size_architecture;
use snl::optim::{multi_restart_train, TrainConfig};
use snl::penalties::{lambda_theory, PenaltyKind};
use snl::synthetic::{gen_regression, make_ground_truth, ClassTag, FeatureSampler};

fn main() -> snl::Result<()> {
    let n: usize = std::env::args()
        .nth(1)
        .map_or(1024, |s| s.parse().expect("n must be an integer"));
    let gt = make_ground_truth(ClassTag::Smooth { s: 2.0 }, 1, 1, 4.0, 1)?;
    let x = FeatureSampler::uniform(1, 2).sample(n);
    let data = gen_regression(&gt, x, 0.5, 3)?;

    let arch = size_architecture(n, 1, 1, true)?;
    let lambda = lambda_theory(n, TaskKind::Regression, 0.25);
    let cfg = TrainConfig {
        max_iters: 3000,
        accelerated: true,
        seed: 4,
        ..TrainConfig::default()
    };
    let (net, report) = multi_restart_train(
        &arch,
        &data,
        TaskKind::Regression,
        PenaltyKind::L1 { lambda },
        &cfg,
    )?;

    let risk = mc_l2_risk(&net, &gt, &mut FeatureSampler::uniform(1, 5), 20_000)?;
    println!(
        "architecture {:?} with {} parameters",
        arch.dims(),
        arch.num_params()
    );
    println!(
        "lambda = {lambda:.5}, iterations = {}, converged = {}",
        report.iterations, report.converged
    );
    println!("nonzero parameters: {}", report.nonzero_params);
    println!("L2 risk = {:.5} +/- {:.5}", risk.value, risk.std_error);
    for x in [-0.8, -0.4, 0.0, 0.4, 0.8] {
        println!(
            "  x = {x:5.2}  g*(x) = {:8.4}  ghat(x) = {:8.4}",
            gt.eval(&[x])[0],
            net.forward(&[x])?[0]
        );
    }
    Ok(())
}
