//! Multiclass fit with K - 1 logits against the reference class K.
//!
//! The all-zero network predicts uniform probabilities at objective ln K.
//! On deep networks the l1 cost of any useful path is large, so at the
//! default penalty level the fit is all zeros; a smaller C0 gives a real
//! classifier.
//!
//!     cargo run --release --example multiclass

use snl::evaluation::misclass_excess_multiclass;
use snl::losses::{plugin_classify, probs_with_reference, TaskKind};
use snl::net::size_architecture;
use snl::optim::{multi_restart_train, TrainConfig};
use snl::penalties::{lambda_theory, PenaltyKind};
use snl::synthetic::{gen_multiclass, make_ground_truth, ClassTag, FeatureSampler};

fn main() -> snl::Result<()> {
    let k = 3;
    let task = TaskKind::multiclass(k)?;
    let n = 1024;
    let gt = make_ground_truth(ClassTag::Analytic, 2, k - 1, 3.0, 31)?;
    let data = gen_multiclass(&gt, FeatureSampler::uniform(2, 32).sample(n), k, 33)?;
    let arch = size_architecture(n, 2, k - 1, true)?;
    println!(
        "architecture {:?}, zero-network objective {:.4}",
        arch.dims(),
        (k as f64).ln()
    );
    for c0 in [0.25, 0.05] {
        let lambda = lambda_theory(n, task, c0);
        let cfg = TrainConfig {
            max_iters: 1500,
            accelerated: true,
            seed: 34,
            ..TrainConfig::default()
        };
        let (net, rep) = multi_restart_train(&arch, &data, task, PenaltyKind::L1 { lambda }, &cfg)?;
        let excess =
            misclass_excess_multiclass(&net, &gt, &mut FeatureSampler::uniform(2, 35), 50_000, k)?;
        println!(
            "C0={c0} lambda={lambda:.4} objective={:.4} nonzero={} excess misclassification={:.4} +/- {:.4}",
            rep.final_objective, rep.nonzero_params, excess.value, excess.std_error
        );
        for x in [[0.5, 0.5], [-0.5, 0.2], [0.0, -0.7]] {
            let g = net.forward(&x)?;
            let p: Vec<String> = probs_with_reference(&g)
                .iter()
                .map(|v| format!("{v:.3}"))
                .collect();
            println!(
                "  x={x:?} probs=[{}] class={}",
                p.join(", "),
                plugin_classify(&g, task)?
            );
        }
    }
    Ok(())
}
