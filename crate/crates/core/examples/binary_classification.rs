//! Logistic-loss plug-in classifier: excess misclassification and logistic
//! risks, and the comparison between them.
//!
//! Each n is fitted twice: directly at the target penalty, and with three
//! continuation stages. On deep networks the direct fit often ends at a
//! constant logit, which can have the lower objective value.
//!
//!     cargo run --release --example binary_classification

use snl::evaluation::{bayes_risk_binary, comparison_check};
use snl::losses::TaskKind;
use snl::net::size_architecture;
use snl::optim::{multi_restart_train, TrainConfig};
use snl::penalties::{lambda_theory, PenaltyKind};
use snl::synthetic::{gen_binary, make_ground_truth, ClassTag, FeatureSampler};

fn main() -> snl::Result<()> {
    let gt = make_ground_truth(ClassTag::Smooth { s: 2.0 }, 2, 1, 4.0, 21)?;
    let bayes = bayes_risk_binary(&gt, &mut FeatureSampler::uniform(2, 22), 50_000)?;
    println!("Bayes risk {:.4}", bayes.value);
    for n in [256, 1024] {
        let data = gen_binary(&gt, FeatureSampler::uniform(2, 23).sample(n), 24)?;
        let arch = size_architecture(n, 2, 1, true)?;
        let lambda = lambda_theory(n, TaskKind::Binary, 0.25);
        for continuation in [0, 3] {
            let cfg = TrainConfig {
                max_iters: 2000,
                accelerated: true,
                continuation,
                seed: 25,
                ..TrainConfig::default()
            };
            let (net, rep) = multi_restart_train(
                &arch,
                &data,
                TaskKind::Binary,
                PenaltyKind::L1 { lambda },
                &cfg,
            )?;
            let c = comparison_check(&net, &gt, &mut FeatureSampler::uniform(2, 26), 50_000)?;
            println!(
                "n={n:5} stages={continuation} objective={:.4} nonzero={:4} misclass excess={:.4} logistic excess={:.4} sqrt(2*logistic)={:.4} holds={}",
                rep.final_objective, rep.nonzero_params, c.misclass.value, c.logistic.value, c.rhs, c.pass
            );
        }
    }
    Ok(())
}
