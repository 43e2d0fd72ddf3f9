//! Every synthetic function class with its complexity exponent and the rate
//! exponents it implies. Writes a sample data set to stdout as CSV.
//!
//!     cargo run --release --example synthetic_classes

use snl::harness::theoretical_exponent;
use snl::losses::TaskKind;
use snl::synthetic::{
    gen_regression, make_ground_truth, ClassTag, CompositionKind, FeatureSampler,
};

fn main() -> snl::Result<()> {
    // Besov truths are one-dimensional
    let classes = [
        (ClassTag::Smooth { s: 2.0 }, 3),
        (ClassTag::Analytic, 3),
        (ClassTag::Besov { s: 1.5 }, 1),
        (
            ClassTag::Piecewise {
                s: 2.0,
                beta: 1.0,
                m: 2,
            },
            3,
        ),
        (
            ClassTag::Composition {
                kind: CompositionKind::Additive,
                s: 2.0,
            },
            3,
        ),
        (
            ClassTag::Composition {
                kind: CompositionKind::SingleIndex,
                s: 2.0,
            },
            3,
        ),
    ];
    println!(
        "{:<14} {:>3} {:>6} {:>6} {:>10} {:>10} {:>10}",
        "class", "d", "tau", "r", "regress", "classify", "g*(0)"
    );
    for (tag, d) in classes {
        let gt = make_ground_truth(tag, d, 1, 1.0, 51)?;
        println!(
            "{:<14} {d:>3} {:>6.3} {:>6.3} {:>10.4} {:>10.4} {:>10.4}",
            tag.name(),
            gt.tau(),
            gt.r(),
            theoretical_exponent(tag, d, TaskKind::Regression),
            theoretical_exponent(tag, d, TaskKind::Binary),
            gt.eval(&vec![0.0; d])[0]
        );
    }
    let gt = make_ground_truth(ClassTag::Smooth { s: 2.0 }, 2, 1, 1.0, 52)?;
    let data = gen_regression(&gt, FeatureSampler::uniform(2, 53).sample(5), 0.1, 54)?;
    data.write_csv(std::io::stdout())?;
    Ok(())
}
