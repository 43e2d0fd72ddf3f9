//! Capacity and design diagnostics for an l1-bounded network class.
//!
//!     cargo run --release --example diagnostics

use snl::diagnostics::{
    empirical_rademacher, gsre_kappa_estimate, moment_condition_check, vc_scale,
};
use snl::net::Architecture;
use snl::synthetic::{FeatureSampler, SamplerKind};

fn main() -> snl::Result<()> {
    let arch = Architecture::uniform(3, 6, 3, 1, false)?;
    let x = FeatureSampler::uniform(3, 41).sample(200);
    let rad = empirical_rademacher(&arch, x.view(), 20, 2, 42)?;
    println!(
        "Rademacher complexity {:.4} +/- {:.4} (bound {:.4})",
        rad.estimate,
        rad.std_error,
        rad.bound.unwrap_or(f64::NAN)
    );

    let mut sampler = FeatureSampler::uniform(3, 43);
    let s0 = arch.num_params() / 10;
    let kappa = gsre_kappa_estimate(&arch, s0, 10.0, &mut sampler, 32, 2000, 44)?;
    println!(
        "restricted eigenvalue estimate {:.4} over {} accepted pairs",
        kappa.estimate, kappa.trials
    );

    for kind in [
        SamplerKind::UniformScaled,
        SamplerKind::GaussianTruncatedScaled,
    ] {
        let m = moment_condition_check(kind, 500, 3, 20, 45)?;
        println!("{}: {:.4} ({})", m.name, m.estimate, m.notes);
    }
    println!(
        "VC scale at S0={s0}: {:.1}",
        vc_scale(arch.depth() as f64, s0 as f64)
    );
    Ok(())
}
