//! A small config-driven rate experiment: fit over a grid of sample sizes,
//! then regress log risk on log n.
//!
//!     cargo run --release --example rate_experiment
//!
//! The full-size experiments live in `configs/` and run through the `snl` binary.

use snl::harness::{run_rate_experiment, ExperimentConfig};

const CONFIG: &str = "\
task = regression
class = smooth
s = 2
d = 1
bound = 4
n_grid = 128, 256, 512, 1024
replicates = 3
c0 = 0.25
mc_m = 10000
max_iters = 1500
accelerated = true
seed = 7
";

fn main() -> snl::Result<()> {
    let cfg = ExperimentConfig::parse(CONFIG)?;
    let report = run_rate_experiment(&cfg)?;
    for p in &report.medians {
        println!("n={:5} median risk={:.5}", p.n, p.median);
    }
    println!("{}", report.summary_line());
    let out = std::env::temp_dir().join("snl-rate-example");
    report.write_outputs(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}
