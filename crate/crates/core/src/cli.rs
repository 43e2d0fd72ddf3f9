//! Command-line front end: `train`, `rates`, `classify-rates`, `diagnose`, `gen`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::diagnostics::{
    empirical_rademacher, gsre_kappa_estimate, moment_condition_check, vc_scale,
};
use crate::error::{Error, Result};
use crate::harness::{
    cell_dataset, experiment_truth, run_cell, run_rate_experiment, select_c0, C0Choice,
    ExperimentConfig,
};
use crate::net::size_architecture;
use crate::seed::derive_seed;
use crate::synthetic::FeatureSampler;

const DEFAULT_OUT: &str = "snl-out";

#[derive(Parser, Debug)]
#[command(
    name = "snl",
    version,
    about = "Sparse l1-regularized deep ReLU network estimators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment config file (flat `key = value` lines).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one estimator at the largest n of the grid; writes model.json and metrics.json.
    Train(Common),
    /// Regression rate experiment; writes rates.csv and summary.json.
    Rates(Common),
    /// Classification rate experiment (binary or multiclass).
    ClassifyRates(Common),
    /// Rademacher, restricted-eigenvalue, moment and VC diagnostics; writes diagnostics.json.
    Diagnose(Common),
    /// Write a synthetic training set at the largest n of the grid to data.csv.
    Gen(Common),
}

/// Run the CLI on `args` (including the program name) and return the exit
/// code: 0 on success, 1 on usage or config errors, 2 on numeric failures.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                2
            } else {
                1
            }
        }
    }
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::from_file(&common.config).map_err(|e| match e {
        Error::Io(io) => Error::Usage(format!(
            "cannot read config {}: {io}",
            common.config.display()
        )),
        other => other,
    })?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&out)?;
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(c) => train(&c),
        Command::Rates(c) => rates(&c, false),
        Command::ClassifyRates(c) => rates(&c, true),
        Command::Diagnose(c) => diagnose(&c),
        Command::Gen(c) => gen(&c),
    }
}

fn largest_n(cfg: &ExperimentConfig) -> usize {
    *cfg.n_grid.last().expect("validated non-empty grid")
}

fn train(c: &Common) -> Result<()> {
    let (cfg, out) = load(c)?;
    let gt = experiment_truth(&cfg)?;
    let n = largest_n(&cfg);
    let c0 = match cfg.c0 {
        C0Choice::Fixed(v) => v,
        C0Choice::Validated => select_c0(&cfg, &gt)?.0,
    };
    let (row, net, report) = run_cell(&cfg, &gt, n, 0, c0)?;
    std::fs::write(out.join("model.json"), net.to_json()? + "\n")?;
    let metrics = json!({
        "n": n,
        "dims": net.arch().dims(),
        "lambda": row.lambda,
        "c0": c0,
        "risk_l2": row.risk_l2,
        "misclass_excess": row.misclass_excess,
        "logistic_excess": row.logistic_excess,
        "final_objective": report.final_objective,
        "iterations": report.iterations,
        "converged": report.converged,
        "nonzero_params": report.nonzero_params,
        "num_params": net.arch().num_params(),
        "restart_index_of_best": report.restart_index_of_best,
    });
    std::fs::write(
        out.join("metrics.json"),
        serde_json::to_string_pretty(&metrics)? + "\n",
    )?;
    println!(
        "n={n} lambda={:.6} risk_l2={:.6} nonzero={}/{}",
        row.lambda,
        row.risk_l2,
        report.nonzero_params,
        net.arch().num_params()
    );
    Ok(())
}

fn rates(c: &Common, classification: bool) -> Result<()> {
    let (cfg, out) = load(c)?;
    if cfg.task.is_classification() != classification {
        return Err(Error::Usage(if classification {
            "classify-rates needs task = binary or multiclass; use `rates` for regression".into()
        } else {
            "rates needs task = regression; use `classify-rates` for classification".into()
        }));
    }
    if cfg.n_grid.len() < 3 {
        return Err(Error::Usage(
            "slope fitting needs at least 3 grid points".into(),
        ));
    }
    let report = run_rate_experiment(&cfg)?;
    report.write_outputs(&out)?;
    for f in &report.failed {
        eprintln!(
            "cell n={} replicate={} failed: {}",
            f.n, f.replicate, f.error
        );
    }
    if let Some(e) = &report.fit_error {
        eprintln!("slope fit: {e}");
    }
    println!("{}", report.summary_line());
    Ok(())
}

fn diagnose(c: &Common) -> Result<()> {
    let (cfg, out) = load(c)?;
    let n = cfg.n_grid[0];
    let out_dim = cfg.task.output_dim();
    let arch = size_architecture(n, cfg.d, out_dim, false)?;
    let x = FeatureSampler::new(cfg.sampler, cfg.d, derive_seed(cfg.seed, &[6, 0]))?.sample(n);
    let rad = empirical_rademacher(&arch, x.view(), 20, 2, derive_seed(cfg.seed, &[6, 1]))?;
    let mut sampler = FeatureSampler::new(cfg.sampler, cfg.d, derive_seed(cfg.seed, &[6, 2]))?;
    let s0 = (arch.num_params() / 10).max(2);
    let kappa = gsre_kappa_estimate(
        &arch,
        s0,
        10.0,
        &mut sampler,
        64,
        cfg.mc_m,
        derive_seed(cfg.seed, &[6, 3]),
    )?;
    let moment = moment_condition_check(cfg.sampler, n, cfg.d, 50, derive_seed(cfg.seed, &[6, 4]))?;
    let vc = vc_scale(arch.depth() as f64, s0 as f64);
    let doc = json!({
        "n": n,
        "dims": arch.dims(),
        "s0": s0,
        "vc_scale": vc,
        "reports": [rad, kappa, moment],
    });
    std::fs::write(
        out.join("diagnostics.json"),
        serde_json::to_string_pretty(&doc)? + "\n",
    )?;
    for r in doc["reports"].as_array().expect("array literal") {
        println!(
            "{}: estimate={} bound={}",
            r["name"], r["estimate"], r["bound"]
        );
    }
    println!("vc_scale={vc:.3}");
    Ok(())
}

fn gen(c: &Common) -> Result<()> {
    let (cfg, out) = load(c)?;
    let gt = experiment_truth(&cfg)?;
    let n = largest_n(&cfg);
    let data = cell_dataset(&cfg, &gt, n, &[n as u64, 0])?;
    let path: &Path = &out.join("data.csv");
    data.write_csv(std::fs::File::create(path)?)?;
    println!("wrote {} rows to {}", data.len(), path.display());
    Ok(())
}
