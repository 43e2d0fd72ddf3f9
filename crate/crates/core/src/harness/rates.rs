use std::io::Write;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{C0Choice, ExperimentConfig};
use crate::error::{Error, Result};
use crate::evaluation::{
    logistic_excess_pointwise, logistic_excess_pointwise_multiclass, mean_and_se,
    misclass_excess_pointwise_binary, misclass_excess_pointwise_multiclass, Predictor,
};
use crate::losses::{batch_loss, TaskKind};
use crate::net::{size_architecture, Network};
use crate::optim::{multi_restart_train, TrainConfig, TrainReport};
use crate::penalties::{lambda_theory, PenaltyKind, C0_GRID};
use crate::seed::derive_seed;
use crate::synthetic::{
    gen_binary, gen_multiclass, gen_regression, make_ground_truth, ClassTag, Dataset,
    FeatureSampler, GroundTruth,
};

/// Risks at or below this are treated as exact zeros by the slope fit.
pub const MIN_FIT_RISK: f64 = 1e-12;

pub const CSV_HEADER: &str =
    "class,d,s,beta,K,tau,n,replicate,lambda,risk_l2,misclass_excess,logistic_excess,nonzero_params,seed";

// stream tags for derive_seed
const TRUTH: u64 = 0;
const DESIGN: u64 = 1;
const NOISE: u64 = 2;
const INIT: u64 = 3;
const EVAL: u64 = 4;
const PILOT: u64 = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub replicate: usize,
    pub lambda: f64,
    pub risk_l2: f64,
    pub misclass_excess: Option<f64>,
    pub logistic_excess: Option<f64>,
    pub nonzero_params: usize,
    pub seed: u64,
    pub final_objective: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub n: usize,
    pub replicate: usize,
    pub error: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedianPoint {
    pub n: usize,
    pub median: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct C0Score {
    pub c0: f64,
    pub validation_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub class: String,
    pub task: TaskKind,
    /// Which risk the slope is fitted to: `risk_l2` or `misclass_excess`.
    pub risk: String,
    pub c0: f64,
    pub c0_selection: Vec<C0Score>,
    pub medians: Vec<MedianPoint>,
    pub fitted_slope: Option<f64>,
    pub slope_std_error: Option<f64>,
    pub theoretical_exponent: f64,
    pub gap: Option<f64>,
    pub fit_error: Option<String>,
    pub failed: Vec<FailedCell>,
    #[serde(skip)]
    pub rows: Vec<RateRow>,
    #[serde(skip)]
    pub header: RowContext,
}

/// Per-experiment columns repeated on every CSV row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RowContext {
    pub class: String,
    pub d: usize,
    pub s: Option<f64>,
    pub beta: Option<f64>,
    pub k: Option<usize>,
    pub tau: f64,
}

/// Rate exponent of the risk bound: `-2/(2+tau)` for the quadratic risk,
/// `-1/(2+tau)` for the misclassification excess risk.
pub fn theoretical_exponent(tag: ClassTag, d: usize, task: TaskKind) -> f64 {
    let (tau, _) = tag.complexity(d);
    if task.is_classification() {
        -1.0 / (2.0 + tau)
    } else {
        -2.0 / (2.0 + tau)
    }
}

/// Least-squares slope of `ln risk` on `ln n` and its standard error.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(&(n, r)) = points
        .iter()
        .find(|(n, r)| !(r.is_finite() && *r > MIN_FIT_RISK && *n > 0.0))
    {
        return Err(Error::Fit(format!(
            "risk {r} at n={n} cannot be log-transformed"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - my - slope * (x - mx);
            r * r
        })
        .sum();
    Ok((slope, (ssr / (k - 2.0) / sxx).sqrt()))
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(|a, b| a.total_cmp(b));
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Ground truth of the experiment, fixed across the grid.
pub fn experiment_truth(cfg: &ExperimentConfig) -> Result<GroundTruth> {
    let out = cfg.task.output_dim();
    if cfg.class == ClassTag::Constant {
        return Ok(GroundTruth::constant(&vec![cfg.bound; out], cfg.d));
    }
    make_ground_truth(
        cfg.class,
        cfg.d,
        out,
        cfg.bound,
        derive_seed(cfg.seed, &[TRUTH]),
    )
}

/// Fresh training data of size `n` for one grid cell.
pub fn cell_dataset(
    cfg: &ExperimentConfig,
    gt: &GroundTruth,
    n: usize,
    stream: &[u64],
) -> Result<Dataset> {
    let design_seed = derive_seed(cfg.seed, &[stream, &[DESIGN]].concat());
    let noise_seed = derive_seed(cfg.seed, &[stream, &[NOISE]].concat());
    let x = FeatureSampler::new(cfg.sampler, cfg.d, design_seed)?.sample(n);
    match cfg.task {
        TaskKind::Regression => gen_regression(gt, x, cfg.noise_sd, noise_seed),
        TaskKind::Binary => gen_binary(gt, x, noise_seed),
        TaskKind::Multiclass { k } => gen_multiclass(gt, x, k, noise_seed),
    }
}

fn penalty(cfg: &ExperimentConfig, lambda: f64) -> Result<PenaltyKind> {
    PenaltyKind::from_name(&cfg.penalty, lambda, cfg.mix)
}

/// λ for sample size `n` under the chosen `C0` (or the fixed override).
pub fn cell_lambda(cfg: &ExperimentConfig, n: usize, c0: f64) -> f64 {
    cfg.lambda.unwrap_or_else(|| lambda_theory(n, cfg.task, c0))
}

/// Train one estimator on `data` with the configured penalty.
pub fn fit(
    cfg: &ExperimentConfig,
    data: &Dataset,
    lambda: f64,
    seed: u64,
) -> Result<(Network, TrainReport)> {
    let arch = size_architecture(data.len(), cfg.d, cfg.task.output_dim(), cfg.bias)?;
    let train = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    multi_restart_train(&arch, data, cfg.task, penalty(cfg, lambda)?, &train)
}

/// Mean task loss of `net` on held-out data.
fn validation_loss(net: &Network, data: &Dataset) -> Result<f64> {
    let out = net.forward_batch(data.x.view())?;
    Ok(batch_loss(data.task, out.view(), &data.y, false)?.0)
}

/// Pick `C0` from the default grid by validation loss of pilot fits at the
/// smallest `n`; ties go to the smaller `C0`.
pub fn select_c0(cfg: &ExperimentConfig, gt: &GroundTruth) -> Result<(f64, Vec<C0Score>)> {
    let n = cfg.n_grid[0];
    let train = cell_dataset(cfg, gt, n, &[PILOT, 0])?;
    let valid = cell_dataset(cfg, gt, n, &[PILOT, 1])?;
    let init_seed = derive_seed(cfg.seed, &[PILOT, INIT]);
    let scores: Vec<C0Score> = C0_GRID
        .par_iter()
        .map(|&c0| -> Result<C0Score> {
            let (net, _) = fit(cfg, &train, lambda_theory(n, cfg.task, c0), init_seed)?;
            Ok(C0Score {
                c0,
                validation_loss: validation_loss(&net, &valid)?,
            })
        })
        .collect::<Result<_>>()?;
    let best = scores
        .iter()
        .fold(None::<C0Score>, |b, s| match b {
            Some(b) if b.validation_loss <= s.validation_loss => Some(b),
            _ => Some(*s),
        })
        .expect("grid is non-empty");
    Ok((best.c0, scores))
}

/// L2 distance of logits, misclassification excess and logistic excess on
/// the same `m` Monte Carlo draws.
pub fn task_risks(
    est: &dyn Predictor,
    gt: &GroundTruth,
    task: TaskKind,
    sampler: &mut FeatureSampler,
    m: usize,
) -> Result<(f64, Option<f64>, Option<f64>)> {
    let mut l2 = Vec::with_capacity(m);
    let mut mis = Vec::with_capacity(m);
    let mut logit = Vec::with_capacity(m);
    let chunk = 16_384;
    let mut done = 0;
    while done < m {
        let len = chunk.min(m - done);
        let x = sampler.sample(len);
        let ghat: Array2<f64> = est.predict_batch(x.view())?;
        let gstar = gt.eval_batch(x.view());
        for (h, s) in ghat.axis_iter(Axis(0)).zip(gstar.axis_iter(Axis(0))) {
            l2.push(h.iter().zip(s.iter()).map(|(a, b)| (a - b) * (a - b)).sum());
            match task {
                TaskKind::Regression => {}
                TaskKind::Binary => {
                    mis.push(misclass_excess_pointwise_binary(s[0], h[0]));
                    logit.push(logistic_excess_pointwise(s[0], h[0]));
                }
                TaskKind::Multiclass { .. } => {
                    let (s, h) = (s.to_vec(), h.to_vec());
                    mis.push(misclass_excess_pointwise_multiclass(&s, &h)?);
                    logit.push(logistic_excess_pointwise_multiclass(&s, &h));
                }
            }
        }
        done += len;
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| mean_and_se(v).0);
    Ok((mean(&l2).expect("m >= 1"), mean(&mis), mean(&logit)))
}

/// Train and evaluate one `(n, replicate)` grid cell.
pub fn run_cell(
    cfg: &ExperimentConfig,
    gt: &GroundTruth,
    n: usize,
    replicate: usize,
    c0: f64,
) -> Result<(RateRow, Network, TrainReport)> {
    let stream = [n as u64, replicate as u64];
    let data = cell_dataset(cfg, gt, n, &stream)?;
    let lambda = cell_lambda(cfg, n, c0);
    let seed = derive_seed(cfg.seed, &[n as u64, replicate as u64, INIT]);
    let (net, report) = fit(cfg, &data, lambda, seed)?;
    let mut eval = FeatureSampler::new(
        cfg.sampler,
        cfg.d,
        derive_seed(cfg.seed, &[n as u64, replicate as u64, EVAL]),
    )?;
    let (risk_l2, misclass_excess, logistic_excess) =
        task_risks(&net, gt, cfg.task, &mut eval, cfg.mc_m)?;
    let row = RateRow {
        n,
        replicate,
        lambda,
        risk_l2,
        misclass_excess,
        logistic_excess,
        nonzero_params: report.nonzero_params,
        seed,
        final_objective: report.final_objective,
        converged: report.converged,
    };
    Ok((row, net, report))
}

fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let cap = std::env::var("SNL_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&k| k >= 1);
    match cap.and_then(|k| rayon::ThreadPoolBuilder::new().num_threads(k).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// Train and evaluate every `(n, replicate)` cell, then fit the log-log
/// slope of per-`n` median risks. Failed cells are recorded, not fatal.
pub fn run_rate_experiment(cfg: &ExperimentConfig) -> Result<RateReport> {
    cfg.validate()?;
    with_thread_cap(|| run_inner(cfg))
}

fn run_inner(cfg: &ExperimentConfig) -> Result<RateReport> {
    let gt = experiment_truth(cfg)?;
    let (c0, c0_selection) = match cfg.c0 {
        C0Choice::Fixed(c) => (c, Vec::new()),
        C0Choice::Validated if cfg.lambda.is_some() => (f64::NAN, Vec::new()),
        C0Choice::Validated => select_c0(cfg, &gt)?,
    };
    let cells: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r)))
        .collect();
    let results: Vec<Result<RateRow>> = cells
        .par_iter()
        .map(|&(n, r)| run_cell(cfg, &gt, n, r, c0).map(|(row, _, _)| row))
        .collect();

    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for (&(n, replicate), res) in cells.iter().zip(results) {
        match res {
            Ok(row) => rows.push(row),
            Err(e) => failed.push(FailedCell {
                n,
                replicate,
                error: e.to_string(),
            }),
        }
    }

    let classification = cfg.task.is_classification();
    let medians: Vec<MedianPoint> = cfg
        .n_grid
        .iter()
        .filter_map(|&n| {
            let mut v: Vec<f64> = rows
                .iter()
                .filter(|r| r.n == n)
                .map(|r| {
                    if classification {
                        r.misclass_excess.unwrap_or(f64::NAN)
                    } else {
                        r.risk_l2
                    }
                })
                .collect();
            (!v.is_empty()).then(|| MedianPoint {
                n,
                median: median(&mut v),
            })
        })
        .collect();
    let points: Vec<(f64, f64)> = medians.iter().map(|p| (p.n as f64, p.median)).collect();
    let theory = theoretical_exponent(cfg.class, cfg.d, cfg.task);
    let (fitted_slope, slope_std_error, fit_error) = match fit_slope(&points) {
        Ok((s, se)) => (Some(s), Some(se), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    let (tau, _) = cfg.class.complexity(cfg.d);
    Ok(RateReport {
        class: cfg.class.name().to_string(),
        task: cfg.task,
        risk: if classification {
            "misclass_excess"
        } else {
            "risk_l2"
        }
        .into(),
        c0,
        c0_selection,
        medians,
        fitted_slope,
        slope_std_error,
        theoretical_exponent: theory,
        gap: fitted_slope.map(|s| s - theory),
        fit_error,
        failed,
        rows,
        header: RowContext {
            class: cfg.class.name().to_string(),
            d: cfg.d,
            s: cfg.class.smoothness(),
            beta: cfg.class.boundary_smoothness(),
            k: cfg.task.num_classes(),
            tau,
        },
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RateReport {
    /// One CSV row per successful cell, in grid order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER.split(','))?;
        let h = &self.header;
        for r in &self.rows {
            w.write_record([
                h.class.clone(),
                h.d.to_string(),
                opt(h.s),
                opt(h.beta),
                opt(h.k),
                h.tau.to_string(),
                r.n.to_string(),
                r.replicate.to_string(),
                r.lambda.to_string(),
                r.risk_l2.to_string(),
                opt(r.misclass_excess),
                opt(r.logistic_excess),
                r.nonzero_params.to_string(),
                r.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `slope=... theory=... gap=...`
    pub fn summary_line(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "NA".into());
        format!(
            "slope={} theory={:.4} gap={}",
            f(self.fitted_slope),
            self.theoretical_exponent,
            f(self.gap)
        )
    }

    /// Fraction of adjacent grid pairs whose median risk decreases.
    pub fn decreasing_fraction(&self) -> f64 {
        let pairs = self.medians.windows(2).count();
        if pairs == 0 {
            return 0.0;
        }
        let down = self
            .medians
            .windows(2)
            .filter(|w| w[1].median < w[0].median)
            .count();
        down as f64 / pairs as f64
    }

    /// Write `rates.csv` and `summary.json` into `dir`.
    pub fn write_outputs(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join("rates.csv"))?)?;
        std::fs::write(dir.join("summary.json"), self.summary_json()? + "\n")?;
        Ok(())
    }
}
