//! Proximal gradient descent for `(1/n) sum_i loss(Y_i, g(X_i)) + Pen(theta)`.
//!
//! Every accepted step satisfies the sufficient-decrease test
//! `F(u) <= F(theta) - c ||u - theta||^2 / (2 s)` on the composite objective,
//! so the objective trace is non-increasing by construction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{batch_loss, TaskKind};
use crate::net::{Architecture, ForwardTrace, Network, ParamVector};
use crate::penalties::{penalty_of, prox_in_place, PenaltyKind};
use crate::synthetic::Dataset;

/// Sufficient-decrease constant of the backtracking test.
pub const SUFFICIENT_DECREASE: f64 = 1e-4;
/// Iterations spanned by the relative-change stopping rule.
pub const STOP_WINDOW: usize = 10;
const MIN_STEP: f64 = 1e-30;
const MAX_STEP: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_iters: usize,
    /// Stop once the objective changed by less than `tol` (relative) over the last window.
    pub tol: f64,
    pub step0: f64,
    pub backtrack_factor: f64,
    pub restarts: usize,
    pub init_scale: f64,
    pub seed: u64,
    /// Monotone accelerated variant: momentum extrapolation, a step is kept
    /// only if it does not increase the objective, momentum resets otherwise.
    #[serde(default)]
    pub accelerated: bool,
    /// Warm-up stages at `lambda / 4^k, ..., lambda / 4` before the target
    /// penalty, each with an equal share of `max_iters`. Deep networks
    /// otherwise tend to fall into the all-zero solution when the penalty
    /// dominates the early gradients.
    #[serde(default)]
    pub continuation: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol: 1e-7,
            step0: 0.1,
            backtrack_factor: 0.5,
            restarts: 1,
            init_scale: 1.0,
            seed: 0,
            accelerated: false,
            continuation: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters >= 1
            && self.tol > 0.0
            && self.step0 > 0.0
            && self.step0.is_finite()
            && self.backtrack_factor > 0.0
            && self.backtrack_factor < 1.0
            && self.restarts >= 1
            && self.init_scale >= 0.0
            && self.init_scale.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "invalid training config {self:?}"
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub final_objective: f64,
    /// Objective at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub nonzero_params: usize,
    pub converged: bool,
    pub restart_index_of_best: usize,
    pub final_step: f64,
}

/// Smooth part of the objective evaluated at flat parameter vectors.
struct Problem<'a> {
    net: Network,
    data: &'a Dataset,
    task: TaskKind,
    kind: PenaltyKind,
}

impl<'a> Problem<'a> {
    fn new(
        arch: &Architecture,
        data: &'a Dataset,
        task: TaskKind,
        kind: PenaltyKind,
    ) -> Result<Self> {
        check_shapes(arch, data, task)?;
        kind.validate()?;
        Ok(Self {
            net: Network::zeros(arch),
            data,
            task,
            kind,
        })
    }

    fn arch(&self) -> &Architecture {
        self.net.arch()
    }

    fn penalty(&self, theta: &[f64]) -> f64 {
        penalty_of(self.net.arch(), theta, self.kind)
    }

    /// Mean loss; non-finite activations map to `+inf`.
    fn loss(&mut self, theta: &[f64]) -> Result<(f64, Option<ForwardTrace>)> {
        self.net.assign(&ParamVector::new(theta.to_vec()))?;
        let trace = match self.net.forward_trace(self.data.x.view()) {
            Ok(t) => t,
            Err(Error::NonFinite { .. }) => return Ok((f64::INFINITY, None)),
            Err(e) => return Err(e),
        };
        let (value, _) = batch_loss(self.task, trace.output().view(), &self.data.y, false)?;
        Ok((value, Some(trace)))
    }

    /// Gradient of the mean loss at the parameters currently loaded in `self.net`.
    fn grad(&self, trace: &ForwardTrace) -> Result<Vec<f64>> {
        let (_, g) = batch_loss(self.task, trace.output().view(), &self.data.y, true)?;
        let g = g.expect("gradient requested");
        Ok(self
            .net
            .backward_trace(self.data.x.view(), trace, g.view())?
            .into_inner())
    }
}

fn check_shapes(arch: &Architecture, data: &Dataset, task: TaskKind) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Shape("empty dataset".into()));
    }
    if data.task != task {
        return Err(Error::Shape(format!(
            "dataset is {:?}, task is {task:?}",
            data.task
        )));
    }
    if arch.input_dim() != data.dim() || arch.output_dim() != task.output_dim() {
        return Err(Error::Shape(format!(
            "architecture {:?} does not fit {} features and {task:?}",
            arch.dims(),
            data.dim()
        )));
    }
    Ok(())
}

/// Empirical mean loss plus penalty.
pub fn objective(net: &Network, data: &Dataset, task: TaskKind, kind: PenaltyKind) -> Result<f64> {
    check_shapes(net.arch(), data, task)?;
    let out = net.forward_batch(data.x.view())?;
    let (loss, _) = batch_loss(task, out.view(), &data.y, false)?;
    Ok(loss + penalty_of(net.arch(), net.flatten().as_slice(), kind))
}

/// Proximal gradient descent with backtracking from `net0`. With
/// `cfg.continuation > 0` the warm-up stages run first; the report's trace
/// and convergence flag describe the final stage at the target penalty, and
/// `iterations` counts all stages.
pub fn ista_train(
    net0: &Network,
    data: &Dataset,
    task: TaskKind,
    kind: PenaltyKind,
    cfg: &TrainConfig,
) -> Result<(Network, TrainReport)> {
    cfg.validate()?;
    let stages = cfg.continuation;
    if stages == 0 {
        return train_stage(net0, data, task, kind, cfg);
    }
    let share = (cfg.max_iters / (stages + 1)).max(1);
    let mut net = net0.clone();
    let mut used = 0;
    for k in (1..=stages).rev() {
        let warm = TrainConfig {
            max_iters: share,
            ..cfg.clone()
        };
        let (next, rep) =
            train_stage(&net, data, task, kind.scaled(0.25f64.powi(k as i32)), &warm)?;
        net = next;
        used += rep.iterations;
    }
    let last = TrainConfig {
        max_iters: cfg.max_iters.saturating_sub(used).max(1),
        ..cfg.clone()
    };
    let (net, mut report) = train_stage(&net, data, task, kind, &last)?;
    report.iterations += used;
    Ok((net, report))
}

fn train_stage(
    net0: &Network,
    data: &Dataset,
    task: TaskKind,
    kind: PenaltyKind,
    cfg: &TrainConfig,
) -> Result<(Network, TrainReport)> {
    let mut prob = Problem::new(net0.arch(), data, task, kind)?;
    let arch = prob.arch().clone();

    let theta = net0.flatten().into_inner();
    let (loss, trace) = prob.loss(&theta)?;
    let obj = loss + prob.penalty(&theta);
    let Some(trace) = trace.filter(|_| obj.is_finite()) else {
        return Err(Error::Training {
            message: "objective is not finite at the initial point".into(),
            trace: vec![obj],
        });
    };
    let run = if cfg.accelerated {
        accelerated_loop(&mut prob, theta, obj, cfg)?
    } else {
        let grad = prob.grad(&trace)?;
        plain_loop(&mut prob, theta, obj, grad, cfg)?
    };
    let Run {
        theta,
        history,
        iterations,
        converged,
        step,
    } = run;

    let net = Network::unflatten(&arch, &ParamVector::new(theta))?;
    let report = TrainReport {
        final_objective: *history
            .last()
            .expect("trace starts with the initial objective"),
        objective_trace: history,
        iterations,
        nonzero_params: net.nonzero_params(),
        converged,
        restart_index_of_best: 0,
        final_step: step,
    };
    Ok((net, report))
}

struct Run {
    theta: Vec<f64>,
    history: Vec<f64>,
    iterations: usize,
    converged: bool,
    step: f64,
}

fn window_converged(history: &[f64], tol: f64) -> bool {
    if history.len() <= STOP_WINDOW {
        return false;
    }
    let obj = history[history.len() - 1];
    let old = history[history.len() - 1 - STOP_WINDOW];
    (old - obj).abs() <= tol * obj.abs().max(f64::MIN_POSITIVE)
}

fn plain_loop(
    prob: &mut Problem<'_>,
    mut theta: Vec<f64>,
    mut obj: f64,
    mut grad: Vec<f64>,
    cfg: &TrainConfig,
) -> Result<Run> {
    let arch = prob.arch().clone();
    let kind = prob.kind;
    let mut history = vec![obj];
    let mut step = cfg.step0;
    let growth = 1.0 / cfg.backtrack_factor.sqrt();
    let mut converged = false;
    let mut iterations = 0;
    let mut cand = vec![0.0; theta.len()];

    'outer: while iterations < cfg.max_iters {
        iterations += 1;
        step = (step * growth).min(MAX_STEP);
        loop {
            cand.iter_mut()
                .zip(theta.iter().zip(&grad))
                .for_each(|(c, (t, g))| *c = t - step * g);
            prox_in_place(&arch, &mut cand, kind, step);
            if cand == theta {
                // prox-gradient fixed point
                converged = true;
                break 'outer;
            }
            let (loss, trace) = prob.loss(&cand)?;
            let cand_obj = loss + prob.penalty(&cand);
            let moved: f64 = cand
                .iter()
                .zip(&theta)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if cand_obj.is_finite() && cand_obj <= obj - SUFFICIENT_DECREASE * moved / (2.0 * step)
            {
                std::mem::swap(&mut theta, &mut cand);
                obj = cand_obj;
                history.push(obj);
                // `prob.net` now holds the accepted parameters
                grad = prob.grad(&trace.expect("finite objective has a trace"))?;
                break;
            }
            step *= cfg.backtrack_factor;
            if step < MIN_STEP {
                // no step size decreases the objective at working precision
                converged = true;
                break 'outer;
            }
        }
        if window_converged(&history, cfg.tol) {
            converged = true;
            break;
        }
    }
    Ok(Run {
        theta,
        history,
        iterations,
        converged,
        step,
    })
}

/// Monotone FISTA: the prox step is taken from the extrapolated point `y`
/// with a quadratic upper-bound backtracking test; the iterate only moves
/// when the composite objective does not increase, and momentum restarts
/// whenever it would.
fn accelerated_loop(
    prob: &mut Problem<'_>,
    mut theta: Vec<f64>,
    mut obj: f64,
    cfg: &TrainConfig,
) -> Result<Run> {
    let arch = prob.arch().clone();
    let kind = prob.kind;
    let mut history = vec![obj];
    let mut step = cfg.step0;
    let growth = 1.0 / cfg.backtrack_factor.sqrt();
    let mut converged = false;
    let mut iterations = 0;
    let mut momentum = 1.0f64;
    let mut y = theta.clone();
    let mut z = vec![0.0; theta.len()];

    'outer: while iterations < cfg.max_iters {
        iterations += 1;
        let (f_y, trace) = prob.loss(&y)?;
        let Some(trace) = trace.filter(|_| f_y.is_finite()) else {
            // extrapolated past a blow-up: fall back to the current iterate
            momentum = 1.0;
            y.clone_from(&theta);
            continue;
        };
        let grad = prob.grad(&trace)?;
        step = (step * growth).min(MAX_STEP);
        let f_z = loop {
            z.iter_mut()
                .zip(y.iter().zip(&grad))
                .for_each(|(c, (t, g))| *c = t - step * g);
            prox_in_place(&arch, &mut z, kind, step);
            if z == y && y == theta {
                converged = true;
                break 'outer;
            }
            let (f_z, _) = prob.loss(&z)?;
            let (lin, sq) = z
                .iter()
                .zip(&y)
                .zip(&grad)
                .fold((0.0, 0.0), |(l, q), ((a, b), g)| {
                    (l + g * (a - b), q + (a - b) * (a - b))
                });
            if f_z.is_finite() && f_z <= f_y + lin + sq / (2.0 * step) {
                break f_z;
            }
            step *= cfg.backtrack_factor;
            if step < MIN_STEP {
                converged = true;
                break 'outer;
            }
        };
        let cand_obj = f_z + prob.penalty(&z);
        if cand_obj <= obj {
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / next;
            momentum = next;
            for ((yi, ti), zi) in y.iter_mut().zip(theta.iter_mut()).zip(&z) {
                *yi = zi + beta * (zi - *ti);
                *ti = *zi;
            }
            obj = cand_obj;
            history.push(obj);
            if window_converged(&history, cfg.tol) {
                converged = true;
                break;
            }
        } else {
            momentum = 1.0;
            y.clone_from(&theta);
        }
    }
    Ok(Run {
        theta,
        history,
        iterations,
        converged,
        step,
    })
}

/// Run `cfg.restarts` independent fits from He initializations seeded
/// `seed, seed + 1, ...` and keep the lowest final objective (ties go to the
/// lowest restart index).
pub fn multi_restart_train(
    arch: &Architecture,
    data: &Dataset,
    task: TaskKind,
    kind: PenaltyKind,
    cfg: &TrainConfig,
) -> Result<(Network, TrainReport)> {
    cfg.validate()?;
    let runs: Vec<Result<(Network, TrainReport)>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i as u64);
            let net0 = Network::init(arch, cfg.init_scale, seed);
            ista_train(&net0, data, task, kind, cfg)
        })
        .collect();

    let mut best: Option<(usize, Network, TrainReport)> = None;
    let mut first_err = None;
    for (i, run) in runs.into_iter().enumerate() {
        match run {
            Ok((net, rep)) => {
                let better = best
                    .as_ref()
                    .is_none_or(|(_, _, b)| rep.final_objective < b.final_objective);
                if better {
                    best = Some((i, net, rep));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some((i, net, mut rep)) => {
            rep.restart_index_of_best = i;
            Ok((net, rep))
        }
        None => Err(first_err.expect("at least one restart ran")),
    }
}
