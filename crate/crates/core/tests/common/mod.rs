//! Checks shared by the integration tests and the acceptance runner. Each
//! returns `Ok(detail)` on success and `Err(reason)` otherwise.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use snl::diagnostics::{empirical_rademacher, golowich_bound, moment_condition_check};
use snl::evaluation::{
    comparison_check, logistic_excess_risk, mc_l2_risk, misclass_excess_binary,
    misclass_excess_multiclass,
};
use snl::harness::{run_rate_experiment, theoretical_exponent, ExperimentConfig, RateReport};
use snl::losses::{
    batch_loss, binary_logistic_loss, multinomial_logistic_loss, probs_with_reference, TaskKind,
};
use snl::net::{Architecture, Network, ParamVector};
use snl::optim::{ista_train, multi_restart_train, TrainConfig};
use snl::penalties::{prox_in_place, soft_threshold, PenaltyKind};
use snl::synthetic::{
    gen_binary, gen_regression, make_ground_truth, ClassTag, CompositionKind, Dataset,
    FeatureSampler, SamplerKind,
};

pub type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

// ---------------------------------------------------------------- gradients

/// Smallest |pre-activation| over hidden units, to keep finite differences
/// away from ReLU kinks.
pub fn min_hidden_margin(net: &Network, x: ArrayView2<f64>) -> f64 {
    let mut h = x.to_owned();
    let mut margin = f64::INFINITY;
    let depth = net.arch().depth();
    for l in 0..depth {
        let mut z = h.dot(&net.weights()[l].t());
        if net.arch().bias_included() {
            z += &net.biases()[l];
        }
        if l + 1 < depth {
            margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
            z.mapv_inplace(|v| v.max(0.0));
        }
        h = z;
    }
    margin
}

fn mean_loss(net: &Network, x: ArrayView2<f64>, y: &[f64], task: TaskKind) -> f64 {
    let out = net.forward_batch(x).unwrap();
    batch_loss(task, out.view(), y, false).unwrap().0
}

/// Backprop against central differences on one random network.
pub fn gradient_case(seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.random_range(1..=5);
    let d = rng.random_range(1..=4);
    let task = match rng.random_range(0..3) {
        0 => TaskKind::Regression,
        1 => TaskKind::Binary,
        _ => TaskKind::multiclass(rng.random_range(3..=4)).unwrap(),
    };
    let mut dims = vec![d];
    dims.extend((1..depth).map(|_| rng.random_range(1..=8)));
    dims.push(task.output_dim());
    let arch = Architecture::new(dims, rng.random()).unwrap();
    let n = 5;
    let y: Vec<f64> = (0..n)
        .map(|_| match task {
            TaskKind::Regression => rng.sample::<f64, _>(StandardNormal),
            TaskKind::Binary => f64::from(rng.random_range(0..2u8)),
            TaskKind::Multiclass { k } => rng.random_range(1..=k) as f64,
        })
        .collect();
    // resample parameters and inputs until every hidden unit is clear of its kink
    let (net, x) = loop {
        let theta: Vec<f64> = (0..arch.num_params())
            .map(|_| 0.8 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let net = Network::unflatten(&arch, &ParamVector::new(theta)).unwrap();
        let x = Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal));
        if min_hidden_margin(&net, x.view()) > 1e-3 {
            break (net, x);
        }
    };
    let out = net.forward_batch(x.view()).unwrap();
    let (_, g_out) = batch_loss(task, out.view(), &y, true).unwrap();
    let grad = net.backward_batch(x.view(), g_out.unwrap().view()).unwrap();
    let theta = net.flatten().into_inner();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for j in 0..theta.len() {
        let mut p = theta.clone();
        p[j] += h;
        let fp = mean_loss(
            &Network::unflatten(&arch, &ParamVector::new(p.clone())).unwrap(),
            x.view(),
            &y,
            task,
        );
        p[j] -= 2.0 * h;
        let fm = mean_loss(
            &Network::unflatten(&arch, &ParamVector::new(p)).unwrap(),
            x.view(),
            &y,
            task,
        );
        let fd = (fp - fm) / (2.0 * h);
        let bp = grad.as_slice()[j];
        let scale = fd.abs().max(bp.abs());
        if scale < 1e-10 {
            continue;
        }
        let rel = (fd - bp).abs() / scale;
        worst = worst.max(rel);
        if rel > 1e-5 {
            return Err(format!(
                "seed {seed}, arch {:?}, {task:?}: coordinate {j} backprop {bp} vs fd {fd} (rel {rel:.2e})",
                arch.dims()
            ));
        }
    }
    Ok(worst)
}

pub fn criterion_1() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        worst = worst.max(gradient_case(seed)?);
    }
    Ok(format!(
        "20 random networks, worst relative error {worst:.2e}"
    ))
}

// ---------------------------------------------------------------- prox

/// Dykstra-type splitting for `prox_{f+g}` with `f` the group shrinkage and
/// `g` the soft-threshold; uses neither the closed form of the sum nor its
/// composition order.
pub fn dykstra_sparse_group(v: &[f64], t_group: f64, t_l1: f64) -> Vec<f64> {
    let block = |u: &[f64]| -> Vec<f64> {
        let norm = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm <= t_group {
            vec![0.0; u.len()]
        } else {
            u.iter().map(|a| a * (1.0 - t_group / norm)).collect()
        }
    };
    let soft = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .map(|a| a.signum() * (a.abs() - t_l1).max(0.0))
            .collect()
    };
    let n = v.len();
    let mut x = v.to_vec();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for _ in 0..200_000 {
        let xp: Vec<f64> = (0..n).map(|i| x[i] + p[i]).collect();
        let y = soft(&xp);
        for i in 0..n {
            p[i] = xp[i] - y[i];
        }
        let yq: Vec<f64> = (0..n).map(|i| y[i] + q[i]).collect();
        let next = block(&yq);
        for i in 0..n {
            q[i] = yq[i] - next[i];
        }
        let change = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = next;
        if change < 1e-15 {
            break;
        }
    }
    x
}

pub fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // dyadic scalars keep v - u exact, so optimality is checked with ==
    for _ in 0..1000 {
        let v = rng.random_range(-8192i32..=8192) as f64 / 1024.0;
        let t = rng.random_range(0i32..=4096) as f64 / 1024.0;
        let u = soft_threshold(v, t);
        let ok = if u == 0.0 {
            v.abs() <= t
        } else {
            v - u == t * u.signum()
        };
        ensure(ok, || {
            format!("soft_threshold({v}, {t}) = {u} violates optimality")
        })?;
    }

    let arch = Architecture::new(vec![6, 1], true).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let v: Vec<f64> = (0..7)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let (l1, l2, t) = (
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..2.0),
            rng.random_range(0.1..1.0),
        );
        let mut u = v.clone();
        prox_in_place(
            &arch,
            &mut u,
            PenaltyKind::SparseGroup {
                lambda1: l1,
                lambda2: l2,
            },
            t,
        );
        let oracle = dykstra_sparse_group(&v, t * l1, t * l2);
        let err = u
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
        ensure(err <= 1e-8, || {
            format!("sparse group prox off by {err:.2e} from the splitting oracle")
        })?;
    }

    let arch = Architecture::uniform(3, 4, 3, 2, true).unwrap();
    let v: Vec<f64> = (0..arch.num_params())
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    for kind in ["l1", "group_node", "group_layer", "sparse_group"] {
        let mut prev = usize::MAX;
        for i in 0..=60 {
            let lam = 0.05 * i as f64;
            let mut u = v.clone();
            prox_in_place(
                &arch,
                &mut u,
                PenaltyKind::from_name(kind, lam, 0.5).unwrap(),
                1.0,
            );
            let nz = u.iter().filter(|x| **x != 0.0).count();
            ensure(nz <= prev, || {
                format!("{kind}: ||prox||_0 grew from {prev} to {nz} at lambda {lam}")
            })?;
            prev = nz;
        }
    }
    Ok(format!("soft threshold exact on 1000 scalars; sparse group worst error {worst:.1e}; l0 monotone for 4 penalties"))
}

// ---------------------------------------------------------------- optimizer

/// Data for the tiny 1-3-1 instance.
pub fn tiny_data() -> Dataset {
    let x = FeatureSampler::uniform(1, 41).sample(20);
    let gt = make_ground_truth(ClassTag::Smooth { s: 2.0 }, 1, 1, 1.5, 42).unwrap();
    gen_regression(&gt, x, 0.1, 43).unwrap()
}

pub const TINY_LAMBDA: f64 = 0.01;

/// Composite objective of a bias-included 1-3-1 ReLU net, written out by hand.
/// Layout: w1[3], b1[3], w2[3], b2.
fn tiny_objective_and_grad(p: &[f64; 10], x: &[f64], y: &[f64], grad: &mut [f64; 10]) -> f64 {
    let n = x.len() as f64;
    *grad = [0.0; 10];
    let mut loss = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let mut h = [0.0; 3];
        let mut out = p[9];
        for k in 0..3 {
            h[k] = (p[k] * xi + p[3 + k]).max(0.0);
            out += p[6 + k] * h[k];
        }
        let r = out - yi;
        loss += r * r;
        let g = 2.0 * r / n;
        grad[9] += g;
        for k in 0..3 {
            grad[6 + k] += g * h[k];
            if h[k] > 0.0 {
                grad[k] += g * p[6 + k] * xi;
                grad[3 + k] += g * p[6 + k];
            }
        }
    }
    let l1: f64 = p.iter().map(|v| v.abs()).sum();
    for (g, v) in grad.iter_mut().zip(p) {
        *g += TINY_LAMBDA * v.signum();
    }
    loss / n + TINY_LAMBDA * l1
}

/// Best composite objective over `draws` uniform points in `[-3, 3]^10`, each
/// followed by 200 (sub)gradient steps; the best value seen along any path counts.
pub fn random_search_oracle(data: &Dataset, draws: usize, seed: u64) -> f64 {
    let x: Vec<f64> = data.x.column(0).to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    let mut grad = [0.0; 10];
    for _ in 0..draws {
        let mut p = [0.0; 10];
        p.iter_mut().for_each(|v| *v = rng.random_range(-3.0..3.0));
        for _ in 0..200 {
            let f = tiny_objective_and_grad(&p, &x, &data.y, &mut grad);
            best = best.min(f);
            for (v, g) in p.iter_mut().zip(&grad) {
                *v -= 0.05 * g;
            }
        }
        best = best.min(tiny_objective_and_grad(&p, &x, &data.y, &mut grad));
    }
    best
}

pub fn monotone_traces(seeds: std::ops::Range<u64>) -> Check {
    let arch = Architecture::uniform(2, 6, 3, 1, true).unwrap();
    let gt = make_ground_truth(ClassTag::Analytic, 2, 1, 2.0, 5).unwrap();
    for seed in seeds {
        let x = FeatureSampler::uniform(2, seed).sample(150);
        let data = if seed % 2 == 0 {
            gen_regression(&gt, x, 0.3, seed).unwrap()
        } else {
            gen_binary(&gt, x, seed).unwrap()
        };
        let cfg = TrainConfig {
            max_iters: 400,
            seed,
            ..TrainConfig::default()
        };
        let net0 = Network::init(&arch, 1.0, seed);
        let (_, rep) = ista_train(
            &net0,
            &data,
            data.task,
            PenaltyKind::L1 { lambda: 0.02 },
            &cfg,
        )
        .map_err(|e| e.to_string())?;
        if let Some(i) = rep.objective_trace.windows(2).position(|w| w[1] > w[0]) {
            return Err(format!(
                "seed {seed}: objective rose at accepted step {}",
                i + 1
            ));
        }
    }
    Ok("objective traces non-increasing".into())
}

pub fn criterion_3() -> Check {
    monotone_traces(0..10)?;
    let data = tiny_data();
    let arch = Architecture::new(vec![1, 3, 1], true).unwrap();
    let cfg = TrainConfig {
        max_iters: 5000,
        restarts: 5,
        seed: 7,
        ..TrainConfig::default()
    };
    let (net, rep) = multi_restart_train(
        &arch,
        &data,
        TaskKind::Regression,
        PenaltyKind::L1 {
            lambda: TINY_LAMBDA,
        },
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    let check = snl::optim::objective(
        &net,
        &data,
        TaskKind::Regression,
        PenaltyKind::L1 {
            lambda: TINY_LAMBDA,
        },
    )
    .map_err(|e| e.to_string())?;
    ensure((check - rep.final_objective).abs() < 1e-12, || {
        "reported objective does not match the returned net".into()
    })?;
    let oracle = random_search_oracle(&data, 100_000, 11);
    ensure(rep.final_objective <= oracle + 1e-2, || {
        format!(
            "best-of-5 objective {} above oracle {oracle} + 1e-2",
            rep.final_objective
        )
    })?;
    Ok(format!(
        "10 monotone traces; best-of-5 {:.5} vs random-search oracle {oracle:.5}",
        rep.final_objective
    ))
}

// ---------------------------------------------------------------- losses

pub fn criterion_4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let g: f64 = 5.0 * rng.sample::<f64, _>(StandardNormal);
        for (class, label) in [(1usize, 1u8), (2, 0)] {
            let m = multinomial_logistic_loss(class, &[g]).map_err(|e| e.to_string())?;
            let b = binary_logistic_loss(label, g);
            let err = (m.value - b.value).abs().max((m.grad[0] - b.grad[0]).abs());
            worst = worst.max(err);
            ensure(err <= 1e-12, || {
                format!("g={g}, class {class}: multinomial {m:?} vs binary {b:?}")
            })?;
        }
        let k = rng.random_range(2..=6);
        let logits: Vec<f64> = (0..k - 1)
            .map(|_| 10.0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let s: f64 = probs_with_reference(&logits).iter().sum();
        ensure((s - 1.0).abs() <= 1e-12, || {
            format!("probabilities of {logits:?} sum to {s}")
        })?;
    }
    Ok(format!(
        "K=2 reduction worst gap {worst:.1e}; probabilities sum to 1"
    ))
}

// ---------------------------------------------------------------- evaluation

pub fn zero_excess_at_truth() -> Check {
    let gt = make_ground_truth(ClassTag::Smooth { s: 2.0 }, 2, 1, 3.0, 1).unwrap();
    let mut s = FeatureSampler::uniform(2, 3);
    let vals = [
        mc_l2_risk(&gt, &gt, &mut s, 5000).unwrap().value,
        logistic_excess_risk(&gt, &gt, &mut s, 5000).unwrap().value,
        misclass_excess_binary(&gt, &gt, &mut s, 5000)
            .unwrap()
            .value,
    ];
    ensure(vals.iter().all(|v| *v == 0.0), || {
        format!("nonzero excess at the truth: {vals:?}")
    })?;
    let gt3 = make_ground_truth(ClassTag::Analytic, 2, 3, 3.0, 2).unwrap();
    let v = misclass_excess_multiclass(&gt3, &gt3, &mut s, 5000, 4)
        .unwrap()
        .value;
    ensure(v == 0.0, || {
        format!("multiclass excess at the truth is {v}")
    })?;
    Ok("all excess risks exactly 0 at the truth".into())
}

pub fn comparison_configs() -> Vec<(ClassTag, usize, u64)> {
    let tags = [
        (ClassTag::Smooth { s: 2.0 }, 1),
        (ClassTag::Smooth { s: 1.5 }, 2),
        (ClassTag::Analytic, 2),
        (
            ClassTag::Piecewise {
                s: 2.0,
                beta: 2.0,
                m: 2,
            },
            2,
        ),
        (
            ClassTag::Composition {
                kind: CompositionKind::Additive,
                s: 2.0,
            },
            2,
        ),
    ];
    (0..20u64)
        .map(|i| {
            let (tag, d) = tags[i as usize % tags.len()];
            (tag, d, i)
        })
        .collect()
}

pub fn criterion_5() -> Check {
    zero_excess_at_truth()?;
    let mut worst_margin = f64::INFINITY;
    for (tag, d, seed) in comparison_configs() {
        let gt = make_ground_truth(tag, d, 1, 3.0, 100 + seed).unwrap();
        let data = gen_binary(
            &gt,
            FeatureSampler::uniform(d, 200 + seed).sample(300),
            300 + seed,
        )
        .unwrap();
        let arch = Architecture::uniform(d, 8, 3, 1, true).unwrap();
        let cfg = TrainConfig {
            max_iters: 300,
            seed,
            ..TrainConfig::default()
        };
        let (net, _) = multi_restart_train(
            &arch,
            &data,
            TaskKind::Binary,
            PenaltyKind::L1 { lambda: 0.01 },
            &cfg,
        )
        .map_err(|e| e.to_string())?;
        let c = comparison_check(
            &net,
            &gt,
            &mut FeatureSampler::uniform(d, 400 + seed),
            100_000,
        )
        .map_err(|e| e.to_string())?;
        worst_margin = worst_margin.min(c.rhs + 3.0 * c.combined_se - c.lhs);
        ensure(c.pass, || {
            format!(
                "{tag:?} seed {seed}: misclass {} > sqrt(2 logistic) {} + 3 se",
                c.lhs, c.rhs
            )
        })?;
    }
    Ok(format!(
        "zero at truth; comparison holds on 20 trained nets (min slack {worst_margin:.4})"
    ))
}

// ---------------------------------------------------------------- diagnostics

pub fn criterion_6() -> Check {
    let mut runs = 0;
    for (i, (dims, n)) in [
        (vec![2, 4, 1], 50),
        (vec![3, 5, 5, 1], 80),
        (vec![1, 6, 6, 6, 1], 40),
        (vec![4, 3, 2], 60),
        (vec![4, 1], 100),
    ]
    .into_iter()
    .enumerate()
    {
        let arch = Architecture::new(dims, false).unwrap();
        let x = FeatureSampler::new(SamplerKind::UniformScaled, arch.input_dim(), i as u64)
            .unwrap()
            .sample(n);
        let rep =
            empirical_rademacher(&arch, x.view(), 8, 2, i as u64).map_err(|e| e.to_string())?;
        let bound = golowich_bound(arch.depth(), arch.input_dim(), x.view());
        ensure(rep.bound == Some(bound) && rep.estimate <= bound, || {
            format!(
                "{:?}: estimate {} vs bound {bound}",
                arch.dims(),
                rep.estimate
            )
        })?;
        runs += 1;
    }

    let (n, d, draws) = (100, 4, 20);
    let x = FeatureSampler::uniform(d, 77).sample(n);
    let arch = Architecture::new(vec![d, 1], false).unwrap();
    let rep = empirical_rademacher(&arch, x.view(), draws, 3, 78).map_err(|e| e.to_string())?;
    // closed form (1/sqrt n) max_j |sum_i s_i x_ij| averaged over the same sign draws
    let oracle: f64 = (0..draws)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(snl::seed::derive_seed(78, &[i as u64]));
            let s: Vec<f64> = (0..n)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            (0..d)
                .map(|j| (0..n).map(|r| s[r] * x[[r, j]]).sum::<f64>().abs())
                .fold(0.0, f64::max)
                / (n as f64).sqrt()
        })
        .sum::<f64>()
        / draws as f64;
    let rel = (rep.estimate - oracle).abs() / oracle;
    ensure(rel <= 0.01, || {
        format!("linear Rademacher {} vs closed form {oracle}", rep.estimate)
    })?;

    let m = moment_condition_check(SamplerKind::UniformScaled, 1000, 100, 50, 6)
        .map_err(|e| e.to_string())?;
    ensure(
        m.estimate >= 1.0 - 3.0 * m.std_error && m.estimate <= 1.5,
        || format!("moment estimate {} (se {})", m.estimate, m.std_error),
    )?;
    Ok(format!(
        "{runs} Rademacher runs below bound; linear case rel error {rel:.1e}; moment {:.4} (se {:.4})",
        m.estimate, m.std_error
    ))
}

// ---------------------------------------------------------------- rates

pub fn load_config(name: &str) -> ExperimentConfig {
    ExperimentConfig::from_file(&repo_root().join("configs").join(name)).expect("config parses")
}

pub fn describe(report: &RateReport) -> String {
    let med: Vec<String> = report
        .medians
        .iter()
        .map(|p| format!("{}:{:.3e}", p.n, p.median))
        .collect();
    format!(
        "{} (se {}), C0={}, medians [{}], decreasing pairs {:.0}%, failed cells {}",
        report.summary_line(),
        report
            .slope_std_error
            .map(|v| format!("{v:.3}"))
            .unwrap_or_else(|| "NA".into()),
        report.c0,
        med.join(" "),
        100.0 * report.decreasing_fraction(),
        report.failed.len()
    )
}

pub fn criterion_7() -> Check {
    let cfg = load_config("smooth1d.cfg");
    let report = run_rate_experiment(&cfg).map_err(|e| e.to_string())?;
    let detail = describe(&report);
    let slope = report
        .fitted_slope
        .ok_or_else(|| format!("no slope: {detail}"))?;
    ensure((slope - (-0.8)).abs() <= 0.25, || {
        format!("slope outside -0.8 +/- 0.25: {detail}")
    })?;
    Ok(detail)
}

pub fn criterion_8() -> Check {
    let cfg = load_config("binary1d.cfg");
    let report = run_rate_experiment(&cfg).map_err(|e| e.to_string())?;
    let detail = describe(&report);
    let monotone = report.decreasing_fraction() >= 0.8;
    let in_band = report
        .fitted_slope
        .is_some_and(|s| (s - (-0.4)).abs() <= 0.25);
    match (monotone, in_band) {
        (true, true) => Ok(detail),
        (true, false) => Err(format!(
            "slope band -0.4 +/- 0.25 MISSED (monotone decrease holds): {detail}"
        )),
        (false, _) => Err(format!("monotone decrease fails: {detail}")),
    }
}

// ---------------------------------------------------------------- tables

/// Exponent read off the table rate formula for one class, both tasks.
fn table_exponents(tag: ClassTag, d: usize) -> (f64, f64, f64, f64) {
    let d_f = d as f64;
    let (tau, r, reg) = match tag {
        ClassTag::Smooth { s } | ClassTag::Besov { s } => {
            (d_f / s, 1.0, -2.0 * s / (2.0 * s + d_f))
        }
        ClassTag::Analytic => (0.0, d_f + 1.0, -1.0),
        ClassTag::Piecewise { s, beta, .. } => (
            (d_f / s).max(2.0 * (d_f - 1.0) / beta),
            1.0,
            (-2.0 * s / (2.0 * s + d_f)).max(-beta / (beta + d_f - 1.0)),
        ),
        ClassTag::Composition { kind, s } => {
            let levels: Vec<(f64, f64)> = match kind {
                CompositionKind::Additive => vec![(1.0, s), (d_f, f64::INFINITY)],
                CompositionKind::SingleIndex => vec![(d_f, f64::INFINITY), (1.0, s)],
            };
            let tau = levels.iter().map(|(t, s)| t / s).fold(0.0, f64::max);
            let rate = levels
                .iter()
                .map(|(t, s)| {
                    if s.is_infinite() {
                        -1.0
                    } else {
                        -2.0 * s / (2.0 * s + t)
                    }
                })
                .fold(f64::NEG_INFINITY, f64::max);
            (tau, 1.0, rate)
        }
        ClassTag::Constant => unreachable!(),
    };
    let class = match tag {
        ClassTag::Piecewise { s, beta, .. } => {
            (-s / (2.0 * s + d_f)).max(-(beta / 2.0) / (beta + d_f - 1.0))
        }
        ClassTag::Composition { .. } => reg / 2.0,
        ClassTag::Analytic => -0.5,
        ClassTag::Smooth { s } | ClassTag::Besov { s } => -s / (2.0 * s + d_f),
        ClassTag::Constant => unreachable!(),
    };
    (tau, r, reg, class)
}

pub fn criterion_9() -> Check {
    let mut rows = 0;
    for d in 1..=5usize {
        for s in [0.5, 1.0, 1.5, 2.0, 3.0, 5.0] {
            let mut tags = vec![
                ClassTag::Smooth { s },
                ClassTag::Analytic,
                ClassTag::Composition {
                    kind: CompositionKind::Additive,
                    s,
                },
                ClassTag::Composition {
                    kind: CompositionKind::SingleIndex,
                    s,
                },
            ];
            if d == 1 {
                tags.push(ClassTag::Besov { s });
            }
            for beta in [0.5, 1.0, 2.0, 4.0] {
                tags.push(ClassTag::Piecewise { s, beta, m: 2 });
            }
            for tag in tags {
                let (tau, r, reg, class) = table_exponents(tag, d);
                let (got_tau, got_r) = tag.complexity(d);
                let got_reg = theoretical_exponent(tag, d, TaskKind::Regression);
                let got_bin = theoretical_exponent(tag, d, TaskKind::Binary);
                let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
                ensure(
                    close(tau, got_tau)
                        && r == got_r
                        && close(reg, got_reg)
                        && close(class, got_bin),
                    || {
                        format!(
                        "{tag:?} d={d}: table (tau {tau}, r {r}, {reg}, {class}) vs code ({got_tau}, {got_r}, {got_reg}, {got_bin})"
                    )
                    },
                )?;
                rows += 1;
            }
        }
    }
    Ok(format!(
        "{rows} (class, d, s, beta) settings match both tables"
    ))
}

// ---------------------------------------------------------------- determinism

pub const SMALL_RATES_CFG: &str = "\
task = regression
class = smooth
s = 2
d = 1
bound = 2
n_grid = 64, 96, 128
replicates = 2
c0 = auto
mc_m = 2000
max_iters = 150
restarts = 2
seed = 5
";

pub fn run_cli(args: &[&str], envs: &[(&str, &str)]) -> std::process::Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_snl"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("snl binary runs")
}

pub fn criterion_10() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("small.cfg");
    std::fs::write(&cfg, SMALL_RATES_CFG).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let res = run_cli(
            &[
                "rates",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ],
            &[("SNL_THREADS", threads)],
        );
        ensure(res.status.success(), || {
            format!("rates failed: {}", String::from_utf8_lossy(&res.stderr))
        })?;
        outputs.push(std::fs::read(out.join("rates.csv")).map_err(|e| e.to_string())?);
    }
    ensure(outputs[0] == outputs[1], || {
        "rates.csv differs between identical runs".into()
    })?;
    Ok(format!(
        "two runs (1 and 4 threads) gave identical {}-byte CSVs",
        outputs[0].len()
    ))
}
