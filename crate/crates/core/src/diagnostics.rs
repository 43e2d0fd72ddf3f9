//! Numerical probes of the structural quantities behind the risk bounds:
//! empirical Rademacher complexity of the unit ℓ1 ball of networks, a
//! restricted-eigenvalue constant over an ℓ1 cone, the design moment
//! condition and the VC-dimension scale.
//!
//! Both variational quantities are only bounded from one side: the
//! Rademacher estimate comes from feasible points (a lower estimate), the
//! eigenvalue constant from sampled pairs (an upper estimate).

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::mean_and_se;
use crate::net::{Architecture, Network, ParamVector};
use crate::seed::derive_seed;
use crate::synthetic::{FeatureSampler, SamplerKind};

const ASCENT_ITERS: usize = 300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub bound: Option<f64>,
    pub trials: usize,
    pub notes: String,
}

/// `sqrt(2 (L + 1 + ln d) / n) * sqrt(max_j sum_i x_ij^2)`
pub fn golowich_bound(depth: usize, d: usize, x: ArrayView2<f64>) -> f64 {
    let n = x.nrows() as f64;
    let col_max = x
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max);
    (2.0 * (depth as f64 + 1.0 + (d as f64).ln()) / n).sqrt() * col_max.sqrt()
}

/// Euclidean projection onto `{u : ||u||_1 <= radius}` by sorting.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let norm: f64 = v.iter().map(|x| x.abs()).sum();
    if norm <= radius {
        return v.to_vec();
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - radius) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    v.iter()
        .map(|&x| x.signum() * (x.abs() - theta).max(0.0))
        .collect()
}

/// Correlation `(1/sqrt n) sum_i <sigma_i, g(x_i)>` and its gradient.
fn correlation(
    net: &mut Network,
    theta: &[f64],
    x: ArrayView2<f64>,
    signs: ArrayView2<f64>,
    with_grad: bool,
) -> Result<(f64, Option<ParamVector>)> {
    net.assign(&ParamVector::new(theta.to_vec()))?;
    let scale = 1.0 / (x.nrows() as f64).sqrt();
    let trace = net.forward_trace(x)?;
    let value = scale * (trace.output() * &signs).sum();
    let grad = if with_grad {
        let g = net.backward_trace(x, &trace, (&signs * scale).view())?;
        Some(g)
    } else {
        None
    };
    Ok((value, grad))
}

/// Projected gradient ascent from `start` with an adaptive step.
fn ascend(
    net: &mut Network,
    start: Vec<f64>,
    x: ArrayView2<f64>,
    signs: ArrayView2<f64>,
) -> Result<f64> {
    let mut theta = project_l1_ball(&start, 1.0);
    let (mut value, mut grad) = correlation(net, &theta, x, signs, true)?;
    let mut step = 1.0;
    for _ in 0..ASCENT_ITERS {
        let g = grad.as_ref().expect("gradient requested");
        let mut improved = false;
        for _ in 0..60 {
            let cand: Vec<f64> = theta
                .iter()
                .zip(g.as_slice())
                .map(|(t, gi)| t + step * gi)
                .collect();
            let cand = project_l1_ball(&cand, 1.0);
            let (v, _) = correlation(net, &cand, x, signs, false)?;
            if v > value {
                theta = cand;
                value = v;
                step *= 2.0;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
        grad = correlation(net, &theta, x, signs, true)?.1;
    }
    Ok(value)
}

/// Lower estimate of `E_sigma sup_{||Theta||_1 <= 1} (1/sqrt n) sum_i sigma_i g_Theta(x_i)`.
///
/// The bound field is only filled for bias-free architectures.
pub fn empirical_rademacher(
    arch: &Architecture,
    x: ArrayView2<f64>,
    sign_draws: usize,
    ascent_restarts: usize,
    seed: u64,
) -> Result<DiagnosticReport> {
    if x.ncols() != arch.input_dim() {
        return Err(Error::Shape(format!(
            "design has {} columns, architecture expects {}",
            x.ncols(),
            arch.input_dim()
        )));
    }
    if sign_draws == 0 || ascent_restarts == 0 || x.nrows() == 0 {
        return Err(Error::InvalidParams(
            "need at least one sign draw, one restart and one sample".into(),
        ));
    }
    let (n, k) = (x.nrows(), arch.output_dim());
    let best: Vec<f64> = (0..sign_draws)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[i as u64]));
            let signs =
                Array2::from_shape_fn((n, k), |_| if rng.random::<bool>() { 1.0 } else { -1.0 });
            let mut net = Network::zeros(arch);
            let mut best = f64::NEG_INFINITY;
            for r in 0..ascent_restarts {
                let start = Network::init(arch, 1.0, derive_seed(seed, &[i as u64, r as u64]))
                    .flatten()
                    .into_inner();
                let l1: f64 = start.iter().map(|v| v.abs()).sum();
                let start = start.iter().map(|v| v / l1).collect();
                best = best.max(ascend(&mut net, start, x, signs.view())?);
            }
            Ok(best.max(0.0))
        })
        .collect::<Result<_>>()?;
    let (estimate, std_error) = mean_and_se(&best);
    let bound = (!arch.bias_included()).then(|| golowich_bound(arch.depth(), arch.input_dim(), x));
    Ok(DiagnosticReport {
        name: "empirical_rademacher".into(),
        estimate,
        std_error,
        bound,
        trials: sign_draws,
        notes: format!(
            "lower estimate: best of {ascent_restarts} projected ascents per sign draw{}",
            if bound.is_none() {
                "; no bound for networks with biases"
            } else {
                ""
            }
        ),
    })
}

/// Upper estimate of the restricted eigenvalue constant
/// `inf ||g2 - g1||^2_{L2} / ||Theta2 - Theta1||^2` over the cone
/// `||v||_1 <= c0 sqrt(S0) ||v||_2`.
///
/// Even-indexed pairs differ along an `S0`-sparse direction, odd-indexed pairs
/// along a dense direction kept only if it falls in the cone. All ratios use
/// the same `m` design points. The estimate is the running minimum, so it can
/// only decrease as `pair_draws` grows.
pub fn gsre_kappa_estimate(
    arch: &Architecture,
    s0: usize,
    c0: f64,
    sampler: &mut FeatureSampler,
    pair_draws: usize,
    m: usize,
    seed: u64,
) -> Result<DiagnosticReport> {
    if c0.is_nan() || c0 <= 0.0 || s0 == 0 {
        return Err(Error::InvalidParams(format!(
            "cone needs c0 > 0 and S0 >= 1, got c0={c0}, S0={s0}"
        )));
    }
    if sampler.dim() != arch.input_dim() {
        return Err(Error::Shape(format!(
            "sampler draws {} features, architecture expects {}",
            sampler.dim(),
            arch.input_dim()
        )));
    }
    let x = sampler.sample(m.max(1));
    let s = arch.num_params();
    let support = s0.min(s);
    let ratios: Vec<Option<f64>> = (0..pair_draws)
        .into_par_iter()
        .map(|i| -> Result<Option<f64>> {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[i as u64]));
            let base = Network::init(arch, 1.0, rng.random());
            let mut v = vec![0.0; s];
            if i % 2 == 0 {
                for j in sample_indices(&mut rng, s, support) {
                    v[j] = rng.sample(StandardNormal);
                }
            } else {
                v.iter_mut().for_each(|e| *e = rng.sample(StandardNormal));
            }
            let l2 = v.iter().map(|e| e * e).sum::<f64>().sqrt();
            let l1: f64 = v.iter().map(|e| e.abs()).sum();
            if l2 == 0.0 || l1 > c0 * (s0 as f64).sqrt() * l2 {
                return Ok(None);
            }
            let theta = base.flatten();
            let size = 10f64.powf(rng.random_range(-3.0..0.0)) * theta.norms().l2.max(1.0) / l2;
            let v: Vec<f64> = v.iter().map(|e| e * size).collect();
            let other: Vec<f64> = theta
                .as_slice()
                .iter()
                .zip(&v)
                .map(|(a, b)| a + b)
                .collect();
            let other = Network::unflatten(arch, &ParamVector::new(other))?;
            let diff = other.forward_batch(x.view())? - base.forward_batch(x.view())?;
            let dist = diff.iter().map(|e| e * e).sum::<f64>() / x.nrows() as f64;
            let denom: f64 = v.iter().map(|e| e * e).sum();
            Ok(Some(dist / denom))
        })
        .collect::<Result<_>>()?;
    let accepted: Vec<f64> = ratios.iter().flatten().copied().collect();
    let estimate = accepted.iter().copied().fold(f64::INFINITY, f64::min);
    if accepted.is_empty() {
        return Err(Error::NoFeasiblePair(pair_draws));
    }
    Ok(DiagnosticReport {
        name: "gsre_kappa".into(),
        estimate,
        std_error: 0.0,
        bound: None,
        trials: accepted.len(),
        notes: format!(
            "upper estimate (minimum over sampled pairs, infimum not certified); {} of {pair_draws} pairs in cone, m={}",
            accepted.len(),
            x.nrows()
        ),
    })
}

/// Monte Carlo estimate of `E max_j (1/n) sum_i X_ij^2`.
pub fn moment_condition_check(
    kind: SamplerKind,
    n: usize,
    d: usize,
    reps: usize,
    seed: u64,
) -> Result<DiagnosticReport> {
    if reps < 10 || n == 0 {
        return Err(Error::InvalidParams(format!(
            "moment check needs reps >= 10 and n >= 1, got reps={reps}, n={n}"
        )));
    }
    let values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let x = FeatureSampler::new(kind, d, derive_seed(seed, &[r as u64]))?.sample(n);
            Ok(x.columns()
                .into_iter()
                .map(|c| c.iter().map(|v| v * v).sum::<f64>() / n as f64)
                .fold(f64::NEG_INFINITY, f64::max))
        })
        .collect::<Result<_>>()?;
    let (estimate, std_error) = mean_and_se(&values);
    Ok(DiagnosticReport {
        name: "moment_condition".into(),
        estimate,
        std_error,
        bound: None,
        trials: reps,
        notes: format!("{} features, n={n}, d={d}", kind.label()),
    })
}

/// `S0 * L0 * ln S0`, the growth scale of the VC dimension of sparse networks.
pub fn vc_scale(l0: f64, s0: f64) -> f64 {
    assert!(s0 >= 2.0, "vc_scale needs S0 >= 2");
    s0 * l0 * s0.ln()
}
