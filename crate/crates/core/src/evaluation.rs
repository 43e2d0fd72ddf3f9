//! Monte Carlo risk estimates against a known ground truth.
//!
//! Classification excess risks use the conditional class probabilities of
//! the ground truth directly, so no test labels are sampled:
//! `R(eta) - R(eta*) = E[ max_k p*_k(X) - p*_{eta(X)}(X) ]`.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{plugin_classify, probs_with_reference, sigmoid, softplus, TaskKind};
use crate::net::Network;
use crate::synthetic::{FeatureSampler, GroundTruth};

/// Smallest Monte Carlo sample accepted by the estimators.
pub const MIN_MC_SAMPLES: usize = 100;
const CHUNK: usize = 16_384;

/// Anything that maps a batch of feature rows to logits or regression values.
pub trait Predictor: Sync {
    fn out_dim(&self) -> usize;
    fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>>;
}

impl Predictor for Network {
    fn out_dim(&self) -> usize {
        self.arch().output_dim()
    }

    fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.forward_batch(x)
    }
}

impl Predictor for GroundTruth {
    fn out_dim(&self) -> usize {
        GroundTruth::out_dim(self)
    }

    fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.eval_batch(x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RiskKind {
    L2,
    LogisticExcess,
    MisclassExcess,
    BayesRisk,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub value: f64,
    pub std_error: f64,
    pub m: usize,
    pub kind: RiskKind,
}

impl RiskEstimate {
    fn from_samples(samples: &[f64], kind: RiskKind) -> Self {
        let (value, std_error) = mean_and_se(samples);
        Self {
            value,
            std_error,
            m: samples.len(),
            kind,
        }
    }
}

/// Sample mean and its standard error `sd / sqrt(m)`.
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Predictions of the estimator and of the ground truth on `m` fresh draws.
fn paired_draws(
    est: &dyn Predictor,
    gt: &GroundTruth,
    sampler: &mut FeatureSampler,
    m: usize,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if m < MIN_MC_SAMPLES {
        return Err(Error::InvalidParams(format!(
            "need at least {MIN_MC_SAMPLES} Monte Carlo samples, got {m}"
        )));
    }
    if est.out_dim() != gt.out_dim() || sampler.dim() != gt.dim() {
        return Err(Error::Shape(format!(
            "estimator outputs {}, truth outputs {} on {} features, sampler draws {}",
            est.out_dim(),
            gt.out_dim(),
            gt.dim(),
            sampler.dim()
        )));
    }
    let k = gt.out_dim();
    let mut ghat = Array2::zeros((m, k));
    let mut gstar = Array2::zeros((m, k));
    let mut start = 0;
    while start < m {
        let len = CHUNK.min(m - start);
        let x = sampler.sample(len);
        ghat.slice_mut(ndarray::s![start..start + len, ..])
            .assign(&est.predict_batch(x.view())?);
        gstar
            .slice_mut(ndarray::s![start..start + len, ..])
            .assign(&gt.eval_batch(x.view()));
        start += len;
    }
    Ok((ghat, gstar))
}

fn require_binary(gt: &GroundTruth) -> Result<()> {
    if gt.out_dim() != 1 {
        return Err(Error::InvalidParams(format!(
            "binary risk needs a scalar logit, ground truth has {} outputs",
            gt.out_dim()
        )));
    }
    Ok(())
}

/// `||ghat - g*||^2_{L2(P_X)}`, summing squared components for vector outputs.
pub fn mc_l2_risk(
    est: &dyn Predictor,
    gt: &GroundTruth,
    sampler: &mut FeatureSampler,
    m: usize,
) -> Result<RiskEstimate> {
    let (ghat, gstar) = paired_draws(est, gt, sampler, m)?;
    let samples: Vec<f64> = ghat
        .rows()
        .into_iter()
        .zip(gstar.rows())
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum())
        .collect();
    Ok(RiskEstimate::from_samples(&samples, RiskKind::L2))
}

/// Pointwise logistic excess risk
/// `p*(g* - ghat) + ln((1 + e^ghat) / (1 + e^g*))` with `p* = sigmoid(g*)`.
/// The value is a Bregman divergence and therefore nonnegative; rounding
/// below zero is clamped.
pub fn logistic_excess_pointwise(gstar: f64, ghat: f64) -> f64 {
    if gstar == ghat {
        return 0.0;
    }
    (sigmoid(gstar) * (gstar - ghat) + softplus(ghat) - softplus(gstar)).max(0.0)
}

pub fn logistic_excess_risk(
    est: &dyn Predictor,
    gt: &GroundTruth,
    sampler: &mut FeatureSampler,
    m: usize,
) -> Result<RiskEstimate> {
    require_binary(gt)?;
    let (ghat, gstar) = paired_draws(est, gt, sampler, m)?;
    let samples: Vec<f64> = ghat
        .iter()
        .zip(gstar.iter())
        .map(|(&h, &s)| logistic_excess_pointwise(s, h))
        .collect();
    Ok(RiskEstimate::from_samples(
        &samples,
        RiskKind::LogisticExcess,
    ))
}

/// Multiclass logistic excess risk at a point: `KL(p* || p_hat)` over the
/// `K` class probabilities, clamped at zero.
pub fn logistic_excess_pointwise_multiclass(gstar: &[f64], ghat: &[f64]) -> f64 {
    if gstar == ghat {
        return 0.0;
    }
    let p = probs_with_reference(gstar);
    let q = probs_with_reference(ghat);
    p.iter()
        .zip(&q)
        .filter(|(pk, _)| **pk > 0.0)
        .map(|(pk, qk)| pk * (pk.ln() - qk.ln()))
        .sum::<f64>()
        .max(0.0)
}

/// `|2 p* - 1| * 1{plug-in label != Bayes label}`
pub fn misclass_excess_pointwise_binary(gstar: f64, ghat: f64) -> f64 {
    let bayes = gstar >= 0.0;
    let plug = ghat >= 0.0;
    if bayes == plug {
        0.0
    } else {
        (2.0 * sigmoid(gstar) - 1.0).abs()
    }
}

pub fn misclass_excess_binary(
    est: &dyn Predictor,
    gt: &GroundTruth,
    sampler: &mut FeatureSampler,
    m: usize,
) -> Result<RiskEstimate> {
    require_binary(gt)?;
    let (ghat, gstar) = paired_draws(est, gt, sampler, m)?;
    let samples: Vec<f64> = ghat
        .iter()
        .zip(gstar.iter())
        .map(|(&h, &s)| misclass_excess_pointwise_binary(s, h))
        .collect();
    Ok(RiskEstimate::from_samples(
        &samples,
        RiskKind::MisclassExcess,
    ))
}

/// `max_k p*_k - p*_{plug-in label}` for `K - 1` logits.
pub fn misclass_excess_pointwise_multiclass(gstar: &[f64], ghat: &[f64]) -> Result<f64> {
    let task = TaskKind::multiclass(gstar.len() + 1)?;
    let p = probs_with_reference(gstar);
    let bayes = plugin_classify(gstar, task)?;
    let chosen = plugin_classify(ghat, task)?;
    if chosen == bayes {
        return Ok(0.0);
    }
    Ok((p[bayes - 1] - p[chosen - 1]).max(0.0))
}

pub fn misclass_excess_multiclass(
    est: &dyn Predictor,
    gt: &GroundTruth,
    sampler: &mut FeatureSampler,
    m: usize,
    k: usize,
) -> Result<RiskEstimate> {
    if gt.out_dim() + 1 != k {
        return Err(Error::Shape(format!(
            "{k} classes need {} logits, ground truth has {}",
            k - 1,
            gt.out_dim()
        )));
    }
    let (ghat, gstar) = paired_draws(est, gt, sampler, m)?;
    let samples = ghat
        .rows()
        .into_iter()
        .zip(gstar.rows())
        .map(|(h, s)| misclass_excess_pointwise_multiclass(&s.to_vec(), &h.to_vec()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(RiskEstimate::from_samples(
        &samples,
        RiskKind::MisclassExcess,
    ))
}

/// Bayes misclassification risk `E min(p*, 1 - p*)`.
pub fn bayes_risk_binary(
    gt: &GroundTruth,
    sampler: &mut FeatureSampler,
    m: usize,
) -> Result<RiskEstimate> {
    require_binary(gt)?;
    let (_, gstar) = paired_draws(gt, gt, sampler, m)?;
    let samples: Vec<f64> = gstar
        .iter()
        .map(|&s| {
            let p = sigmoid(s);
            p.min(1.0 - p)
        })
        .collect();
    Ok(RiskEstimate::from_samples(&samples, RiskKind::BayesRisk))
}

/// Outcome of checking `misclass excess <= sqrt(2 * logistic excess)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCheck {
    pub misclass: RiskEstimate,
    pub logistic: RiskEstimate,
    pub lhs: f64,
    pub rhs: f64,
    /// Combined standard error of `lhs - rhs`, delta method through the root.
    pub combined_se: f64,
    pub pass: bool,
}

/// Both sides are estimated on the same Monte Carlo draws; the check passes
/// when `lhs <= rhs + 3 * combined_se`.
pub fn comparison_check(
    est: &dyn Predictor,
    gt: &GroundTruth,
    sampler: &mut FeatureSampler,
    m: usize,
) -> Result<ComparisonCheck> {
    require_binary(gt)?;
    let (ghat, gstar) = paired_draws(est, gt, sampler, m)?;
    let (mis, logit): (Vec<f64>, Vec<f64>) = ghat
        .iter()
        .zip(gstar.iter())
        .map(|(&h, &s)| {
            (
                misclass_excess_pointwise_binary(s, h),
                logistic_excess_pointwise(s, h),
            )
        })
        .unzip();
    let misclass = RiskEstimate::from_samples(&mis, RiskKind::MisclassExcess);
    let logistic = RiskEstimate::from_samples(&logit, RiskKind::LogisticExcess);
    let rhs = (2.0 * logistic.value).sqrt();
    let rhs_se = if logistic.value > 0.0 {
        logistic.std_error / (2.0 * logistic.value).sqrt()
    } else {
        (2.0 * logistic.std_error).sqrt()
    };
    let combined_se = (misclass.std_error.powi(2) + rhs_se.powi(2)).sqrt();
    let lhs = misclass.value;
    Ok(ComparisonCheck {
        misclass,
        logistic,
        lhs,
        rhs,
        combined_se,
        pass: lhs <= rhs + 3.0 * combined_se,
    })
}
