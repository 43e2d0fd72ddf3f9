//! Quadratic, logistic and multinomial-logistic losses, plus plug-in classifiers.
//!
//! Multiclass logits have `K - 1` components; class `K` is the reference class
//! with logit pinned at zero. Binary labels are `{0, 1}`, multiclass labels
//! are `1..=K`.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthetic::GroundTruth;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    Regression,
    Binary,
    Multiclass { k: usize },
}

impl TaskKind {
    pub fn multiclass(k: usize) -> Result<Self> {
        if k < 3 {
            return Err(Error::InvalidParams(format!(
                "multiclass needs K >= 3 classes, got {k}"
            )));
        }
        Ok(TaskKind::Multiclass { k })
    }

    /// Width of the network output `d_L`.
    pub fn output_dim(&self) -> usize {
        match self {
            TaskKind::Regression | TaskKind::Binary => 1,
            TaskKind::Multiclass { k } => k - 1,
        }
    }

    pub fn is_classification(&self) -> bool {
        !matches!(self, TaskKind::Regression)
    }

    pub fn num_classes(&self) -> Option<usize> {
        match self {
            TaskKind::Regression => None,
            TaskKind::Binary => Some(2),
            TaskKind::Multiclass { k } => Some(*k),
        }
    }

    /// Check that `y` is a legal target for this task.
    pub fn validate_target(&self, y: f64) -> Result<()> {
        let ok = match self {
            TaskKind::Regression => y.is_finite(),
            TaskKind::Binary => y == 0.0 || y == 1.0,
            TaskKind::Multiclass { k } => y.fract() == 0.0 && y >= 1.0 && y <= *k as f64,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "target {y} is invalid for {self:?}"
            )))
        }
    }
}

/// Loss value and its gradient with respect to the network output.
#[derive(Clone, Debug, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn quad_loss(y: f64, g: f64) -> LossEval {
    LossEval {
        value: (y - g) * (y - g),
        grad: vec![2.0 * (g - y)],
    }
}

/// `ln(1 + exp(-y* g))` with `y* = 2y - 1`.
pub fn binary_logistic_loss(y: u8, g: f64) -> LossEval {
    let (value, target) = if y == 1 {
        (softplus(-g), 1.0)
    } else {
        (softplus(g), 0.0)
    };
    LossEval {
        value,
        grad: vec![sigmoid(g) - target],
    }
}

/// Stable `ln(1 + sum_k e^{g_k})`.
fn log1p_sum_exp(g: &[f64]) -> f64 {
    let m = g.iter().copied().fold(0.0_f64, f64::max);
    let s: f64 = (-m).exp() + g.iter().map(|&v| (v - m).exp()).sum::<f64>();
    m + s.ln()
}

/// Negative log-likelihood of the reference-class softmax model:
/// `ln(1 + sum_k e^{g_k}) - sum_k xi_k g_k` with `xi_k = 1{y = k}`.
pub fn multinomial_logistic_loss(y: usize, g: &[f64]) -> Result<LossEval> {
    let k = g.len() + 1;
    if y == 0 || y > k {
        return Err(Error::InvalidParams(format!("label {y} outside 1..={k}")));
    }
    let mut value = log1p_sum_exp(g);
    if y < k {
        value -= g[y - 1];
    }
    let p = probs_with_reference(g);
    let grad = (0..k - 1)
        .map(|j| p[j] - if j + 1 == y { 1.0 } else { 0.0 })
        .collect();
    Ok(LossEval { value, grad })
}

/// Class probabilities `(p_1, ..., p_K)` from `K - 1` logits with `g_K = 0`.
pub fn probs_with_reference(g: &[f64]) -> Vec<f64> {
    let m = g.iter().copied().fold(0.0_f64, f64::max);
    let mut p: Vec<f64> = g.iter().map(|&v| (v - m).exp()).collect();
    p.push((-m).exp());
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

/// Binary: `1{g >= 0}`. Multiclass: argmax over `(g_1, ..., g_{K-1}, 0)`,
/// smallest index on ties.
pub fn plugin_classify(g: &[f64], task: TaskKind) -> Result<usize> {
    match task {
        TaskKind::Regression => Err(Error::Usage(
            "plug-in classification is undefined for regression".into(),
        )),
        TaskKind::Binary => Ok(usize::from(g[0] >= 0.0)),
        TaskKind::Multiclass { k } => {
            if g.len() != k - 1 {
                return Err(Error::Shape(format!("{} logits for {k} classes", g.len())));
            }
            Ok(argmax_with_reference(g))
        }
    }
}

fn argmax_with_reference(g: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = g[0];
    for (j, &v) in g.iter().enumerate().skip(1) {
        if v > best_val {
            best = j;
            best_val = v;
        }
    }
    if 0.0 > best_val {
        g.len() + 1
    } else {
        best + 1
    }
}

/// The Bayes rule: the plug-in classifier applied to the true logits.
pub fn bayes_classify(gstar: &GroundTruth, x: &[f64]) -> Result<usize> {
    let task = gstar.classification_task();
    plugin_classify(&gstar.eval(x), task)
}

/// Mean loss over a batch of network outputs and, optionally, the gradient of
/// that mean with respect to each output (already divided by `n`).
pub fn batch_loss(
    task: TaskKind,
    outputs: ArrayView2<f64>,
    y: &[f64],
    with_grad: bool,
) -> Result<(f64, Option<Array2<f64>>)> {
    let n = outputs.nrows();
    if n != y.len() || outputs.ncols() != task.output_dim() {
        return Err(Error::Shape(format!(
            "outputs {:?} vs {} targets for {task:?}",
            outputs.dim(),
            y.len()
        )));
    }
    let inv_n = 1.0 / n as f64;
    let mut total = 0.0;
    let mut grad = with_grad.then(|| Array2::zeros(outputs.dim()));
    match task {
        TaskKind::Regression => {
            for (i, (&g, &t)) in outputs.column(0).iter().zip(y).enumerate() {
                let r = g - t;
                total += r * r;
                if let Some(gr) = grad.as_mut() {
                    gr[[i, 0]] = 2.0 * r * inv_n;
                }
            }
        }
        TaskKind::Binary => {
            for (i, (&g, &t)) in outputs.column(0).iter().zip(y).enumerate() {
                total += if t == 1.0 { softplus(-g) } else { softplus(g) };
                if let Some(gr) = grad.as_mut() {
                    gr[[i, 0]] = (sigmoid(g) - t) * inv_n;
                }
            }
        }
        TaskKind::Multiclass { k } => {
            for (i, row) in outputs.rows().into_iter().enumerate() {
                let g = row.to_vec();
                let label = y[i] as usize;
                if label == 0 || label > k {
                    return Err(Error::InvalidParams(format!(
                        "label {label} outside 1..={k}"
                    )));
                }
                total += log1p_sum_exp(&g) - if label < k { g[label - 1] } else { 0.0 };
                if let Some(gr) = grad.as_mut() {
                    let p = probs_with_reference(&g);
                    for j in 0..k - 1 {
                        let xi = if j + 1 == label { 1.0 } else { 0.0 };
                        gr[[i, j]] = (p[j] - xi) * inv_n;
                    }
                }
            }
        }
    }
    Ok((total * inv_n, grad))
}
