//! Sparsity penalties and their closed-form proximal operators.
//!
//! Groups follow the network layout: a node group is the incoming weight row
//! of a unit together with its bias, a layer group is the whole affine map
//! `[W_l | b_l]` of one layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::TaskKind;
use crate::net::{Architecture, Network, ParamVector};

/// Default geometric grid for the penalty constant `C0`.
pub const C0_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PenaltyKind {
    /// `lambda * ||theta||_1`
    L1 { lambda: f64 },
    /// `lambda * sum over nodes of ||incoming row||_2`
    GroupNode { lambda: f64 },
    /// `lambda * sum over layers of ||[W_l | b_l]||_F`
    GroupLayer { lambda: f64 },
    /// `lambda1 * node groups + lambda2 * ||theta||_1`
    SparseGroup { lambda1: f64, lambda2: f64 },
}

impl PenaltyKind {
    pub fn validate(&self) -> Result<()> {
        let ok = |l: f64| l.is_finite() && l >= 0.0;
        let valid = match *self {
            PenaltyKind::L1 { lambda }
            | PenaltyKind::GroupNode { lambda }
            | PenaltyKind::GroupLayer { lambda } => ok(lambda),
            PenaltyKind::SparseGroup { lambda1, lambda2 } => ok(lambda1) && ok(lambda2),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "penalty weights must be finite and >= 0: {self:?}"
            )))
        }
    }

    /// Build a penalty from its config name. `mix` splits `lambda` between the
    /// group (`1 - mix`) and `l1` (`mix`) parts of the sparse group penalty.
    pub fn from_name(name: &str, lambda: f64, mix: f64) -> Result<Self> {
        let kind = match name {
            "l1" => PenaltyKind::L1 { lambda },
            "group_node" => PenaltyKind::GroupNode { lambda },
            "group_layer" => PenaltyKind::GroupLayer { lambda },
            "sparse_group" => PenaltyKind::SparseGroup {
                lambda1: (1.0 - mix) * lambda,
                lambda2: mix * lambda,
            },
            other => return Err(Error::InvalidParams(format!("unknown penalty `{other}`"))),
        };
        kind.validate()?;
        Ok(kind)
    }

    pub fn name(&self) -> &'static str {
        match self {
            PenaltyKind::L1 { .. } => "l1",
            PenaltyKind::GroupNode { .. } => "group_node",
            PenaltyKind::GroupLayer { .. } => "group_layer",
            PenaltyKind::SparseGroup { .. } => "sparse_group",
        }
    }

    /// The same penalty with every weight multiplied by `f`.
    pub fn scaled(self, f: f64) -> Self {
        match self {
            PenaltyKind::L1 { lambda } => PenaltyKind::L1 { lambda: f * lambda },
            PenaltyKind::GroupNode { lambda } => PenaltyKind::GroupNode { lambda: f * lambda },
            PenaltyKind::GroupLayer { lambda } => PenaltyKind::GroupLayer { lambda: f * lambda },
            PenaltyKind::SparseGroup { lambda1, lambda2 } => PenaltyKind::SparseGroup {
                lambda1: f * lambda1,
                lambda2: f * lambda2,
            },
        }
    }
}

fn group_norm(v: &[f64], idx: impl Iterator<Item = usize>) -> f64 {
    idx.map(|i| v[i] * v[i]).sum::<f64>().sqrt()
}

fn node_groups_sum(arch: &Architecture, v: &[f64]) -> f64 {
    (0..arch.depth())
        .flat_map(|l| (0..arch.dims()[l + 1]).map(move |r| (l, r)))
        .map(|(l, r)| group_norm(v, arch.node_indices(l, r)))
        .sum()
}

fn layer_range(arch: &Architecture, l: usize) -> std::ops::Range<usize> {
    let off = arch.layer_offset(l);
    off..off + arch.layer_len(l)
}

/// Penalty of a flat parameter vector laid out according to `arch`.
pub fn penalty_of(arch: &Architecture, v: &[f64], kind: PenaltyKind) -> f64 {
    let l1 = || v.iter().map(|x| x.abs()).sum::<f64>();
    match kind {
        PenaltyKind::L1 { lambda } => lambda * l1(),
        PenaltyKind::GroupNode { lambda } => lambda * node_groups_sum(arch, v),
        PenaltyKind::GroupLayer { lambda } => {
            lambda
                * (0..arch.depth())
                    .map(|l| group_norm(v, layer_range(arch, l)))
                    .sum::<f64>()
        }
        PenaltyKind::SparseGroup { lambda1, lambda2 } => {
            lambda1 * node_groups_sum(arch, v) + lambda2 * l1()
        }
    }
}

pub fn penalty_value(net: &Network, kind: PenaltyKind) -> f64 {
    penalty_of(net.arch(), net.flatten().as_slice(), kind)
}

/// `sign(x) * max(|x| - thr, 0)`
pub fn soft_threshold(x: f64, thr: f64) -> f64 {
    if x > thr {
        x - thr
    } else if x < -thr {
        x + thr
    } else {
        0.0
    }
}

/// Scale the group by `(1 - thr / ||group||)_+`, zeroing it exactly when killed.
fn block_threshold(v: &mut [f64], idx: &[usize], thr: f64) {
    let norm = idx.iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt();
    if norm <= thr {
        idx.iter().for_each(|&i| v[i] = 0.0);
    } else {
        let scale = 1.0 - thr / norm;
        idx.iter().for_each(|&i| v[i] *= scale);
    }
}

fn node_block_threshold(arch: &Architecture, v: &mut [f64], thr: f64) {
    let mut idx = Vec::new();
    for l in 0..arch.depth() {
        for r in 0..arch.dims()[l + 1] {
            idx.clear();
            idx.extend(arch.node_indices(l, r));
            block_threshold(v, &idx, thr);
        }
    }
}

/// In-place `argmin_u 1/2 ||u - v||^2 + t * Pen(u)`.
pub fn prox_in_place(arch: &Architecture, v: &mut [f64], kind: PenaltyKind, t: f64) {
    debug_assert_eq!(v.len(), arch.num_params());
    match kind {
        PenaltyKind::L1 { lambda } => {
            let thr = t * lambda;
            v.iter_mut().for_each(|x| *x = soft_threshold(*x, thr));
        }
        PenaltyKind::GroupNode { lambda } => node_block_threshold(arch, v, t * lambda),
        PenaltyKind::GroupLayer { lambda } => {
            for l in 0..arch.depth() {
                let idx: Vec<usize> = layer_range(arch, l).collect();
                block_threshold(v, &idx, t * lambda);
            }
        }
        PenaltyKind::SparseGroup { lambda1, lambda2 } => {
            let thr = t * lambda2;
            v.iter_mut().for_each(|x| *x = soft_threshold(*x, thr));
            node_block_threshold(arch, v, t * lambda1);
        }
    }
}

pub fn prox_step(arch: &Architecture, v: &ParamVector, kind: PenaltyKind, t: f64) -> ParamVector {
    assert!(t > 0.0, "prox step size must be positive");
    let mut out = v.clone();
    prox_in_place(arch, out.as_mut_slice(), kind, t);
    out
}

/// `C0 * sqrt(ln n / n)`, with an extra factor `K - 1` under the root for multiclass.
pub fn lambda_theory(n: usize, task: TaskKind, c0: f64) -> f64 {
    let n = n as f64;
    let base = n.ln() / n;
    match task {
        TaskKind::Multiclass { k } => c0 * ((k - 1) as f64 * base).sqrt(),
        _ => c0 * base.sqrt(),
    }
}
