//! Representative ground-truth functions for each benchmark function class,
//! tagged with the approximation exponents `(tau, r)` of that class.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::losses::TaskKind;

/// Sup-norm budget for the neglected tail of a truncated cosine series.
pub const SERIES_TAIL_TOL: f64 = 1e-4;
/// Hard cap on cosine-series length. Low smoothness orders hit it, in which
/// case the achieved tail bound is recorded on the ground truth instead.
pub const MAX_SERIES_TERMS: usize = 4096;

/// Decay exponent offset: coefficients decay like `j^-(s + 1/2 + 0.01)`.
const DECAY_OFFSET: f64 = 0.51;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompositionKind {
    /// `sum_j f_j(x_j)`
    Additive,
    /// `f(<w, x>)`
    SingleIndex,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ClassTag {
    /// Sobolev/Hoelder-type smoothness `s` (random cosine series).
    Smooth { s: f64 },
    /// Gaussian-envelope sinusoid.
    Analytic,
    /// Spatially inhomogeneous Doppler-type function (`d = 1`).
    Besov { s: f64 },
    /// `m` smooth pieces separated by boundaries of smoothness `beta`.
    Piecewise { s: f64, beta: f64, m: usize },
    /// Additive or single-index composition of order-`s` components.
    Composition { kind: CompositionKind, s: f64 },
    /// Constant function; used for degenerate and reference cases.
    Constant,
}

impl ClassTag {
    pub fn name(&self) -> &'static str {
        match self {
            ClassTag::Smooth { .. } => "smooth",
            ClassTag::Analytic => "analytic",
            ClassTag::Besov { .. } => "besov",
            ClassTag::Piecewise { .. } => "piecewise",
            ClassTag::Composition {
                kind: CompositionKind::Additive,
                ..
            } => "additive",
            ClassTag::Composition {
                kind: CompositionKind::SingleIndex,
                ..
            } => "single_index",
            ClassTag::Constant => "constant",
        }
    }

    pub fn smoothness(&self) -> Option<f64> {
        match *self {
            ClassTag::Smooth { s }
            | ClassTag::Besov { s }
            | ClassTag::Piecewise { s, .. }
            | ClassTag::Composition { s, .. } => Some(s),
            ClassTag::Analytic | ClassTag::Constant => None,
        }
    }

    pub fn boundary_smoothness(&self) -> Option<f64> {
        match *self {
            ClassTag::Piecewise { beta, .. } => Some(beta),
            _ => None,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let ok = match *self {
            ClassTag::Smooth { s } | ClassTag::Composition { s, .. } => pos(s),
            ClassTag::Besov { s } => pos(s) && d == 1,
            ClassTag::Piecewise { s, beta, m } => pos(s) && pos(beta) && m >= 2,
            ClassTag::Analytic | ClassTag::Constant => true,
        };
        if d == 0 || !ok {
            return Err(Error::InvalidParams(format!(
                "{self:?} is invalid for d = {d}"
            )));
        }
        Ok(())
    }

    /// `(t_l, s_l*)` levels of a composition; linear maps have infinite smoothness.
    pub fn composition_levels(kind: CompositionKind, s: f64, d: usize) -> Vec<(f64, f64)> {
        match kind {
            CompositionKind::Additive => vec![(1.0, s), (d as f64, f64::INFINITY)],
            CompositionKind::SingleIndex => vec![(d as f64, f64::INFINITY), (1.0, s)],
        }
    }

    /// Approximation exponents `(tau, r)`: a sparse network with about
    /// `eps^-tau (ln 1/eps)^r` weights approximates the class to accuracy `eps`.
    pub fn complexity(&self, d: usize) -> (f64, f64) {
        let d_f = d as f64;
        match *self {
            ClassTag::Smooth { s } | ClassTag::Besov { s } => (d_f / s, 1.0),
            ClassTag::Analytic => (0.0, d_f + 1.0),
            ClassTag::Piecewise { s, beta, .. } => ((d_f / s).max(2.0 * (d_f - 1.0) / beta), 1.0),
            ClassTag::Composition { kind, s } => {
                (composition_tau(&Self::composition_levels(kind, s, d)), 1.0)
            }
            ClassTag::Constant => (0.0, 0.0),
        }
    }
}

/// `max_l t_l / s_l*`
pub fn composition_tau(levels: &[(f64, f64)]) -> f64 {
    levels.iter().map(|&(t, s)| t / s).fold(0.0, f64::max)
}

/// `sum_j a_j cos(j <u_j, x> + phi_j)` with `sum_j |a_j| = bound`.
#[derive(Clone, Debug)]
struct CosineSeries {
    amps: Vec<f64>,
    /// Row `j` is `j * u_j`.
    freqs: Array2<f64>,
    phases: Vec<f64>,
    tail: f64,
}

impl CosineSeries {
    fn random(s: f64, d: usize, bound: f64, rng: &mut ChaCha8Rng) -> Self {
        let p = s + DECAY_OFFSET;
        // smallest J whose neglected tail, bounded by the integral of c x^-p
        // from J to infinity, stays below the tolerance
        let mut partial = 0.0;
        let mut terms = 0;
        let mut tail = f64::INFINITY;
        while terms < MAX_SERIES_TERMS {
            terms += 1;
            partial += (terms as f64).powf(-p);
            let c = bound / partial;
            tail = c * (terms as f64).powf(1.0 - p) / (p - 1.0);
            if tail < SERIES_TAIL_TOL {
                break;
            }
        }
        if p <= 1.0 {
            tail = f64::INFINITY;
        }
        let c = bound / partial;
        let amps = (1..=terms).map(|j| c * (j as f64).powf(-p)).collect();
        let mut freqs = Array2::zeros((terms, d));
        for (j, mut row) in freqs.rows_mut().into_iter().enumerate() {
            let dir = random_unit(d, rng);
            row.iter_mut()
                .zip(dir)
                .for_each(|(f, u)| *f = (j + 1) as f64 * u);
        }
        let phases = (0..terms)
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect();
        Self {
            amps,
            freqs,
            phases,
            tail,
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.freqs
            .rows()
            .into_iter()
            .zip(&self.amps)
            .zip(&self.phases)
            .map(|((w, a), ph)| {
                let t: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
                a * (t + ph).cos()
            })
            .sum()
    }
}

fn random_unit(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if d == 1 {
        return vec![1.0];
    }
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

#[derive(Clone, Debug)]
enum Component {
    Series(CosineSeries),
    Analytic {
        w: Vec<f64>,
        amp: f64,
    },
    Doppler {
        amp: f64,
    },
    Piecewise {
        boundary: Option<CosineSeries>,
        offsets: Vec<f64>,
        pieces: Vec<CosineSeries>,
    },
    Additive(Vec<CosineSeries>),
    SingleIndex {
        w: Vec<f64>,
        f: CosineSeries,
    },
    Constant(f64),
}

impl Component {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Component::Series(s) => s.eval(x),
            Component::Analytic { w, amp } => {
                let sq: f64 = x.iter().map(|v| v * v).sum();
                let t: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
                amp * (-0.5 * sq).exp() * t.sin()
            }
            Component::Doppler { amp } => {
                let half = 3f64.sqrt();
                let u = ((x[0] + half) / (2.0 * half)).clamp(0.0, 1.0);
                2.0 * amp * (u * (1.0 - u)).sqrt() * (2.0 * PI * 1.05 / (u + 0.05)).sin()
            }
            Component::Piecewise {
                boundary,
                offsets,
                pieces,
            } => {
                let (coord, h) = match boundary {
                    Some(b) => (x[1], b.eval(&x[..1])),
                    None => (x[0], 0.0),
                };
                let region = offsets.iter().filter(|&&o| coord >= h + o).count();
                pieces[region].eval(x)
            }
            Component::Additive(fs) => fs.iter().zip(x).map(|(f, &xj)| f.eval(&[xj])).sum(),
            Component::SingleIndex { w, f } => {
                let t: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
                f.eval(&[t])
            }
            Component::Constant(c) => *c,
        }
    }

    fn tail(&self) -> f64 {
        match self {
            Component::Series(s) => s.tail,
            Component::Piecewise { pieces, .. } => {
                pieces.iter().map(|p| p.tail).fold(0.0, f64::max)
            }
            Component::Additive(fs) => fs.iter().map(|f| f.tail).sum(),
            Component::SingleIndex { f, .. } => f.tail,
            _ => 0.0,
        }
    }
}

/// An evaluable target `g*: R^d -> R^{out_dim}` with `|g*_k| <= bound`.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    tag: ClassTag,
    d: usize,
    bound: f64,
    tau: f64,
    r: f64,
    components: Vec<Component>,
}

impl GroundTruth {
    /// Constant function with the given output values.
    pub fn constant(values: &[f64], d: usize) -> Self {
        let bound = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        Self {
            tag: ClassTag::Constant,
            d,
            bound,
            tau: 0.0,
            r: 0.0,
            components: values.iter().map(|&v| Component::Constant(v)).collect(),
        }
    }

    pub fn tag(&self) -> ClassTag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn out_dim(&self) -> usize {
        self.components.len()
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Sup-norm bound on what truncating the cosine series dropped.
    pub fn truncation_tail(&self) -> f64 {
        self.components
            .iter()
            .map(Component::tail)
            .fold(0.0, f64::max)
    }

    /// Task whose logits this function can serve as: one output is binary.
    pub fn classification_task(&self) -> TaskKind {
        match self.out_dim() {
            1 => TaskKind::Binary,
            k => TaskKind::Multiclass { k: k + 1 },
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    pub fn eval_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.out_dim()));
        let mut buf = vec![0.0; x.ncols()];
        for (row, mut o) in x.rows().into_iter().zip(out.rows_mut()) {
            buf.iter_mut().zip(row).for_each(|(b, v)| *b = *v);
            for (c, v) in self.components.iter().zip(o.iter_mut()) {
                *v = c.eval(&buf);
            }
        }
        out
    }
}

/// Build a ground truth of the given class. Each of the `out_dim` outputs is
/// an independent draw from the class, scaled so that `|g*_k| <= bound`.
pub fn make_ground_truth(
    tag: ClassTag,
    d: usize,
    out_dim: usize,
    bound: f64,
    seed: u64,
) -> Result<GroundTruth> {
    tag.validate(d)?;
    if out_dim == 0 || !(bound.is_finite() && bound > 0.0) {
        return Err(Error::InvalidParams(format!(
            "need out_dim >= 1 and a positive finite bound, got {out_dim} and {bound}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let components = (0..out_dim)
        .map(|_| build_component(tag, d, bound, &mut rng))
        .collect();
    let (tau, r) = tag.complexity(d);
    Ok(GroundTruth {
        tag,
        d,
        bound,
        tau,
        r,
        components,
    })
}

fn build_component(tag: ClassTag, d: usize, bound: f64, rng: &mut ChaCha8Rng) -> Component {
    match tag {
        ClassTag::Smooth { s } => Component::Series(CosineSeries::random(s, d, bound, rng)),
        ClassTag::Analytic => {
            let w = random_unit(d, rng).into_iter().map(|v| 2.0 * v).collect();
            Component::Analytic { w, amp: bound }
        }
        ClassTag::Besov { .. } => Component::Doppler { amp: bound },
        ClassTag::Piecewise { s, beta, m } => {
            let half = 3f64.sqrt();
            let boundary = (d >= 2).then(|| CosineSeries::random(beta, 1, 0.5, rng));
            let offsets = (1..m)
                .map(|k| half * (2.0 * k as f64 / m as f64 - 1.0))
                .collect();
            let pieces = (0..m)
                .map(|_| CosineSeries::random(s, d, bound, rng))
                .collect();
            Component::Piecewise {
                boundary,
                offsets,
                pieces,
            }
        }
        ClassTag::Composition { kind, s } => match kind {
            CompositionKind::Additive => Component::Additive(
                (0..d)
                    .map(|_| CosineSeries::random(s, 1, bound / d as f64, rng))
                    .collect(),
            ),
            CompositionKind::SingleIndex => Component::SingleIndex {
                w: random_unit(d, rng),
                f: CosineSeries::random(s, 1, bound, rng),
            },
        },
        ClassTag::Constant => Component::Constant(bound),
    }
}
