//! Fully connected ReLU networks `x -> W_{L-1} relu(... relu(W_0 x + b_0) ...) + b_{L-1}`.
//!
//! Parameters flatten into a single vector layer by layer: the weight matrix
//! of layer `l` in row-major order, followed by its bias vector when the
//! architecture carries biases. Penalties, proximal steps and the optimizer
//! all operate on that flat [`ParamVector`].

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer widths `d_0, ..., d_L` of a network with `L` weight matrices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    dims: Vec<usize>,
    bias_included: bool,
}

impl Architecture {
    pub fn new(dims: Vec<usize>, bias_included: bool) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidParams(
                "an architecture needs at least one weight matrix".into(),
            ));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidParams("layer widths must be >= 1".into()));
        }
        Ok(Self {
            dims,
            bias_included,
        })
    }

    /// Input width, `L - 1` hidden layers of equal width, output width.
    pub fn uniform(
        input_dim: usize,
        width: usize,
        depth: usize,
        output_dim: usize,
        bias_included: bool,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidParams("depth must be >= 1".into()));
        }
        let mut dims = Vec::with_capacity(depth + 1);
        dims.push(input_dim);
        dims.extend(std::iter::repeat_n(width, depth - 1));
        dims.push(output_dim);
        Self::new(dims, bias_included)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of weight matrices `L`.
    pub fn depth(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn bias_included(&self) -> bool {
        self.bias_included
    }

    /// Parameters owned by layer `l` (weights plus bias if present).
    pub fn layer_len(&self, l: usize) -> usize {
        let (d_in, d_out) = (self.dims[l], self.dims[l + 1]);
        d_out * (d_in + usize::from(self.bias_included))
    }

    /// Offset of layer `l`'s weight matrix inside the flat parameter vector.
    pub fn layer_offset(&self, l: usize) -> usize {
        (0..l).map(|k| self.layer_len(k)).sum()
    }

    /// Total parameter count `S`.
    pub fn num_params(&self) -> usize {
        (0..self.depth()).map(|l| self.layer_len(l)).sum()
    }

    /// Flat indices of the incoming affine map of node `row` in layer `l`:
    /// its weight row, then its bias when present.
    pub fn node_indices(&self, l: usize, row: usize) -> impl Iterator<Item = usize> {
        let off = self.layer_offset(l);
        let (d_in, d_out) = (self.dims[l], self.dims[l + 1]);
        let start = off + row * d_in;
        let bias = self.bias_included.then_some(off + d_out * d_in + row);
        (start..start + d_in).chain(bias)
    }
}

/// Size a weakly deep network for `n_train` samples: `max(2, ceil(ln n))`
/// weight matrices and the widest equal hidden width keeping `S <= n_train`.
pub fn size_architecture(
    n_train: usize,
    input_dim: usize,
    output_dim: usize,
    bias_included: bool,
) -> Result<Architecture> {
    if input_dim == 0 || output_dim == 0 {
        return Err(Error::InvalidParams(
            "input and output dimensions must be >= 1".into(),
        ));
    }
    let depth = ((n_train.max(1) as f64).ln().ceil() as usize).max(2);
    let b = usize::from(bias_included);
    let count = |w: usize| -> usize {
        w * (input_dim + b) + (depth - 2) * w * (w + b) + output_dim * (w + b)
    };
    if count(1) > n_train {
        return Err(Error::Sizing(format!(
            "{} parameters needed for width 1 at depth {depth}, only {n_train} allowed",
            count(1)
        )));
    }
    let mut w = 1;
    while count(w + 1) <= n_train {
        w += 1;
    }
    Architecture::uniform(input_dim, w, depth, output_dim, bias_included)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(Vec<f64>);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamNorms {
    pub l0: usize,
    pub l1: f64,
    pub l2: f64,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norms(&self) -> ParamNorms {
        param_norms(&self.0)
    }
}

/// `l0` counts entries that are not exactly zero; no tolerance is applied.
pub fn param_norms(v: &[f64]) -> ParamNorms {
    ParamNorms {
        l0: v.iter().filter(|&&x| x != 0.0).count(),
        l1: v.iter().map(|x| x.abs()).sum(),
        l2: v.iter().map(|x| x * x).sum::<f64>().sqrt(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    arch: Architecture,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Intermediate values of a batched forward pass, kept for backpropagation.
pub struct ForwardTrace {
    /// Post-ReLU activations of hidden layers `1..L`.
    hidden: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    pub fn into_output(self) -> Array2<f64> {
        self.output
    }
}

impl Network {
    pub fn zeros(arch: &Architecture) -> Self {
        let dims = arch.dims();
        let weights = dims
            .windows(2)
            .map(|w| Array2::zeros((w[1], w[0])))
            .collect();
        let biases = dims[1..].iter().map(|&d| Array1::zeros(d)).collect();
        Self {
            arch: arch.clone(),
            weights,
            biases,
        }
    }

    /// He-style initialization: weights i.i.d. `N(0, scale^2 * 2 / d_in)`, zero biases.
    pub fn init(arch: &Architecture, scale: f64, seed: u64) -> Self {
        assert!(
            scale >= 0.0 && scale.is_finite(),
            "init scale must be finite and >= 0"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::zeros(arch);
        for w in &mut net.weights {
            let std = scale * (2.0 / w.ncols() as f64).sqrt();
            w.mapv_inplace(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                std * z
            });
        }
        net
    }

    pub fn from_parts(
        arch: Architecture,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Self> {
        let dims = arch.dims();
        if weights.len() != arch.depth() || biases.len() != arch.depth() {
            return Err(Error::Shape(format!(
                "expected {} layers, got {} weight matrices and {} bias vectors",
                arch.depth(),
                weights.len(),
                biases.len()
            )));
        }
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.dim() != (dims[l + 1], dims[l]) || b.len() != dims[l + 1] {
                return Err(Error::Shape(format!("layer {l} does not match {:?}", dims)));
            }
            if !arch.bias_included() && b.iter().any(|&x| x != 0.0) {
                return Err(Error::Shape(format!(
                    "layer {l} has a nonzero bias but the architecture excludes biases"
                )));
            }
            if w.iter().chain(b.iter()).any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { layer: l });
            }
        }
        Ok(Self {
            arch,
            weights,
            biases,
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    /// Mutable biases. Only meaningful when the architecture includes biases.
    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    /// Evaluate a single input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.arch.input_dim() {
            return Err(Error::Shape(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.arch.input_dim()
            )));
        }
        let last = self.arch.depth() - 1;
        let mut cur = x.to_vec();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut next: Vec<f64> = w
                .rows()
                .into_iter()
                .zip(b)
                .map(|(row, bi)| row.iter().zip(&cur).map(|(a, c)| a * c).sum::<f64>() + bi)
                .collect();
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { layer: l });
            }
            if l < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            cur = next;
        }
        Ok(cur)
    }

    /// Evaluate every row of `x` (shape `n x d_0`), returning `n x d_L`.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_trace(x)?.into_output())
    }

    pub fn forward_trace(&self, x: ArrayView2<f64>) -> Result<ForwardTrace> {
        if x.ncols() != self.arch.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.arch.input_dim()
            )));
        }
        let depth = self.arch.depth();
        let mut hidden = Vec::with_capacity(depth - 1);
        let mut cur = affine(x, &self.weights[0], &self.biases[0], 0)?;
        for l in 1..depth {
            cur.mapv_inplace(|v| v.max(0.0));
            let next = affine(cur.view(), &self.weights[l], &self.biases[l], l)?;
            hidden.push(cur);
            cur = next;
        }
        Ok(ForwardTrace {
            hidden,
            output: cur,
        })
    }

    /// Gradient of `sum_i <out_grad_i, f(x_i)>` with respect to all parameters.
    /// The ReLU derivative at zero is taken as zero.
    pub fn backward_trace(
        &self,
        x: ArrayView2<f64>,
        trace: &ForwardTrace,
        out_grad: ArrayView2<f64>,
    ) -> Result<ParamVector> {
        let depth = self.arch.depth();
        if out_grad.dim() != trace.output.dim() {
            return Err(Error::Shape(format!(
                "output gradient has shape {:?}, outputs have {:?}",
                out_grad.dim(),
                trace.output.dim()
            )));
        }
        let mut grad = vec![0.0; self.arch.num_params()];
        let mut delta = out_grad.to_owned();
        for l in (0..depth).rev() {
            let input = if l == 0 {
                x
            } else {
                trace.hidden[l - 1].view()
            };
            let off = self.arch.layer_offset(l);
            let gw = delta.t().dot(&input);
            let nw = gw.len();
            grad[off..off + nw]
                .iter_mut()
                .zip(gw.iter())
                .for_each(|(g, v)| *g = *v);
            if self.arch.bias_included() {
                let gb = delta.sum_axis(Axis(0));
                grad[off + nw..off + nw + gb.len()]
                    .iter_mut()
                    .zip(gb.iter())
                    .for_each(|(g, v)| *g = *v);
            }
            if l > 0 {
                let mut back = delta.dot(&self.weights[l]);
                ndarray::Zip::from(&mut back)
                    .and(&trace.hidden[l - 1])
                    .for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    });
                delta = back;
            }
        }
        Ok(ParamVector(grad))
    }

    pub fn backward_batch(
        &self,
        x: ArrayView2<f64>,
        out_grad: ArrayView2<f64>,
    ) -> Result<ParamVector> {
        let trace = self.forward_trace(x)?;
        self.backward_trace(x, &trace, out_grad)
    }

    /// Gradient of `<out_grad, f(x)>` for a single input.
    pub fn backward(&self, x: &[f64], out_grad: &[f64]) -> Result<ParamVector> {
        if out_grad.len() != self.arch.output_dim() {
            return Err(Error::Shape(format!(
                "output gradient has length {}, network outputs {}",
                out_grad.len(),
                self.arch.output_dim()
            )));
        }
        let xb =
            ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::Shape(e.to_string()))?;
        let gb = ArrayView2::from_shape((1, out_grad.len()), out_grad)
            .map_err(|e| Error::Shape(e.to_string()))?;
        self.backward_batch(xb, gb)
    }

    pub fn flatten(&self) -> ParamVector {
        let mut v = Vec::with_capacity(self.arch.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend(w.iter());
            if self.arch.bias_included() {
                v.extend(b.iter());
            }
        }
        ParamVector(v)
    }

    pub fn unflatten(arch: &Architecture, v: &ParamVector) -> Result<Self> {
        let mut net = Self::zeros(arch);
        net.assign(v)?;
        Ok(net)
    }

    /// Overwrite all parameters from a flat vector in the documented layout.
    pub fn assign(&mut self, v: &ParamVector) -> Result<()> {
        if v.len() != self.arch.num_params() {
            return Err(Error::Shape(format!(
                "parameter vector has length {}, architecture needs {}",
                v.len(),
                self.arch.num_params()
            )));
        }
        let bias = self.arch.bias_included();
        let mut it = v.0.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().for_each(|x| *x = it.next().unwrap());
            if bias {
                b.iter_mut().for_each(|x| *x = it.next().unwrap());
            }
        }
        Ok(())
    }

    pub fn nonzero_params(&self) -> usize {
        self.weights
            .iter()
            .flat_map(|w| w.iter())
            .chain(self.biases.iter().flat_map(|b| b.iter()))
            .filter(|&&x| x != 0.0)
            .count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

fn affine(
    input: ArrayView2<f64>,
    w: &Array2<f64>,
    b: &Array1<f64>,
    layer: usize,
) -> Result<Array2<f64>> {
    let mut z = input.dot(&w.t());
    z += b;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { layer });
    }
    Ok(z)
}

/// On-disk model document: weights stored row-major per layer.
#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    dims: Vec<usize>,
    bias_included: bool,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl From<&Network> for ModelDoc {
    fn from(net: &Network) -> Self {
        Self {
            dims: net.arch.dims().to_vec(),
            bias_included: net.arch.bias_included(),
            weights: net
                .weights
                .iter()
                .map(|w| w.iter().copied().collect())
                .collect(),
            biases: net.biases.iter().map(|b| b.to_vec()).collect(),
        }
    }
}

impl TryFrom<ModelDoc> for Network {
    type Error = Error;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        let arch = Architecture::new(doc.dims, doc.bias_included)?;
        let dims = arch.dims().to_vec();
        if doc.weights.len() != arch.depth() {
            return Err(Error::Shape("wrong number of weight matrices".into()));
        }
        let weights = doc
            .weights
            .into_iter()
            .enumerate()
            .map(|(l, w)| {
                Array2::from_shape_vec((dims[l + 1], dims[l]), w)
                    .map_err(|e| Error::Shape(format!("layer {l}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let biases = doc.biases.into_iter().map(Array1::from).collect();
        Network::from_parts(arch, weights, biases)
    }
}
