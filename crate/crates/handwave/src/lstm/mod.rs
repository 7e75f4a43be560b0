//! From-scratch stacked LSTM sequence classifier.
//!
//! The model unrolls over `tau` time steps, consuming one scalar feature per
//! step in the first layer. Each layer is a standard LSTM cell with a forget
//! gate and no peepholes; gate pre-activations are packed `[input | forget |
//! candidate | output]` along the last axis so one GEMM per step per layer
//! covers all four gates. The final step's top hidden state feeds a dense
//! layer that produces one logit per gesture class.
//!
//! Dropout is applied to non-recurrent connections only: between stacked
//! layers and on the final hidden state before the output layer, and only
//! when a mask is supplied (training). Inference is a pure function of the
//! model and its input.
//!
//! Training minimizes the mean softmax negative log-likelihood with exact
//! backpropagation through time, global-norm gradient clipping and
//! bias-corrected ADAM.

mod backprop;
mod io;
mod optim;
mod train;

pub use backprop::backward;
pub use io::{load_model, model_from_bytes, model_to_bytes, save_model};
pub use optim::{adam_step, clip_gradients, AdamParams, AdamState};
pub use train::{
    evaluate_accuracy, grid_search_cv, stratified_folds, train, CvReport, CvScore, TrainConfig,
    TrainResult, TrainingSet,
};

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::pipeline::FeatureVector;
use crate::types::GESTURE_CLASSES;
use crate::{Error, Result};

/// Model dimensions: `tau` unrolled steps, `hidden` units per layer,
/// `layers` stacked cells, `classes` output logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub tau: usize,
    pub hidden: usize,
    pub layers: usize,
    pub classes: usize,
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        if self.tau == 0 || self.hidden == 0 || self.layers == 0 || self.classes == 0 {
            return Err(Error::InvalidParam(format!("degenerate model dims {self:?}")));
        }
        Ok(())
    }

    /// Input width of a given layer: scalar for the first, `hidden` above.
    fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            1
        } else {
            self.hidden
        }
    }

    pub fn param_count(&self) -> usize {
        let mut count = 0;
        for l in 0..self.layers {
            let input = self.layer_input(l);
            count += input * 4 * self.hidden + self.hidden * 4 * self.hidden + 4 * self.hidden;
        }
        count + self.hidden * self.classes + self.classes
    }
}

/// One LSTM layer's parameters. Gate order along the `4N` axis:
/// input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub w_x: Array2<f64>,
    pub w_h: Array2<f64>,
    pub b: Array1<f64>,
}

/// Every trainable tensor of the model; also the shape of its gradients and
/// of the optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSet {
    pub layers: Vec<LayerParams>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
}

impl TensorSet {
    pub fn zeros(dims: &ModelDims) -> Self {
        let layers = (0..dims.layers)
            .map(|l| LayerParams {
                w_x: Array2::zeros((dims.layer_input(l), 4 * dims.hidden)),
                w_h: Array2::zeros((dims.hidden, 4 * dims.hidden)),
                b: Array1::zeros(4 * dims.hidden),
            })
            .collect();
        Self {
            layers,
            w_out: Array2::zeros((dims.hidden, dims.classes)),
            b_out: Array1::zeros(dims.classes),
        }
    }

    /// Named tensors in serialization order.
    pub(crate) fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((
                format!("layer{l}.w_x"),
                layer.w_x.shape().to_vec(),
                layer.w_x.as_slice().unwrap(),
            ));
            out.push((
                format!("layer{l}.w_h"),
                layer.w_h.shape().to_vec(),
                layer.w_h.as_slice().unwrap(),
            ));
            out.push((format!("layer{l}.b"), vec![layer.b.len()], layer.b.as_slice().unwrap()));
        }
        out.push(("out.w".into(), self.w_out.shape().to_vec(), self.w_out.as_slice().unwrap()));
        out.push(("out.b".into(), vec![self.b_out.len()], self.b_out.as_slice().unwrap()));
        out
    }

    /// Flat views of every tensor in serialization order, for optimizers
    /// and gradient checks.
    pub fn tensor_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 3 + 2);
        for layer in &self.layers {
            out.push(layer.w_x.as_slice().unwrap());
            out.push(layer.w_h.as_slice().unwrap());
            out.push(layer.b.as_slice().unwrap());
        }
        out.push(self.w_out.as_slice().unwrap());
        out.push(self.b_out.as_slice().unwrap());
        out
    }

    pub fn tensor_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 3 + 2);
        for layer in &mut self.layers {
            out.push(layer.w_x.as_slice_mut().unwrap());
            out.push(layer.w_h.as_slice_mut().unwrap());
            out.push(layer.b.as_slice_mut().unwrap());
        }
        out.push(self.w_out.as_slice_mut().unwrap());
        out.push(self.b_out.as_slice_mut().unwrap());
        out
    }

    /// Global L2 norm across every parameter.
    pub fn global_norm(&self) -> f64 {
        self.tensor_slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for slice in self.tensor_slices_mut() {
            for v in slice {
                *v *= factor;
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.tensor_slices().iter().map(|s| s.len()).sum()
    }
}

/// Per-class scores before the softmax.
pub type Logits = [f64; GESTURE_CLASSES];

/// The stacked LSTM + dense classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    dims: ModelDims,
    params: TensorSet,
}

impl LstmModel {
    /// All-zero parameters (useful as a reference point: the forward pass of
    /// a zero model produces zero logits).
    pub fn zeros(dims: ModelDims) -> Result<Self> {
        dims.validate()?;
        Ok(Self { params: TensorSet::zeros(&dims), dims })
    }

    /// Uniform random initialization in `[-init_range, init_range]`. When
    /// `forget_bias_one` is set, the forget-gate biases get +1 on top of the
    /// uniform draw to keep early gradients flowing.
    pub fn init<R: Rng + ?Sized>(
        dims: ModelDims,
        init_range: f64,
        forget_bias_one: bool,
        rng: &mut R,
    ) -> Result<Self> {
        dims.validate()?;
        if !(init_range > 0.0) {
            return Err(Error::InvalidParam(format!(
                "init_range must be positive, got {init_range}"
            )));
        }
        let mut params = TensorSet::zeros(&dims);
        for slice in params.tensor_slices_mut() {
            for v in slice {
                *v = rng.random_range(-init_range..=init_range);
            }
        }
        if forget_bias_one {
            let n = dims.hidden;
            for layer in &mut params.layers {
                for v in layer.b.slice_mut(s![n..2 * n]) {
                    *v += 1.0;
                }
            }
        }
        Ok(Self { dims, params })
    }

    pub fn from_parts(dims: ModelDims, params: TensorSet) -> Result<Self> {
        dims.validate()?;
        let expect = TensorSet::zeros(&dims);
        if params.layers.len() != expect.layers.len() {
            return Err(Error::Shape {
                expected: format!("{} layers", expect.layers.len()),
                got: format!("{}", params.layers.len()),
            });
        }
        for (l, (got, want)) in params.layers.iter().zip(&expect.layers).enumerate() {
            for (name, g, w) in [
                ("w_x", got.w_x.shape(), want.w_x.shape()),
                ("w_h", got.w_h.shape(), want.w_h.shape()),
            ] {
                if g != w {
                    return Err(Error::Shape {
                        expected: format!("layer{l}.{name} {w:?}"),
                        got: format!("{g:?}"),
                    });
                }
            }
            if got.b.len() != want.b.len() {
                return Err(Error::Shape {
                    expected: format!("layer{l}.b len {}", want.b.len()),
                    got: format!("{}", got.b.len()),
                });
            }
        }
        if params.w_out.shape() != expect.w_out.shape() || params.b_out.len() != expect.b_out.len()
        {
            return Err(Error::Shape {
                expected: format!("output layer {:?}", expect.w_out.shape()),
                got: format!("{:?}", params.w_out.shape()),
            });
        }
        Ok(Self { dims, params })
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn params(&self) -> &TensorSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut TensorSet {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.dims.param_count()
    }

    /// Inference on one preprocessed window. Pure: no dropout, no cache.
    pub fn forward(&self, input: &FeatureVector) -> Result<Logits> {
        if input.len() != self.dims.tau {
            return Err(Error::Shape {
                expected: format!("{} features", self.dims.tau),
                got: format!("{}", input.len()),
            });
        }
        let row = Array2::from_shape_vec((1, self.dims.tau), input.values().to_vec())
            .expect("row shape");
        let logits = self.infer_batch(row.view())?;
        Ok([logits[[0, 0]], logits[[0, 1]], logits[[0, 2]]])
    }

    /// Predicted class index for one window (argmax of the logits, ties to
    /// the lower class index).
    pub fn predict_class(&self, input: &FeatureVector) -> Result<usize> {
        let logits = self.forward(input)?;
        let mut best = 0;
        for k in 1..logits.len() {
            if logits[k] > logits[best] {
                best = k;
            }
        }
        Ok(best)
    }

    /// Batched inference without activation caching.
    pub fn infer_batch(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_inputs(&inputs)?;
        let batch = inputs.nrows();
        let n = self.dims.hidden;
        let mut h: Vec<Array2<f64>> = vec![Array2::zeros((batch, n)); self.dims.layers];
        let mut c: Vec<Array2<f64>> = vec![Array2::zeros((batch, n)); self.dims.layers];
        for t in 0..self.dims.tau {
            let mut x = inputs.slice(s![.., t..t + 1]).to_owned();
            for (l, layer) in self.params.layers.iter().enumerate() {
                let (i, f, g, o) = gate_activations(&x, &h[l], layer, n);
                c[l] = &f * &c[l] + &i * &g;
                h[l] = &o * &c[l].mapv(f64::tanh);
                x = h[l].clone();
            }
        }
        Ok(h[self.dims.layers - 1].dot(&self.params.w_out) + &self.params.b_out)
    }

    /// Training-mode forward pass over a minibatch, caching the activations
    /// required by [`backward`]. Dropout is applied only when `masks` is
    /// supplied.
    pub fn forward_batch(
        &self,
        inputs: ArrayView2<'_, f64>,
        masks: Option<&DropoutMasks>,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_inputs(&inputs)?;
        if let Some(masks) = masks {
            masks.check(&self.dims, inputs.nrows())?;
        }
        let batch = inputs.nrows();
        let n = self.dims.hidden;
        let layers = self.dims.layers;
        let tau = self.dims.tau;

        let mut h_prev: Vec<Array2<f64>> = vec![Array2::zeros((batch, n)); layers];
        let mut c_prev: Vec<Array2<f64>> = vec![Array2::zeros((batch, n)); layers];
        let mut cache = ForwardCache {
            batch,
            x: vec![Vec::with_capacity(tau); layers],
            gates: (0..layers).map(|_| Vec::with_capacity(tau)).collect(),
            h: vec![Vec::with_capacity(tau); layers],
            masks: masks.cloned(),
            h_out_masked: Array2::zeros((batch, n)),
            logits: Array2::zeros((batch, self.dims.classes)),
        };

        for t in 0..tau {
            let mut x = inputs.slice(s![.., t..t + 1]).to_owned();
            for (l, layer) in self.params.layers.iter().enumerate() {
                let (i, f, g, o) = gate_activations(&x, &h_prev[l], layer, n);
                let c = &f * &c_prev[l] + &i * &g;
                let tanh_c = c.mapv(f64::tanh);
                let h = &o * &tanh_c;
                cache.x[l].push(x);
                cache.gates[l].push(GateCache { i, f, g, o, c_prev: c_prev[l].clone(), tanh_c });
                cache.h[l].push(h.clone());
                c_prev[l] = c;
                h_prev[l] = h.clone();
                x = if l + 1 < layers {
                    match masks {
                        Some(m) => &h * &m.between[l][t],
                        None => h,
                    }
                } else {
                    h
                };
            }
        }

        let top = &cache.h[layers - 1][tau - 1];
        cache.h_out_masked = match masks {
            Some(m) => top * &m.output,
            None => top.clone(),
        };
        let logits = cache.h_out_masked.dot(&self.params.w_out) + &self.params.b_out;
        cache.logits = logits.clone();
        Ok((logits, cache))
    }

    fn check_inputs(&self, inputs: &ArrayView2<'_, f64>) -> Result<()> {
        if inputs.ncols() != self.dims.tau {
            return Err(Error::Shape {
                expected: format!("{} time steps", self.dims.tau),
                got: format!("{}", inputs.ncols()),
            });
        }
        if inputs.nrows() == 0 {
            return Err(Error::Data("empty input batch".into()));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One cell step's gate activations for a whole batch.
fn gate_activations(
    x: &Array2<f64>,
    h_prev: &Array2<f64>,
    layer: &LayerParams,
    n: usize,
) -> (Array2<f64>, Array2<f64>, Array2<f64>, Array2<f64>) {
    let mut z = x.dot(&layer.w_x);
    z += &h_prev.dot(&layer.w_h);
    z += &layer.b;
    let i = z.slice(s![.., 0..n]).mapv(sigmoid);
    let f = z.slice(s![.., n..2 * n]).mapv(sigmoid);
    let g = z.slice(s![.., 2 * n..3 * n]).mapv(f64::tanh);
    let o = z.slice(s![.., 3 * n..4 * n]).mapv(sigmoid);
    (i, f, g, o)
}

/// Inverted-dropout masks for one minibatch: entries are `0` or `1/keep`, so
/// no rescaling is needed at inference time.
#[derive(Debug, Clone)]
pub struct DropoutMasks {
    /// `between[l][t]` masks the output of layer `l` feeding layer `l + 1`.
    pub between: Vec<Vec<Array2<f64>>>,
    /// Mask on the final hidden state before the output layer.
    pub output: Array2<f64>,
}

impl DropoutMasks {
    /// Samples masks for a batch with drop probability `drop_p`.
    pub fn sample<R: Rng + ?Sized>(
        dims: &ModelDims,
        batch: usize,
        drop_p: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&drop_p) {
            return Err(Error::InvalidParam(format!(
                "dropout probability must lie in [0, 1), got {drop_p}"
            )));
        }
        let keep = 1.0 - drop_p;
        let mut draw = |shape: (usize, usize)| -> Array2<f64> {
            let mut mask = Array2::zeros(shape);
            for v in mask.iter_mut() {
                *v = if rng.random_range(0.0..1.0) < keep { 1.0 / keep } else { 0.0 };
            }
            mask
        };
        let between = (0..dims.layers.saturating_sub(1))
            .map(|_| (0..dims.tau).map(|_| draw((batch, dims.hidden))).collect())
            .collect();
        let output = draw((batch, dims.hidden));
        Ok(Self { between, output })
    }

    fn check(&self, dims: &ModelDims, batch: usize) -> Result<()> {
        let shape_ok = |a: &Array2<f64>| a.nrows() == batch && a.ncols() == dims.hidden;
        if self.between.len() != dims.layers - 1
            || self
                .between
                .iter()
                .any(|per_step| per_step.len() != dims.tau || !per_step.iter().all(&shape_ok))
            || !shape_ok(&self.output)
        {
            return Err(Error::Shape {
                expected: format!(
                    "masks for {} transitions x {} steps of {}x{}",
                    dims.layers - 1,
                    dims.tau,
                    batch,
                    dims.hidden
                ),
                got: "mismatched dropout masks".into(),
            });
        }
        Ok(())
    }
}

/// Cached activations from a training-mode forward pass.
pub struct ForwardCache {
    batch: usize,
    /// Layer inputs after dropout, `x[layer][step]`.
    x: Vec<Vec<Array2<f64>>>,
    gates: Vec<Vec<GateCache>>,
    h: Vec<Vec<Array2<f64>>>,
    masks: Option<DropoutMasks>,
    h_out_masked: Array2<f64>,
    logits: Array2<f64>,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn logits(&self) -> &Array2<f64> {
        &self.logits
    }

    pub(crate) fn parts(
        &self,
    ) -> (
        &[Vec<Array2<f64>>],
        &[Vec<GateCache>],
        &[Vec<Array2<f64>>],
        Option<&DropoutMasks>,
        &Array2<f64>,
        &Array2<f64>,
    ) {
        (&self.x, &self.gates, &self.h, self.masks.as_ref(), &self.h_out_masked, &self.logits)
    }
}

pub(crate) struct GateCache {
    pub i: Array2<f64>,
    pub f: Array2<f64>,
    pub g: Array2<f64>,
    pub o: Array2<f64>,
    pub c_prev: Array2<f64>,
    pub tanh_c: Array2<f64>,
}

/// Row-wise log-softmax in log-sum-exp-stable form.
pub fn log_softmax_rows(logits: &ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Mean negative log-likelihood of the true labels under the softmax of the
/// logits.
pub fn loss_nll(logits: &ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    if logits.nrows() != labels.len() {
        return Err(Error::Shape {
            expected: format!("{} label(s)", logits.nrows()),
            got: format!("{}", labels.len()),
        });
    }
    if labels.is_empty() {
        return Err(Error::Data("empty batch".into()));
    }
    let classes = logits.ncols();
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Data(format!("label {bad} out of range for {classes} classes")));
    }
    let log_probs = log_softmax_rows(logits);
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(row, &y)| -log_probs[[row, y]])
        .sum();
    Ok(total / labels.len() as f64)
}

/// Gradient of [`loss_nll`] with respect to the logits:
/// `(softmax - onehot) / batch`.
pub(crate) fn nll_logits_grad(logits: &ArrayView2<'_, f64>, labels: &[usize]) -> Array2<f64> {
    let mut grad = log_softmax_rows(logits).mapv(f64::exp);
    let scale = 1.0 / labels.len() as f64;
    for (row, &y) in labels.iter().enumerate() {
        grad[[row, y]] -= 1.0;
    }
    grad.mapv_inplace(|v| v * scale);
    grad
}
