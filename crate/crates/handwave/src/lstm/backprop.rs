//! Exact backpropagation through time for the stacked LSTM.

use ndarray::{s, Array2, Axis};

use super::{nll_logits_grad, ForwardCache, LstmModel, TensorSet};
use crate::{Error, Result};

/// Gradients of the mean NLL loss with respect to every parameter, given the
/// activation cache of a matching [`LstmModel::forward_batch`] call.
///
/// The cache must come from this model's shapes; a cache built for different
/// dimensions or a different batch size is rejected.
pub fn backward(model: &LstmModel, cache: &ForwardCache, labels: &[usize]) -> Result<TensorSet> {
    let dims = model.dims();
    let (xs, gates, hs, masks, h_out_masked, logits) = cache.parts();
    if xs.len() != dims.layers
        || xs.iter().any(|steps| steps.len() != dims.tau)
        || h_out_masked.ncols() != dims.hidden
    {
        return Err(Error::Shape {
            expected: format!("cache for {} layers x {} steps", dims.layers, dims.tau),
            got: "stale or mismatched forward cache".into(),
        });
    }
    if labels.len() != cache.batch() {
        return Err(Error::Shape {
            expected: format!("{} labels", cache.batch()),
            got: format!("{}", labels.len()),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= dims.classes) {
        return Err(Error::Data(format!(
            "label {bad} out of range for {} classes",
            dims.classes
        )));
    }

    let batch = cache.batch();
    let n = dims.hidden;
    let params = model.params();
    let mut grads = TensorSet::zeros(&dims);

    // Output layer.
    let dlogits = nll_logits_grad(&logits.view(), labels);
    grads.w_out = h_out_masked.t().dot(&dlogits);
    grads.b_out = dlogits.sum_axis(Axis(0));
    let mut dh_top_final = dlogits.dot(&params.w_out.t());
    if let Some(masks) = masks {
        dh_top_final *= &masks.output;
    }

    // Recurrent gradients flowing from step t+1 into step t, per layer.
    let mut dh_rec: Vec<Array2<f64>> = vec![Array2::zeros((batch, n)); dims.layers];
    let mut dc_rec: Vec<Array2<f64>> = vec![Array2::zeros((batch, n)); dims.layers];

    for t in (0..dims.tau).rev() {
        // Gradient arriving from the layer above at this same step.
        let mut dx_above: Option<Array2<f64>> = None;
        for l in (0..dims.layers).rev() {
            let mut dh = std::mem::replace(&mut dh_rec[l], Array2::zeros((batch, n)));
            if l == dims.layers - 1 && t == dims.tau - 1 {
                dh += &dh_top_final;
            }
            if let Some(dx) = dx_above.take() {
                dh += &dx;
            }

            let gate = &gates[l][t];
            let layer = &params.layers[l];

            let d_o = &dh * &gate.tanh_c;
            let mut dc = &dh * &gate.o * &gate.tanh_c.mapv(|v| 1.0 - v * v);
            dc += &dc_rec[l];
            let d_i = &dc * &gate.g;
            let d_g = &dc * &gate.i;
            let d_f = &dc * &gate.c_prev;
            dc_rec[l] = &dc * &gate.f;

            // Pre-activation gradients, packed [i | f | g | o].
            let mut dz = Array2::zeros((batch, 4 * n));
            dz.slice_mut(s![.., 0..n]).assign(&(&d_i * &gate.i * &gate.i.mapv(|v| 1.0 - v)));
            dz.slice_mut(s![.., n..2 * n])
                .assign(&(&d_f * &gate.f * &gate.f.mapv(|v| 1.0 - v)));
            dz.slice_mut(s![.., 2 * n..3 * n]).assign(&(&d_g * &gate.g.mapv(|v| 1.0 - v * v)));
            dz.slice_mut(s![.., 3 * n..4 * n])
                .assign(&(&d_o * &gate.o * &gate.o.mapv(|v| 1.0 - v)));

            grads.layers[l].w_x += &xs[l][t].t().dot(&dz);
            let h_prev = if t == 0 {
                None
            } else {
                Some(&hs[l][t - 1])
            };
            if let Some(h_prev) = h_prev {
                grads.layers[l].w_h += &h_prev.t().dot(&dz);
            }
            grads.layers[l].b += &dz.sum_axis(Axis(0));

            dh_rec[l] = dz.dot(&layer.w_h.t());
            if l > 0 {
                let mut dx = dz.dot(&layer.w_x.t());
                if let Some(masks) = masks {
                    dx *= &masks.between[l - 1][t];
                }
                dx_above = Some(dx);
            }
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::{loss_nll, DropoutMasks, LstmModel, ModelDims};
    use ndarray::Array2;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_dims() -> ModelDims {
        ModelDims { tau: 5, hidden: 4, layers: 2, classes: 3 }
    }

    fn random_batch(dims: &ModelDims, batch: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = Array2::from_shape_fn((batch, dims.tau), |_| rng.random_range(-1.5..1.5));
        let labels = (0..batch).map(|k| k % dims.classes).collect();
        (inputs, labels)
    }

    /// Central finite differences over every parameter, the independent
    /// gradient oracle.
    fn finite_difference_grads(
        model: &LstmModel,
        inputs: &Array2<f64>,
        labels: &[usize],
        masks: Option<&DropoutMasks>,
        h: f64,
    ) -> TensorSet {
        let mut probe = model.clone();
        let mut fd = TensorSet::zeros(&model.dims());
        let n_tensors = fd.tensor_slices().len();
        for tensor_idx in 0..n_tensors {
            let len = fd.tensor_slices()[tensor_idx].len();
            for k in 0..len {
                let original = probe.params().tensor_slices()[tensor_idx][k];
                probe.params_mut().tensor_slices_mut()[tensor_idx][k] = original + h;
                let (logits, _) = probe.forward_batch(inputs.view(), masks).unwrap();
                let up = loss_nll(&logits.view(), labels).unwrap();
                probe.params_mut().tensor_slices_mut()[tensor_idx][k] = original - h;
                let (logits, _) = probe.forward_batch(inputs.view(), masks).unwrap();
                let down = loss_nll(&logits.view(), labels).unwrap();
                probe.params_mut().tensor_slices_mut()[tensor_idx][k] = original;
                fd.tensor_slices_mut()[tensor_idx][k] = (up - down) / (2.0 * h);
            }
        }
        fd
    }

    fn assert_grads_close(analytic: &TensorSet, fd: &TensorSet, tol: f64) {
        for (a, b) in analytic.tensor_slices().iter().zip(fd.tensor_slices().iter()) {
            let diff: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
            let norm_a: f64 = a.iter().map(|x| x * x).sum::<f64>();
            let norm_b: f64 = b.iter().map(|x| x * x).sum::<f64>();
            let rel = diff.sqrt() / norm_a.sqrt().max(norm_b.sqrt()).max(1e-12);
            assert!(rel < tol, "tensor relative error {rel}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let dims = tiny_dims();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let model = LstmModel::init(dims, 0.4, true, &mut rng).unwrap();
        let (inputs, labels) = random_batch(&dims, 6, 23);
        let (_, cache) = model.forward_batch(inputs.view(), None).unwrap();
        let analytic = backward(&model, &cache, &labels).unwrap();
        let fd = finite_difference_grads(&model, &inputs, &labels, None, 1e-5);
        assert_grads_close(&analytic, &fd, 1e-4);
    }

    #[test]
    fn gradients_match_finite_differences_with_fixed_masks() {
        let dims = tiny_dims();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let model = LstmModel::init(dims, 0.4, true, &mut rng).unwrap();
        let (inputs, labels) = random_batch(&dims, 4, 31);
        let masks = DropoutMasks::sample(&dims, 4, 0.5, &mut rng).unwrap();
        let (_, cache) = model.forward_batch(inputs.view(), Some(&masks)).unwrap();
        let analytic = backward(&model, &cache, &labels).unwrap();
        let fd = finite_difference_grads(&model, &inputs, &labels, Some(&masks), 1e-5);
        assert_grads_close(&analytic, &fd, 1e-4);
    }

    #[test]
    fn zero_model_balanced_batch_has_zero_output_gradients() {
        // Uniform softmax gives dlogits = p - onehot; a balanced batch sums
        // those to zero, and the zero hidden state kills the weight path.
        let dims = tiny_dims();
        let model = LstmModel::zeros(dims).unwrap();
        let (inputs, _) = random_batch(&dims, 3, 5);
        let labels = vec![0, 1, 2];
        let (_, cache) = model.forward_batch(inputs.view(), None).unwrap();
        let grads = backward(&model, &cache, &labels).unwrap();
        assert!(grads.b_out.iter().all(|v| v.abs() < 1e-12));
        assert!(grads.w_out.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn zeroed_layer_inputs_produce_zero_input_weight_gradients() {
        let dims = tiny_dims();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let model = LstmModel::init(dims, 0.4, true, &mut rng).unwrap();
        let (inputs, labels) = random_batch(&dims, 4, 43);
        // Crafted mask: the transition into layer 1 passes nothing.
        let zero_between = vec![(0..dims.tau)
            .map(|_| Array2::zeros((4, dims.hidden)))
            .collect::<Vec<_>>()];
        let masks = DropoutMasks {
            between: zero_between,
            output: Array2::ones((4, dims.hidden)),
        };
        let (_, cache) = model.forward_batch(inputs.view(), Some(&masks)).unwrap();
        let grads = backward(&model, &cache, &labels).unwrap();
        assert!(
            grads.layers[1].w_x.iter().all(|v| v.abs() < 1e-15),
            "layer-1 input weights see only zeroed inputs"
        );
        // The recurrent path of layer 1 still carries gradient.
        assert!(grads.layers[1].w_h.iter().any(|v| v.abs() > 0.0));
    }

    #[test]
    fn mismatched_cache_is_rejected() {
        let dims = tiny_dims();
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let model = LstmModel::init(dims, 0.4, true, &mut rng).unwrap();
        let other = LstmModel::init(
            ModelDims { tau: 7, ..dims },
            0.4,
            true,
            &mut rng,
        )
        .unwrap();
        let (inputs, labels) = random_batch(&dims, 3, 7);
        let (_, cache) = model.forward_batch(inputs.view(), None).unwrap();
        assert!(backward(&other, &cache, &labels).is_err());
        assert!(backward(&model, &cache, &labels[..2]).is_err());
    }
}
