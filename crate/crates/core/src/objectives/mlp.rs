//! Small fully-connected classifier with softmax cross-entropy loss.
//!
//! Parameters are stored flat in layer order, each layer as a row-major
//! weight matrix followed by its bias vector.

use crate::data::{Dataset, Labels};
use crate::error::{Error, Result};

use super::Activation;

/// Layer sizes and flat-parameter offsets for one network shape.
#[derive(Debug, Clone)]
pub struct MlpLayout {
    /// Layer widths including input and output: `[d_in, h_1, ..., classes]`.
    widths: Vec<usize>,
    /// Offset of each layer's weight matrix in the flat parameter vector.
    weight_offsets: Vec<usize>,
    /// Offset of each layer's bias vector.
    bias_offsets: Vec<usize>,
    param_dim: usize,
}

impl MlpLayout {
    pub fn new(input_dim: usize, hidden: &[usize], classes: usize) -> Result<Self> {
        if input_dim == 0 || classes < 2 || hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidSpec(
                "mlp needs input_dim >= 1, hidden widths >= 1, classes >= 2".into(),
            ));
        }
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input_dim);
        widths.extend_from_slice(hidden);
        widths.push(classes);

        let mut weight_offsets = Vec::new();
        let mut bias_offsets = Vec::new();
        let mut offset = 0;
        for l in 0..widths.len() - 1 {
            weight_offsets.push(offset);
            offset += widths[l + 1] * widths[l];
            bias_offsets.push(offset);
            offset += widths[l + 1];
        }
        Ok(Self {
            widths,
            weight_offsets,
            bias_offsets,
            param_dim: offset,
        })
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    fn weights<'w>(&self, w: &'w [f64], layer: usize) -> &'w [f64] {
        let start = self.weight_offsets[layer];
        &w[start..start + self.widths[layer + 1] * self.widths[layer]]
    }

    fn biases<'w>(&self, w: &'w [f64], layer: usize) -> &'w [f64] {
        let start = self.bias_offsets[layer];
        &w[start..start + self.widths[layer + 1]]
    }
}

/// Reusable forward/backward buffers: one activation and one delta vector
/// per layer boundary.
pub(super) struct MlpScratch {
    activations: Vec<Vec<f64>>, // activations[l] = output of layer l (post-nonlinearity)
    deltas: Vec<Vec<f64>>,
}

impl MlpScratch {
    pub(super) fn new(layout: &MlpLayout) -> Self {
        let activations = layout.widths[1..]
            .iter()
            .map(|&wd| vec![0.0; wd])
            .collect::<Vec<_>>();
        let deltas = layout.widths[1..]
            .iter()
            .map(|&wd| vec![0.0; wd])
            .collect::<Vec<_>>();
        Self {
            activations,
            deltas,
        }
    }
}

fn apply_activation(act: Activation, z: f64) -> f64 {
    match act {
        Activation::Tanh => z.tanh(),
        Activation::Relu => z.max(0.0),
    }
}

/// Derivative expressed through the activation output `a = act(z)`.
fn activation_deriv(act: Activation, a: f64) -> f64 {
    match act {
        Activation::Tanh => 1.0 - a * a,
        Activation::Relu => {
            if a > 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Adds `∇f_i(w)` into `grad_acc`, returns the cross-entropy `f_i(w)`.
pub(super) fn accumulate(
    layout: &MlpLayout,
    activation: Activation,
    data: &Dataset,
    w: &[f64],
    i: usize,
    grad_acc: &mut [f64],
    scratch: &mut MlpScratch,
) -> f64 {
    let x = data.feature(i);
    let label = match data.labels() {
        Labels::Class(v) => v[i],
        _ => unreachable!("label kind checked by the caller"),
    };
    let layers = layout.layers();

    // Forward pass; the last layer stays linear (logits).
    for l in 0..layers {
        let (before, rest) = scratch.activations.split_at_mut(l);
        let input: &[f64] = if l == 0 { x } else { &before[l - 1] };
        let out = &mut rest[0];
        let weights = layout.weights(w, l);
        let biases = layout.biases(w, l);
        let in_dim = layout.widths[l];
        for (j, out_j) in out.iter_mut().enumerate() {
            let row = &weights[j * in_dim..(j + 1) * in_dim];
            let mut z = biases[j];
            for k in 0..in_dim {
                z += row[k] * input[k];
            }
            *out_j = if l + 1 == layers {
                z
            } else {
                apply_activation(activation, z)
            };
        }
    }

    // Softmax cross-entropy on the logits, shifted for stability.
    let logits = &scratch.activations[layers - 1];
    let max_logit = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum_exp = 0.0;
    for &z in logits.iter() {
        sum_exp += (z - max_logit).exp();
    }
    let log_sum = max_logit + sum_exp.ln();
    let value = log_sum - logits[label];

    // delta at the output: softmax(z) - onehot(label)
    {
        let logits = scratch.activations[layers - 1].clone();
        let delta_out = &mut scratch.deltas[layers - 1];
        for (j, d) in delta_out.iter_mut().enumerate() {
            *d = (logits[j] - log_sum).exp() - f64::from(u8::from(j == label));
        }
    }

    // Backward pass.
    for l in (0..layers).rev() {
        let in_dim = layout.widths[l];
        let out_dim = layout.widths[l + 1];
        let weights = layout.weights(w, l);

        // Parameter gradients for layer l.
        {
            let input: &[f64] = if l == 0 { x } else { &scratch.activations[l - 1] };
            let delta = &scratch.deltas[l];
            let w_off = layout.weight_offsets[l];
            let b_off = layout.bias_offsets[l];
            for j in 0..out_dim {
                let dj = delta[j];
                let row = &mut grad_acc[w_off + j * in_dim..w_off + (j + 1) * in_dim];
                for k in 0..in_dim {
                    row[k] += dj * input[k];
                }
                grad_acc[b_off + j] += dj;
            }
        }

        // Propagate delta to the previous layer.
        if l > 0 {
            let (lower, upper) = scratch.deltas.split_at_mut(l);
            let delta = &upper[0];
            let prev_delta = &mut lower[l - 1];
            let prev_act = &scratch.activations[l - 1];
            for k in 0..in_dim {
                let mut acc = 0.0;
                for (j, dj) in delta.iter().enumerate() {
                    acc += weights[j * in_dim + k] * dj;
                }
                prev_delta[k] = acc * activation_deriv(activation, prev_act[k]);
            }
        }
    }

    value
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_param_count() {
        // 10 -> 16 -> 8 -> 3: 160+16 + 128+8 + 24+3 = 339
        let layout = MlpLayout::new(10, &[16, 8], 3).unwrap();
        assert_eq!(layout.param_dim(), 339);
        assert_eq!(layout.layers(), 3);
    }

    #[test]
    fn rejects_degenerate_shapes() {
        assert!(MlpLayout::new(0, &[4], 3).is_err());
        assert!(MlpLayout::new(4, &[0], 3).is_err());
        assert!(MlpLayout::new(4, &[4], 1).is_err());
    }
}
