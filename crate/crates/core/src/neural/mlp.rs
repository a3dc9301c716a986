use serde::{Deserialize, Serialize};

use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
}

impl LayerShape {
    /// Weights (row-major, one row per output) followed by biases.
    pub fn n_params(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

/// Feed-forward network with tanh hidden layers and a linear output layer,
/// stored as one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layout: Vec<LayerShape>,
    params: Vec<f64>,
}

impl Mlp {
    pub fn layout_for(inputs: usize, hidden: &[usize], outputs: usize) -> Vec<LayerShape> {
        let mut widths = vec![inputs];
        widths.extend_from_slice(hidden);
        widths.push(outputs);
        widths
            .windows(2)
            .map(|w| LayerShape {
                inputs: w[0],
                outputs: w[1],
            })
            .collect()
    }

    /// Glorot-uniform weights and zero biases; the output layer is scaled by
    /// `output_gain`.
    pub fn new(
        inputs: usize,
        hidden: &[usize],
        outputs: usize,
        output_gain: f64,
        rng: &mut StreamRng,
    ) -> Self {
        let layout = Self::layout_for(inputs, hidden, outputs);
        let last = layout.len() - 1;
        let mut params = Vec::with_capacity(layout.iter().map(LayerShape::n_params).sum());
        for (l, shape) in layout.iter().enumerate() {
            let limit = (6.0 / (shape.inputs + shape.outputs) as f64).sqrt();
            let gain = if l == last { output_gain } else { 1.0 };
            params.extend(
                (0..shape.inputs * shape.outputs).map(|_| gain * rng.uniform_range(-limit, limit)),
            );
            params.extend(std::iter::repeat_n(0.0, shape.outputs));
        }
        Self { layout, params }
    }

    /// Returns `None` when the parameter count does not match the layout.
    pub fn from_parts(layout: Vec<LayerShape>, params: Vec<f64>) -> Option<Self> {
        let ok = !layout.is_empty()
            && layout.windows(2).all(|w| w[0].outputs == w[1].inputs)
            && layout.iter().map(LayerShape::n_params).sum::<usize>() == params.len();
        ok.then_some(Self { layout, params })
    }

    pub fn layout(&self) -> &[LayerShape] {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn inputs(&self) -> usize {
        self.layout[0].inputs
    }

    pub fn outputs(&self) -> usize {
        self.layout[self.layout.len() - 1].outputs
    }

    /// Activations of every layer, input first and raw output last.
    pub fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        debug_assert_eq!(x.len(), self.inputs());
        let last = self.layout.len() - 1;
        let mut acts = Vec::with_capacity(self.layout.len() + 1);
        acts.push(x.to_vec());
        let mut offset = 0;
        for (l, shape) in self.layout.iter().enumerate() {
            let (w, b) = self.params[offset..offset + shape.n_params()]
                .split_at(shape.inputs * shape.outputs);
            let input = &acts[l];
            let out: Vec<f64> = (0..shape.outputs)
                .map(|o| {
                    let row = &w[o * shape.inputs..(o + 1) * shape.inputs];
                    let z = b[o] + row.iter().zip(input).map(|(a, v)| a * v).sum::<f64>();
                    if l == last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            acts.push(out);
            offset += shape.n_params();
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).pop().expect("at least one layer")
    }

    /// Adds `∂L/∂θ` to `grad` given the trace of a forward pass and
    /// `∂L/∂output`. Returns `∂L/∂input`.
    pub fn backward(&self, trace: &[Vec<f64>], d_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(grad.len(), self.params.len());
        let last = self.layout.len() - 1;
        let mut offsets: Vec<usize> = self
            .layout
            .iter()
            .scan(0, |acc, s| {
                let o = *acc;
                *acc += s.n_params();
                Some(o)
            })
            .collect();
        offsets.reverse();
        let mut delta = d_out.to_vec();
        for (rev, (shape, offset)) in self.layout.iter().rev().zip(offsets).enumerate() {
            let l = last - rev;
            if l != last {
                // output of this layer is tanh(z): dz = dy (1 - y²)
                for (d, y) in delta.iter_mut().zip(&trace[l + 1]) {
                    *d *= 1.0 - y * y;
                }
            }
            let input = &trace[l];
            let w_len = shape.inputs * shape.outputs;
            let w = &self.params[offset..offset + w_len];
            let (gw, gb) = grad[offset..offset + shape.n_params()].split_at_mut(w_len);
            let mut d_in = vec![0.0; shape.inputs];
            for o in 0..shape.outputs {
                let d = delta[o];
                gb[o] += d;
                let row = o * shape.inputs;
                for i in 0..shape.inputs {
                    gw[row + i] += d * input[i];
                    d_in[i] += d * w[row + i];
                }
            }
            delta = d_in;
        }
        delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_param_count() {
        let net = Mlp::new(4, &[3, 2], 5, 1.0, &mut StreamRng::new(0, 0));
        assert_eq!(net.n_params(), (4 * 3 + 3) + (3 * 2 + 2) + (2 * 5 + 5));
        assert_eq!(net.outputs(), 5);
        assert!(Mlp::from_parts(net.layout().to_vec(), vec![0.0; 3]).is_none());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let net = Mlp::new(3, &[4], 2, 1.0, &mut StreamRng::new(1, 0));
        let x = [0.3, -0.7, 1.1];
        let weights = [0.5, -2.0];
        let f = |n: &Mlp| {
            n.forward(&x)
                .iter()
                .zip(&weights)
                .map(|(a, b)| a * b)
                .sum::<f64>()
        };
        let mut grad = vec![0.0; net.n_params()];
        let d_in = net.backward(&net.forward_trace(&x), &weights, &mut grad);
        let h = 1e-6;
        for (i, &g) in grad.iter().enumerate() {
            let (mut up, mut dn) = (net.clone(), net.clone());
            up.params_mut()[i] += h;
            dn.params_mut()[i] -= h;
            let fd = (f(&up) - f(&dn)) / (2.0 * h);
            assert!((fd - g).abs() < 1e-8, "param {i}: {fd} vs {g}");
        }
        for i in 0..3 {
            let mut xp = x;
            xp[i] += h;
            let mut xm = x;
            xm[i] -= h;
            let g = |x: &[f64]| {
                net.forward(x)
                    .iter()
                    .zip(&weights)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            };
            assert!(((g(&xp) - g(&xm)) / (2.0 * h) - d_in[i]).abs() < 1e-8);
        }
    }
}
