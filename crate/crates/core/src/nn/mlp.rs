use rand::Rng;

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    w: usize,
    b: usize,
}

/// Fully connected network, rectifier on hidden layers, identity logits.
///
/// All weights and biases live in one flat buffer; layer `l` stores an
/// `outputs x inputs` row-major weight block followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    layers: Vec<Layer>,
    params: Vec<f64>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Input to each layer; `inputs[0]` is the batch itself.
    inputs: Vec<Matrix>,
    pub logits: Matrix,
}

impl Mlp {
    /// He-uniform weights, zero biases. `sizes` runs from the input width
    /// to the number of classes.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!("bad layer sizes {sizes:?}")));
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (inputs, outputs) = (w[0], w[1]);
            layers.push(Layer { inputs, outputs, w: offset, b: offset + inputs * outputs });
            offset += inputs * outputs + outputs;
        }
        let mut params = vec![0.0; offset];
        for l in &layers {
            let bound = (6.0 / l.inputs as f64).sqrt();
            for v in &mut params[l.w..l.b] {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(Self { sizes: sizes.to_vec(), layers, params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_classes(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward_cached(x)?.logits)
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<ForwardPass> {
        if x.cols() != self.sizes[0] {
            return Err(Error::DimensionMismatch { expected: self.sizes[0], got: x.cols() });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for (idx, l) in self.layers.iter().enumerate() {
            let w = &self.params[l.w..l.b];
            let b = &self.params[l.b..l.b + l.outputs];
            let mut out = Matrix::zeros(cur.rows(), l.outputs);
            for r in 0..cur.rows() {
                let xin = cur.row(r);
                let o = out.row_mut(r);
                for j in 0..l.outputs {
                    let wr = &w[j * l.inputs..(j + 1) * l.inputs];
                    o[j] = b[j] + wr.iter().zip(xin).map(|(a, c)| a * c).sum::<f64>();
                }
            }
            if idx + 1 < self.layers.len() {
                out = out.map(|v| v.max(0.0));
            }
            inputs.push(std::mem::replace(&mut cur, out));
        }
        Ok(ForwardPass { inputs, logits: cur })
    }

    /// Parameter gradient of `sum(seed * logits)`, i.e. backpropagation with
    /// `seed` standing in for the loss gradient at the logits.
    pub fn backward(&self, pass: &ForwardPass, seed: &Matrix) -> Result<Vec<f64>> {
        if seed.shape() != pass.logits.shape() {
            return Err(Error::DimensionMismatch {
                expected: pass.logits.rows() * pass.logits.cols(),
                got: seed.rows() * seed.cols(),
            });
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = seed.clone();
        for (idx, l) in self.layers.iter().enumerate().rev() {
            let a = &pass.inputs[idx];
            let (gw, rest) = grads[l.w..].split_at_mut(l.inputs * l.outputs);
            let gb = &mut rest[..l.outputs];
            for r in 0..a.rows() {
                let d = delta.row(r);
                let ar = a.row(r);
                for j in 0..l.outputs {
                    gb[j] += d[j];
                    if d[j] != 0.0 {
                        let row = &mut gw[j * l.inputs..(j + 1) * l.inputs];
                        for (g, &x) in row.iter_mut().zip(ar) {
                            *g += d[j] * x;
                        }
                    }
                }
            }
            if idx == 0 {
                break;
            }
            let w = &self.params[l.w..l.b];
            let mut prev = Matrix::zeros(a.rows(), l.inputs);
            for r in 0..a.rows() {
                let d = delta.row(r);
                let ar = a.row(r);
                let p = prev.row_mut(r);
                for j in 0..l.outputs {
                    let wr = &w[j * l.inputs..(j + 1) * l.inputs];
                    for i in 0..l.inputs {
                        p[i] += d[j] * wr[i];
                    }
                }
                // rectifier: the input to this layer was positive iff its
                // pre-activation was
                for i in 0..l.inputs {
                    if ar[i] <= 0.0 {
                        p[i] = 0.0;
                    }
                }
            }
            delta = prev;
        }
        Ok(grads)
    }
}
