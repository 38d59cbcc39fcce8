use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};

/// One affine layer, `x·W + b`, with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Option<Vec<f64>>,
}

/// Rectifier MLP. Hidden layers carry a bias; the final feature layer does
/// not, and has no activation.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingNet {
    layers: Vec<Layer>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    // input to each layer; for l > 0 this is post-rectifier, so its sign
    // pattern doubles as the activation mask
    inputs: Vec<Matrix>,
}

#[derive(Debug, Clone)]
pub struct LayerGrad {
    pub weights: Matrix,
    pub bias: Option<Vec<f64>>,
}

impl EmbeddingNet {
    /// `sizes = [input, hidden.., feature_dim]`, He-initialized from `rng`.
    pub fn new(sizes: &[usize], rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "layer sizes need at least input and output, all positive: {sizes:?}"
            )));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let gain = if l == last { 1.0 } else { 2.0 };
                let std = (gain / w[0] as f64).sqrt();
                Layer {
                    weights: rng.normal_matrix(w[0], w[1], std),
                    bias: (l != last).then(|| vec![0.0; w[1]]),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].weights.cols() != pair[1].weights.rows() {
                return Err(Error::dims("EmbeddingNet layers", pair[0].weights.cols(), pair[1].weights.rows()));
            }
            if pair[0].bias.as_ref().map(Vec::len).unwrap_or(pair[0].weights.cols()) != pair[0].weights.cols() {
                return Err(Error::InvalidArgument(format!("layer {l} bias length mismatch")));
            }
        }
        if layers.last().unwrap().bias.is_some() {
            return Err(Error::InvalidArgument("the feature layer must not have a bias".into()));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.layers.last().unwrap().weights.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if x.cols() != self.input_dim() {
            return Err(Error::dims("EmbeddingNet::forward", self.input_dim(), x.cols()));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = h.matmul(&layer.weights)?;
            if let Some(b) = &layer.bias {
                for i in 0..z.rows() {
                    z.row_mut(i).iter_mut().zip(b).for_each(|(v, bj)| *v += bj);
                }
            }
            if l != last {
                z.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            }
            inputs.push(std::mem::replace(&mut h, z));
        }
        Ok((h, ForwardCache { inputs }))
    }

    pub fn embed(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward(x)?.0)
    }

    /// Parameter gradients given `∂L/∂features`, in layer order.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Matrix) -> Result<Vec<LayerGrad>> {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[l];
            let weights = input.t_matmul(&g)?;
            let bias = layer.bias.as_ref().map(|_| {
                let mut b = vec![0.0; g.cols()];
                for row in g.row_iter() {
                    b.iter_mut().zip(row).for_each(|(a, v)| *a += v);
                }
                b
            });
            grads.push(LayerGrad { weights, bias });
            if l > 0 {
                let mut gin = g.matmul_t(&layer.weights)?;
                gin.as_mut_slice()
                    .iter_mut()
                    .zip(input.as_slice())
                    .for_each(|(gv, &a)| {
                        if a <= 0.0 {
                            *gv = 0.0;
                        }
                    });
                g = gin;
            }
        }
        grads.reverse();
        Ok(grads)
    }
}
