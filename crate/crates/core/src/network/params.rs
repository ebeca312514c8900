use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{NetworkError, NetworkSpec};
use crate::tensor::Tensor;

/// One affine layer: `weight` is `[out, in]`, `bias` is `[out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LayerParams {
    pub fn fan_in(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn fan_out(&self) -> usize {
        self.weight.shape()[0]
    }
}

/// All layers of a network. Separable networks store their subnetworks back
/// to back in axis order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub layers: Vec<LayerParams>,
}

impl NetworkParams {
    /// Layers of subnetwork `index` (the whole chain for an MLP).
    pub fn subnet<'a>(&'a self, spec: &NetworkSpec, index: usize) -> &'a [LayerParams] {
        let per = spec.layers_per_subnet();
        &self.layers[index * per..(index + 1) * per]
    }

    /// Flattened tensors in `[w0, b0, w1, b1, ..]` order.
    pub fn tensors(&self) -> Vec<Tensor> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.clone(), l.bias.clone()])
            .collect()
    }

    pub fn from_tensors(tensors: Vec<Tensor>) -> Self {
        let mut it = tensors.into_iter();
        let mut layers = Vec::new();
        while let (Some(weight), Some(bias)) = (it.next(), it.next()) {
            layers.push(LayerParams { weight, bias });
        }
        Self { layers }
    }

    /// Checks tensor shapes against `spec`.
    pub fn check(&self, spec: &NetworkSpec) -> Result<(), NetworkError> {
        spec.validate()?;
        let widths = spec.subnet_widths();
        let expected = (widths.len() - 1) * spec.subnet_count();
        if self.layers.len() != expected {
            return Err(NetworkError::ParamShape(format!(
                "{} layers, spec implies {expected}",
                self.layers.len()
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            let k = i % (widths.len() - 1);
            let (fin, fout) = (widths[k], widths[k + 1]);
            if l.weight.shape() != [fout, fin] || l.bias.shape() != [fout] {
                return Err(NetworkError::ParamShape(format!(
                    "layer {i}: weight {:?} bias {:?}, expected [{fout}, {fin}] and [{fout}]",
                    l.weight.shape(),
                    l.bias.shape()
                )));
            }
            l.weight.check_finite()?;
            l.bias.check_finite()?;
        }
        Ok(())
    }
}

/// Glorot-uniform weights and zero biases, deterministic per seed.
pub fn init_params(spec: &NetworkSpec, seed: u64) -> Result<NetworkParams, NetworkError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let widths = spec.subnet_widths();
    let mut layers = Vec::new();
    for _ in 0..spec.subnet_count() {
        for pair in widths.windows(2) {
            let (fin, fout) = (pair[0], pair[1]);
            let limit = (6.0 / (fin + fout) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit)
                .map_err(|e| NetworkError::InvalidSpec(e.to_string()))?;
            let data = (0..fin * fout).map(|_| dist.sample(&mut rng)).collect();
            layers.push(LayerParams {
                weight: Tensor::new(vec![fout, fin], data)?,
                bias: Tensor::zeros(&[fout]),
            });
        }
    }
    Ok(NetworkParams { layers })
}
