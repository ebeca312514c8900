//! Plain (untaped) evaluation: batched MLP passes with optional intermediate
//! capture, factorized separable evaluation, and scalar jets.

use super::{Activation, LayerParams, NetworkError, NetworkKind, NetworkParams, NetworkSpec};
use crate::autodiff::Jet2;
use crate::tensor::{matmul, Tensor};

/// Pre-activations `z` and outputs `x` of every layer of one chain.
/// `outputs.last()` is the network output (affine, no activation).
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Tensor,
    pub pre: Vec<Tensor>,
    pub outputs: Vec<Tensor>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Tensor {
        self.outputs.last().expect("at least one layer")
    }
}

/// `x W^T + b` for a batch `x` of shape `[n, in]`.
pub fn affine(x: &Tensor, layer: &LayerParams) -> Result<Tensor, NetworkError> {
    let mut z = matmul(x, false, &layer.weight, true)?;
    let b = layer.bias.data();
    let m = b.len();
    for row in z.data_mut().chunks_mut(m) {
        for (v, bb) in row.iter_mut().zip(b) {
            *v += bb;
        }
    }
    Ok(z)
}

/// Runs one chain on an already-normalized batch, capturing every layer.
pub fn chain_trace(
    layers: &[LayerParams],
    activation: Activation,
    input: &Tensor,
) -> Result<ForwardTrace, NetworkError> {
    let mut pre = Vec::with_capacity(layers.len());
    let mut outputs = Vec::with_capacity(layers.len());
    let mut x = input.clone();
    for (i, layer) in layers.iter().enumerate() {
        if x.cols() != layer.fan_in() {
            return Err(NetworkError::Dimension {
                expected: layer.fan_in(),
                actual: x.cols(),
            });
        }
        let z = affine(&x, layer)?;
        x = if i + 1 == layers.len() {
            z.clone()
        } else {
            z.map(|v| activation.apply(v))
        };
        pre.push(z);
        outputs.push(x.clone());
    }
    Ok(ForwardTrace {
        input: input.clone(),
        pre,
        outputs,
    })
}

/// Applies the spec's input normalization to a `[n, d_in]` batch.
pub fn normalize_inputs(spec: &NetworkSpec, batch: &Tensor) -> Result<Tensor, NetworkError> {
    batch.expect_rank("normalize_inputs", 2)?;
    if batch.cols() != spec.input_dim() {
        return Err(NetworkError::Dimension {
            expected: spec.input_dim(),
            actual: batch.cols(),
        });
    }
    let map = spec.input_map();
    let d = batch.cols();
    let mut out = batch.clone();
    for row in out.data_mut().chunks_mut(d) {
        for (c, v) in row.iter_mut().enumerate() {
            *v = map.apply(c, *v);
        }
    }
    Ok(out)
}

fn check_mlp(spec: &NetworkSpec, params: &NetworkParams) -> Result<(), NetworkError> {
    if spec.kind != NetworkKind::Mlp {
        return Err(NetworkError::InvalidSpec("expected an MLP spec".into()));
    }
    params.check(spec)
}

/// MLP forward pass on raw coordinates `[n, d_in] -> [n, d_out]`.
pub fn mlp_forward(
    spec: &NetworkSpec,
    params: &NetworkParams,
    batch: &Tensor,
) -> Result<Tensor, NetworkError> {
    Ok(mlp_trace(spec, params, batch)?.outputs.pop().expect("non-empty"))
}

/// MLP forward pass exposing every `z^(l)` and `x^(l)`. The trace input is
/// the normalized batch.
pub fn mlp_trace(
    spec: &NetworkSpec,
    params: &NetworkParams,
    batch: &Tensor,
) -> Result<ForwardTrace, NetworkError> {
    check_mlp(spec, params)?;
    let x = normalize_inputs(spec, batch)?;
    chain_trace(&params.layers, spec.activation, &x)
}

fn separable_shape(spec: &NetworkSpec) -> Result<super::SeparableShape, NetworkError> {
    match (spec.kind, spec.separable) {
        (NetworkKind::Separable, Some(s)) => Ok(s),
        _ => Err(NetworkError::InvalidSpec("expected a separable spec".into())),
    }
}

/// Feature matrix `[n_a, rank * outputs]` of the subnetwork for `axis`.
pub fn subnet_features(
    spec: &NetworkSpec,
    params: &NetworkParams,
    axis: usize,
    points: &[f64],
) -> Result<Tensor, NetworkError> {
    let map = spec.input_map();
    let x = Tensor::column(points.iter().map(|&p| map.apply(axis, p)).collect())?;
    Ok(chain_trace(params.subnet(spec, axis), spec.activation, &x)?
        .outputs
        .pop()
        .expect("non-empty"))
}

/// Combines per-axis feature matrices into the output grid
/// `[n_1, .., n_d, outputs]`: `u_o = sum_k prod_a F_a[i_a, o*rank + k]`.
pub fn combine_features(
    shape: super::SeparableShape,
    features: &[Tensor],
) -> Result<Tensor, NetworkError> {
    if features.len() != shape.axes {
        return Err(NetworkError::AxisCount {
            expected: shape.axes,
            actual: features.len(),
        });
    }
    let r = shape.rank;
    let sizes: Vec<usize> = features.iter().map(Tensor::rows).collect();
    let total: usize = sizes.iter().product();
    let mut out = vec![0.0; total * shape.outputs];
    for o in 0..shape.outputs {
        // Progressive Khatri-Rao product over axes, then a rank sum.
        let mut partial: Vec<f64> = features[0].cols_slice(o * r, r).into_data();
        let mut rows = sizes[0];
        for f in &features[1..] {
            let block = f.cols_slice(o * r, r);
            let n2 = block.rows();
            let mut next = Vec::with_capacity(rows * n2 * r);
            for i in 0..rows {
                let pa = &partial[i * r..(i + 1) * r];
                for j in 0..n2 {
                    next.extend(pa.iter().zip(block.row(j)).map(|(a, b)| a * b));
                }
            }
            partial = next;
            rows *= n2;
        }
        for (idx, chunk) in partial.chunks(r).enumerate() {
            out[idx * shape.outputs + o] = chunk.iter().sum();
        }
    }
    let mut dims = sizes;
    dims.push(shape.outputs);
    Ok(Tensor::new(dims, out)?)
}

/// Separable forward pass over the Cartesian grid of `axis_points`. Each
/// subnetwork is evaluated once per point of its own axis.
pub fn spinn_forward(
    spec: &NetworkSpec,
    params: &NetworkParams,
    axis_points: &[Vec<f64>],
) -> Result<Tensor, NetworkError> {
    let shape = separable_shape(spec)?;
    params.check(spec)?;
    if axis_points.len() != shape.axes {
        return Err(NetworkError::AxisCount {
            expected: shape.axes,
            actual: axis_points.len(),
        });
    }
    let features = axis_points
        .iter()
        .enumerate()
        .map(|(a, pts)| subnet_features(spec, params, a, pts))
        .collect::<Result<Vec<_>, _>>()?;
    combine_features(shape, &features)
}

/// Evaluates either architecture at scattered points `[n, d_in] -> [n, d_out]`.
/// Separable networks are evaluated point by point (no grid factorization).
pub fn evaluate_points(
    spec: &NetworkSpec,
    params: &NetworkParams,
    points: &Tensor,
) -> Result<Tensor, NetworkError> {
    match spec.kind {
        NetworkKind::Mlp => mlp_forward(spec, params, points),
        NetworkKind::Separable => {
            let shape = separable_shape(spec)?;
            params.check(spec)?;
            points.expect_rank("evaluate_points", 2)?;
            if points.cols() != shape.axes {
                return Err(NetworkError::Dimension {
                    expected: shape.axes,
                    actual: points.cols(),
                });
            }
            let n = points.rows();
            let features = (0..shape.axes)
                .map(|a| {
                    let col: Vec<f64> = (0..n).map(|i| points.get2(i, a)).collect();
                    subnet_features(spec, params, a, &col)
                })
                .collect::<Result<Vec<_>, _>>()?;
            combine_pointwise(shape, &features)
        }
    }
}

/// Row-aligned combination: row `i` of every feature matrix belongs to the
/// same point. Returns `[n, outputs]`.
pub fn combine_pointwise(
    shape: super::SeparableShape,
    features: &[Tensor],
) -> Result<Tensor, NetworkError> {
    if features.len() != shape.axes {
        return Err(NetworkError::AxisCount {
            expected: shape.axes,
            actual: features.len(),
        });
    }
    let n = features[0].rows();
    if features.iter().any(|f| f.rows() != n) {
        return Err(NetworkError::ParamShape("feature matrices differ in row count".into()));
    }
    let r = shape.rank;
    let mut out = vec![0.0; n * shape.outputs];
    for i in 0..n {
        for o in 0..shape.outputs {
            out[i * shape.outputs + o] = (0..r)
                .map(|k| features.iter().map(|f| f.get2(i, o * r + k)).product::<f64>())
                .sum();
        }
    }
    Ok(Tensor::new(vec![n, shape.outputs], out)?)
}

fn chain_jet(
    layers: &[LayerParams],
    activation: Activation,
    input: Vec<Jet2>,
) -> Result<Vec<Jet2>, NetworkError> {
    let mut x = input;
    for (li, layer) in layers.iter().enumerate() {
        let (fout, fin) = (layer.fan_out(), layer.fan_in());
        let w = layer.weight.data();
        let mut next = Vec::with_capacity(fout);
        for i in 0..fout {
            let mut acc = Jet2::constant(layer.bias.data()[i]);
            for j in 0..fin {
                acc = acc + x[j].scale(w[i * fin + j]);
            }
            next.push(if li + 1 == layers.len() {
                acc
            } else {
                activation.jet(acc)?
            });
        }
        x = next;
    }
    Ok(x)
}

/// Network output and its first and second partial derivatives with respect
/// to input coordinate `coord` at a single raw point.
pub fn jet2_forward(
    spec: &NetworkSpec,
    params: &NetworkParams,
    point: &[f64],
    coord: usize,
) -> Result<Vec<Jet2>, NetworkError> {
    params.check(spec)?;
    if point.len() != spec.input_dim() {
        return Err(NetworkError::Dimension {
            expected: spec.input_dim(),
            actual: point.len(),
        });
    }
    if coord >= point.len() {
        return Err(NetworkError::Coordinate {
            coord,
            dim: point.len(),
        });
    }
    let map = spec.input_map();
    let seed = |c: usize| {
        let v = map.apply(c, point[c]);
        if c == coord {
            Jet2::new(v, map.scale[c], 0.0)
        } else {
            Jet2::constant(v)
        }
    };
    match spec.kind {
        NetworkKind::Mlp => {
            let input = (0..point.len()).map(seed).collect();
            chain_jet(&params.layers, spec.activation, input)
        }
        NetworkKind::Separable => {
            let shape = separable_shape(spec)?;
            let feats = (0..shape.axes)
                .map(|a| chain_jet(params.subnet(spec, a), spec.activation, vec![seed(a)]))
                .collect::<Result<Vec<_>, _>>()?;
            let r = shape.rank;
            Ok((0..shape.outputs)
                .map(|o| {
                    (0..r).fold(Jet2::constant(0.0), |acc, k| {
                        acc + feats
                            .iter()
                            .fold(Jet2::constant(1.0), |p, f| p * f[o * r + k])
                    })
                })
                .collect())
        }
    }
}
