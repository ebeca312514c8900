//! Evaluation batches shared by both architectures. A batch is either a
//! list of scattered points or a tensor grid given by per-axis point lists;
//! each network chain receives its own normalized input.

use super::{
    chain_trace, combine_features, combine_pointwise, normalize_inputs, ForwardTrace, NetworkError, NetworkKind,
    NetworkParams, NetworkSpec,
};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum PointBatch {
    /// Raw points `[n, d]`.
    Scattered(Tensor),
    /// Per-axis coordinates; the batch is their row-major Cartesian product.
    Grid(Vec<Vec<f64>>),
}

impl PointBatch {
    /// Number of points in the batch.
    pub fn len(&self) -> usize {
        match self {
            Self::Scattered(t) => t.rows(),
            Self::Grid(axes) => axes.iter().map(Vec::len).product(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Raw points `[n, d]` in batch order.
    pub fn points(&self) -> Tensor {
        match self {
            Self::Scattered(t) => t.clone(),
            Self::Grid(axes) => grid_points(axes),
        }
    }
}

/// Row-major Cartesian product of axis lists as an `[N, d]` tensor.
pub fn grid_points(axes: &[Vec<f64>]) -> Tensor {
    let d = axes.len();
    let total: usize = axes.iter().map(Vec::len).product();
    let mut data = Vec::with_capacity(total * d);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        for (a, &i) in idx.iter().enumerate() {
            data.push(axes[a][i]);
        }
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < axes[a].len() {
                break;
            }
            idx[a] = 0;
        }
    }
    Tensor::from_raw(vec![total, d], data)
}

/// Normalized input of every chain (one for an MLP, one per axis for a
/// separable network).
pub fn chain_inputs(spec: &NetworkSpec, batch: &PointBatch) -> Result<Vec<Tensor>, NetworkError> {
    spec.validate()?;
    let d = spec.input_dim();
    match (spec.kind, batch) {
        (NetworkKind::Mlp, b) => Ok(vec![normalize_inputs(spec, &b.points())?]),
        (NetworkKind::Separable, PointBatch::Scattered(t)) => {
            t.expect_rank("chain_inputs", 2)?;
            if t.cols() != d {
                return Err(NetworkError::Dimension {
                    expected: d,
                    actual: t.cols(),
                });
            }
            let norm = normalize_inputs(spec, t)?;
            (0..d)
                .map(|a| Ok(Tensor::column((0..t.rows()).map(|i| norm.get2(i, a)).collect())?))
                .collect()
        }
        (NetworkKind::Separable, PointBatch::Grid(axes)) => {
            if axes.len() != d {
                return Err(NetworkError::AxisCount {
                    expected: d,
                    actual: axes.len(),
                });
            }
            let map = spec.input_map();
            axes.iter()
                .enumerate()
                .map(|(a, pts)| Ok(Tensor::column(pts.iter().map(|&p| map.apply(a, p)).collect())?))
                .collect()
        }
    }
}

/// Network output `[n, outputs]` from the final layer of every chain.
pub fn assemble_output(spec: &NetworkSpec, batch: &PointBatch, chain_outputs: &[Tensor]) -> Result<Tensor, NetworkError> {
    match spec.kind {
        NetworkKind::Mlp => Ok(chain_outputs[0].clone()),
        NetworkKind::Separable => {
            let shape = spec.separable.ok_or_else(|| NetworkError::InvalidSpec("missing separable shape".into()))?;
            match batch {
                PointBatch::Scattered(_) => combine_pointwise(shape, chain_outputs),
                PointBatch::Grid(_) => {
                    let g = combine_features(shape, chain_outputs)?;
                    let n = g.len() / shape.outputs;
                    Ok(g.reshape(vec![n, shape.outputs])?)
                }
            }
        }
    }
}

/// Forward traces of every chain of the ANN on `batch`.
pub fn ann_chain_traces(
    spec: &NetworkSpec,
    params: &NetworkParams,
    batch: &PointBatch,
) -> Result<Vec<ForwardTrace>, NetworkError> {
    params.check(spec)?;
    chain_inputs(spec, batch)?
        .iter()
        .enumerate()
        .map(|(c, x)| chain_trace(params.subnet(spec, c), spec.activation, x))
        .collect()
}

/// ANN output `[n, outputs]` on `batch`.
pub fn ann_output(spec: &NetworkSpec, params: &NetworkParams, batch: &PointBatch) -> Result<Tensor, NetworkError> {
    let traces = ann_chain_traces(spec, params, batch)?;
    let outs: Vec<Tensor> = traces.iter().map(|t| t.output().clone()).collect();
    assemble_output(spec, batch, &outs)
}
