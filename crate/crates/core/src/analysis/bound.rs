use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::calibration::decompose_error;
use crate::network::{NetworkKind, NetworkParams, NetworkSpec, PointBatch};
use crate::snn::SpikingNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBound {
    /// `‖e^(n)‖²`.
    pub lhs: f64,
    /// `Σ_l 2^(n-l+1) ‖e_c^(l)‖²`.
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub layers: usize,
    pub samples: Vec<SampleBound>,
    /// Batch means of both sides.
    pub lhs_mean: f64,
    pub rhs_mean: f64,
    pub satisfied_fraction: f64,
    pub satisfied: bool,
}

/// Identity-Hessian form of the layer-wise bound on the output error, per
/// sample and on average.
pub fn bound_check(
    spec: &NetworkSpec,
    params: &NetworkParams,
    snn: &SpikingNetwork,
    batch: &PointBatch,
) -> Result<BoundReport, AnalysisError> {
    if spec.kind != NetworkKind::Mlp {
        return Err(AnalysisError::Unsupported("the bound check applies to MLPs".into()));
    }
    let d = decompose_error(spec, params, snn, batch)?;
    let layers = &d.chains[0];
    let n = layers.len();
    let rows = layers[0].e.rows();
    let row_sq = |t: &crate::tensor::Tensor, i: usize| t.row(i).iter().map(|v| v * v).sum::<f64>();
    let samples: Vec<SampleBound> = (0..rows)
        .map(|i| SampleBound {
            lhs: row_sq(&layers[n - 1].e, i),
            rhs: layers
                .iter()
                .enumerate()
                .map(|(l, le)| 2f64.powi((n - l) as i32) * row_sq(&le.e_c, i))
                .sum(),
        })
        .collect();
    let ok = samples.iter().filter(|s| s.lhs <= s.rhs).count();
    let m = rows as f64;
    Ok(BoundReport {
        layers: n,
        lhs_mean: samples.iter().map(|s| s.lhs).sum::<f64>() / m,
        rhs_mean: samples.iter().map(|s| s.rhs).sum::<f64>() / m,
        satisfied_fraction: ok as f64 / m,
        satisfied: ok == rows,
        samples,
    })
}
