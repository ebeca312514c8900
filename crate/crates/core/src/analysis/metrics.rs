use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::tensor::Tensor;

/// Root-mean-square error and its ratio to the reference's RMS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConversionMetrics {
    pub l2: f64,
    /// `None` when the reference is identically zero.
    pub rel_l2: Option<f64>,
}

pub fn conversion_metrics(output: &Tensor, reference: &Tensor) -> Result<ConversionMetrics, AnalysisError> {
    if output.shape() != reference.shape() {
        return Err(AnalysisError::Shape(format!("{:?} vs {:?}", output.shape(), reference.shape())));
    }
    if output.is_empty() {
        return Err(AnalysisError::Shape("empty fields".into()));
    }
    let n = output.len() as f64;
    let diff: f64 = output.data().iter().zip(reference.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    let l2 = (diff / n).sqrt();
    let rn = (reference.sum_sq() / n).sqrt();
    Ok(ConversionMetrics {
        l2,
        rel_l2: (rn > 0.0).then(|| l2 / rn),
    })
}
