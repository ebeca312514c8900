//! Network architectures (plain MLP and separable per-axis subnetworks),
//! initialization, evaluation and model files.

mod batch;
mod forward;
mod io;
mod params;
mod spec;
mod taped;

pub use batch::{ann_chain_traces, ann_output, assemble_output, chain_inputs, grid_points, PointBatch};
pub use forward::{
    affine, chain_trace, combine_features, combine_pointwise, evaluate_points, jet2_forward, mlp_forward, mlp_trace,
    normalize_inputs, spinn_forward, subnet_features, ForwardTrace,
};
pub use io::{
    load_model, model_from_str, model_to_string, save_model, ModelFile, ModelIoError, ModelMeta,
    MODEL_FORMAT_VERSION,
};
#[allow(unused_imports)]
pub(crate) use io::{layers_from_docs, parse_versioned, read_text, write_text, LayerDoc};
pub use params::{init_params, LayerParams, NetworkParams};
pub use spec::{Activation, InputMap, NetworkKind, NetworkSpec, SeparableShape};
pub use taped::{mlp_output_jets, spinn_output_jets, Direction, OutputJets, TapedParams};

use crate::autodiff::TapeError;
use crate::tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("parameter shape: {0}")]
    ParamShape(String),
    #[error("input dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("expected {expected} axis point sets, got {actual}")]
    AxisCount { expected: usize, actual: usize },
    #[error("coordinate {coord} out of range for {dim} inputs")]
    Coordinate { coord: usize, dim: usize },
    #[error("activation `{0}` has no second derivative; unsupported here")]
    UnsupportedActivation(Activation),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Tape(#[from] TapeError),
}

#[cfg(test)]
mod tests;
