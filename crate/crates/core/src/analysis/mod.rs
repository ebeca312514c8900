//! Conversion metrics, the surrogate error bound, Hessian recursion, timestep
//! sweeps and spectral smoothing of output fields.

mod bound;
mod hessian;
mod metrics;
mod smooth;
mod sweep;

pub use bound::{bound_check, BoundReport, SampleBound};
pub use hessian::{fd_hessian, hessian_check, hessian_recursion, tail_loss, HessianLayerCheck, HessianStack};
pub use metrics::{conversion_metrics, ConversionMetrics};
pub use smooth::{fft_smooth, is_uniform};
pub use sweep::{fit_loglog_slope, sweep_timesteps, SweepConfig, SweepResult, SweepRow};

use crate::calibration::CalibrationError;
use crate::network::{Activation, NetworkError};
use crate::snn::SnnError;
use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("activation `{0}` has no second derivative at a sample pre-activation")]
    NoSecondDerivative(Activation),
    #[error("grid axis {axis} is not uniformly spaced")]
    NonUniformGrid { axis: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Snn(#[from] SnnError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
