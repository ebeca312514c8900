//! Physics-informed training: benchmark problems, collocation, residual
//! losses, full-batch Adam and reference solutions.

mod collocation;
mod config;
mod loss;
mod problem;
mod reference;
mod train;

pub use crate::network::grid_points;
pub use collocation::{cell_centres, linspace, sample_collocation, CollocationCounts, CollocationSet};
pub use config::ProblemConfig;
pub use loss::{loss_and_grad, physics_loss, pointwise_residuals, LossBreakdown, PointDerivatives};
pub use problem::{beltrami, wave_profile, LossWeights, PdeProblem, ProblemId, DEFAULT_BURGERS_NU};
pub use reference::{reference_solution, wave_dalembert, GridField, ReferenceSolution, SolverSettings};
pub use train::{train, train_from, EpochRecord, LrDecay, TrainConfig, TrainLog};

use crate::autodiff::TapeError;
use crate::network::NetworkError;
use crate::optim::OptimError;
use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum PinnError {
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("invalid domain: {0}")]
    Domain(String),
    #[error("invalid problem config: {0}")]
    Config(String),
    #[error("{0}")]
    Mismatch(String),
    #[error("point {0:?} lies outside the domain")]
    OutsideDomain(Vec<f64>),
    #[error("non-finite {term} residual at {point:?}")]
    NonFiniteResidual { term: &'static str, point: Vec<f64> },
    #[error("training diverged at epoch {epoch} (loss {loss:e})")]
    Diverged { epoch: usize, loss: f64, log: Box<TrainLog> },
    #[error("reference solver failed after {iterations} iterations (residual {residual:e})")]
    Reference { iterations: usize, residual: f64 },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Tape(#[from] TapeError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}
