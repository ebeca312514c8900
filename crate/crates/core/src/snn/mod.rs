//! Spiking networks converted from trained ANNs: the clip-floor staircase,
//! dual-threshold integrate-and-fire simulation and rate-mode inference.

mod event;
mod io;
mod model;
mod quantizer;
mod rate;
mod spikes;

pub use event::{simulate_event, ChainTrace, SimulationTrace};
pub use io::{load_snn, save_snn, snn_from_str, snn_to_string, SnnFile, SnnMeta, SNN_FORMAT_VERSION};
pub use model::{
    convert, fit_thresholds, with_thresholds, ConversionConfig, Readout, SpikingLayer, SpikingNetwork, THRESHOLD_FLOOR,
};
pub use quantizer::{clip_floor, clip_floor_tensor, Thresholds, LEVEL_GUARD};
pub use rate::{propagate_chain, propagate_rate, snn_evaluate_points, RateOutput};
pub(crate) use quantizer::quantize;
pub use spikes::{expected_raster_rate, raster_rate, rate_raster_rate, spiking_rate, SpikeRate};

use crate::network::{ModelIoError, NetworkError};
use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum SnnError {
    #[error("invalid thresholds: need theta_neg < 0 < theta_pos, got ({pos}, {neg})")]
    InvalidThreshold { pos: f64, neg: f64 },
    #[error("timesteps must be at least 1, got {0}")]
    Timesteps(usize),
    #[error("non-finite input {0}")]
    NonFiniteInput(f64),
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite membrane in layer {layer}, neuron {neuron} at step {step}")]
    NonFiniteMembrane { layer: usize, step: usize, neuron: usize },
    #[error("{0}")]
    Structure(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] ModelIoError),
}
